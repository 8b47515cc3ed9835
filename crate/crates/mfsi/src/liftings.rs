//! Stationary lifting operators: the Stokes lift of interface data, the
//! Neumann solution operators (strong, interface, and weak variants — the
//! last one realizes the Helmholtz projection ℙ), the Lamé lift of interface
//! displacements, the added-mass operator M_s = Id + γ_m N₁, and the
//! interface stress trace K.
//!
//! Every stationary solve is one sparse direct factorization, built once and
//! cached in [`LiftingSolvers`]; the three Neumann variants share a single
//! factorization and differ only in their right-hand sides. Matrices are
//! assembled by probing the same apply closures the tests use for residual
//! checks, so the factored matrix and the operator agree by construction.

use crate::grid::{
    div, grad, lame_apply, midpoints_to_plate, plate_mean, plate_project, plate_to_midpoints,
    plate_to_solid_interface, visc_velocity, CellField, Grid, PlateField, SolidField,
    VelocityField,
};
use crate::linalg::{DenseLu, SparseLuReal, Triplets};
use crate::{Error, Result};

/// Build a sparse matrix column-by-column from an apply closure.
fn probe_sparse(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Triplets<f64> {
    let mut tri = Triplets::new(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e);
        e[j] = 0.0;
        for (i, &v) in col.iter().enumerate() {
            if v != 0.0 {
                tri.push(i, j, v);
            }
        }
    }
    tri
}

/// Neumann flux data on the four walls of the fluid box, oriented as
/// ∂φ/∂ν with the outward normal (top = interface).
#[derive(Clone, Debug)]
pub struct FluxData {
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl FluxData {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            top: vec![0.0; g.n_h],
            bottom: vec![0.0; g.n_h],
            left: vec![0.0; g.n_zf],
            right: vec![0.0; g.n_zf],
        }
    }

    /// discrete boundary integral ∫_{∂Ω} c
    pub fn integral(&self, g: &Grid) -> f64 {
        let horiz: f64 = self.top.iter().chain(&self.bottom).sum::<f64>() * g.hx;
        let vert: f64 = self.left.iter().chain(&self.right).sum::<f64>() * g.hzf;
        horiz + vert
    }

    pub fn abs_integral(&self, g: &Grid) -> f64 {
        let horiz: f64 = self
            .top
            .iter()
            .chain(&self.bottom)
            .map(|v| v.abs())
            .sum::<f64>()
            * g.hx;
        let vert: f64 = self
            .left
            .iter()
            .chain(&self.right)
            .map(|v| v.abs())
            .sum::<f64>()
            * g.hzf;
        horiz + vert
    }
}

/// Cached factorizations for every stationary lifting solve on one grid.
pub struct LiftingSolvers {
    pub g: Grid,
    pub mu_s: f64,
    pub lambda_s: f64,
    delta: f64,
    stokes: SparseLuReal,
    neumann: SparseLuReal,
    lame: SparseLuReal,
    /// dense added-mass matrix (acts as the identity on constants)
    pub m_s: Vec<f64>,
    m_s_lu: DenseLu,
    pub m_s_cond: f64,
}

// unknown layout for the Stokes saddle system
fn stokes_unpack(g: &Grid, v: &[f64]) -> (VelocityField<f64>, CellField<f64>, f64) {
    let mut w = VelocityField::zeros(g);
    let n_ux = g.n_ux_int();
    let n_uz = g.n_uz_int();
    for i in 1..g.n_h {
        for j in 0..g.n_zf {
            *w.ux_mut(i, j) = v[(i - 1) * g.n_zf + j];
        }
    }
    for i in 0..g.n_h {
        for j in 1..g.n_zf {
            *w.uz_mut(i, j) = v[n_ux + i * (g.n_zf - 1) + (j - 1)];
        }
    }
    let p = CellField {
        nz: g.n_zf,
        v: v[n_ux + n_uz..n_ux + n_uz + g.n_cells()].to_vec(),
    };
    let tau = v[n_ux + n_uz + g.n_cells()];
    (w, p, tau)
}

fn stokes_apply(g: &Grid, v: &[f64]) -> Vec<f64> {
    let (w, p, tau) = stokes_unpack(g, v);
    let lv = visc_velocity(g, &w);
    let gp = grad(g, &p);
    let dv = div(g, &w);
    let mut out = Vec::with_capacity(v.len());
    for i in 1..g.n_h {
        for j in 0..g.n_zf {
            out.push(-lv.ux(i, j) + gp.ux(i, j));
        }
    }
    for i in 0..g.n_h {
        for j in 1..g.n_zf {
            out.push(-lv.uz(i, j) + gp.uz(i, j));
        }
    }
    for c in &dv.v {
        out.push(c + tau);
    }
    out.push(p.v.iter().sum::<f64>() * g.hx * g.hzf);
    out
}

// flux-form Neumann Laplacian with zero natural boundary data, bordered by
// the mean-zero gauge; rhs variants inject boundary fluxes
fn neumann_apply(g: &Grid, v: &[f64]) -> Vec<f64> {
    let p = CellField {
        nz: g.n_zf,
        v: v[..g.n_cells()].to_vec(),
    };
    let tau = v[g.n_cells()];
    // divergence of the interior gradient of p (boundary fluxes are natural)
    let gp = grad(g, &p);
    let dv = div(g, &gp);
    let mut out = Vec::with_capacity(v.len());
    for c in &dv.v {
        out.push(c - tau);
    }
    out.push(p.v.iter().sum::<f64>() * g.hx * g.hzf);
    out
}

fn lame_unpack(g: &Grid, v: &[f64]) -> SolidField<f64> {
    let mut d = SolidField::zeros(g);
    let ns = g.n_solid_int_scalar();
    for i in 1..g.n_h {
        for j in 1..g.n_zs {
            let id = (i - 1) * (g.n_zs - 1) + (j - 1);
            *d.dx_mut(i, j) = v[id];
            *d.dz_mut(i, j) = v[ns + id];
        }
    }
    d
}

fn lame_apply_int(g: &Grid, v: &[f64], mu: f64, lambda: f64) -> Vec<f64> {
    let d = lame_unpack(g, v);
    let ld = lame_apply(g, &d, mu, lambda);
    let mut out = Vec::with_capacity(v.len());
    for i in 1..g.n_h {
        for j in 1..g.n_zs {
            out.push(ld.dx(i, j));
        }
    }
    for i in 1..g.n_h {
        for j in 1..g.n_zs {
            out.push(ld.dz(i, j));
        }
    }
    out
}

impl LiftingSolvers {
    pub fn new(g: &Grid, mu_s: f64, lambda_s: f64) -> Result<Self> {
        let n_stokes = g.n_ux_int() + g.n_uz_int() + g.n_cells() + 1;
        let stokes = SparseLuReal::factor(probe_sparse(n_stokes, |v| stokes_apply(g, v)))
            .map_err(|e| Error::Linalg(format!("stokes factorization: {e}")))?;
        let neumann = SparseLuReal::factor(probe_sparse(g.n_cells() + 1, |v| {
            neumann_apply(g, v)
        }))
        .map_err(|e| Error::Linalg(format!("neumann factorization: {e}")))?;
        let lame = SparseLuReal::factor(probe_sparse(g.n_solid_int(), |v| {
            lame_apply_int(g, v, mu_s, lambda_s)
        }))
        .map_err(|e| Error::Linalg(format!("lame factorization: {e}")))?;

        let mut partial = Self {
            g: g.clone(),
            mu_s,
            lambda_s,
            delta: 1.0,
            stokes,
            neumann,
            lame,
            m_s: Vec::new(),
            m_s_lu: DenseLu::factor_slice(&[1.0], 1),
            m_s_cond: 0.0,
        };

        // dense added-mass matrix, column by column over interface DOFs;
        // the mean-zero projection is built into each column so the matrix
        // acts as the identity on constants and as M_s on mean-zero data.
        // γ_m is the flux-corrected trace: the top-cell potential plus half
        // a cell of its known interface flux, which restores second-order
        // accuracy at the wall and makes M_s − Id a symmetric Gram matrix
        // of the Neumann gradients (so M_s is positive definite).
        let n = g.n_h - 1;
        let mut m = vec![0.0; n * n];
        for jcol in 0..n {
            let mut e = PlateField { v: vec![0.0; n] };
            e.v[jcol] = 1.0;
            let pm_e = plate_project(g, &e);
            let phi = partial.neumann_interface(&pm_e)?;
            let bm = plate_to_midpoints(g, &pm_e);
            let t: Vec<f64> = (0..g.n_h)
                .map(|k| phi.at(k, g.n_zf - 1) + 0.5 * g.hzf * bm[k])
                .collect();
            let gtrace = plate_project(g, &midpoints_to_plate(g, &t));
            for i in 0..n {
                m[i * n + jcol] = gtrace.v[i] + if i == jcol { 1.0 } else { 0.0 };
            }
        }
        let lu = DenseLu::factor_slice(&m, n);
        // crude 1-norm condition estimate from the explicit inverse columns
        let norm1 = |a: &dyn Fn(usize, usize) -> f64| -> f64 {
            (0..n)
                .map(|j| (0..n).map(|i| a(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = lu.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        let cond = norm1(&|i, j| m[i * n + j]) * norm1(&|i, j| inv[i * n + j]);
        if cond > 1e8 {
            eprintln!("warning: added-mass operator condition estimate {cond:.3e} exceeds 1e8");
        }
        partial.m_s = m;
        partial.m_s_lu = lu;
        partial.m_s_cond = cond;
        Ok(partial)
    }

    /// viscoelasticity weight used by consumers combining d₁ + δd₂
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Stokes lift of mean-zero interface data b: w = D_fl b, ψ = D_pr b with
    /// w = b·e₃ on the interface, w = 0 on the rigid walls, div w = 0, ∫ψ = 0.
    pub fn stokes_lift(&self, b: &PlateField<f64>) -> Result<(VelocityField<f64>, CellField<f64>)> {
        let g = &self.g;
        let mean = plate_mean(g, b);
        if mean.abs() > 1e-9 * (1.0 + b.max_abs()) {
            return Err(Error::Linalg(format!(
                "stokes lift requires mean-zero interface data (mean = {mean:.3e})"
            )));
        }
        // affine split: boundary data contributes through the stress rows
        // and the divergence of the top cells; the node data is averaged
        // onto the top-face midpoints (the node sum carries over exactly,
        // so the compatibility seen by the solver is unchanged)
        let bm = plate_to_midpoints(g, b);
        let mut wd = VelocityField::zeros(g);
        for i in 0..g.n_h {
            *wd.uz_mut(i, g.n_zf) = bm[i];
        }
        let lapd = visc_velocity(g, &wd);
        let dvd = div(g, &wd);
        let mut rhs = Vec::with_capacity(g.n_ux_int() + g.n_uz_int() + g.n_cells() + 1);
        for i in 1..g.n_h {
            for j in 0..g.n_zf {
                rhs.push(lapd.ux(i, j));
            }
        }
        for i in 0..g.n_h {
            for j in 1..g.n_zf {
                rhs.push(lapd.uz(i, j));
            }
        }
        for c in &dvd.v {
            rhs.push(-c);
        }
        rhs.push(0.0);
        let sol = self.stokes.solve(&rhs);
        let (mut w, p, _tau) = stokes_unpack(g, &sol);
        for i in 0..g.n_h {
            *w.uz_mut(i, g.n_zf) = bm[i];
        }
        Ok((w, p))
    }

    /// Neumann solution operator: Δφ = 0, ∂_νφ = c, ∫φ = 0. Data must be
    /// flux-compatible; a clear violation is rejected with the measured
    /// integral (small defects from one-sided stencils are absorbed by the
    /// bordered gauge).
    pub fn neumann(&self, c: &FluxData) -> Result<CellField<f64>> {
        let g = &self.g;
        let total = c.integral(g);
        let scale = c.abs_integral(g);
        if total.abs() > 1e-3 * scale.max(1e-300) && scale > 0.0 {
            return Err(Error::Linalg(format!(
                "neumann flux data violates compatibility: boundary integral = {total:.6e}"
            )));
        }
        Ok(self.neumann_rhs(c, None))
    }

    /// N₁: interface flux c₁ (mean-zero on ω), zero flux elsewhere.
    pub fn neumann_interface(&self, c1: &PlateField<f64>) -> Result<CellField<f64>> {
        let g = &self.g;
        let mean = plate_mean(g, c1);
        if mean.abs() > 1e-9 * (1.0 + c1.max_abs()) {
            return Err(Error::Linalg(format!(
                "interface Neumann data must be mean-zero (mean = {mean:.3e})"
            )));
        }
        let mut c = FluxData::zeros(g);
        c.top = plate_to_midpoints(g, c1);
        Ok(self.neumann_rhs(&c, None))
    }

    /// Neumann solve against cell-centered volume data with zero wall
    /// fluxes; the gauge row absorbs the (discretely zero-mean) data defect.
    pub fn neumann_volume(&self, f: &CellField<f64>) -> CellField<f64> {
        self.neumann_rhs(&FluxData::zeros(&self.g), Some(f))
    }

    fn neumann_rhs(&self, c: &FluxData, vol: Option<&CellField<f64>>) -> CellField<f64> {
        let g = &self.g;
        // boundary fluxes enter the divergence rows of their adjacent cells
        let mut rhs = vec![0.0; g.n_cells() + 1];
        for i in 0..g.n_h {
            rhs[g.cell_id(i, g.n_zf - 1)] -= c.top[i] / g.hzf;
            rhs[g.cell_id(i, 0)] -= c.bottom[i] / g.hzf;
        }
        for j in 0..g.n_zf {
            rhs[g.cell_id(0, j)] -= c.left[j] / g.hx;
            rhs[g.cell_id(g.n_h - 1, j)] -= c.right[j] / g.hx;
        }
        if let Some(f) = vol {
            for (r, v) in rhs.iter_mut().zip(&f.v) {
                *r += v;
            }
        }
        let sol = self.neumann.solve(&rhs);
        CellField {
            nz: g.n_zf,
            v: sol[..g.n_cells()].to_vec(),
        }
    }

    /// Weak Neumann operator N₂: Δφ = div f with ∂_νφ = f·ν, realized in
    /// flux form so that compatibility holds exactly and ℙf = f − ∇φ is
    /// exactly divergence-free with zero normal trace.
    pub fn weak_neumann(&self, f: &VelocityField<f64>) -> CellField<f64> {
        let g = &self.g;
        let dv = div(g, f);
        let mut c = FluxData::zeros(g);
        for i in 0..g.n_h {
            c.top[i] = f.uz(i, g.n_zf);
            c.bottom[i] = -f.uz(i, 0);
        }
        for j in 0..g.n_zf {
            c.left[j] = -f.ux(0, j);
            c.right[j] = f.ux(g.n_h, j);
        }
        // rhs_cell = div f − boundary flux term (the helper adds both parts)
        self.neumann_rhs(&c, Some(&dv))
    }

    /// Helmholtz projection ℙf = f − ∇(N₂ f): divergence-free, zero normal
    /// boundary faces. Also returns the potential.
    pub fn helmholtz(&self, f: &VelocityField<f64>) -> (VelocityField<f64>, CellField<f64>) {
        let g = &self.g;
        let phi = self.weak_neumann(f);
        let gphi = grad(g, &phi);
        let mut p = VelocityField::zeros(g);
        for i in 1..g.n_h {
            for j in 0..g.n_zf {
                *p.ux_mut(i, j) = f.ux(i, j) - gphi.ux(i, j);
            }
        }
        for i in 0..g.n_h {
            for j in 1..g.n_zf {
                *p.uz_mut(i, j) = f.uz(i, j) - gphi.uz(i, j);
            }
        }
        // normal boundary faces of the projection vanish by construction
        (p, phi)
    }

    /// Lamé lift D_s of scalar interface data (lifted as b·e₃): 𝓛d = 0 for
    /// the full elasticity operator, d = b·e₃ on Γ_s, d = 0 on the rest of
    /// the rim. Harmonicity for 𝓛 itself is what removes the lift from the
    /// interior rows of the thick-layer block.
    pub fn lame_lift(&self, b: &PlateField<f64>) -> SolidField<f64> {
        let g = &self.g;
        let bn = plate_to_solid_interface(g, b);
        let mut dd = SolidField::zeros(g);
        for i in 0..=g.n_h {
            *dd.dz_mut(i, 0) = bn[i];
        }
        let ld = lame_apply(g, &dd, self.mu_s, self.lambda_s);
        let ns = g.n_solid_int_scalar();
        let mut rhs = vec![0.0; g.n_solid_int()];
        for i in 1..g.n_h {
            for j in 1..g.n_zs {
                let id = (i - 1) * (g.n_zs - 1) + (j - 1);
                rhs[id] = -ld.dx(i, j);
                rhs[ns + id] = -ld.dz(i, j);
            }
        }
        let sol = self.lame.solve(&rhs);
        let mut d = lame_unpack(g, &sol);
        for i in 0..=g.n_h {
            *d.dz_mut(i, 0) = bn[i];
        }
        d
    }

    /// Interface stress trace K(f) = P_m((2μ_s + λ_s)∂₃f₃ + λ_s ∂₁f₁)|_{z=0},
    /// one-sided 3-point normal derivative and centered horizontal
    /// derivative, evaluated directly at the shared interface nodes.
    pub fn stress_trace_k(&self, d: &SolidField<f64>) -> PlateField<f64> {
        let g = &self.g;
        let hz = g.hzs;
        let dz_at = |i: usize| (-3.0 * d.dz(i, 0) + 4.0 * d.dz(i, 1) - d.dz(i, 2)) / (2.0 * hz);
        let mut v = vec![0.0; g.n_h - 1];
        for (k, slot) in v.iter_mut().enumerate() {
            let i = k + 1;
            let dzf3 = dz_at(i);
            let dxf1 = (d.dx(i + 1, 0) - d.dx(i - 1, 0)) / (2.0 * g.hx);
            *slot = (2.0 * self.mu_s + self.lambda_s) * dzf3 + self.lambda_s * dxf1;
        }
        plate_project(g, &PlateField { v })
    }

    /// M_s f = f + γ_m(N₁ f) through the assembled dense matrix.
    pub fn added_mass_apply(&self, f: &PlateField<f64>) -> PlateField<f64> {
        let n = self.g.n_h - 1;
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..n {
                s += self.m_s[i * n + j] * f.v[j];
            }
            *slot = s;
        }
        PlateField { v: out }
    }

    /// M_s⁻¹ f via the cached dense factorization.
    pub fn added_mass_solve(&self, f: &PlateField<f64>) -> PlateField<f64> {
        PlateField {
            v: self.m_s_lu.solve(&f.v),
        }
    }
}

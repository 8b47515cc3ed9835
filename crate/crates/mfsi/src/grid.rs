//! MAC staggered grid, field containers, and the second-order discrete
//! operators every other module builds on.
//!
//! Layout (dim = 2). The fluid box (0,L)×(−H_f,0) carries pressure at cell
//! centers, horizontal velocity on vertical faces, and vertical velocity on
//! horizontal faces; boundary faces store Dirichlet data so operators read
//! one uniform array. Plate fields live on the interface nodes of ω (the
//! clamped end nodes are eliminated), sharing stations with the solid rim
//! nodes so the plate–solid coupling needs no interpolation; the fluid sees
//! the plate through two-point averages onto the top-face midpoints. The
//! solid box (0,L)×(0,H_s) is node-centered with Dirichlet values on its rim.
//!
//! Tangential velocity walls are handled by reflection ghosts inside the
//! Laplacian (wall value zero, second order after the solve). The clamped
//! plate closure eliminates the ghost node by the second-order normal
//! derivative rule η(−h) = η(h), which keeps the bilaplacian symmetric
//! positive definite — the discrete plate energy is a genuine Lyapunov
//! function, at the price of a low-order truncation in the first row that
//! the solve damps back to second order globally.

use crate::linalg::Scalar;
use crate::{Config, Error, Result};

#[derive(Clone, Debug)]
pub struct Grid {
    pub l: f64,
    pub h_f: f64,
    pub h_s: f64,
    pub alpha: f64,
    pub n_h: usize,
    pub n_zf: usize,
    pub n_zs: usize,
    pub hx: f64,
    pub hzf: f64,
    pub hzs: f64,
}

pub fn build_grid(cfg: &Config) -> Result<Grid> {
    let g = &cfg.geometry;
    let mut errs: Vec<String> = Vec::new();
    if g.dim != 2 {
        errs.push("dim must be 2".into());
    }
    for (name, v) in [("L", g.l), ("H_f", g.h_f), ("H_s", g.h_s), ("alpha", g.alpha)] {
        if !(v > 0.0) {
            errs.push(format!("{name} must be positive"));
        }
    }
    if g.alpha >= g.h_f.min(g.h_s) {
        errs.push("cutoff exceeds domain: alpha < min(H_f, H_s) required".into());
    }
    for (name, n) in [("n_h", g.n_h), ("n_zf", g.n_zf), ("n_zs", g.n_zs)] {
        if n < 6 {
            errs.push(format!("{name} = {n} below stencil minimum (6)"));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Grid(errs.join("; ")));
    }
    Ok(Grid {
        l: g.l,
        h_f: g.h_f,
        h_s: g.h_s,
        alpha: g.alpha,
        n_h: g.n_h,
        n_zf: g.n_zf,
        n_zs: g.n_zs,
        hx: g.l / g.n_h as f64,
        hzf: g.h_f / g.n_zf as f64,
        hzs: g.h_s / g.n_zs as f64,
    })
}

impl Grid {
    // ---- positions ----
    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    pub fn z_face_f(&self, j: usize) -> f64 {
        -self.h_f + j as f64 * self.hzf
    }
    pub fn z_center_f(&self, j: usize) -> f64 {
        -self.h_f + (j as f64 + 0.5) * self.hzf
    }
    pub fn z_node_s(&self, j: usize) -> f64 {
        j as f64 * self.hzs
    }

    // ---- degree-of-freedom counts (interior = unknowns) ----
    pub fn n_cells(&self) -> usize {
        self.n_h * self.n_zf
    }
    pub fn n_ux_int(&self) -> usize {
        (self.n_h - 1) * self.n_zf
    }
    pub fn n_uz_int(&self) -> usize {
        self.n_h * (self.n_zf - 1)
    }
    pub fn n_fluid_int(&self) -> usize {
        self.n_ux_int() + self.n_uz_int()
    }
    pub fn n_solid_int_scalar(&self) -> usize {
        (self.n_h - 1) * (self.n_zs - 1)
    }
    pub fn n_solid_int(&self) -> usize {
        2 * self.n_solid_int_scalar()
    }

    // ---- flat ids ----
    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        i * self.n_zf + j
    }
    /// Interior vertical-face id, i in 1..n_h, j in 0..n_zf.
    pub fn ux_int_id(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n_zf + j
    }
    /// Interior horizontal-face id, i in 0..n_h, j in 1..n_zf.
    pub fn uz_int_id(&self, i: usize, j: usize) -> usize {
        i * (self.n_zf - 1) + (j - 1)
    }
    /// Interior solid-node id (per component), i in 1..n_h, j in 1..n_zs.
    pub fn solid_int_id(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.n_zs - 1) + (j - 1)
    }
}

// ---------------------------------------------------------------------------
// field containers
// ---------------------------------------------------------------------------

/// Staggered velocity: `ux` on vertical faces ((n_h+1) × n_zf), `uz` on
/// horizontal faces (n_h × (n_zf+1)), boundary faces included.
#[derive(Clone, Debug)]
pub struct VelocityField<T> {
    pub nx: usize,
    pub nz: usize,
    pub ux: Vec<T>,
    pub uz: Vec<T>,
}

impl<T: Scalar> VelocityField<T> {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            nx: g.n_h,
            nz: g.n_zf,
            ux: vec![T::zero(); (g.n_h + 1) * g.n_zf],
            uz: vec![T::zero(); g.n_h * (g.n_zf + 1)],
        }
    }

    pub fn from_fn(g: &Grid, fx: impl Fn(f64, f64) -> T, fz: impl Fn(f64, f64) -> T) -> Self {
        let mut v = Self::zeros(g);
        for i in 0..=g.n_h {
            for j in 0..g.n_zf {
                *v.ux_mut(i, j) = fx(g.x_face(i), g.z_center_f(j));
            }
        }
        for i in 0..g.n_h {
            for j in 0..=g.n_zf {
                *v.uz_mut(i, j) = fz(g.x_center(i), g.z_face_f(j));
            }
        }
        v
    }

    pub fn ux(&self, i: usize, j: usize) -> T {
        self.ux[i * self.nz + j]
    }
    pub fn ux_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.ux[i * self.nz + j]
    }
    pub fn uz(&self, i: usize, j: usize) -> T {
        self.uz[i * (self.nz + 1) + j]
    }
    pub fn uz_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.uz[i * (self.nz + 1) + j]
    }

    /// Interior unknowns as one flat vector: the ux block then the uz block.
    pub fn interior(&self, g: &Grid) -> Vec<T> {
        let mut v = Vec::with_capacity(g.n_fluid_int());
        for i in 1..g.n_h {
            for j in 0..g.n_zf {
                v.push(self.ux(i, j));
            }
        }
        for i in 0..g.n_h {
            for j in 1..g.n_zf {
                v.push(self.uz(i, j));
            }
        }
        v
    }

    /// Rebuild a full field from interior unknowns; boundary faces zero.
    pub fn from_interior(g: &Grid, v: &[T]) -> Self {
        assert_eq!(v.len(), g.n_fluid_int());
        let mut u = Self::zeros(g);
        let mut k = 0;
        for i in 1..g.n_h {
            for j in 0..g.n_zf {
                *u.ux_mut(i, j) = v[k];
                k += 1;
            }
        }
        for i in 0..g.n_h {
            for j in 1..g.n_zf {
                *u.uz_mut(i, j) = v[k];
                k += 1;
            }
        }
        u
    }

    /// Top-row vertical velocity (the interface trace) averaged back onto
    /// the plate nodes.
    pub fn uz_top(&self, g: &Grid) -> PlateField<T> {
        let m: Vec<T> = (0..g.n_h).map(|i| self.uz(i, g.n_zf)).collect();
        midpoints_to_plate(g, &m)
    }

    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(self.uz.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// Cell-centered scalar (pressure-like), n_h × n_zf.
#[derive(Clone, Debug)]
pub struct CellField<T> {
    pub nz: usize,
    pub v: Vec<T>,
}

impl<T: Scalar> CellField<T> {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            nz: g.n_zf,
            v: vec![T::zero(); g.n_cells()],
        }
    }
    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> T) -> Self {
        let mut p = Self::zeros(g);
        for i in 0..g.n_h {
            for j in 0..g.n_zf {
                *p.at_mut(i, j) = f(g.x_center(i), g.z_center_f(j));
            }
        }
        p
    }
    pub fn at(&self, i: usize, j: usize) -> T {
        self.v[i * self.nz + j]
    }
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.v[i * self.nz + j]
    }
    pub fn max_abs(&self) -> f64 {
        self.v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Plate scalar on the interior interface nodes: `v[k]` holds the value at
/// s = (k+1)h, k = 0..n_h−1. The clamped end nodes s = 0, L carry the value
/// zero identically and are not stored.
#[derive(Clone, Debug)]
pub struct PlateField<T> {
    pub v: Vec<T>,
}

impl<T: Scalar> PlateField<T> {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            v: vec![T::zero(); g.n_h - 1],
        }
    }
    pub fn from_fn(g: &Grid, f: impl Fn(f64) -> T) -> Self {
        Self {
            v: (1..g.n_h).map(|i| f(g.x_face(i))).collect(),
        }
    }
    pub fn max_abs(&self) -> f64 {
        self.v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Node-centered solid displacement, both components on (n_h+1) × (n_zs+1)
/// nodes, rim included.
#[derive(Clone, Debug)]
pub struct SolidField<T> {
    pub nx: usize,
    pub nz: usize,
    pub dx: Vec<T>,
    pub dz: Vec<T>,
}

impl<T: Scalar> SolidField<T> {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            nx: g.n_h,
            nz: g.n_zs,
            dx: vec![T::zero(); (g.n_h + 1) * (g.n_zs + 1)],
            dz: vec![T::zero(); (g.n_h + 1) * (g.n_zs + 1)],
        }
    }
    pub fn from_fn(g: &Grid, fx: impl Fn(f64, f64) -> T, fz: impl Fn(f64, f64) -> T) -> Self {
        let mut d = Self::zeros(g);
        for i in 0..=g.n_h {
            for j in 0..=g.n_zs {
                let (x, z) = (g.x_face(i), g.z_node_s(j));
                *d.dx_mut(i, j) = fx(x, z);
                *d.dz_mut(i, j) = fz(x, z);
            }
        }
        d
    }
    pub fn dx(&self, i: usize, j: usize) -> T {
        self.dx[i * (self.nz + 1) + j]
    }
    pub fn dx_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.dx[i * (self.nz + 1) + j]
    }
    pub fn dz(&self, i: usize, j: usize) -> T {
        self.dz[i * (self.nz + 1) + j]
    }
    pub fn dz_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.dz[i * (self.nz + 1) + j]
    }

    /// Interior unknowns: dx block then dz block, row-major over (i, j).
    pub fn interior(&self, g: &Grid) -> Vec<T> {
        let mut v = Vec::with_capacity(g.n_solid_int());
        for i in 1..g.n_h {
            for j in 1..g.n_zs {
                v.push(self.dx(i, j));
            }
        }
        for i in 1..g.n_h {
            for j in 1..g.n_zs {
                v.push(self.dz(i, j));
            }
        }
        v
    }

    pub fn from_interior(g: &Grid, v: &[T]) -> Self {
        assert_eq!(v.len(), g.n_solid_int());
        let mut d = Self::zeros(g);
        let mut k = 0;
        for i in 1..g.n_h {
            for j in 1..g.n_zs {
                *d.dx_mut(i, j) = v[k];
                k += 1;
            }
        }
        for i in 1..g.n_h {
            for j in 1..g.n_zs {
                *d.dz_mut(i, j) = v[k];
                k += 1;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.dx
            .iter()
            .chain(self.dz.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// fluid operators
// ---------------------------------------------------------------------------

/// Discrete divergence at cell centers, reading boundary faces directly.
pub fn div<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> CellField<T> {
    let mut out = CellField::zeros(g);
    for i in 0..g.n_h {
        for j in 0..g.n_zf {
            *out.at_mut(i, j) = (u.ux(i + 1, j) - u.ux(i, j)) * (1.0 / g.hx)
                + (u.uz(i, j + 1) - u.uz(i, j)) * (1.0 / g.hzf);
        }
    }
    out
}

/// Discrete gradient on interior faces (boundary slots stay zero), the
/// negative transpose of `div` in the uniform face/cell pairing.
pub fn grad<T: Scalar>(g: &Grid, p: &CellField<T>) -> VelocityField<T> {
    let mut out = VelocityField::zeros(g);
    for i in 1..g.n_h {
        for j in 0..g.n_zf {
            *out.ux_mut(i, j) = (p.at(i, j) - p.at(i - 1, j)) * (1.0 / g.hx);
        }
    }
    for i in 0..g.n_h {
        for j in 1..g.n_zf {
            *out.uz_mut(i, j) = (p.at(i, j) - p.at(i, j - 1)) * (1.0 / g.hzf);
        }
    }
    out
}

/// Componentwise velocity Laplacian at interior faces. Walls without a
/// collocated face use reflection ghosts encoding zero tangential velocity.
pub fn lap_velocity<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> VelocityField<T> {
    let mut out = VelocityField::zeros(g);
    let (ax, az) = (1.0 / (g.hx * g.hx), 1.0 / (g.hzf * g.hzf));
    for i in 1..g.n_h {
        for j in 0..g.n_zf {
            let dxx = (u.ux(i + 1, j) - u.ux(i, j) * 2.0 + u.ux(i - 1, j)) * ax;
            let dzz = if j == 0 {
                // ghost below the bottom wall: -u(i,0)
                (u.ux(i, 1) - u.ux(i, 0) * 3.0) * az
            } else if j == g.n_zf - 1 {
                // ghost above the interface: -u(i,top)
                (u.ux(i, j - 1) - u.ux(i, j) * 3.0) * az
            } else {
                (u.ux(i, j + 1) - u.ux(i, j) * 2.0 + u.ux(i, j - 1)) * az
            };
            *out.ux_mut(i, j) = dxx + dzz;
        }
    }
    for i in 0..g.n_h {
        for j in 1..g.n_zf {
            let dzz = (u.uz(i, j + 1) - u.uz(i, j) * 2.0 + u.uz(i, j - 1)) * az;
            let dxx = if i == 0 {
                (u.uz(1, j) - u.uz(0, j) * 3.0) * ax
            } else if i == g.n_h - 1 {
                (u.uz(i - 1, j) - u.uz(i, j) * 3.0) * ax
            } else {
                (u.uz(i + 1, j) - u.uz(i, j) * 2.0 + u.uz(i - 1, j)) * ax
            };
            *out.uz_mut(i, j) = dxx + dzz;
        }
    }
    out
}

/// Shear strain 𝔻₁₂(u) = ½(∂_z u_x + ∂_x u_z) at every grid node,
/// (n_h+1) × (n_zf+1) row-major, with no-slip reflection ghosts for the
/// tangential component on all four walls; the stored boundary faces (normal
/// data) are read directly, so interface data enters the top row.
pub fn shear_nodes<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> Vec<T> {
    let (nh, nz) = (g.n_h, g.n_zf);
    let mut d12 = vec![T::zero(); (nh + 1) * (nz + 1)];
    for i in 0..=nh {
        for j in 0..=nz {
            let dzux = if j == 0 {
                u.ux(i, 0) * (2.0 / g.hzf)
            } else if j == nz {
                -u.ux(i, nz - 1) * (2.0 / g.hzf)
            } else {
                (u.ux(i, j) - u.ux(i, j - 1)) * (1.0 / g.hzf)
            };
            let dxuz = if i == 0 {
                u.uz(0, j) * (2.0 / g.hx)
            } else if i == nh {
                -u.uz(nh - 1, j) * (2.0 / g.hx)
            } else {
                (u.uz(i, j) - u.uz(i - 1, j)) * (1.0 / g.hx)
            };
            d12[i * (nz + 1) + j] = (dzux + dxuz) * 0.5;
        }
    }
    d12
}

/// Divergence of the viscous stress, 2 div 𝔻(u), at interior faces: the
/// stress form of the velocity Laplacian (the two agree on divergence-free
/// fields up to the wall closures). Normal strains live at cell centers, the
/// shear strain at nodes via [`shear_nodes`], so the operator is exactly
/// skew-free against the strain quadrature: ⟨2div𝔻(u), v⟩ = −2∫𝔻(u):𝔻(v)
/// for every interior-supported v — the summation-by-parts identity that
/// makes the discrete fluid dissipation a genuine energy.
pub fn visc_velocity<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> VelocityField<T> {
    let (nh, nz) = (g.n_h, g.n_zf);
    let mut d11 = vec![T::zero(); nh * nz];
    let mut d22 = vec![T::zero(); nh * nz];
    for i in 0..nh {
        for j in 0..nz {
            d11[i * nz + j] = (u.ux(i + 1, j) - u.ux(i, j)) * (1.0 / g.hx);
            d22[i * nz + j] = (u.uz(i, j + 1) - u.uz(i, j)) * (1.0 / g.hzf);
        }
    }
    let d12 = shear_nodes(g, u);
    let mut out = VelocityField::zeros(g);
    for i in 1..nh {
        for j in 0..nz {
            let sxx = (d11[i * nz + j] - d11[(i - 1) * nz + j]) * (2.0 / g.hx);
            let sxz = (d12[i * (nz + 1) + j + 1] - d12[i * (nz + 1) + j]) * (2.0 / g.hzf);
            *out.ux_mut(i, j) = sxx + sxz;
        }
    }
    for i in 0..nh {
        for j in 1..nz {
            let szx = (d12[(i + 1) * (nz + 1) + j] - d12[i * (nz + 1) + j]) * (2.0 / g.hx);
            let szz = (d22[i * nz + j] - d22[i * nz + j - 1]) * (2.0 / g.hzf);
            *out.uz_mut(i, j) = szx + szz;
        }
    }
    out
}

pub fn cells_mean<T: Scalar>(g: &Grid, p: &CellField<T>) -> T {
    let mut s = T::zero();
    for &v in &p.v {
        s += v;
    }
    s * (1.0 / g.n_cells() as f64)
}

/// Volume-mean removal on cells (all cells share one area, so the discrete
/// mean is the plain average).
pub fn cells_project<T: Scalar>(g: &Grid, p: &CellField<T>) -> CellField<T> {
    let m = cells_mean(g, p);
    let mut out = p.clone();
    for v in &mut out.v {
        *v -= m;
    }
    out
}

// ---------------------------------------------------------------------------
// plate operators (clamped, node-centered)
// ---------------------------------------------------------------------------

/// Extend a clamped plate field to nodes −2..n_h+2: `e[m]` holds the value
/// at node m − 2, with the wall values pinned to zero and two ghost nodes
/// per side from the degree-5 polynomial matching η = 0, η' = 0 at the wall
/// and the four nearest node values. Exact on clamped quintics; used for the
/// geometry jets, not for the dynamics stencils.
pub fn plate_extend<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> Vec<T> {
    let n = g.n_h;
    assert_eq!(eta.v.len(), n - 1);
    // clamped-quintic extrapolation weights for the ghosts at −h and −2h
    const G1: [f64; 4] = [10.0, -5.0, 5.0 / 3.0, -0.25];
    const G2: [f64; 4] = [80.0, -45.0, 16.0, -2.5];
    let mut e = vec![T::zero(); n + 5];
    e[3..3 + n - 1].copy_from_slice(&eta.v);
    let comb = |w: &[f64; 4], a: T, b: T, c: T, d: T| a * w[0] + b * w[1] + c * w[2] + d * w[3];
    e[1] = comb(&G1, eta.v[0], eta.v[1], eta.v[2], eta.v[3]);
    e[0] = comb(&G2, eta.v[0], eta.v[1], eta.v[2], eta.v[3]);
    e[n + 3] = comb(&G1, eta.v[n - 2], eta.v[n - 3], eta.v[n - 4], eta.v[n - 5]);
    e[n + 4] = comb(&G2, eta.v[n - 2], eta.v[n - 3], eta.v[n - 4], eta.v[n - 5]);
    e
}

/// Horizontal Laplacian of a clamped plate field: the Dirichlet three-point
/// stencil (the wall nodes hold the value zero, no ghost is needed).
pub fn plate_lap<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> PlateField<T> {
    let a = 1.0 / (g.hx * g.hx);
    let m = eta.v.len();
    let at = |k: isize| {
        if k < 0 || k as usize >= m {
            T::zero()
        } else {
            eta.v[k as usize]
        }
    };
    PlateField {
        v: (0..m as isize)
            .map(|k| (at(k - 1) - at(k) * 2.0 + at(k + 1)) * a)
            .collect(),
    }
}

/// Horizontal bilaplacian with the clamped closure η(−h) = η(h) (the
/// second-order elimination of the wall normal derivative). The resulting
/// matrix is the symmetric square of the second-difference map under
/// trapezoid weights, so ⟨Δ²η, ξ⟩ = ⟨Δη, Δξ⟩ holds exactly — see
/// `plate_hessian_sq` for the paired energy.
pub fn plate_bilap<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> PlateField<T> {
    let a = 1.0 / (g.hx * g.hx * g.hx * g.hx);
    let m = eta.v.len();
    let at = |k: isize| -> T {
        if k == -2 {
            eta.v[0] // mirror of node 1 through the wall node 0
        } else if k == m as isize + 1 {
            eta.v[m - 1]
        } else if k < 0 || k as usize >= m {
            T::zero()
        } else {
            eta.v[k as usize]
        }
    };
    PlateField {
        v: (0..m as isize)
            .map(|k| {
                (at(k - 2) + at(k + 2) - (at(k - 1) + at(k + 1)) * 4.0 + at(k) * 6.0) * a
            })
            .collect(),
    }
}

/// Second differences at every node 0..=n_h, clamped closure. Entry 0 is
/// 2η₁/h² (the mirror rule at the wall); this is the discrete Δ_s whose
/// weighted square is exactly the bilaplacian: Δ² = D₂ᵀ W D₂ with trapezoid
/// weights W.
pub fn plate_second_difference<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> Vec<T> {
    let a = 1.0 / (g.hx * g.hx);
    let m = eta.v.len();
    let at = |k: isize| {
        if k < 0 || k as usize >= m {
            T::zero()
        } else {
            eta.v[k as usize]
        }
    };
    (0..=m as isize + 1)
        .map(|node| {
            if node == 0 {
                eta.v[0] * (2.0 * a)
            } else if node == m as isize + 1 {
                eta.v[m - 1] * (2.0 * a)
            } else {
                let k = node - 1;
                (at(k - 1) - at(k) * 2.0 + at(k + 1)) * a
            }
        })
        .collect()
}

/// ∫|Δ_sη|² under the trapezoid rule — the exact energy pairing of
/// `plate_bilap`: h·Σw·|D₂η|² = ⟨Δ²η, η⟩_h for every field.
pub fn plate_hessian_sq<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> f64 {
    let d2 = plate_second_difference(g, eta);
    let last = d2.len() - 1;
    let mut s = 0.0;
    for (i, v) in d2.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 } else { 1.0 };
        s += w * v.abs2();
    }
    s * g.hx
}

/// ∫|∇_sη|² from the face differences (wall values zero) — the exact energy
/// pairing of `plate_lap`: h·Σ|δη/h|² = −⟨Δη, η⟩_h for every field.
pub fn plate_gradient_sq<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> f64 {
    let m = eta.v.len();
    let at = |k: isize| {
        if k < 0 || k as usize >= m {
            T::zero()
        } else {
            eta.v[k as usize]
        }
    };
    let mut s = 0.0;
    for f in 0..=m as isize {
        s += (at(f) - at(f - 1)).abs2();
    }
    s / g.hx
}

/// Centered horizontal derivative of order 1, 2 or 3 on the quintic clamped
/// extension, at the interior nodes.
pub fn plate_derivative<T: Scalar>(g: &Grid, eta: &PlateField<T>, order: usize) -> PlateField<T> {
    let e = plate_extend(g, eta);
    let h = g.hx;
    let v = (0..g.n_h - 1)
        .map(|i| {
            let k = i + 3;
            match order {
                1 => (e[k + 1] - e[k - 1]) * (0.5 / h),
                2 => (e[k + 1] - e[k] * 2.0 + e[k - 1]) * (1.0 / (h * h)),
                3 => (e[k + 2] - e[k - 2] - (e[k + 1] - e[k - 1]) * 2.0) * (0.5 / (h * h * h)),
                _ => panic!("plate_derivative supports orders 1..=3"),
            }
        })
        .collect();
    PlateField { v }
}

/// (1/|ω|)∫η under the trapezoid rule (the clamped end values vanish).
pub fn plate_mean<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> T {
    let mut s = T::zero();
    for &v in &eta.v {
        s += v;
    }
    s * (g.hx / g.l)
}

/// Quadrature-orthogonal mean removal: subtracting the plain node average
/// makes the trapezoid integral of the result exactly zero, so P_m is an
/// idempotent, self-adjoint projection in the discrete inner product.
pub fn plate_project<T: Scalar>(_g: &Grid, eta: &PlateField<T>) -> PlateField<T> {
    let mut m = T::zero();
    for &v in &eta.v {
        m += v;
    }
    m = m * (1.0 / eta.v.len() as f64);
    PlateField {
        v: eta.v.iter().map(|&x| x - m).collect(),
    }
}

/// Two-point average of a plate field onto the n_h face midpoints (the top
/// vertical-velocity stations). Preserves the discrete mean exactly: each
/// interior node feeds two midpoints with weight ½.
pub fn plate_to_midpoints<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> Vec<T> {
    let m = eta.v.len();
    let at = |k: isize| {
        if k < 0 || k as usize >= m {
            T::zero()
        } else {
            eta.v[k as usize]
        }
    };
    (0..g.n_h as isize)
        .map(|f| (at(f - 1) + at(f)) * 0.5)
        .collect()
}

/// Adjoint two-point average of midpoint data back onto the plate nodes.
pub fn midpoints_to_plate<T: Scalar>(g: &Grid, m: &[T]) -> PlateField<T> {
    assert_eq!(m.len(), g.n_h);
    PlateField {
        v: (0..g.n_h - 1).map(|k| (m[k] + m[k + 1]) * 0.5).collect(),
    }
}

// ---------------------------------------------------------------------------
// solid operators
// ---------------------------------------------------------------------------

// Staggered strains of a node displacement: normal strains at the midpoints
// of grid edges (e11 on horizontal edges, e22 on vertical edges), shear and
// divergence averaged to cell centers. Narrow differences keep the induced
// energy free of hourglass modes.
struct SolidStrains<T> {
    /// nh × (nz+1): e11 on the horizontal edge (i, j)–(i+1, j)
    e11: Vec<T>,
    /// (nh+1) × nz: e22 on the vertical edge (i, j)–(i, j+1)
    e22: Vec<T>,
    /// nh × nz, at cell centers
    e12: Vec<T>,
    /// nh × nz, at cell centers
    div: Vec<T>,
}

fn solid_strains<T: Scalar>(g: &Grid, d: &SolidField<T>) -> SolidStrains<T> {
    let (nh, nz) = (g.n_h, g.n_zs);
    let mut e11 = vec![T::zero(); nh * (nz + 1)];
    for i in 0..nh {
        for j in 0..=nz {
            e11[i * (nz + 1) + j] = (d.dx(i + 1, j) - d.dx(i, j)) * (1.0 / g.hx);
        }
    }
    let mut e22 = vec![T::zero(); (nh + 1) * nz];
    for i in 0..=nh {
        for j in 0..nz {
            e22[i * nz + j] = (d.dz(i, j + 1) - d.dz(i, j)) * (1.0 / g.hzs);
        }
    }
    let mut e12 = vec![T::zero(); nh * nz];
    let mut div = vec![T::zero(); nh * nz];
    for i in 0..nh {
        for j in 0..nz {
            let dzdx = (d.dx(i, j + 1) - d.dx(i, j) + d.dx(i + 1, j + 1) - d.dx(i + 1, j))
                * (0.5 / g.hzs);
            let dxdz = (d.dz(i + 1, j) - d.dz(i, j) + d.dz(i + 1, j + 1) - d.dz(i, j + 1))
                * (0.5 / g.hx);
            e12[i * nz + j] = (dzdx + dxdz) * 0.5;
            div[i * nz + j] = (e11[i * (nz + 1) + j] + e11[i * (nz + 1) + j + 1]) * 0.5
                + (e22[i * nz + j] + e22[(i + 1) * nz + j]) * 0.5;
        }
    }
    SolidStrains { e11, e22, e12, div }
}

/// Discrete elastic energy 2μ∫|ε(d)|² + λ∫|div d|² under the staggered
/// strain quadrature (uniform edge/cell weights) — the exact pairing of
/// [`lame_apply`] and the Lyapunov functional of the thick layer.
pub fn lame_energy_sq<T: Scalar>(g: &Grid, d: &SolidField<T>, mu: f64, lambda: f64) -> f64 {
    let s = solid_strains(g, d);
    let mut e = 0.0;
    for v in &s.e11 {
        e += 2.0 * mu * v.abs2();
    }
    for v in &s.e22 {
        e += 2.0 * mu * v.abs2();
    }
    for v in &s.e12 {
        e += 4.0 * mu * v.abs2();
    }
    for v in &s.div {
        e += lambda * v.abs2();
    }
    e * g.hx * g.hzs
}

/// Bilinear companion of [`lame_energy_sq`] for real fields:
/// E(a, b) = 2μ∫ε(a):ε(b) + λ∫div a · div b under the same quadrature.
pub fn lame_energy_pair(
    g: &Grid,
    a: &SolidField<f64>,
    b: &SolidField<f64>,
    mu: f64,
    lambda: f64,
) -> f64 {
    let sa = solid_strains(g, a);
    let sb = solid_strains(g, b);
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    (2.0 * mu * (dot(&sa.e11, &sb.e11) + dot(&sa.e22, &sb.e22))
        + 4.0 * mu * dot(&sa.e12, &sb.e12)
        + lambda * dot(&sa.div, &sb.div))
        * g.hx
        * g.hzs
}

/// Gradient of the elastic energy: the vector with
/// Σ_nodes grad(d)·y = E(d, y) for every field y (plain node sum over both
/// components, rim included). Interior entries carry −(area)·𝓛d; the rim
/// entries realize the boundary stress fluxes — see [`traction_interface`].
pub fn lame_energy_grad<T: Scalar>(
    g: &Grid,
    d: &SolidField<T>,
    mu: f64,
    lambda: f64,
) -> SolidField<T> {
    let (nh, nz) = (g.n_h, g.n_zs);
    let s = solid_strains(g, d);
    let wa = g.hx * g.hzs;
    let mut gr = SolidField::zeros(g);
    // normal strains: each edge pushes ±2μ·e·wa/h to its two end nodes
    for i in 0..nh {
        for j in 0..=nz {
            let w = s.e11[i * (nz + 1) + j] * (2.0 * mu * wa / g.hx);
            *gr.dx_mut(i + 1, j) += w;
            *gr.dx_mut(i, j) -= w;
        }
    }
    for i in 0..=nh {
        for j in 0..nz {
            let w = s.e22[i * nz + j] * (2.0 * mu * wa / g.hzs);
            *gr.dz_mut(i, j + 1) += w;
            *gr.dz_mut(i, j) -= w;
        }
    }
    // cell shears and divergences scatter through their averaged stencils
    for i in 0..nh {
        for j in 0..nz {
            let cz = s.e12[i * nz + j] * (mu * wa / g.hzs);
            *gr.dx_mut(i, j + 1) += cz;
            *gr.dx_mut(i + 1, j + 1) += cz;
            *gr.dx_mut(i, j) -= cz;
            *gr.dx_mut(i + 1, j) -= cz;
            let cx = s.e12[i * nz + j] * (mu * wa / g.hx);
            *gr.dz_mut(i + 1, j) += cx;
            *gr.dz_mut(i + 1, j + 1) += cx;
            *gr.dz_mut(i, j) -= cx;
            *gr.dz_mut(i, j + 1) -= cx;
            let dx = s.div[i * nz + j] * (0.5 * lambda * wa / g.hx);
            *gr.dx_mut(i + 1, j) += dx;
            *gr.dx_mut(i + 1, j + 1) += dx;
            *gr.dx_mut(i, j) -= dx;
            *gr.dx_mut(i, j + 1) -= dx;
            let dz = s.div[i * nz + j] * (0.5 * lambda * wa / g.hzs);
            *gr.dz_mut(i, j + 1) += dz;
            *gr.dz_mut(i + 1, j + 1) += dz;
            *gr.dz_mut(i, j) -= dz;
            *gr.dz_mut(i + 1, j) -= dz;
        }
    }
    gr
}

/// Lamé operator μΔd + (μ+λ)∇(div d) at interior nodes (rim slots zero,
/// boundary data rows read directly): the negative density-normalized
/// gradient of the elastic energy, so ⟨𝓛d, y⟩ = −E(d, y) holds exactly for
/// interior-supported y and the operator is symmetric negative definite on
/// zero-trace fields. Interior rows are second-order consistent.
pub fn lame_apply<T: Scalar>(g: &Grid, d: &SolidField<T>, mu: f64, lambda: f64) -> SolidField<T> {
    let gr = lame_energy_grad(g, d, mu, lambda);
    let s = -1.0 / (g.hx * g.hzs);
    let mut out = SolidField::zeros(g);
    for i in 1..g.n_h {
        for j in 1..g.n_zs {
            *out.dx_mut(i, j) = gr.dx(i, j) * s;
            *out.dz_mut(i, j) = gr.dz(i, j) * s;
        }
    }
    out
}

/// Normal interface traction of the thick layer on z = 0 at the interior
/// interface nodes: the variational boundary flux (σ(d)e₃)·e₃, realized from
/// the energy gradient so that h·Σᵢ K(d)ᵢ ξᵢ = −E(d, Rξ) holds exactly, Rξ
/// being the zero field with interface trace ξ·e₃. Weakly second-order;
/// pointwise it carries the usual O(h) flux-recovery bias away from
/// equilibrium, which the coupled solves do not see.
pub fn traction_interface<T: Scalar>(
    g: &Grid,
    d: &SolidField<T>,
    mu: f64,
    lambda: f64,
) -> PlateField<T> {
    let gr = lame_energy_grad(g, d, mu, lambda);
    PlateField {
        v: (1..g.n_h).map(|i| gr.dz(i, 0) * (-1.0 / g.hx)).collect(),
    }
}

/// Interface row of solid nodes generated by a plate field: the stations
/// coincide, so this is the exact embedding with zeros at the clamped
/// corners.
pub fn plate_to_solid_interface<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> Vec<T> {
    let mut row = vec![T::zero(); g.n_h + 1];
    row[1..g.n_h].copy_from_slice(&eta.v);
    row
}

/// Restriction of a solid node row onto the plate nodes (drops the corners).
pub fn solid_nodes_to_plate<T: Scalar>(g: &Grid, row: &[T]) -> PlateField<T> {
    assert_eq!(row.len(), g.n_h + 1);
    PlateField {
        v: row[1..g.n_h].to_vec(),
    }
}

// ---------------------------------------------------------------------------
// traces
// ---------------------------------------------------------------------------

/// Second-order extrapolated trace of a cell field onto the interface z = 0,
/// at the n_h cell-column midpoints.
pub fn trace_cells_top<T: Scalar>(g: &Grid, p: &CellField<T>) -> Vec<T> {
    let top = g.n_zf - 1;
    (0..g.n_h)
        .map(|i| p.at(i, top) * 1.5 - p.at(i, top - 1) * 0.5)
        .collect()
}

/// Modified trace γ_m = P_m ∘ (trace onto z = 0), averaged onto the plate
/// nodes.
pub fn gamma_m<T: Scalar>(g: &Grid, p: &CellField<T>) -> PlateField<T> {
    plate_project(g, &midpoints_to_plate(g, &trace_cells_top(g, p)))
}

// ---------------------------------------------------------------------------
// quadrature and norms
// ---------------------------------------------------------------------------

/// L² norm of a staggered velocity; faces sitting on the boundary carry half
/// a cell of area.
pub fn fluid_l2<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> f64 {
    let wa = g.hx * g.hzf;
    let mut s = 0.0;
    for i in 0..=g.n_h {
        let wx = if i == 0 || i == g.n_h { 0.5 } else { 1.0 };
        for j in 0..g.n_zf {
            s += wa * wx * u.ux(i, j).abs2();
        }
    }
    for i in 0..g.n_h {
        for j in 0..=g.n_zf {
            let wz = if j == 0 || j == g.n_zf { 0.5 } else { 1.0 };
            s += wa * wz * u.uz(i, j).abs2();
        }
    }
    s.sqrt()
}

/// ∫ |𝔻(u)|² over the fluid box: normal strain entries at cell centers with
/// full weights, the shear entry at grid nodes with trapezoid weights and the
/// no-slip reflection closures of [`shear_nodes`]. This is the exact
/// summation-by-parts partner of [`visc_velocity`].
pub fn fluid_strain_sq<T: Scalar>(g: &Grid, u: &VelocityField<T>) -> f64 {
    let mut s = 0.0;
    let wa = g.hx * g.hzf;
    for i in 0..g.n_h {
        for j in 0..g.n_zf {
            let d11 = (u.ux(i + 1, j) - u.ux(i, j)) * (1.0 / g.hx);
            let d22 = (u.uz(i, j + 1) - u.uz(i, j)) * (1.0 / g.hzf);
            s += (d11.abs2() + d22.abs2()) * wa;
        }
    }
    let d12 = shear_nodes(g, u);
    for i in 0..=g.n_h {
        let wx = if i == 0 || i == g.n_h { 0.5 } else { 1.0 };
        for j in 0..=g.n_zf {
            let wz = if j == 0 || j == g.n_zf { 0.5 } else { 1.0 };
            s += 2.0 * d12[i * (g.n_zf + 1) + j].abs2() * wa * wx * wz;
        }
    }
    s
}

/// Bilinear companion of [`fluid_strain_sq`] for real fields:
/// ∫ 𝔻(a):𝔻(b) under the same quadrature and wall closures.
pub fn fluid_strain_pair(g: &Grid, a: &VelocityField<f64>, b: &VelocityField<f64>) -> f64 {
    let mut s = 0.0;
    let wa = g.hx * g.hzf;
    for i in 0..g.n_h {
        for j in 0..g.n_zf {
            let d11a = (a.ux(i + 1, j) - a.ux(i, j)) / g.hx;
            let d22a = (a.uz(i, j + 1) - a.uz(i, j)) / g.hzf;
            let d11b = (b.ux(i + 1, j) - b.ux(i, j)) / g.hx;
            let d22b = (b.uz(i, j + 1) - b.uz(i, j)) / g.hzf;
            s += (d11a * d11b + d22a * d22b) * wa;
        }
    }
    let d12a = shear_nodes(g, a);
    let d12b = shear_nodes(g, b);
    for i in 0..=g.n_h {
        let wx = if i == 0 || i == g.n_h { 0.5 } else { 1.0 };
        for j in 0..=g.n_zf {
            let wz = if j == 0 || j == g.n_zf { 0.5 } else { 1.0 };
            let k = i * (g.n_zf + 1) + j;
            s += 2.0 * d12a[k] * d12b[k] * wa * wx * wz;
        }
    }
    s
}

pub fn cells_l2<T: Scalar>(g: &Grid, p: &CellField<T>) -> f64 {
    let wa = g.hx * g.hzf;
    (p.v.iter().map(|x| x.abs2()).sum::<f64>() * wa).sqrt()
}

pub fn plate_l2<T: Scalar>(g: &Grid, eta: &PlateField<T>) -> f64 {
    (eta.v.iter().map(|x| x.abs2()).sum::<f64>() * g.hx).sqrt()
}

/// L² norm over the solid with trapezoid weights in both directions.
pub fn solid_l2<T: Scalar>(g: &Grid, d: &SolidField<T>) -> f64 {
    let mut s = 0.0;
    for i in 0..=g.n_h {
        let wx = if i == 0 || i == g.n_h { 0.5 } else { 1.0 };
        for j in 0..=g.n_zs {
            let wz = if j == 0 || j == g.n_zs { 0.5 } else { 1.0 };
            let w = wx * wz * g.hx * g.hzs;
            s += w * (d.dx(i, j).abs2() + d.dz(i, j).abs2());
        }
    }
    s.sqrt()
}

//! The vertical cutoff ψ, the shear diffeomorphism X and its inverse Y, and
//! the coefficient fields (cofactors, transformed gradients, their space and
//! time derivatives) consumed by the transformed nonlinearities.
//!
//! Everything is expressed through second-order jets of the two ingredients,
//! ψ(y₃) and η(y₁): the map is X(y) = (y₁, y₃ + ψ(y₃)η(y₁)), so every
//! coefficient is a closed-form product of one-dimensional jets. The jets are
//! propagated with exact arithmetic (product/quotient rules) rather than
//! nested finite differences; an independent finite-difference oracle in the
//! tests cross-checks every derived field.

use crate::grid::{plate_extend, Grid, PlateField};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// cutoff
// ---------------------------------------------------------------------------

/// C² cutoff: ψ = 1 on |z| ≤ α/2, quintic-smoothstep transition on
/// α/2 ≤ |z| ≤ α, ψ = 0 outside. The transition S(τ) = 6τ⁵ − 15τ⁴ + 10τ³ has
/// vanishing first and second derivatives at both ends.
#[derive(Clone, Copy, Debug)]
pub struct Cutoff {
    pub alpha: f64,
}

impl Cutoff {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0);
        Self { alpha }
    }

    /// ‖ψ'‖_∞: the transition slope peaks at τ = 1/2 with S' = 15/8, scaled
    /// by the half-width α/2.
    pub fn max_abs_derivative(&self) -> f64 {
        3.75 / self.alpha
    }

    /// Admissible plate amplitude δ₀ = 1/(2‖ψ'‖_∞).
    pub fn delta0(&self) -> f64 {
        self.alpha / 7.5
    }

    /// ψ, ψ', ψ'' at z.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        let (p, d1, d2, _) = self.eval3(z);
        (p, d1, d2)
    }

    /// ψ, ψ', ψ'', ψ''' at z. ψ''' jumps at the joins |z| ∈ {α/2, α}; the
    /// join points themselves report the plateau/outside value 0 so the
    /// result is deterministic.
    pub fn eval3(&self, z: f64) -> (f64, f64, f64, f64) {
        let a = self.alpha;
        let az = z.abs();
        if az <= 0.5 * a || az >= a {
            let v = if az <= 0.5 * a { 1.0 } else { 0.0 };
            return (v, 0.0, 0.0, 0.0);
        }
        // transition: τ = (α − |z|)/(α/2) ∈ (0, 1), dτ/dz = −sign(z)·2/α
        let s = if z >= 0.0 { 1.0 } else { -1.0 };
        let c = 2.0 / a;
        let t = (a - az) * c;
        let sv = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let s1 = 30.0 * t * t * (1.0 + t * (-2.0 + t));
        let s2 = 60.0 * t * (1.0 + t * (-3.0 + 2.0 * t));
        let s3 = 60.0 * (1.0 + t * (-6.0 + 6.0 * t));
        (
            sv,
            -s * c * s1,
            c * c * s2,
            -s * c * c * c * s3,
        )
    }
}

/// Closed smallness condition max|η₁| ≤ δ₀ guarding invertibility of X.
pub fn check_smallness(cut: &Cutoff, eta1: &PlateField<f64>) -> Result<()> {
    let max_abs = eta1.max_abs();
    if max_abs <= cut.delta0() {
        Ok(())
    } else {
        Err(Error::Smallness {
            max_abs,
            delta0: cut.delta0(),
            sample: None,
        })
    }
}

// ---------------------------------------------------------------------------
// second-order jets in (y₁, y₃)
// ---------------------------------------------------------------------------

/// Value and derivatives up to second order with respect to (y₁, y₃).
#[derive(Clone, Copy, Debug, Default)]
pub struct J2 {
    pub v: f64,
    pub d1: f64,
    pub d3: f64,
    pub d11: f64,
    pub d13: f64,
    pub d33: f64,
}

impl J2 {
    pub const fn c(v: f64) -> J2 {
        J2 {
            v,
            d1: 0.0,
            d3: 0.0,
            d11: 0.0,
            d13: 0.0,
            d33: 0.0,
        }
    }

    /// Jet of 1/self (quotient rule through second order).
    pub fn recip(self) -> J2 {
        let iv = 1.0 / self.v;
        let iv2 = iv * iv;
        let iv3 = iv2 * iv;
        J2 {
            v: iv,
            d1: -self.d1 * iv2,
            d3: -self.d3 * iv2,
            d11: -self.d11 * iv2 + 2.0 * self.d1 * self.d1 * iv3,
            d13: -self.d13 * iv2 + 2.0 * self.d1 * self.d3 * iv3,
            d33: -self.d33 * iv2 + 2.0 * self.d3 * self.d3 * iv3,
        }
    }
}

impl std::ops::Add for J2 {
    type Output = J2;
    fn add(self, o: J2) -> J2 {
        J2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d3: self.d3 + o.d3,
            d11: self.d11 + o.d11,
            d13: self.d13 + o.d13,
            d33: self.d33 + o.d33,
        }
    }
}

impl std::ops::Sub for J2 {
    type Output = J2;
    fn sub(self, o: J2) -> J2 {
        J2 {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d3: self.d3 - o.d3,
            d11: self.d11 - o.d11,
            d13: self.d13 - o.d13,
            d33: self.d33 - o.d33,
        }
    }
}

impl std::ops::Neg for J2 {
    type Output = J2;
    fn neg(self) -> J2 {
        J2 {
            v: -self.v,
            d1: -self.d1,
            d3: -self.d3,
            d11: -self.d11,
            d13: -self.d13,
            d33: -self.d33,
        }
    }
}

impl std::ops::Mul for J2 {
    type Output = J2;
    fn mul(self, o: J2) -> J2 {
        J2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d3: self.d3 * o.v + self.v * o.d3,
            d11: self.d11 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d11,
            d13: self.d13 * o.v + self.d1 * o.d3 + self.d3 * o.d1 + self.v * o.d13,
            d33: self.d33 * o.v + 2.0 * self.d3 * o.d3 + self.v * o.d33,
        }
    }
}

// ---------------------------------------------------------------------------
// pointwise coefficient bundle
// ---------------------------------------------------------------------------

/// Everything the transformed nonlinearities need at one reference point:
/// index 0 ↔ horizontal (x₁), index 1 ↔ vertical (x₃).
#[derive(Clone, Debug)]
pub struct CoeffPoint {
    /// det∇X = 1 + ψ'η
    pub det: f64,
    /// b = Cof(∇X)ᵀ
    pub b: [[f64; 2]; 2],
    /// a∘X = ∇X / det∇X
    pub a: [[f64; 2]; 2],
    /// ∇Y∘X = (∇X)⁻¹
    pub yx: [[f64; 2]; 2],
    /// da[i][k][j] = (∂ a_ik/∂x_j)∘X
    pub da: [[[f64; 2]; 2]; 2],
    /// Σ_j (∂² a_ik/∂x_j²)∘X
    pub d2a: [[f64; 2]; 2],
    /// Σ_j (∂² Y₃/∂x_j²)∘X (the horizontal component vanishes identically)
    pub d2y3: f64,
    /// (∂_t a)∘X
    pub dta: [[f64; 2]; 2],
    /// (∂_t Y₃)∘X (horizontal component is zero)
    pub dty3: f64,
    /// ∂_s η₁ at the station (interface-stress geometry factor)
    pub deta1: f64,
}

/// Assemble the coefficient bundle at height y₃ from jets of η₁ (value and
/// three derivatives) and η₂ (value and one derivative) at the station.
pub fn coeff_point(cut: &Cutoff, y3: f64, e1: &[f64; 4], e2: &[f64; 2]) -> CoeffPoint {
    let (p, p1, p2, p3) = cut.eval3(y3);
    // ψ and ψ' as jets in y₃
    let jpsi = J2 {
        v: p,
        d3: p1,
        d33: p2,
        ..J2::default()
    };
    let jpsi1 = J2 {
        v: p1,
        d3: p2,
        d33: p3,
        ..J2::default()
    };
    // η and η' as jets in y₁
    let jeta = J2 {
        v: e1[0],
        d1: e1[1],
        d11: e1[2],
        ..J2::default()
    };
    let jeta1 = J2 {
        v: e1[1],
        d1: e1[2],
        d11: e1[3],
        ..J2::default()
    };

    // det∇X = 1 + ψ'(y₃)η(y₁)
    let jdet = J2::c(1.0) + jpsi1 * jeta;
    let jidet = jdet.recip();
    // ∇X = [[1, 0], [ψη', det]] ⇒ a∘X = ∇X/det, b = Cof(∇X)ᵀ, Yx = (∇X)⁻¹
    let jpe = jpsi * jeta1; // ψη'
    let ja = [[jidet, J2::c(0.0)], [jpe * jidet, J2::c(1.0)]];
    let jyx = [[J2::c(1.0), J2::c(0.0)], [-(jpe * jidet), jidet]];
    let b = [[jdet.v, 0.0], [-jpe.v, 1.0]];

    // first x-derivatives: Da_j = ∂₁A·δ_{1j} + ∂₃A·Yx_{3j}
    let mut da = [[[0.0; 2]; 2]; 2];
    let mut d2a = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let aj = ja[i][k];
            for j in 0..2 {
                let y3j = jyx[1][j];
                let dirac = if j == 0 { 1.0 } else { 0.0 };
                da[i][k][j] = aj.d1 * dirac + aj.d3 * y3j.v;
                // second derivative along x_j: contract the y-gradient of Da_j
                let d1da = aj.d11 * dirac + aj.d13 * y3j.v + aj.d3 * y3j.d1;
                let d3da = aj.d13 * dirac + aj.d33 * y3j.v + aj.d3 * y3j.d3;
                d2a[i][k] += d1da * dirac + d3da * y3j.v;
            }
        }
    }
    let mut d2y3 = 0.0;
    for j in 0..2 {
        let y3j = jyx[1][j];
        let dirac = if j == 0 { 1.0 } else { 0.0 };
        d2y3 += y3j.d1 * dirac + y3j.d3 * y3j.v;
    }

    // time derivatives: ∂_t det = ψ'η₂, ∂_t(a∘X) by quotient/product rules,
    // then (∂_t a)(X) = ∂_t(a∘X) − (∂_x a)(X)·∂_tX with ∂_tX = (0, ψη₂)
    let det = jdet.v;
    let dt_det = p1 * e2[0];
    let dt_a11 = -dt_det / (det * det);
    let dt_a31 = p * e2[1] / det - jpe.v * dt_det / (det * det);
    let psi_eta2 = p * e2[0];
    let mut dta = [[0.0; 2]; 2];
    let dt_a = [[dt_a11, 0.0], [dt_a31, 0.0]];
    for i in 0..2 {
        for k in 0..2 {
            dta[i][k] = dt_a[i][k] - da[i][k][1] * psi_eta2;
        }
    }
    let dty3 = -psi_eta2 / det;

    CoeffPoint {
        det,
        b,
        a: [[ja[0][0].v, ja[0][1].v], [ja[1][0].v, ja[1][1].v]],
        yx: [[jyx[0][0].v, jyx[0][1].v], [jyx[1][0].v, jyx[1][1].v]],
        da,
        d2a,
        d2y3,
        dta,
        dty3,
        deta1: e1[1],
    }
}

/// Vertical component of the forward map, X₃ = y₃ + ψ(y₃)η.
pub fn x3_map(cut: &Cutoff, y3: f64, eta: f64) -> f64 {
    y3 + cut.eval(y3).0 * eta
}

/// det∇X = 1 + ψ'(y₃)η.
pub fn det_map(cut: &Cutoff, y3: f64, eta: f64) -> f64 {
    1.0 + cut.eval(y3).1 * eta
}

/// Invert x₃ = y₃ + ψ(y₃)η by safeguarded Newton with a bisection fallback;
/// the map is strictly monotone (det > 1/2 under smallness), so the bracket
/// [−H_f, 0] is guaranteed as long as x₃ lies between −H_f and η.
pub fn y3_inverse(cut: &Cutoff, h_f: f64, x3: f64, eta: f64) -> Result<f64> {
    let f = |y: f64| y + cut.eval(y).0 * eta - x3;
    let (mut lo, mut hi) = (-h_f, eta.max(0.0) + 1e-12);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::InverseMap(f64::NAN, x3));
    }
    let mut y = x3.clamp(lo, hi);
    for _ in 0..100 {
        let fv = f(y);
        if fv.abs() <= 1e-13 * (1.0 + x3.abs()) {
            return Ok(y);
        }
        if fv > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let d = det_map(cut, y, eta);
        let step = fv / d;
        let mut next = y - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        y = next;
    }
    Err(Error::InverseMap(y, x3))
}

// ---------------------------------------------------------------------------
// sampled fields on the grid
// ---------------------------------------------------------------------------

/// Jets of the plate pair at every horizontal station of the grid: cell
/// centers ((i+1/2)h) and faces (ih). Heights are handled pointwise through
/// `coeff_point`, so one `DiffeoFields` serves every fluid row.
#[derive(Clone, Debug)]
pub struct DiffeoFields {
    pub cut: Cutoff,
    /// per cell center: [η₁, η₁', η₁'', η₁''', η₂, η₂']
    pub centers: Vec<[f64; 6]>,
    /// per face: same layout, n_h + 1 entries
    pub faces: Vec<[f64; 6]>,
}

pub fn build_diffeo(
    g: &Grid,
    cut: &Cutoff,
    eta1: &PlateField<f64>,
    eta2: &PlateField<f64>,
) -> Result<DiffeoFields> {
    check_smallness(cut, eta1)?;
    let ex1 = plate_extend(g, eta1);
    let ex2 = plate_extend(g, eta2);
    let h = g.hx;
    // faces are the plate's own node stations: centered stencils on the
    // extension (e[m] holds node m − 2)
    let faces: Vec<[f64; 6]> = (0..=g.n_h)
        .map(|i| {
            let f = &ex1;
            let v = f[i + 2];
            let dv = (f[i + 3] - f[i + 1]) / (2.0 * h);
            let ddv = (f[i + 3] - 2.0 * f[i + 2] + f[i + 1]) / (h * h);
            let dddv = (f[i + 4] - f[i] - 2.0 * (f[i + 3] - f[i + 1])) / (2.0 * h * h * h);
            let w = &ex2;
            let v2 = w[i + 2];
            let dv2 = (w[i + 3] - w[i + 1]) / (2.0 * h);
            [v, dv, ddv, dddv, v2, dv2]
        })
        .collect();
    // cell centers sit midway between nodes i and i+1
    let centers: Vec<[f64; 6]> = (0..g.n_h)
        .map(|i| {
            let f = &ex1;
            let v = 0.5 * (f[i + 2] + f[i + 3]);
            let dv = (f[i + 3] - f[i + 2]) / h;
            let ddv = (f[i + 4] - f[i + 3] - f[i + 2] + f[i + 1]) / (2.0 * h * h);
            let dddv = (f[i + 4] - 3.0 * f[i + 3] + 3.0 * f[i + 2] - f[i + 1]) / (h * h * h);
            let w = &ex2;
            let v2 = 0.5 * (w[i + 2] + w[i + 3]);
            let dv2 = (w[i + 3] - w[i + 2]) / h;
            [v, dv, ddv, dddv, v2, dv2]
        })
        .collect();
    Ok(DiffeoFields {
        cut: *cut,
        centers,
        faces,
    })
}

impl DiffeoFields {
    pub fn eta1_center(&self, i: usize) -> [f64; 4] {
        let c = &self.centers[i];
        [c[0], c[1], c[2], c[3]]
    }
    pub fn eta2_center(&self, i: usize) -> [f64; 2] {
        let c = &self.centers[i];
        [c[4], c[5]]
    }
    pub fn eta1_face(&self, i: usize) -> [f64; 4] {
        let c = &self.faces[i];
        [c[0], c[1], c[2], c[3]]
    }
    pub fn eta2_face(&self, i: usize) -> [f64; 2] {
        let c = &self.faces[i];
        [c[4], c[5]]
    }

    pub fn coeff_center(&self, i: usize, y3: f64) -> CoeffPoint {
        coeff_point(&self.cut, y3, &self.eta1_center(i), &self.eta2_center(i))
    }
    pub fn coeff_face(&self, i: usize, y3: f64) -> CoeffPoint {
        coeff_point(&self.cut, y3, &self.eta1_face(i), &self.eta2_face(i))
    }
}

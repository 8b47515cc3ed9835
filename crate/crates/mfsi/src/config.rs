//! Run configuration: a single JSON file with sections, plus dotted-path
//! overrides from the command line. Validation collects every violated
//! invariant at once instead of stopping at the first.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub dim: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "H_f")]
    pub h_f: f64,
    #[serde(rename = "H_s")]
    pub h_s: f64,
    pub alpha: f64,
    pub n_h: usize,
    pub n_zf: usize,
    pub n_zs: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            dim: 2,
            l: 1.0,
            h_f: 1.0,
            h_s: 0.5,
            alpha: 0.4,
            n_h: 24,
            n_zf: 24,
            n_zs: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub mu_s: f64,
    pub lambda_s: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t_period: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            mu_s: 1.0,
            lambda_s: 1.0,
            delta: 0.5,
            t_period: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    /// Number of retained temporal harmonics K (coefficients k = 0..K).
    #[serde(rename = "K")]
    pub n_harmonics: usize,
    /// Time samples M for the nonlinearity transform; 0 means auto (4K + 4),
    /// enough to keep quadratic aliasing out of the retained band.
    #[serde(rename = "M")]
    pub oversampling: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_harmonics: 4,
            oversampling: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Forcing {
    /// Catalogue entry: "plate-bump" | "fluid-stream" | "solid-squeeze".
    pub id: String,
    pub amplitude: f64,
    /// Channel toggles: fluid body force f, plate load g, solid load h.
    pub f: bool,
    pub g: bool,
    pub h: bool,
}

impl Default for Forcing {
    fn default() -> Self {
        Self {
            id: "plate-bump".into(),
            amplitude: 1e-3,
            f: false,
            g: true,
            h: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    /// Fixed-point increment tolerance (solution-norm metric).
    pub tol: f64,
    /// Nonlinear residual tolerance; 0 means auto (10 h²).
    pub tol_res: f64,
    pub maxit: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            tol_res: 0.0,
            maxit: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub geometry: Geometry,
    pub physics: Physics,
    pub discretization: Discretization,
    pub forcing: Forcing,
    pub solver: Solver,
    /// Default mode when the CLI does not name one.
    pub mode: String,
    pub output_dir: String,
    pub seed: u64,
    /// Largest |k| scanned in resolvent mode.
    pub resolvent_k_max: usize,
    /// Worker threads; 0 means all available cores.
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            physics: Physics::default(),
            discretization: Discretization::default(),
            forcing: Forcing::default(),
            solver: Solver::default(),
            mode: "spectrum".into(),
            output_dir: "out".into(),
            seed: 1,
            resolvent_k_max: 64,
            workers: 0,
        }
    }
}

pub const MODES: [&str; 5] = ["solve", "spectrum", "resolvent", "mms-verify", "decouple-check"];

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Apply dotted-path overrides like `physics.delta=0.25` on the JSON
    /// representation, then re-validate.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for s in sets {
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
            let leaf: serde_json::Value = match serde_json::from_str(raw) {
                Ok(v) => v,
                Err(_) => serde_json::Value::String(raw.to_string()),
            };
            let pointer = format!("/{}", path.replace('.', "/"));
            match value.pointer_mut(&pointer) {
                Some(slot) => *slot = leaf,
                None => return Err(Error::Config(format!("unknown config key `{path}`"))),
            }
        }
        let cfg: Config = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every invariant and report all violations together.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let p = &self.physics;
        let mut errs: Vec<String> = Vec::new();
        let mut req = |ok: bool, msg: &str| {
            if !ok {
                errs.push(format!("  - {msg}"));
            }
        };

        req(g.dim == 2, "dim must be 2 (this build discretizes the interval cross-section only)");
        req(g.l > 0.0, "L must be positive");
        req(g.h_f > 0.0, "H_f must be positive");
        req(g.h_s > 0.0, "H_s must be positive");
        req(g.alpha > 0.0, "alpha must be positive");
        req(
            g.alpha < g.h_f.min(g.h_s),
            "cutoff exceeds domain: alpha must satisfy alpha < min(H_f, H_s)",
        );
        req(g.n_h >= 6, "n_h below stencil minimum (6)");
        req(g.n_zf >= 6, "n_zf below stencil minimum (6)");
        req(g.n_zs >= 6, "n_zs below stencil minimum (6)");

        req(p.mu_s > 0.0, "mu_s must be positive (strong ellipticity)");
        req(p.mu_s + p.lambda_s > 0.0, "mu_s + lambda_s must be positive (strong ellipticity)");
        req(
            p.delta > 0.0,
            "delta must be positive: the structural viscoelastic damping is essential",
        );
        req(p.t_period > 0.0, "T must be positive");

        let d = &self.discretization;
        req(d.n_harmonics >= 1, "K must be at least 1");
        let m_msg = format!(
            "M = {} undersamples K = {} harmonics (need M >= 2K + 2 or M = 0 for auto)",
            d.oversampling, d.n_harmonics
        );
        req(d.oversampling == 0 || d.oversampling >= 2 * d.n_harmonics + 2, &m_msg);

        let s = &self.solver;
        req(s.tol > 0.0, "solver.tol must be positive");
        req(s.tol_res >= 0.0, "solver.tol_res must be nonnegative (0 = auto)");
        req(s.maxit >= 1, "solver.maxit must be at least 1");
        req(self.forcing.amplitude >= 0.0, "forcing.amplitude must be nonnegative");
        req(
            matches!(self.forcing.id.as_str(), "plate-bump" | "fluid-stream" | "solid-squeeze"),
            "forcing.id not in catalogue (plate-bump | fluid-stream | solid-squeeze)",
        );
        req(
            MODES.contains(&self.mode.as_str()),
            "mode must be one of solve | spectrum | resolvent | mms-verify | decouple-check",
        );

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("\n")))
        }
    }

    /// Angular frequency of the fundamental harmonic.
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.physics.t_period
    }

    /// Effective number of time samples for the nonlinearity transform.
    pub fn samples_m(&self) -> usize {
        if self.discretization.oversampling == 0 {
            4 * self.discretization.n_harmonics + 4
        } else {
            self.discretization.oversampling
        }
    }

    /// Effective nonlinear-residual tolerance (auto mode scales with h²).
    pub fn tol_res_effective(&self) -> f64 {
        if self.solver.tol_res > 0.0 {
            self.solver.tol_res
        } else {
            let h = self.geometry.l / self.geometry.n_h as f64;
            10.0 * h * h
        }
    }
}

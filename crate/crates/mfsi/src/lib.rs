//! Desk-scale simulator and operator-spectrum toolbox for time-periodic
//! multilayered fluid–structure interaction.
//!
//! A viscous incompressible fluid occupies a box below a flat interface; the
//! structure above it is composite: a thin clamped damped plate glued to a
//! thick viscoelastic layer. The solver works on the fixed reference domain
//! obtained from the shear diffeomorphism generated by the plate displacement,
//! so the moving-geometry terms appear as the transformed nonlinearities `F`
//! and `G`. Time-periodic solutions are computed by harmonic balance (one
//! complex saddle-point solve per temporal harmonic) wrapped in a Picard
//! fixed-point iteration, and the linearized dynamics is exposed as a dense
//! discrete block operator `A_mfs` whose spectrum, energy identity, decoupling
//! transform, and imaginary-axis resolvent scan are all directly checkable.
//!
//! The crate is organized as a library whose primary interface is the
//! `examples/` directory — one runnable example per capability:
//!
//! ```text
//! cargo run --release --example spectrum        # eigenvalues + energy identity
//! cargo run --release --example resolvent       # imaginary-axis resolvent scan
//! cargo run --release --example decoupling      # similarity-transform identity
//! cargo run --release --example mms_convergence # manufactured-solution orders
//! cargo run --release --example picard_periodic # nonlinear periodic solve
//! cargo run --release --example transform_roundtrip # diffeomorphism checks
//! cargo run --release --example liftings_demo   # auxiliary solution operators
//! ```
//!
//! The thin `mfsi` binary drives the same machinery from a JSON config:
//! `mfsi <solve|spectrum|resolvent|mms-verify|decouple-check> --config <path>`.

pub mod config;
pub mod grid;
pub mod harmonic;
pub mod io;
pub mod liftings;
pub mod linalg;
pub mod mms;
pub mod nonlinear;
pub mod operator;
pub mod picard;
pub mod run;
pub mod spectral;
pub mod transform;

pub use config::Config;

/// Crate-level error type: every module reports failures through typed
/// variants so the CLI can map them to distinct exit reasons.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config validation failed:\n{0}")]
    Config(String),
    #[error("grid construction failed: {0}")]
    Grid(String),
    #[error("smallness violation: max|eta1| = {max_abs:.6e} exceeds delta0 = {delta0:.6e}")]
    Smallness {
        max_abs: f64,
        delta0: f64,
        sample: Option<usize>,
    },
    #[error("inverse map root-finding failed at y=({0:.4}, {1:.4})")]
    InverseMap(f64, f64),
    #[error("linear solver failure: {0}")]
    Linalg(String),
    #[error("harmonic system singular at k = {k}: {detail}")]
    SingularHarmonic { k: i64, detail: String },
    #[error("picard-divergence: {0}")]
    PicardDivergence(String),
    #[error("picard exceeded maxit = {0} without converging")]
    PicardMaxit(usize),
    #[error("dof budget exceeded: {0} > {1}; use a matrix-free spectral mode or coarsen")]
    DofBudget(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

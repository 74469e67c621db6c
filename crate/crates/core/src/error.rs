use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("degenerate substrate eigenmodes at omega={omega:e} rad/s, k_par={k_par:e} 1/m, phi={phi}")]
    DegenerateModes { omega: f64, k_par: f64, phi: f64 },

    #[error("could not select {expected} outgoing substrate modes (found {found}) at omega={omega:e}, k_par={k_par:e}, phi={phi}")]
    ModeSelection {
        expected: usize,
        found: usize,
        omega: f64,
        k_par: f64,
        phi: f64,
    },

    #[error("singular boundary system at omega={omega:e}, k_par={k_par:e}, phi={phi} (residual {residual:e})")]
    SingularBoundary {
        omega: f64,
        k_par: f64,
        phi: f64,
        residual: f64,
    },

    #[error("polarizability pole: permittivity within 1e-12 of -2 at omega={omega:e}")]
    ResonanceSingularity { omega: f64 },

    #[error("k_z = 0 on the light line at omega={omega:e}")]
    LightLine { omega: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e} vs requested {requested:e} (partial value {partial:e})")]
    NonConvergence {
        achieved: f64,
        requested: f64,
        partial: f64,
    },

    #[error("frequency window too small: tail estimate {tail:e} exceeds tolerance on total {total:e}")]
    TailDominated { tail: f64, total: f64 },

    #[error("photon spin undefined: vanishing photon-number integrand")]
    UndefinedSpin,

    #[error("zero damping: steady-state angular velocity is unbounded")]
    UnboundedSpin,

    #[error("time step {dt:e} s exceeds stability limit {limit:e} s (I/gamma/100)")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

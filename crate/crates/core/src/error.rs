use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("result overflows the floating-point range for argument {0}")]
    Overflow(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate detuning: qubit and resonator frequencies coincide ({omega_a} vs {omega_r})")]
    DegenerateDetuning { omega_r: f64, omega_a: f64 },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("trajectory ends at t = {t_end}, steady-state window needs t >= {required}")]
    InsufficientHorizon { t_end: f64, required: f64 },

    #[error("closed-form inconsistency: imaginary residue {residue:e} in {quantity}")]
    ClosedForm { quantity: &'static str, residue: f64 },

    #[error("quadrature not resolved: refinement changed {quantity} by {change:e}")]
    QuadratureResolution { quantity: &'static str, change: f64 },

    #[error("Fock cutoff {cutoff} too small: population {leak:e} in the top levels at t = {time}")]
    Cutoff { cutoff: usize, leak: f64, time: f64 },

    #[error("Hilbert-space dimension {dim} exceeds the guard of {limit}; set allow_large to override")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("time grids cannot be aligned: {0}")]
    Alignment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv output: {0}")]
    Csv(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("integration failed at x = {x}: step size {step:e} fell below the minimum")]
    StepUnderflow { x: f64, step: f64 },

    #[error("integration halted by guard at x = {x}")]
    GuardHalt { x: f64, state: Vec<Complex64> },

    #[error("branch ambiguity at x = {x}: |value| = {modulus:e} is below the zero threshold")]
    BranchAmbiguity { x: f64, modulus: f64 },

    #[error("component {component} vanishes at x = {x}")]
    Singularity { x: f64, component: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Abscissa attached to the diagnostic, if any.
    pub fn abscissa(&self) -> Option<f64> {
        match self {
            Error::StepUnderflow { x, .. }
            | Error::GuardHalt { x, .. }
            | Error::BranchAmbiguity { x, .. }
            | Error::Singularity { x, .. } => Some(*x),
            _ => None,
        }
    }
}

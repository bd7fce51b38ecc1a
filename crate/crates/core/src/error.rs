use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The Biot-Savart kernel was evaluated at its singularity.
    #[error("kernel evaluated at the origin; desingularize with a blob")]
    KernelSingularity,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("discretization grid does not cover the support: mass deficit {deficit:.3e}")]
    Coverage { deficit: f64 },

    #[error("trajectory left the ball of radius {bound:.3e} at t = {time:.4}")]
    BlowUp { time: f64, bound: f64 },

    #[error("time {time} outside the flow's range [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("test function support not covered: {0}")]
    SupportCoverage(String),

    #[error("velocity not locally square-integrable on the test support: {0}")]
    InfiniteEnergy(String),

    #[error("ratio undefined: {0}")]
    Undefined(&'static str),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

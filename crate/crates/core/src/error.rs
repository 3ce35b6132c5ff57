use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes or bases, or an operation the realization does not support.
    #[error("structural error: {0}")]
    Structural(String),

    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The state became non-finite or exceeded the blow-up guard.
    #[error("blow-up at t = {last_finite_time}: {reason}")]
    BlowUp { last_finite_time: f64, reason: String },

    /// Picard iteration did not reach its tolerance.
    #[error("picard iteration did not converge after {iterations} iterations (last increment {last_increment:e})")]
    NonConvergence { iterations: usize, last_increment: f64 },

    /// An a priori bound was violated by an intermediate iterate.
    #[error("bound violated: {0}")]
    BoundViolated(String),

    /// The reference integrator could not keep its error below tolerance.
    #[error("step size underflow at t = {time}; reduce nu*lambda_max*dt or loosen rtol")]
    Stiffness { time: f64 },

    /// The oracle refuses resolutions above its cap.
    #[error("resolution {n} exceeds the oracle cap of {cap}")]
    ResolutionCap { n: usize, cap: usize },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

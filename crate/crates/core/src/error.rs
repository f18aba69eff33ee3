use thiserror::Error;

/// Unified error type for simulation, metrics, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("jacobian is singular (|det| = {det:.3e}) at q = ({q1:.4}, {q2:.4}) rad")]
    SingularJacobian { det: f64, q1: f64, q2: f64 },

    #[error("axis {axis} left the barrier domain: |{value:.6}| >= bound {bound:.6}")]
    OutOfBarrier { axis: usize, value: f64, bound: f64 },

    #[error(
        "constraint breached at t = {t:.4} s on axis {axis}: |x| = {value:.6} >= bound {bound:.6}"
    )]
    ConstraintBreach { t: f64, axis: usize, value: f64, bound: f64 },

    #[error("state became non-finite at t = {t:.4} s")]
    NonFinite { t: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("window [{t0}, {t1}] selects no trace samples")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("malformed trace file: {0}")]
    MalformedTrace(String),

    #[error("plot rendering failed: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("at t = {t:.4} s: {source}")]
    During {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stamps a simulation time onto an error raised inside the loop.
    pub fn at(self, t: f64) -> Error {
        Error::During { t, source: Box::new(self) }
    }

    /// Innermost error, unwrapping any time-stamp layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::During { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

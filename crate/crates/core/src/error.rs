use thiserror::Error;

/// Everything that can go wrong while configuring or advancing a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid needs at least 3 nodes per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("profile line {line} is not aligned with a grid line")]
    UnalignedProfile { line: String },

    #[error("value {value} outside admissible range [{lo}, {hi}] for {what}")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("conjugate gradients did not converge in {iterations} iterations (last residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    NoConvergence {
        iterations: usize,
        /// Relative residual after each iteration.
        history: Vec<f64>,
    },

    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: usize, detail: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SimError>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid parameters: {}", .0.join("; "))]
    Assumptions(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ SimError::AtStep { .. } => e,
            e => SimError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

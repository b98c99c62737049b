use std::path::PathBuf;

use crate::protocols::NetworkState;

/// Everything that can go wrong while synthesizing, simulating or analysing
/// a consensus network.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge (residual {residual:.3e})")]
    Convergence { what: &'static str, residual: f64 },

    #[error("Lyapunov operator is singular: A and -A share an eigenvalue")]
    SpectrumConflict,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("pair is not stabilizable: mode {re:+.6} {im:+.6}i is unstable and uncontrollable")]
    NotStabilizable { re: f64, im: f64 },

    #[error("pair is not detectable: mode {re:+.6} {im:+.6}i is unstable and unobservable")]
    NotDetectable { re: f64, im: f64 },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("graph class error: {0}")]
    GraphClass(String),

    #[error("synthesis error: {0}")]
    Synthesis(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing gain `{component}` required by {requirement}")]
    MissingGain {
        component: &'static str,
        requirement: &'static str,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("state diverged at t = {t}")]
    Divergence {
        t: f64,
        last_finite: Box<NetworkState>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    ///
    /// 2 configuration, 3 numerical failure, 4 divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Divergence { .. } => 4,
            Error::Convergence { .. }
            | Error::SpectrumConflict
            | Error::Singular(_)
            | Error::NotStabilizable { .. }
            | Error::NotDetectable { .. }
            | Error::Rank(_)
            | Error::Synthesis(_)
            | Error::Certification(_)
            | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

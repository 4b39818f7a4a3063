use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),

    #[error("no stable resting pose: {0}")]
    NoStablePose(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("joint limit violated: joint {joint} value {value} outside [{lo}, {hi}]")]
    JointLimit {
        joint: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("scene error: {0}")]
    Scene(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

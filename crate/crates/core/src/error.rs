use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt data: {0}")]
    CorruptData(String),
    #[error("too few frames: found {found}, need at least {needed}")]
    TooFewFrames { found: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing feature channel `{0}`")]
    MissingChannel(String),
    #[error("channel mismatch: model has {expected:?}, input has {found:?}")]
    ChannelMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("too few points: {points} points for {required} required")]
    TooFewPoints { points: usize, required: usize },
    #[error("component {0} degenerated (effective count ~ 0)")]
    DegenerateComponent(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("semantic assignment needs k = 3, got k = {0}")]
    WrongK(usize),
    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("frame {width}x{height} too small, need at least {min}x{min}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("unknown scene `{name}`; valid scenes: {}", valid.join(", "))]
    UnknownScene { name: String, valid: Vec<String> },
    #[error("missing ground truth for {0}")]
    MissingTruth(PathBuf),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn dims(expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 = configuration error, 3 = data error, 4 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::UnknownScene { .. }
            | Error::InvalidSpec(_)
            | Error::ChannelMismatch { .. }
            | Error::WrongK(_) => 2,
            Error::NonFinite(_) | Error::DegenerateComponent(_) => 4,
            _ => 3,
        }
    }
}

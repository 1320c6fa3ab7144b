use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "centered data has rank {achievable}, below the requested subspace dimension {requested}"
    )]
    RankDeficient { requested: usize, achievable: usize },

    #[error("basis is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("flow parameter {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error("invalid scenario count {m} for {frames} frames")]
    InvalidM { m: usize, frames: usize },

    #[error("cluster {cluster} has {members} members, needs at least {required}")]
    TooFewSamples {
        cluster: usize,
        members: usize,
        required: usize,
    },

    #[error("no platform satisfies the constraints")]
    NoFeasiblePlatform {
        diagnostics: Vec<PlatformDiagnostic>,
    },

    #[error(
        "missing performance record for scenario {scenario}, combo {combo}, platform {platform}"
    )]
    MissingRecord {
        scenario: String,
        combo: String,
        platform: String,
    },

    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },

    #[error("feature stream is empty")]
    EmptyStream,

    #[error("window has {frames} frames, needs at least {required}")]
    TooFewFrames { frames: usize, required: usize },

    #[error("window has no usable subspace at any dimension")]
    DegenerateWindow,

    #[error("scenario {scenario} has no label for platform {platform}")]
    UnlabeledScenario { scenario: String, platform: String },

    #[error("design profile has no scenarios")]
    EmptyProfile,

    #[error("window {window_id}: {source}")]
    Window {
        window_id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("trace has {trace} windows but ground truth has {truth}")]
    Misaligned { trace: usize, truth: usize },

    #[error("{path}: bad magic, not a matrix file")]
    BadMagic { path: PathBuf },

    #[error("{path}: payload has {found} bytes, header requires {expected}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("matrix of {rows}x{cols} f64 values exceeds addressable size")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("duplicate record ({scenario}, {combo}, {platform}) on lines {first_line} and {second_line}")]
    DuplicateKey {
        scenario: String,
        combo: String,
        platform: String,
        first_line: u64,
        second_line: u64,
    },

    #[error("line {line}: negative error value {value}")]
    NegativeError { line: u64, value: f64 },

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Best achievable mean error of one platform, reported when platform
/// selection fails. `None` means no combo was feasible or the cost cap
/// excluded the platform.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformDiagnostic {
    pub platform_id: String,
    pub cost: f64,
    pub within_cost: bool,
    pub best_mean_error: Option<f64>,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_window(self, window_id: usize) -> Self {
        Error::Window {
            window_id,
            source: Box::new(self),
        }
    }
}

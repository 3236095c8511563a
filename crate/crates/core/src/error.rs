use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The evaluation point lies on the directional axis (g = 0).
    #[error("degenerate point: g = 0 on the axis of revolution")]
    DegeneratePoint,

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("window out of bounds at voxel {0:?}")]
    WindowOutOfBounds([usize; 3]),

    #[error("landweber diverged at iteration {iteration}: residual {previous} -> {current}")]
    Divergence {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("parameter {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid-params",
            Error::DegeneratePoint => "degenerate-point",
            Error::InvalidSample(_) => "invalid-sample",
            Error::UnsupportedFamily(_) => "unsupported-family",
            Error::SizeLimit(_) => "size-limit",
            Error::InvalidPhantom(_) => "invalid-phantom",
            Error::WindowOutOfBounds(_) => "window-out-of-bounds",
            Error::Divergence { .. } => "divergence",
            Error::Element { source, .. } => source.kind(),
            Error::Dimension(_) => "dimension",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

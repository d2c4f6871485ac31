use thiserror::Error;

/// Errors raised by the camtomo pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cam: {0}")]
    InvalidCam(String),

    #[error("invalid hypersurface: {0}")]
    InvalidSurface(String),

    #[error("operation requires an ellipsoid cam")]
    PointCamUnsupported,

    #[error("affine map is not invertible")]
    SingularAffineMap,

    #[error("unsupported dimension n = {0} (only n = 2 and n = 3 are supported)")]
    UnsupportedDimension(usize),

    /// The level function has a vanishing gradient on the slice. Condition (E) rules this out.
    #[error("condition (E) violated: vanishing level-set gradient at parameter {at:?}")]
    DegenerateSlice { at: Vec<f64> },

    #[error("level set on the cam is not a closed curve ({0})")]
    OpenSlice(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("invalid regularization schedule: {0}")]
    InvalidSchedule(String),

    #[error("sinogram geometry hash {found} does not match configuration hash {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("forward projection failed at cam node {index} (omega = {omega:?}): {source}")]
    Projection {
        index: usize,
        omega: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration failed validation: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The innermost error below any stage or projection wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Projection { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

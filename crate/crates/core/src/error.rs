use std::io;

use thiserror::Error;

use crate::guidance::GuidanceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate extent: {0}")]
    DegenerateExtent(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Guidance(#[from] GuidanceError),

    #[error("all Gaussians transparent: opacity filter kept nothing")]
    AllTransparent,

    #[error("SDF level set missed grid; try expanding bounds (current margin {margin})")]
    LevelSetMissedGrid { margin: f64 },

    #[error("{stage} diverged at iteration {iteration}: {detail}")]
    Diverged { stage: Stage, iteration: usize, detail: String },

    #[error("internal error: {0}")]
    Internal(String),
}

/// Pipeline stage an optimisation error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Completion,
    Extraction,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Completion => "fractal completion",
            Stage::Extraction => "grid pulling",
        })
    }
}

impl Error {
    /// Process exit code: 2 bad input, 3 guidance or completion failure,
    /// 4 extraction failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precondition(_)
            | Error::DegenerateExtent(_)
            | Error::InvalidInput(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Image(_) => 2,
            Error::Guidance(_) | Error::Diverged { stage: Stage::Completion, .. } => 3,
            Error::AllTransparent | Error::LevelSetMissedGrid { .. } | Error::Diverged { stage: Stage::Extraction, .. } => 4,
            Error::Internal(_) => 1,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

use thiserror::Error;

use crate::numeric::Rat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative input to truncated subtraction: {0}")]
    NegativeInput(Rat),

    #[error("invalid rational literal {0:?}")]
    InvalidRational(String),

    #[error("points live in different spaces: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("unknown point id {0}")]
    UnknownPoint(usize),

    #[error("malformed metric: {0}")]
    MalformedMetric(String),

    #[error("malformed extension request: {0}")]
    InvalidRequest(String),

    #[error(
        "inadmissible request: |{a_i} - {a_j}| <= d({u_i},{u_j}) = {d} <= {a_i} + {a_j} fails"
    )]
    Inadmissible {
        u_i: usize,
        u_j: usize,
        a_i: Rat,
        a_j: Rat,
        d: Rat,
    },

    #[error("inconsistent requirements at stage {stage}: {detail}")]
    InconsistentRequirements { stage: u32, detail: String },

    #[error("anchor has {have} stages, stage {need} required")]
    ShortAnchor { have: usize, need: usize },

    #[error("balls do not intersect: {0}")]
    NoWitness(String),

    #[error("unknown space kind {0:?}")]
    UnknownSpaceKind(String),

    #[error("bad space parameters: {0}")]
    SpaceParams(String),

    #[error("dense point {index} out of range (space has {len})")]
    DenseOutOfRange { index: usize, len: usize },

    #[error("element not supported by space {space}: {detail}")]
    UnsupportedElement { space: String, detail: String },

    #[error("operation needs an exact distance oracle")]
    InexactOracle,

    #[error("radius schedule violated at stage {stage}: max radius {radius} > {bound}")]
    RadiusSchedule {
        stage: usize,
        radius: Rat,
        bound: Rat,
    },

    #[error("cluster stream is empty or contains an empty cluster")]
    EmptyStream,

    #[error("cluster stages {first} and {second} cannot both contain the point")]
    InconsistentMembership { first: usize, second: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported type: {0}")]
    UnsupportedType(String),

    #[error("type syntax error: {0}")]
    TypeParse(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

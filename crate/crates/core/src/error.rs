use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("variable count mismatch: {left} vs {right}")]
    VariableMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("connection is not flat: curvature of (d{i}, d{j}) is nonzero")]
    NotFlat { i: usize, j: usize },
    #[error("level {0} leaves no room for a level drop")]
    LevelTooLow(u32),
    #[error("inverse system carries no pre-nuclearity witness")]
    MissingWitness,
    #[error("witness radius {declared} at stage {stage} is below the needed {needed}")]
    WitnessViolated {
        stage: usize,
        declared: String,
        needed: String,
    },
    #[error("target is not bounded by the declared ball at stage {0}")]
    Unbounded(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("vector is not in the image")]
    NotInImage,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

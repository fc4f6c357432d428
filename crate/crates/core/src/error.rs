use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operation requires a finite torus, got the infinite space")]
    InfiniteSpace,
    #[error("degenerate normal: point coincides with the sphere center")]
    DegenerateNormal,
    #[error("unfolding ambiguity: step component {component} of size {size} is not below r/2")]
    UnfoldingAmbiguity { component: usize, size: f64 },
    #[error("contact resolution stalled after {iters} iterations")]
    ContactStalled { iters: usize },
    #[error("local time exhausted: level {level} beyond final local time {available}")]
    LocalTimeExhausted { level: f64, available: f64 },
    #[error("recurrent case has no infinite crossing rate")]
    RecurrentCase,
    #[error("WOS stalled after {jumps} jumps")]
    WosStalled { jumps: usize },
    #[error("underpowered: {0}")]
    Underpowered(String),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("geometry precondition violated: {0}")]
    Geometry(String),
}

pub type Result<T> = std::result::Result<T, Error>;

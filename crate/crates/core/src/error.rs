use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sites {first} and {second} coincide")]
    DuplicateSites { first: usize, second: usize },

    #[error("point {index} at ({x}, {y}) lies outside the unit square")]
    OutOfDomain { index: usize, x: f64, y: f64 },

    #[error("site count {count} outside 1..={max}")]
    SiteCount { count: usize, max: usize },

    #[error("degenerate polygon with {vertices} vertices")]
    DegeneratePolygon { vertices: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no {n}-firm configuration lets the {n}-th entrant break even at M = {market_size}")]
    InfeasibleN { n: usize, market_size: f64 },

    #[error("every {n}-firm configuration admits profitable entry at M = {market_size}")]
    DeterrenceImpossible { n: usize, market_size: f64 },

    #[error(
        "market-size interval [{lo}, {hi}] does not bracket the threshold \
         (blocked at lo: {blocked_lo}, blocked at hi: {blocked_hi})"
    )]
    BracketingFailure { lo: f64, hi: f64, blocked_lo: bool, blocked_hi: bool },
}

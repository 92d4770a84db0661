use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported derivative order {0} (max 4)")]
    DerivOrder(usize),
    #[error("nonlinearity is not differentiable: {0}")]
    NotSmooth(&'static str),
    #[error("invalid dimension {0}, expected 1 or 2")]
    Dimension(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("expression parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("newton failed: {0}")]
    Newton(String),
    #[error("continuation failed: {0}")]
    Continuation(String),
    #[error("integration failed at t = {t}: {msg}")]
    Integration { t: f64, msg: String },
    #[error("{0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

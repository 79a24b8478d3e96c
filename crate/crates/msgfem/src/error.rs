use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solvability error: {0}")]
    Solvability(String),
    #[error("iteration error: no convergence after {iterations} iterations (relative residual {residual:e})")]
    Iteration { iterations: usize, residual: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division error: {0}")]
    Division(String),
    #[error("cover error: {0}")]
    Cover(String),
    #[error("unsupported cover: {0}")]
    UnsupportedCover(String),
    #[error("unsupported patch: {0}")]
    UnsupportedPatch(String),
    #[error("width error: hat width {width} invalid for chain of {chain_len} nodes")]
    Width { width: usize, chain_len: usize },
    #[error("degenerate space: Cholesky breakdown at pivot {pivot}")]
    DegenerateSpace { pivot: usize },
    #[error("selection error: requested {requested} basis functions, {available} available")]
    Selection { requested: usize, available: usize },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

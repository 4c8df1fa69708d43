use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported group: {0}")]
    UnsupportedGroup(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("element does not close in the Lie algebra (re-expression residual {0:.3e})")]
    NotInAlgebra(f64),
    #[error("sampled Gram matrix is singular or indefinite: {0}")]
    SingularGram(String),
    #[error("sample count {got} is below the certified bound {need} for this dictionary; increase the sample count")]
    InsufficientSamples { got: usize, need: usize },
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

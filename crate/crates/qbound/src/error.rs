use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("function undefined at retained eigenvalue {0}")]
    Undefined(f64),
    #[error("not covariant (residual {0:.3e})")]
    NotCovariant(f64),
    #[error("sdp: {0}")]
    Sdp(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

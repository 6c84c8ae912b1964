use thiserror::Error;

/// Errors reported by the rate-model library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1 within tolerance")]
    NotNormalized(f64),
    #[error("dimension {0} is not a power of two in {{2,4,8,16}}")]
    BadDimension(usize),
    #[error("qubit index {index} out of range for {qubits}-qubit state")]
    IndexOutOfRange { index: usize, qubits: usize },
    #[error("channel is not trace preserving: sum of K^dag K deviates from identity by {0:.3e}")]
    NotCptp(f64),
    #[error("operator is not a valid POVM element: {0}")]
    InvalidPovm(String),
    #[error("operating point has zero yield")]
    ZeroYield,
    #[error("unphysical QBER combination: e_xy = {e_xy} < e_z/2 = {half_ez}")]
    UnphysicalQber { e_xy: f64, half_ez: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameter file error: {0}")]
    ParameterFile(String),
}

impl Error {
    pub fn invalid_parameter(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

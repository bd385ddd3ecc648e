use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("subordination did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("degenerate stability factor |Δ| = {delta:e}")]
    DegenerateJacobian { delta: f64 },
    #[error("degenerate two point quantity: {0}")]
    DegenerateTwoPoint(String),
    #[error("kernel could not be evaluated at ({z1}, {z2})")]
    DegenerateKernel { z1: String, z2: String },
    #[error("contour integral has imaginary residue {im:e} against real part {re:e}")]
    ImaginaryResidue { re: f64, im: f64 },
    #[error("universal variance forms disagree: double integral {double_integral}, fourier {fourier}")]
    FormulaMismatch { double_integral: f64, fourier: f64 },
    #[error("Haar decomposition undefined: |v_ii| = {0:e}")]
    PhaseDegenerate(f64),
    #[error("linear algebra failure: {0}")]
    SolverError(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample has zero standard deviation")]
    ZeroVariance,
    #[error("invalid configuration field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("sample {index}: {source}")]
    InSample { index: usize, source: Box<Error> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        if let Error::InSample { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::DegenerateJacobian { .. }
                | Error::DegenerateTwoPoint(_)
                | Error::DegenerateKernel { .. }
                | Error::ImaginaryResidue { .. }
                | Error::FormulaMismatch { .. }
                | Error::PhaseDegenerate(_)
                | Error::SolverError(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMeasure(_) => "InvalidMeasure",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::DegenerateJacobian { .. } => "DegenerateJacobian",
            Error::DegenerateTwoPoint(_) => "DegenerateTwoPoint",
            Error::DegenerateKernel { .. } => "DegenerateKernel",
            Error::ImaginaryResidue { .. } => "ImaginaryResidue",
            Error::FormulaMismatch { .. } => "FormulaMismatch",
            Error::PhaseDegenerate(_) => "PhaseDegenerate",
            Error::SolverError(_) => "SolverError",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::ZeroVariance => "ZeroVariance",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::Schema(_) => "SchemaError",
            Error::InSample { source, .. } => source.kind(),
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

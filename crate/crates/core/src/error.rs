use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("epsilon must lie in {range}, got {value}")]
    InvalidEpsilon { value: f64, range: &'static str },
    #[error("histogram has no nonzero cell")]
    EmptyHistogram,
    #[error("octree has no weighted leaf")]
    EmptyStructure,
    #[error("parameter {index} = {value} outside [{lo}, {hi}]")]
    ParameterOutOfRange { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("hyperplane coefficient {index} = {value} outside [{lo}, {hi}]")]
    CoefficientOutOfRange { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("scene generation gave up after {redraws} redraws")]
    RejectionOverflow { redraws: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input contains no correspondences")]
    EmptyInput,
    #[error("records do not share a comparable configuration: {0}")]
    MismatchedConfigs(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

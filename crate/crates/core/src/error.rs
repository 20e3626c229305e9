use std::path::PathBuf;

use thiserror::Error;

use crate::align::AlignRecord;

/// Errors produced by the comparison pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at row {row}: {message}")]
    Malformed { row: usize, message: String },

    #[error("non-finite value at row {row} (sample {id:?}), column {column}")]
    NonFinite {
        row: usize,
        id: String,
        column: usize,
    },

    #[error("duplicate sample id {id:?} at row {row}")]
    DuplicateId { row: usize, id: String },

    #[error("row {row}: expected {expected} values, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample count mismatch: {a} vs {b}")]
    CountMismatch { a: usize, b: usize },

    #[error("sample ids differ at index {index}: {a:?} vs {b:?}")]
    IdMismatch { index: usize, a: String, b: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cosine kernel is undefined for a zero vector")]
    ZeroVector,

    #[error("non-finite feature for sample {id:?}")]
    NonFiniteFeature { id: String },

    #[error("eigensolver failure: {0}")]
    Solver(String),

    #[error("imaginary eigenvalue residue {max_imag:e} exceeds {bound:e}")]
    ImaginaryResidue { max_imag: f64, bound: f64 },

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("top eigenvalue is not unique (relative gap {relative_gap:e})")]
    DegenerateTop { relative_gap: f64 },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("{n} samples exceeds the dense oracle cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("bandwidth search could not reach top eigenvalue {target} (last probe: sigma {sigma:e}, eigenvalue {reached})")]
    BandwidthUnreachable {
        target: f64,
        sigma: f64,
        reached: f64,
    },

    #[error("corollary does not apply: eigengap {gap:e} is not positive")]
    CorollaryInapplicable { gap: f64 },

    #[error("no side-A clusters to validate against")]
    NoClusters,

    #[error("alignment diverged at iteration {iteration}: spec-diff {value:e} exceeds 10x initial {initial:e}")]
    Divergence {
        iteration: usize,
        value: f64,
        initial: f64,
        history: Vec<AlignRecord>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Solver(_)
                | Error::ImaginaryResidue { .. }
                | Error::NonConvergence { .. }
                | Error::DegenerateTop { .. }
                | Error::NotPsd { .. }
                | Error::BandwidthUnreachable { .. }
                | Error::NonFiniteFeature { .. }
                | Error::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}

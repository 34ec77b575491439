use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix of {entries} entries exceeds the cap of {cap}")]
    SizeLimit { entries: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("site {site} out of range 1..={len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),

    #[error("eigenpair residual {residual:e} exceeds tolerance {tol:e} (index {index})")]
    EigenResidual { index: usize, residual: f64, tol: f64 },

    #[error("samples are not a polynomial of degree {degree}: max deviation {deviation:e}")]
    InconsistentSamples { degree: usize, deviation: f64 },

    #[error("singular argument: {0}")]
    SingularArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("q-integer [{k}]_q vanishes at this q")]
    RootOfUnityObstruction { k: usize },

    #[error("window is not invariant: e0 element {element:e} leaks out of index {index}")]
    Leakage { index: i64, element: f64 },

    #[error("auxiliary trace diverges: |lambda| = {lambda_abs} but the bound with safety margin is {bound}")]
    ConvergenceBound { lambda_abs: f64, bound: f64 },

    #[error("window K = {k} too small: tail estimate {tail:e} exceeds {target:e}; increase K")]
    WindowTooSmall { k: usize, tail: f64, target: f64 },

    #[error("Bethe roots are not admissible: {0}")]
    InadmissibleRoots(String),

    #[error("Newton iteration failed: {0}")]
    Divergence(String),

    #[error("Bethe vector norm {norm:e} is below 1e-10 (complete string collapse)")]
    StringCollapse { norm: f64 },

    #[error("vector is not a common eigenvector: residual {0:e}")]
    NotEigenvector(f64),

    #[error("ambiguous: {0}")]
    Ambiguous(String),

    #[error("unstable limit: Richardson estimates disagree by {0:e}")]
    UnstableLimit(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

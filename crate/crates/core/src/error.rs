use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BasisError {
    #[error("invalid dimension {0}: only d = 2 and d = 3 are supported")]
    InvalidDimension(usize),
    #[error("invalid cutoff {0}: must be at least 1")]
    InvalidCutoff(usize),
    #[error("cutoff {0} exceeds the supported maximum of 64")]
    CutoffTooLarge(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("grid size {grid} cannot represent the basis; need at least {required}")]
    GridTooSmall { grid: usize, required: usize },
    #[error("field and grid dimensions differ ({field} vs {grid})")]
    DimensionMismatch { field: usize, grid: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("grid size {grid} is not alias-free for this product; need at least {required}")]
    InsufficientGrid { grid: usize, required: usize },
    #[error("non-finite value in absorption term (upstream blow-up)")]
    NonFinite,
    #[error("operator configuration: {0}")]
    InvalidConfig(String),
    #[error("truncation cutoff {m} exceeds basis cutoff {n}")]
    CutoffTooLarge { m: usize, n: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Error, PartialEq)]
pub enum MollifyError {
    #[error("width h = {h} is smaller than 2·dt = {min}; kernel unresolved")]
    KernelUnresolved { h: f64, min: f64 },
    #[error("width h = {h} must lie in (0, {span})")]
    WidthOutOfRange { h: f64, span: f64 },
    #[error("time series needs at least two nodes")]
    TooShort,
}

#[derive(Debug, Error, PartialEq)]
pub enum IntegratorError {
    #[error("guard tripped at t = {time}: |u|_H reached {norm}")]
    GuardTripped { time: f64, norm: f64 },
    #[error("noise record does not match the run (expected {expected}, found {found})")]
    RecordMismatch { expected: String, found: String },
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("malformed snapshot: {0}")]
    Malformed(String),
}

/// Failures writing or reading reports and manifests.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: type mismatch: {message}")]
    TypeMismatch { line: usize, message: String },
    #[error("invalid value for `{field}`: rule \"{rule}\" violated (got {value})")]
    Constraint {
        field: String,
        rule: String,
        value: String,
    },
    #[error("parameter regime refused: {0}")]
    Regime(String),
    #[error("initial condition: {0}")]
    Initial(String),
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("trajectory carries no noise record")]
    MissingNoiseRecord,
    #[error("replayed state differs from stored trajectory at t = {0}")]
    ReplayMismatch(f64),
    #[error("parameter regime outside the uniqueness theorem: {0}")]
    Regime(String),
    #[error("invalid study: {0}")]
    Invalid(String),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid noise parameter `{field}`: rule \"{rule}\" violated (got {value})")]
    Invalid {
        field: String,
        rule: String,
        value: String,
    },
    #[error("direction preset `{name}` has no modes in a basis with cutoff {n}")]
    EmptyDirection { name: String, n: usize },
    #[error("horizon {horizon} is not an integer multiple of dt = {dt}")]
    NonIntegerSteps { horizon: f64, dt: f64 },
    #[error("cannot coarsen {steps} steps by factor {factor}")]
    BadCoarsening { steps: usize, factor: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

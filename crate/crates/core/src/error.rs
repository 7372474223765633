use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("{op}: {message}")]
    BadOperand { op: &'static str, message: String },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("backward root must be scalar, got shape {shape}")]
    NonScalarRoot { shape: String },
    #[error("gaussian log-density needs sigma > 0, got {value}")]
    SigmaNotPositive { value: f64 },
    #[error("duplicate parameter name {name}")]
    DuplicateParam { name: String },
    #[error("unknown parameter {name}")]
    UnknownParam { name: String },
    #[error("parameter {name} is frozen and cannot be updated")]
    FrozenParam { name: String },
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: String },
    #[error("control clock: {message}")]
    Clock { message: String },
    #[error("action has {got} components, the {n_links}-link swimmer needs {expected}")]
    BadAction {
        got: usize,
        expected: usize,
        n_links: usize,
    },
    #[error("swimmer state became non-finite during integration")]
    NonFiniteState,
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("config: {message}")]
    Config { message: String },
    #[error("config field {field}: {message}")]
    ConfigValue { field: String, message: String },
    #[error("checkpoint: {message}")]
    Checkpoint { message: String },
    #[error("checkpoint array {name}: shape {got} does not match configured {expected}")]
    CheckpointShape {
        name: String,
        got: String,
        expected: String,
    },
    #[error("worker {index} panicked: {message}")]
    WorkerPanic { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input (config/CLI) rather than a
    /// failure at runtime; the CLI maps these to exit code 1.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::ConfigValue { .. })
    }
}

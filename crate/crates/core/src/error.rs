use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes used by the command line tool.
pub mod exit_code {
    pub const SUCCESS: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const BACKEND: u8 = 2;
    pub const INTERNAL: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input could not be parsed. `offset` is a byte offset into the input.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// A tree violates a structural invariant. `span` names the offending node.
    #[error("invalid tree node [{}, {}]: {message}", span.0, span.1)]
    Validation { span: (usize, usize), message: String },

    #[error("corpus error: {0}")]
    Corpus(String),

    /// Sentence text and tree text disagree. `offset` is a character offset
    /// into the sentence source text.
    #[error("alignment error at char {offset}: {message}")]
    Alignment { offset: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scorer protocol error{}: {message}", id.map(|i| format!(" (request {i})")).unwrap_or_default())]
    Protocol { id: Option<u64>, message: String },

    #[error("scorer transport error: {0}")]
    Transport(String),

    #[error("scorer returned no score for request ids {missing:?}")]
    PartialResponse { missing: Vec<u64> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Maps the error onto the command line exit code contract.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Protocol { .. } | Error::Transport(_) | Error::PartialResponse { .. } => {
                exit_code::BACKEND
            }
            Error::Invariant(_) => exit_code::INTERNAL,
            _ => exit_code::INPUT,
        }
    }
}

/// Converts a serde_json error into a [`Error::Format`] with a byte offset
/// computed from the reported line and column.
pub(crate) fn json_format_error(input: &str, err: &serde_json::Error) -> Error {
    let line = err.line().max(1);
    let column = err.column();
    let line_start: usize = input
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    let offset = (line_start + column.saturating_sub(1)).min(input.len());
    Error::Format { offset, message: err.to_string() }
}

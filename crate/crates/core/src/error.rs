use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown event type `{0}`")]
    UnknownEventType(String),

    #[error("span [{start}, {end}) out of bounds (length {len}) in {context}")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
        context: String,
    },

    #[error("slot <arg{0}> does not exist in the template")]
    UnknownSlot(usize),

    #[error("emitted token `{emitted}` does not match template literal `{expected}`")]
    InconsistentState { expected: String, emitted: String },

    #[error("memory store is empty")]
    EmptyMemory,

    #[error("memory and template segments need {required} tokens but the limit is {max_len}")]
    InputTooLong { required: usize, max_len: usize },

    #[error("token distribution sums to {sum}, expected 1")]
    DegenerateDistribution { sum: f64 },

    #[error("no training pairs supplied")]
    EmptyTraining,

    #[error("sidecar protocol error: {0}")]
    Protocol(String),

    #[error("sidecar did not reply within {0:?}")]
    Timeout(std::time::Duration),

    #[error("span is empty")]
    EmptySpan,

    #[error("prediction refers to unknown event {doc_id}/{event_id}")]
    KeyMismatch { doc_id: String, event_id: String },

    #[error("event {event_id}: {source}")]
    Event {
        event_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.to_string(),
        }
    }

    pub fn in_event(self, event_id: &str) -> Self {
        Error::Event {
            event_id: event_id.to_string(),
            source: Box::new(self),
        }
    }
}

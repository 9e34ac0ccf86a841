use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the registration pipeline.
///
/// The variants are deliberately coarse: callers that need to distinguish
/// failure classes (the CLI maps them to exit codes) match on the variant,
/// while the message carries the specifics.
#[derive(Debug, Error)]
pub enum MorphError {
    /// Underlying filesystem failure (missing file, permission, short read).
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its content did not parse under the declared
    /// format. `line` is 1-based; 0 means the location is not line-addressable
    /// (e.g. inside a binary section).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Inputs parsed but violate a semantic precondition (bad mesh topology,
    /// degenerate landmark sets, inconsistent partition specs, ...).
    #[error("{0}")]
    Invalid(String),

    /// The numerical solve itself failed (singular system, divergence).
    #[error("{0}")]
    Solver(String),
}

impl MorphError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MorphError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        MorphError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Prefix the message with a pipeline stage name, preserving the variant.
    ///
    /// Used by composite operations so that e.g. a partition failure inside
    /// the pre-warp pipeline still reads `pre-warp/label_parts: ...` without
    /// losing its validation/solver classification.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            MorphError::Invalid(msg) => MorphError::Invalid(format!("{stage}: {msg}")),
            MorphError::Solver(msg) => MorphError::Solver(format!("{stage}: {msg}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, MorphError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_prefix_keeps_variant() {
        let err = MorphError::Invalid("non-simple boundary".into()).in_stage("trace_boundary");
        match err {
            MorphError::Invalid(msg) => assert_eq!(msg, "trace_boundary: non-simple boundary"),
            _ => panic!("variant changed"),
        }
    }

    #[test]
    fn parse_error_formats_location() {
        let err = MorphError::parse("landmarks.txt", 3, "expected 4 fields");
        assert_eq!(err.to_string(), "landmarks.txt:3: expected 4 fields");
    }
}

use std::io;
use std::path::Path;

use uuis_core::Error;

/// Domain error or I/O trouble around it.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Failure {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Failure::Io { context: context.into(), source }
    }

    pub fn at(path: &Path, source: io::Error) -> Self {
        Failure::io(path.display().to_string(), source)
    }

    pub fn domain(&self) -> Option<&Error> {
        match self {
            Failure::Domain(e) => Some(e),
            Failure::Io { .. } => None,
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use uuis_core::{Error, Notification, Result, Transport};

/// Appends each notification as one JSON line to a local file.
#[derive(Clone, Debug)]
pub struct FileTransport {
    path: PathBuf,
}

#[derive(Serialize)]
struct Line<'a> {
    id: &'a str,
    recipient: &'a str,
    subject: &'a str,
    body: &'a str,
    created_at: u64,
}

impl FileTransport {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileTransport { path: path.into() }
    }

    /// `<store>.outbox.jsonl` next to the store file.
    pub fn beside(store_path: &Path) -> Self {
        let mut name = store_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".outbox.jsonl");
        FileTransport::new(store_path.with_file_name(name))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Transport for FileTransport {
    fn deliver(&mut self, n: &Notification) -> Result<()> {
        let line = Line {
            id: n.id.as_str(),
            recipient: n.recipient_id.as_str(),
            subject: &n.subject,
            body: &n.body,
            created_at: n.created_at.0,
        };
        let mut text = serde_json::to_string(&line).map_err(|e| Error::TransportFailure(e.to_string()))?;
        text.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::TransportFailure(format!("{}: {e}", self.path.display())))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::TransportFailure(e.to_string()))?;
        file.flush().map_err(|e| Error::TransportFailure(e.to_string()))
    }
}

/// Drops everything; for stores without a file.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullTransport;

impl Transport for NullTransport {
    fn deliver(&mut self, _: &Notification) -> Result<()> {
        Ok(())
    }
}

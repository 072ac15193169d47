//! File-backed store: the canonical snapshot document, rewritten atomically
//! after every commit, guarded by an exclusive lock file.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::Write;
use std::path::{Path, PathBuf};

use uuis_core::{Result as CoreResult, State, Store, Txn};

use crate::clock::Clock;
use crate::failure::{Failure, Outcome};

pub struct FileStore {
    store: Store,
    path: Option<PathBuf>,
    _lock: Option<File>,
}

impl FileStore {
    /// In-memory store, nothing is written.
    pub fn memory(store: Store) -> Self {
        FileStore { store, path: None, _lock: None }
    }

    /// Opens (or starts) the store at `path`, holding its lock until drop.
    pub fn open(path: &Path) -> Outcome<Self> {
        let lock_path = lock_path(path);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| Failure::at(&lock_path, e))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => {
                return Err(Failure::io(
                    format!("{}", path.display()),
                    std::io::Error::new(std::io::ErrorKind::WouldBlock, "store is locked by another process"),
                ))
            }
            Err(TryLockError::Error(e)) => return Err(Failure::at(&lock_path, e)),
        }
        let store = load(path)?;
        Ok(FileStore { store, path: Some(path.to_path_buf()), _lock: Some(lock) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn state(&self) -> &State {
        self.store.state()
    }

    pub fn export(&self) -> String {
        self.store.export()
    }

    /// Runs `work` in one transaction and persists the result. When the
    /// file cannot be written the in-memory state is reloaded from disk so
    /// memory never runs ahead of the file.
    pub fn transact<T>(&mut self, clock: &dyn Clock, work: impl FnOnce(&mut Txn<'_>) -> CoreResult<T>) -> Outcome<T> {
        let now = clock.now().max(self.store.state().last_modified());
        let out = self.store.transact(now, work)?;
        self.persist()?;
        Ok(out)
    }

    /// Replaces the whole state with a snapshot document.
    pub fn restore(&mut self, document: &str, force: bool) -> Outcome<()> {
        self.store.restore(document, force)?;
        self.persist()
    }

    fn persist(&mut self) -> Outcome<()> {
        let Some(path) = self.path.clone() else { return Ok(()) };
        if let Err(e) = write_atomic(&path, self.store.export().as_bytes()) {
            self.store = load(&path)?;
            return Err(e);
        }
        Ok(())
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    path.with_file_name(name)
}

fn load(path: &Path) -> Outcome<Store> {
    match fs::read_to_string(path) {
        Ok(doc) if doc.trim().is_empty() => Ok(Store::new()),
        Ok(doc) => Ok(Store::from_snapshot(&doc)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Store::new()),
        Err(e) => Err(Failure::at(path, e)),
    }
}

/// Writes through a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::at(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::at(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Failure::at(path, e))?;
    tmp.persist(path).map_err(|e| Failure::at(path, e.error))?;
    Ok(())
}

use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use uuis_core::{Result as CoreResult, State, Transport, Txn};

use crate::clock::{Clock, SystemClock};
use crate::config::Config;
use crate::deadline::WallDeadline;
use crate::failure::Outcome;
use crate::outbox::{FileTransport, NullTransport};
use crate::password::Hasher;
use crate::persist::FileStore;
use crate::session::{LoginPolicy, Sessions};

/// Everything a request handler needs. Shared behind an `Arc`.
pub struct App {
    store: RwLock<FileStore>,
    transport: Mutex<Box<dyn Transport + Send>>,
    pub sessions: Sessions,
    pub config: Config,
    pub clock: Arc<dyn Clock>,
    pub hasher: Hasher,
    row_delay: Option<Duration>,
}

impl App {
    /// Notifications go to a JSONL file beside the store, or nowhere for an
    /// in-memory store.
    pub fn new(store: FileStore, config: Config) -> Self {
        let transport: Box<dyn Transport + Send> = match store.path() {
            Some(p) => Box::new(FileTransport::beside(p)),
            None => Box::new(NullTransport),
        };
        App {
            store: RwLock::new(store),
            transport: Mutex::new(transport),
            sessions: Sessions::default(),
            config,
            clock: Arc::new(SystemClock),
            hasher: Hasher::default(),
            row_delay: None,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_hasher(mut self, hasher: Hasher) -> Self {
        self.hasher = hasher;
        self
    }

    pub fn with_transport(self, transport: Box<dyn Transport + Send>) -> Self {
        *self.transport.lock().expect("transport") = transport;
        self
    }

    /// Slows every scanned row of searches and reports; for timing tests.
    pub fn with_row_delay(mut self, delay: Duration) -> Self {
        self.row_delay = Some(delay);
        self
    }

    pub fn read<T>(&self, f: impl FnOnce(&State) -> T) -> T {
        f(self.store.read().expect("store lock").state())
    }

    pub fn export(&self) -> String {
        self.store.read().expect("store lock").export()
    }

    /// One transaction: `work`, then a drain of the outbox, then a save.
    pub fn mutate<T>(&self, work: impl FnOnce(&mut Txn<'_>) -> CoreResult<T>) -> Outcome<T> {
        let mut store = self.store.write().expect("store lock");
        let mut transport = self.transport.lock().expect("transport");
        store.transact(self.clock.as_ref(), |t| {
            let out = work(t)?;
            t.drain_outbox(transport.as_mut())?;
            Ok(out)
        })
    }

    pub fn deadline(&self) -> WallDeadline {
        WallDeadline::after(self.config.query_timeout).with_row_delay(self.row_delay)
    }

    pub fn login_policy(&self) -> LoginPolicy<'_> {
        LoginPolicy { hasher: self.hasher, ttl: self.config.session_ttl, admin_cidrs: &self.config.admin_cidrs }
    }
}

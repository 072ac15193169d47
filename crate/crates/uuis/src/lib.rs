//! Host side of the university inventory service: configuration, password
//! digests, sessions, the file-backed store, CSV and outbox I/O, the HTTP
//! API and the operator CLI. The domain lives in `uuis-core`.

pub mod api;
pub mod app;
pub mod cli;
pub mod clock;
pub mod config;
pub mod csvio;
pub mod deadline;
pub mod failure;
pub mod outbox;
pub mod password;
pub mod persist;
pub mod session;

pub use uuis_core as core;

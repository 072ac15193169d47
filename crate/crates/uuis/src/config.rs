use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use ipnet::IpNet;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(8 * 60 * 60);
pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_HTTP_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE_PATH: &str = "uuis-store.json";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{var}: {reason}")]
pub struct ConfigError {
    pub var: &'static str,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub store_path: PathBuf,
    pub http_addr: SocketAddr,
    pub session_ttl: Duration,
    /// Networks level 1+ users must log in from. Empty disables the rule.
    pub admin_cidrs: Vec<IpNet>,
    pub query_timeout: Duration,
    /// Directory served under `/`.
    pub web_root: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store_path: PathBuf::from(DEFAULT_STORE_PATH),
            http_addr: DEFAULT_HTTP_ADDR.parse().expect("valid default address"),
            session_ttl: DEFAULT_SESSION_TTL,
            admin_cidrs: Vec::new(),
            query_timeout: DEFAULT_QUERY_TIMEOUT,
            web_root: None,
        }
    }
}

impl Config {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Builds a config from any variable source; unset variables keep their
    /// defaults.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        if let Some(v) = get("UUIS_STORE_PATH").filter(|v| !v.is_empty()) {
            c.store_path = PathBuf::from(v);
        }
        if let Some(v) = get("UUIS_HTTP_ADDR").filter(|v| !v.is_empty()) {
            c.http_addr = v.parse().map_err(|e| bad("UUIS_HTTP_ADDR", e))?;
        }
        if let Some(v) = get("UUIS_SESSION_TTL_SECONDS").filter(|v| !v.is_empty()) {
            let secs: u64 = v.parse().map_err(|e| bad("UUIS_SESSION_TTL_SECONDS", e))?;
            if secs == 0 {
                return Err(bad("UUIS_SESSION_TTL_SECONDS", "must be positive"));
            }
            c.session_ttl = Duration::from_secs(secs);
        }
        if let Some(v) = get("UUIS_ADMIN_CIDRS") {
            c.admin_cidrs = parse_cidrs(&v).map_err(|e| bad("UUIS_ADMIN_CIDRS", e))?;
        }
        if let Some(v) = get("UUIS_QUERY_TIMEOUT_MS").filter(|v| !v.is_empty()) {
            let ms: u64 = v.parse().map_err(|e| bad("UUIS_QUERY_TIMEOUT_MS", e))?;
            if ms == 0 {
                return Err(bad("UUIS_QUERY_TIMEOUT_MS", "must be positive"));
            }
            c.query_timeout = Duration::from_millis(ms);
        }
        if let Some(v) = get("UUIS_WEB_ROOT").filter(|v| !v.is_empty()) {
            c.web_root = Some(PathBuf::from(v));
        }
        Ok(c)
    }
}

/// Comma separated networks; a bare address is a single-host network.
pub fn parse_cidrs(text: &str) -> Result<Vec<IpNet>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<IpNet>()
                .or_else(|_| s.parse::<std::net::IpAddr>().map(IpNet::from))
                .map_err(|_| format!("{s} is not a network"))
        })
        .collect()
}

fn bad(var: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError { var, reason: reason.to_string() }
}

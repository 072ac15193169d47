//! Bearer sessions and the login rules.

use std::collections::HashMap;
use std::net::IpAddr;
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::URL_SAFE_NO_PAD as B64URL;
use base64::Engine;
use ipnet::IpNet;
use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};
use uuis_core::{Id, State, Timestamp};

use crate::password::{self, Hasher};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub user_id: Id,
    pub created_at: Timestamp,
    pub expires_at: Timestamp,
    pub client_address: Option<IpAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LoginError {
    #[error("authentication failed: unknown user name or wrong password")]
    AuthenticationFailed,
    #[error("account is inactive")]
    AccountInactive,
    #[error("administrative accounts must log in from an administration computer")]
    AdminNetworkRequired,
}

impl LoginError {
    pub fn code(self) -> &'static str {
        match self {
            LoginError::AuthenticationFailed => "authentication_failed",
            LoginError::AccountInactive => "account_inactive",
            LoginError::AdminNetworkRequired => "admin_network_required",
        }
    }
}

pub struct LoginPolicy<'a> {
    pub hasher: Hasher,
    pub ttl: Duration,
    pub admin_cidrs: &'a [IpNet],
}

/// Live sessions, keyed by the SHA-256 of their token so the table never
/// holds usable credentials.
#[derive(Default)]
pub struct Sessions {
    live: Mutex<HashMap<[u8; 32], Session>>,
}

fn key(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

fn fresh_token() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    B64URL.encode(bytes)
}

impl Sessions {
    pub fn login(
        &self,
        state: &State,
        policy: &LoginPolicy<'_>,
        username: &str,
        password: &str,
        client: Option<IpAddr>,
        now: Timestamp,
    ) -> Result<Session, LoginError> {
        let Some(user) = state.user_by_username(username) else {
            policy.hasher.waste(password);
            return Err(LoginError::AuthenticationFailed);
        };
        if !password::verify(password, &user.password_digest) {
            return Err(LoginError::AuthenticationFailed);
        }
        if !user.active {
            return Err(LoginError::AccountInactive);
        }
        if user.level.is_admin() && !policy.admin_cidrs.is_empty() {
            let inside = client.is_some_and(|ip| policy.admin_cidrs.iter().any(|n| n.contains(&ip)));
            if !inside {
                return Err(LoginError::AdminNetworkRequired);
            }
        }
        let session = Session {
            token: fresh_token(),
            user_id: user.id.clone(),
            created_at: now,
            expires_at: Timestamp(now.0.saturating_add(policy.ttl.as_secs())),
            client_address: client,
        };
        self.live.lock().expect("session table").insert(key(&session.token), session.clone());
        Ok(session)
    }

    /// The session behind `token` while it is unexpired.
    pub fn authenticate(&self, token: &str, now: Timestamp) -> Option<Session> {
        let mut live = self.live.lock().expect("session table");
        let k = key(token);
        match live.get(&k) {
            Some(s) if now < s.expires_at => Some(s.clone()),
            Some(_) => {
                live.remove(&k);
                None
            }
            None => None,
        }
    }

    /// Idempotent.
    pub fn logout(&self, token: &str) {
        self.live.lock().expect("session table").remove(&key(token));
    }

    pub fn len(&self) -> usize {
        self.live.lock().expect("session table").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Password digests: PBKDF2-HMAC-SHA256, encoded as
//! `pbkdf2-sha256$<iterations>$<salt>$<hash>` with unpadded base64 parts.

use base64::engine::general_purpose::STANDARD_NO_PAD as B64;
use base64::Engine;
use rand::RngCore;
use sha2::Sha256;
use subtle::ConstantTimeEq;
use uuis_core::PasswordDigest;

pub const DEFAULT_ITERATIONS: u32 = 210_000;
const SCHEME: &str = "pbkdf2-sha256";
const SALT_LEN: usize = 16;
const HASH_LEN: usize = 32;

#[derive(Clone, Copy, Debug)]
pub struct Hasher {
    pub iterations: u32,
}

impl Default for Hasher {
    fn default() -> Self {
        Hasher { iterations: DEFAULT_ITERATIONS }
    }
}

impl Hasher {
    pub fn hash(&self, password: &str) -> PasswordDigest {
        let mut salt = [0u8; SALT_LEN];
        rand::rng().fill_bytes(&mut salt);
        let hash = derive(password, &salt, self.iterations);
        PasswordDigest::new(format!("{SCHEME}${}${}${}", self.iterations, B64.encode(salt), B64.encode(hash)))
    }

    /// Burns the same work as a real verification; used for unknown
    /// usernames so both failures take equally long.
    pub fn waste(&self, password: &str) {
        let _ = derive(password, &[0u8; SALT_LEN], self.iterations);
    }
}

/// Constant-time check of `password` against a stored digest. Malformed
/// digests never verify.
pub fn verify(password: &str, digest: &PasswordDigest) -> bool {
    let Some((iterations, salt, expected)) = decode(digest.as_str()) else {
        return false;
    };
    let actual = derive(password, &salt, iterations);
    actual.as_slice().ct_eq(expected.as_slice()).into()
}

fn decode(encoded: &str) -> Option<(u32, Vec<u8>, Vec<u8>)> {
    let mut parts = encoded.split('$');
    if parts.next()? != SCHEME {
        return None;
    }
    let iterations: u32 = parts.next()?.parse().ok().filter(|n| *n > 0)?;
    let salt = B64.decode(parts.next()?).ok()?;
    let hash = B64.decode(parts.next()?).ok()?;
    if parts.next().is_some() || hash.len() != HASH_LEN {
        return None;
    }
    Some((iterations, salt, hash))
}

fn derive(password: &str, salt: &[u8], iterations: u32) -> [u8; HASH_LEN] {
    let mut out = [0u8; HASH_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    out
}

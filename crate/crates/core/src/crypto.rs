//! Fixed-width digests and the pluggable primitive provider used for
//! pseudonyms and issuer tags.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use sha2::{Digest as _, Sha256};

/// A 32-byte digest or authentication code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses exactly 64 lowercase hex characters.
    pub fn from_hex(s: &str) -> Option<Digest> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return None;
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

impl FromStr for Digest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digest::from_hex(s).ok_or_else(|| format!("expected 64 lowercase hex digits, got `{s}`"))
    }
}

/// SHA-256 over the concatenation of `parts`.
pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// HMAC-SHA-256 keyed by `key` over the concatenation of `parts`.
pub fn hmac_sha256(key: &[u8], parts: &[&[u8]]) -> Digest {
    let mut mac = Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts keys of any length");
    for p in parts {
        mac.update(p);
    }
    Digest(mac.finalize().into_bytes().into())
}

/// Abstract 32-byte digest and authentication functions.
///
/// Credentials are only ever compared against values produced by the same
/// provider, so swapping the provider changes every pseudonym and tag but
/// none of the protocol logic.
pub trait Primitives {
    fn digest(&self, parts: &[&[u8]]) -> Digest;
    fn mac(&self, key: &[u8], parts: &[&[u8]]) -> Digest;

    /// Constant-time tag comparison.
    fn mac_eq(&self, a: &Digest, b: &Digest) -> bool {
        a.0.iter().zip(b.0.iter()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
    }
}

/// SHA-256 digests with HMAC-SHA-256 tags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sha256Hmac;

impl Primitives for Sha256Hmac {
    fn digest(&self, parts: &[&[u8]]) -> Digest {
        sha256(parts)
    }

    fn mac(&self, key: &[u8], parts: &[&[u8]]) -> Digest {
        hmac_sha256(key, parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256(&[b"ab", b"c"]).to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hmac_rfc4231_case_2() {
        let tag = hmac_sha256(b"Jefe", &[b"what do ya want ", b"for nothing?"]);
        assert_eq!(
            tag.to_hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }

    #[test]
    fn hex_parsing_is_strict() {
        let d = sha256(&[b"x"]);
        assert_eq!(Digest::from_hex(&d.to_hex()), Some(d));
        assert_eq!(Digest::from_hex(&d.to_hex().to_uppercase()), None);
        assert_eq!(Digest::from_hex(&d.to_hex()[1..]), None);
    }
}

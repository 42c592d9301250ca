//! Small value types shared by every module.

use std::fmt;
use std::str::FromStr;

use crate::crypto::Digest;

/// Simulated time. One tick is one second.
pub type Tick = u64;

pub const SECONDS_PER_DAY: Tick = 86_400;

/// 16-byte assembly identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AssemblyId(pub [u8; 16]);

impl AssemblyId {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    /// Derives an identifier from a human label.
    pub fn from_label(label: &str) -> AssemblyId {
        let d = crate::crypto::sha256(&[b"assembly-id", label.as_bytes()]);
        let mut out = [0u8; 16];
        out.copy_from_slice(&d.0[..16]);
        AssemblyId(out)
    }
}

impl fmt::Display for AssemblyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for AssemblyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AssemblyId({self})")
    }
}

impl FromStr for AssemblyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 16];
        if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(format!("expected 32 lowercase hex digits, got `{s}`"));
        }
        hex::decode_to_slice(s, &mut out).map_err(|e| e.to_string())?;
        Ok(AssemblyId(out))
    }
}

/// Assembly-scoped participant pseudonym.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pseudonym(pub Digest);

impl Pseudonym {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0 .0
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pseudonym({}..)", &self.0.to_hex()[..12])
    }
}

impl FromStr for Pseudonym {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Pseudonym)
    }
}

/// A positive rational rate in events per second.
///
/// Kept as an exact fraction so token arithmetic never rounds.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u64,
    den: u64,
}

impl Rate {
    /// Returns `None` unless both parts are positive.
    pub fn new(num: u64, den: u64) -> Option<Rate> {
        if num == 0 || den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(Rate {
            num: num / g,
            den: den / g,
        })
    }

    pub fn per_second(n: u64) -> Rate {
        Rate::new(n, 1).expect("rate must be positive")
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// Whole events released over `[0, elapsed)`, i.e. `floor(rate * elapsed)`.
    pub fn events_by(&self, elapsed: Tick) -> u64 {
        ((elapsed as u128 * self.num as u128) / self.den as u128) as u64
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rate({self})")
    }
}

impl FromStr for Rate {
    type Err = String;

    /// Accepts `n` or `n/d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected a positive rate `n` or `n/d`, got `{s}`");
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: u64 = n.parse().map_err(|_| bad())?;
        let d: u64 = d.parse().map_err(|_| bad())?;
        Rate::new(n, d).ok_or_else(bad)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_parses_and_reduces() {
        let r: Rate = "2/4".parse().unwrap();
        assert_eq!((r.num(), r.den()), (1, 2));
        assert_eq!(r.to_string(), "1/2");
        assert!("0".parse::<Rate>().is_err());
        assert!("1/0".parse::<Rate>().is_err());
        assert!(Rate::per_second(1) > "1/2".parse().unwrap());
    }

    #[test]
    fn events_by_is_floor() {
        let r: Rate = "1/3".parse().unwrap();
        let got: Vec<u64> = (0..7).map(|t| r.events_by(t)).collect();
        assert_eq!(got, vec![0, 0, 0, 1, 1, 1, 2]);
    }
}

//! Threshold escrow of participant identities.
//!
//! Each secret byte is shared independently with a random polynomial over
//! GF(257). Any `k` holders reconstruct the byte by Lagrange interpolation
//! at zero; `k - 1` holders learn nothing, which [`secrecy_check`] verifies
//! by exhibiting a consistent polynomial for every candidate byte.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::crypto::{sha256, Digest};
use crate::identity::Identity;
use crate::types::{AssemblyId, Pseudonym, Tick};

/// Field modulus.
pub const P: u16 = 257;
/// Largest supported share count; holder indices are `1..=MAX_SHARES`.
pub const MAX_SHARES: u16 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevocationError {
    #[error("bad threshold: k={k}, n={n} (need 1 <= k <= n <= 256)")]
    BadThreshold { k: u16, n: u16 },
    #[error("secret is empty")]
    EmptySecret,
    #[error("need {needed} distinct shares, got {got}")]
    InsufficientShares { needed: u16, got: usize },
    #[error("shares are inconsistent: {0}")]
    InconsistentShares(&'static str),
    #[error("revocation case is closed")]
    CaseClosed,
    #[error("share from holder {holder} does not match the escrow commitment")]
    ShareMismatch { holder: u16 },
    #[error("malformed share encoding: {0}")]
    Malformed(&'static str),
}

fn add(a: u16, b: u16) -> u16 {
    ((a as u32 + b as u32) % P as u32) as u16
}

fn sub(a: u16, b: u16) -> u16 {
    ((a as u32 + P as u32 - b as u32) % P as u32) as u16
}

fn mul(a: u16, b: u16) -> u16 {
    ((a as u32 * b as u32) % P as u32) as u16
}

/// Multiplicative inverse by Fermat; `a` must be nonzero.
fn inv(a: u16) -> u16 {
    debug_assert!(!a.is_multiple_of(P));
    let mut base = a as u32 % P as u32;
    let mut exp = (P - 2) as u32;
    let mut acc = 1u32;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % P as u32;
        }
        base = base * base % P as u32;
        exp >>= 1;
    }
    acc as u16
}

/// Horner evaluation, coefficients in ascending degree.
fn eval(coeffs: &[u16], x: u16) -> u16 {
    coeffs.iter().rev().fold(0, |acc, &c| add(mul(acc, x), c))
}

/// One holder's share of an escrowed secret.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Share {
    pub holder_index: u16,
    pub values: Vec<u16>,
}

impl Share {
    /// `holder_index (1 byte) || length (u32 BE) || values (u16 BE each)`.
    ///
    /// Holder index 256 is written as byte `0`, which no valid index uses.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 2 * self.values.len());
        out.push((self.holder_index % 256) as u8);
        out.extend_from_slice(&(self.values.len() as u32).to_be_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Share, RevocationError> {
        if bytes.len() < 5 {
            return Err(RevocationError::Malformed("short header"));
        }
        let holder_index = match bytes[0] {
            0 => MAX_SHARES,
            b => b as u16,
        };
        let len = u32::from_be_bytes(bytes[1..5].try_into().unwrap()) as usize;
        let body = &bytes[5..];
        if body.len() != len * 2 {
            return Err(RevocationError::Malformed("length prefix disagrees with body"));
        }
        let values: Vec<u16> = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        if values.iter().any(|&v| v >= P) {
            return Err(RevocationError::Malformed("value outside GF(257)"));
        }
        Ok(Share { holder_index, values })
    }

    /// Leaf digest bound into an escrow commitment.
    pub fn digest(&self) -> Digest {
        sha256(&[b"assemblynet/share", &self.to_bytes()])
    }
}

fn check_threshold(k: u16, n: u16) -> Result<(), RevocationError> {
    if k < 1 || k > n || n > MAX_SHARES {
        return Err(RevocationError::BadThreshold { k, n });
    }
    Ok(())
}

/// Evaluates caller-chosen polynomials at `x = 1..=n`.
///
/// `polynomials[j]` holds the ascending coefficients used for secret byte
/// `j`; its constant term is the byte itself.
pub fn shares_from_polynomials(polynomials: &[Vec<u16>], n: u16) -> Result<Vec<Share>, RevocationError> {
    if polynomials.is_empty() {
        return Err(RevocationError::EmptySecret);
    }
    let k = polynomials[0].len() as u16;
    check_threshold(k, n)?;
    if polynomials
        .iter()
        .any(|p| p.len() != k as usize || p.iter().any(|&c| c >= P))
    {
        return Err(RevocationError::InconsistentShares(
            "polynomials differ in degree or leave the field",
        ));
    }
    Ok((1..=n)
        .map(|x| Share {
            holder_index: x,
            values: polynomials.iter().map(|p| eval(p, x % P)).collect(),
        })
        .collect())
}

/// Splits `secret` into `n` shares, any `k` of which reconstruct it.
pub fn split_secret<R: Rng + ?Sized>(
    secret: &[u8],
    k: u16,
    n: u16,
    rng: &mut R,
) -> Result<Vec<Share>, RevocationError> {
    check_threshold(k, n)?;
    if secret.is_empty() {
        return Err(RevocationError::EmptySecret);
    }
    let polynomials: Vec<Vec<u16>> = secret
        .iter()
        .map(|&b| {
            std::iter::once(b as u16)
                .chain((1..k).map(|_| rng.gen_range(0..P)))
                .collect()
        })
        .collect();
    shares_from_polynomials(&polynomials, n)
}

/// First `k` shares with distinct holder indices, rejecting conflicts.
fn distinct_shares(shares: &[Share], k: u16) -> Result<Vec<&Share>, RevocationError> {
    let mut by_index: BTreeMap<u16, &Share> = BTreeMap::new();
    let len = shares.first().map(|s| s.values.len());
    for s in shares {
        if Some(s.values.len()) != len {
            return Err(RevocationError::InconsistentShares("value lengths differ"));
        }
        if s.holder_index == 0 || s.holder_index > MAX_SHARES || s.values.iter().any(|&v| v >= P) {
            return Err(RevocationError::InconsistentShares("share outside the field"));
        }
        if let Some(prev) = by_index.insert(s.holder_index, s) {
            if prev.values != s.values {
                return Err(RevocationError::InconsistentShares("same holder, different values"));
            }
        }
    }
    if by_index.len() < k as usize {
        return Err(RevocationError::InsufficientShares {
            needed: k,
            got: by_index.len(),
        });
    }
    Ok(by_index.into_values().take(k as usize).collect())
}

/// Lagrange basis weights `L_i(0)` for the given abscissae.
fn weights_at_zero(xs: &[u16]) -> Vec<u16> {
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            xs.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(1, |acc, (_, &xj)| mul(acc, mul(xj, inv(sub(xj, xi)))))
        })
        .collect()
}

/// Recovers the secret from at least `k` distinct shares.
pub fn reconstruct(shares: &[Share], k: u16) -> Result<Vec<u8>, RevocationError> {
    if k < 1 {
        return Err(RevocationError::BadThreshold { k, n: 0 });
    }
    let chosen = distinct_shares(shares, k)?;
    let xs: Vec<u16> = chosen.iter().map(|s| s.holder_index % P).collect();
    let w = weights_at_zero(&xs);
    let len = chosen[0].values.len();
    (0..len)
        .map(|j| {
            let v = chosen
                .iter()
                .zip(&w)
                .fold(0, |acc, (s, &wi)| add(acc, mul(s.values[j], wi)));
            u8::try_from(v).map_err(|_| RevocationError::InconsistentShares("interpolated value is not a byte"))
        })
        .collect()
}

/// Result of [`secrecy_check`]: for each secret position, which of the 256
/// candidate bytes admit a polynomial of degree `< k` through the shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecrecyReport {
    pub threshold: u16,
    pub consistent: Vec<[bool; 256]>,
}

impl SecrecyReport {
    pub fn consistent_count(&self, position: usize) -> usize {
        self.consistent[position].iter().filter(|&&c| c).count()
    }

    /// True when every position leaves all 256 candidates open.
    pub fn leaks_nothing(&self) -> bool {
        self.consistent.iter().all(|row| row.iter().all(|&c| c))
    }
}

/// Product of `(x - r)` over `roots`, ascending coefficients.
fn poly_from_roots(roots: &[u16]) -> Vec<u16> {
    let mut p = vec![1u16];
    for &r in roots {
        let mut next = vec![0u16; p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] = add(next[i + 1], c);
            next[i] = sub(next[i], mul(c, r));
        }
        p = next;
    }
    p
}

/// For each candidate byte `c`, builds the unique polynomial of degree
/// `< k` through `(0, c)` and the first `k - 1` shares (padding with zero
/// points at unused abscissae when fewer are given), then checks it
/// against every supplied share.
///
/// With exactly `k - 1` shares every candidate is consistent; with `k` or
/// more only the true secret survives.
pub fn secrecy_check(shares: &[Share], k: u16) -> SecrecyReport {
    let len = shares.first().map_or(1, |s| s.values.len());
    let basis_count = k.saturating_sub(1) as usize;

    let mut xs: Vec<u16> = shares.iter().take(basis_count).map(|s| s.holder_index % P).collect();
    let mut pad = 1u16;
    while xs.len() < basis_count {
        if !xs.contains(&pad) && !shares.iter().any(|s| s.holder_index % P == pad) {
            xs.push(pad);
        }
        pad += 1;
    }
    let mut nodes = vec![0u16];
    nodes.extend_from_slice(&xs);

    // Lagrange basis polynomials in coefficient form over `nodes`.
    let basis: Vec<Vec<u16>> = nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let others: Vec<u16> = nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &x)| x)
                .collect();
            let denom = others.iter().fold(1, |acc, &xj| mul(acc, sub(xi, xj)));
            let scale = inv(denom);
            poly_from_roots(&others).into_iter().map(|c| mul(c, scale)).collect()
        })
        .collect();

    let consistent = (0..len)
        .map(|j| {
            let ys: Vec<u16> = (0..basis_count)
                .map(|i| shares.get(i).map_or(0, |s| s.values.get(j).copied().unwrap_or(0)))
                .collect();
            // Everything except the candidate's contribution.
            let mut fixed = vec![0u16; nodes.len()];
            for (i, y) in ys.iter().enumerate() {
                for (d, c) in basis[i + 1].iter().enumerate() {
                    fixed[d] = add(fixed[d], mul(*y, *c));
                }
            }
            let l0 = &basis[0];
            let checks: Vec<(u16, u16, u16)> = std::iter::once(0u16)
                .chain(shares.iter().map(|s| s.holder_index % P))
                .map(|x| (x, eval(&fixed, x), eval(l0, x)))
                .collect();
            let mut row = [false; 256];
            for (c, slot) in row.iter_mut().enumerate() {
                let c = c as u16;
                *slot = checks.iter().enumerate().all(|(idx, &(_, f, l))| {
                    let want = if idx == 0 {
                        c
                    } else {
                        shares[idx - 1].values.get(j).copied().unwrap_or(u16::MAX)
                    };
                    add(f, mul(c, l)) == want
                });
            }
            row
        })
        .collect();
    SecrecyReport {
        threshold: k,
        consistent,
    }
}

/// Public commitment to the shares handed out at issuance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationEscrow {
    pub assembly_id: AssemblyId,
    pub pseudonym: Pseudonym,
    pub threshold_k: u16,
    pub share_count_n: u16,
    /// Leaf digest per holder index, in order.
    pub share_digests: Vec<Digest>,
    pub commitment: Digest,
}

/// Commitment over the ordered share digests.
pub fn escrow_commitment(assembly_id: &AssemblyId, share_digests: &[Digest]) -> Digest {
    let mut parts: Vec<&[u8]> = vec![b"assemblynet/escrow", assembly_id.as_bytes()];
    parts.extend(share_digests.iter().map(|d| d.0.as_slice()));
    sha256(&parts)
}

impl RevocationEscrow {
    pub fn new(
        assembly_id: AssemblyId,
        pseudonym: Pseudonym,
        k: u16,
        shares: &[Share],
    ) -> Result<Self, RevocationError> {
        let n = shares.len() as u16;
        check_threshold(k, n)?;
        let share_digests: Vec<Digest> = shares.iter().map(Share::digest).collect();
        Ok(RevocationEscrow {
            assembly_id,
            pseudonym,
            threshold_k: k,
            share_count_n: n,
            commitment: escrow_commitment(&assembly_id, &share_digests),
            share_digests,
        })
    }

    /// True when `share` is the one committed for its holder index.
    pub fn accepts(&self, share: &Share) -> bool {
        let idx = share.holder_index as usize;
        self.share_digests.len() == self.share_count_n as usize
            && escrow_commitment(&self.assembly_id, &self.share_digests) == self.commitment
            && idx >= 1
            && idx <= self.share_digests.len()
            && self.share_digests[idx - 1] == share.digest()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseStatus {
    Open,
    Revealed(Identity),
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitOutcome {
    /// Share accepted; `count` distinct holders so far.
    Recorded {
        count: usize,
    },
    /// Holder had already submitted; nothing changed.
    Duplicate {
        count: usize,
    },
    Revealed(Identity),
}

/// A coalition's attempt to open one pseudonym's escrow.
#[derive(Debug, Clone)]
pub struct RevocationCase {
    pub pseudonym: Pseudonym,
    pub opened_at: Tick,
    submitted: BTreeMap<u16, Share>,
    status: CaseStatus,
}

impl RevocationCase {
    pub fn open(pseudonym: Pseudonym, opened_at: Tick) -> Self {
        RevocationCase {
            pseudonym,
            opened_at,
            submitted: BTreeMap::new(),
            status: CaseStatus::Open,
        }
    }

    pub fn status(&self) -> &CaseStatus {
        &self.status
    }

    pub fn submitted_count(&self) -> usize {
        self.submitted.len()
    }

    pub fn close(&mut self) {
        if self.status == CaseStatus::Open {
            self.status = CaseStatus::Closed;
        }
    }

    pub fn submit_share(&mut self, share: Share, escrow: &RevocationEscrow) -> Result<SubmitOutcome, RevocationError> {
        if self.status != CaseStatus::Open {
            return Err(RevocationError::CaseClosed);
        }
        if escrow.pseudonym != self.pseudonym || !escrow.accepts(&share) {
            return Err(RevocationError::ShareMismatch {
                holder: share.holder_index,
            });
        }
        if self.submitted.contains_key(&share.holder_index) {
            return Ok(SubmitOutcome::Duplicate {
                count: self.submitted.len(),
            });
        }
        self.submitted.insert(share.holder_index, share);
        let count = self.submitted.len();
        if count < escrow.threshold_k as usize {
            return Ok(SubmitOutcome::Recorded { count });
        }
        let shares: Vec<Share> = self.submitted.values().cloned().collect();
        let secret = reconstruct(&shares, escrow.threshold_k)?;
        let identity =
            Identity::new(secret).map_err(|_| RevocationError::InconsistentShares("escrowed identity is empty"))?;
        self.status = CaseStatus::Revealed(identity.clone());
        Ok(SubmitOutcome::Revealed(identity))
    }
}

//! Assembly-scoped credentials: one pseudonym per person per assembly.
//!
//! A pseudonym is the digest of `issuer_secret || identity || assembly_id`,
//! so the issuer can only ever mint one per pair. The issuer also keeps an
//! index of issued pairs and refuses a second issuance outright.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::crypto::{Digest, Primitives, Sha256Hmac};
use crate::revocation::{split_secret, RevocationError, RevocationEscrow, Share};
use crate::types::{AssemblyId, Pseudonym, Tick};

pub const MAX_IDENTITY_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("identity is empty")]
    EmptyIdentity,
    #[error("identity is {0} bytes, longer than 64")]
    IdentityTooLong(usize),
    #[error("a credential for this identity was already issued for the assembly")]
    DuplicateIssuance,
    #[error("escrow: {0}")]
    Escrow(#[from] RevocationError),
}

/// Opaque person identifier, 1 to 64 bytes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identity(Vec<u8>);

impl Identity {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Identity, IdentityError> {
        let bytes = bytes.into();
        match bytes.len() {
            0 => Err(IdentityError::EmptyIdentity),
            n if n > MAX_IDENTITY_LEN => Err(IdentityError::IdentityTooLong(n)),
            _ => Ok(Identity(bytes)),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "Identity({s:?})"),
            Err(_) => write!(f, "Identity(0x{})", hex::encode(&self.0)),
        }
    }
}

/// Participation token for one assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    pub pseudonym: Pseudonym,
    pub assembly_id: AssemblyId,
    pub escrow_commitment: Digest,
    pub issue_time: Tick,
    pub issuer_tag: Digest,
}

/// Output of a successful issuance: the credential plus the escrowed
/// identity shares the caller distributes to holders.
#[derive(Debug, Clone)]
pub struct Issuance {
    pub credential: Credential,
    pub escrow: RevocationEscrow,
    pub shares: Vec<Share>,
}

/// Issuer key and the index of `(identity digest, assembly)` pairs already
/// served. The index only grows.
#[derive(Clone)]
pub struct IssuerState<P: Primitives = Sha256Hmac> {
    issuer_secret: [u8; 32],
    issued_index: BTreeSet<(Digest, AssemblyId)>,
    primitives: P,
}

impl IssuerState<Sha256Hmac> {
    pub fn new(issuer_secret: [u8; 32]) -> Self {
        IssuerState::with_primitives(issuer_secret, Sha256Hmac)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        IssuerState::new(rng.gen())
    }
}

impl<P: Primitives> IssuerState<P> {
    pub fn with_primitives(issuer_secret: [u8; 32], primitives: P) -> Self {
        IssuerState {
            issuer_secret,
            issued_index: BTreeSet::new(),
            primitives,
        }
    }

    pub fn issued_count(&self) -> usize {
        self.issued_index.len()
    }

    pub fn has_issued(&self, identity: &Identity, assembly_id: &AssemblyId) -> bool {
        self.issued_index
            .contains(&(self.identity_digest(identity), *assembly_id))
    }

    fn identity_digest(&self, identity: &Identity) -> Digest {
        self.primitives.digest(&[identity.as_bytes()])
    }

    pub fn pseudonym_of(&self, identity: &Identity, assembly_id: &AssemblyId) -> Pseudonym {
        Pseudonym(
            self.primitives
                .digest(&[&self.issuer_secret, identity.as_bytes(), assembly_id.as_bytes()]),
        )
    }

    fn tag(&self, pseudonym: &Pseudonym, assembly_id: &AssemblyId, escrow_commitment: &Digest) -> Digest {
        self.primitives.mac(
            &self.issuer_secret,
            &[
                pseudonym.as_bytes(),
                assembly_id.as_bytes(),
                escrow_commitment.as_bytes(),
            ],
        )
    }

    /// Issues the single credential `identity` may hold for `assembly_id`,
    /// escrowing the identity under a `(k, n)` split.
    pub fn issue_credential<R: Rng + ?Sized>(
        &mut self,
        identity: &Identity,
        assembly_id: AssemblyId,
        now: Tick,
        threshold: (u16, u16),
        rng: &mut R,
    ) -> Result<Issuance, IdentityError> {
        let key = (self.identity_digest(identity), assembly_id);
        if self.issued_index.contains(&key) {
            return Err(IdentityError::DuplicateIssuance);
        }
        let (k, n) = threshold;
        let shares = split_secret(identity.as_bytes(), k, n, rng)?;
        let pseudonym = self.pseudonym_of(identity, &assembly_id);
        let escrow = RevocationEscrow::new(assembly_id, pseudonym, k, &shares)?;
        let issuer_tag = self.tag(&pseudonym, &assembly_id, &escrow.commitment);
        self.issued_index.insert(key);
        Ok(Issuance {
            credential: Credential {
                pseudonym,
                assembly_id,
                escrow_commitment: escrow.commitment,
                issue_time: now,
                issuer_tag,
            },
            escrow,
            shares,
        })
    }

    pub fn verify_credential(&self, cred: &Credential) -> bool {
        let expected = self.tag(&cred.pseudonym, &cred.assembly_id, &cred.escrow_commitment);
        self.primitives.mac_eq(&expected, &cred.issuer_tag)
    }
}

impl<P: Primitives> fmt::Debug for IssuerState<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IssuerState")
            .field("issued", &self.issued_index.len())
            .finish_non_exhaustive()
    }
}

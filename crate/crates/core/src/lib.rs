//! Protocol building blocks for a lawful digital assembly, and a
//! deterministic simulator that runs them against a capacity-limited target.
//!
//! * [`identity`]: one credential per person per assembly.
//! * [`revocation`]: threshold escrow that lets a coalition of participants
//!   unmask an abuser.
//! * [`assembly`]: manifests, the requirement checker, announcement and the
//!   injunction window.
//! * [`throttle`]: per-credential and group token buckets plus amplification
//!   rejection.
//! * [`visibility`]: the hash-chained public board.
//! * [`gossip`]: push-pull dissemination.
//! * [`sim`]: the discrete-event simulator and trace audit.

pub mod assembly;
pub mod crypto;
pub mod gossip;
pub mod identity;
pub mod kvfile;
pub mod revocation;
pub mod sim;
pub mod throttle;
pub mod types;
pub mod visibility;

pub use crypto::Digest;
pub use types::{AssemblyId, Pseudonym, Rate, Tick};

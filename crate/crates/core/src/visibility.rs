//! The public board: a hash-chained, append-only mirror of every protest
//! message.
//!
//! `entry_digest = SHA-256(prev_digest || canonical message bytes)`, with the
//! genesis entry chained to 32 zero bytes. The export format is one record
//! per line: `index,hex(prev_digest),hex(entry_digest),base64(message)`.

use std::collections::HashMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use thiserror::Error;

use crate::crypto::{sha256, Digest};
use crate::types::{AssemblyId, Pseudonym, Tick};

pub const MAX_BODY_BYTES: usize = 16 * 1024;

const FIXED_LEN: usize = 32 + 16 + 8 + 32 + 8 + 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("message opinion digest does not match the assembly's")]
    OpinionMismatch,
    #[error("sequence {got} is not after {last} for this pseudonym")]
    SequenceRegression { last: u64, got: u64 },
    #[error("body is {0} bytes, over the 16 KiB limit")]
    BodyTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct BoardParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtestMessage {
    pub pseudonym: Pseudonym,
    pub assembly_id: AssemblyId,
    pub sequence_no: u64,
    pub opinion_digest: Digest,
    pub body: String,
    pub timestamp: Tick,
}

impl ProtestMessage {
    /// `pseudonym || assembly_id || seq (u64 BE) || opinion || timestamp
    /// (u64 BE) || body_len (u32 BE) || body`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_LEN + self.body.len());
        out.extend_from_slice(self.pseudonym.as_bytes());
        out.extend_from_slice(self.assembly_id.as_bytes());
        out.extend_from_slice(&self.sequence_no.to_be_bytes());
        out.extend_from_slice(self.opinion_digest.as_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(self.body.as_bytes());
        out
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<ProtestMessage, String> {
        if bytes.len() < FIXED_LEN {
            return Err("message shorter than its fixed header".into());
        }
        let (mut at, b) = (0usize, bytes);
        let mut take = |n: usize| {
            let s = &b[at..at + n];
            at += n;
            s
        };
        let pseudonym = Pseudonym(Digest(take(32).try_into().unwrap()));
        let assembly_id = AssemblyId(take(16).try_into().unwrap());
        let sequence_no = u64::from_be_bytes(take(8).try_into().unwrap());
        let opinion_digest = Digest(take(32).try_into().unwrap());
        let timestamp = u64::from_be_bytes(take(8).try_into().unwrap());
        let len = u32::from_be_bytes(take(4).try_into().unwrap()) as usize;
        let rest = &bytes[FIXED_LEN..];
        if rest.len() != len {
            return Err(format!("body length prefix {len} but {} bytes follow", rest.len()));
        }
        if len > MAX_BODY_BYTES {
            return Err("body exceeds 16 KiB".into());
        }
        let body = String::from_utf8(rest.to_vec()).map_err(|_| "body is not UTF-8".to_string())?;
        Ok(ProtestMessage {
            pseudonym,
            assembly_id,
            sequence_no,
            opinion_digest,
            body,
            timestamp,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardEntry {
    pub index: u64,
    pub prev_digest: Digest,
    pub entry_digest: Digest,
    pub message: ProtestMessage,
}

pub fn entry_digest(prev: &Digest, message: &ProtestMessage) -> Digest {
    sha256(&[prev.as_bytes(), &message.canonical_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Appended {
    New(BoardEntry),
    /// `(pseudonym, sequence_no)` was already on the board.
    Existing(BoardEntry),
}

impl Appended {
    pub fn entry(&self) -> &BoardEntry {
        match self {
            Appended::New(e) | Appended::Existing(e) => e,
        }
    }
}

/// The sequencer's copy of the board for one assembly.
#[derive(Debug, Clone)]
pub struct Board {
    opinion_digest: Digest,
    entries: Vec<BoardEntry>,
    by_key: HashMap<(Pseudonym, u64), usize>,
    last_seq: HashMap<Pseudonym, u64>,
}

impl Board {
    pub fn new(opinion_digest: Digest) -> Self {
        Board {
            opinion_digest,
            entries: Vec::new(),
            by_key: HashMap::new(),
            last_seq: HashMap::new(),
        }
    }

    pub fn entries(&self) -> &[BoardEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Digest {
        self.entries.last().map_or(Digest::ZERO, |e| e.entry_digest)
    }

    pub fn get(&self, pseudonym: &Pseudonym, sequence_no: u64) -> Option<&BoardEntry> {
        self.by_key.get(&(*pseudonym, sequence_no)).map(|&i| &self.entries[i])
    }

    pub fn append(&mut self, msg: ProtestMessage) -> Result<Appended, BoardError> {
        if msg.opinion_digest != self.opinion_digest {
            return Err(BoardError::OpinionMismatch);
        }
        if msg.body.len() > MAX_BODY_BYTES {
            return Err(BoardError::BodyTooLarge(msg.body.len()));
        }
        let key = (msg.pseudonym, msg.sequence_no);
        if let Some(&i) = self.by_key.get(&key) {
            return Ok(Appended::Existing(self.entries[i].clone()));
        }
        if let Some(&last) = self.last_seq.get(&msg.pseudonym) {
            if msg.sequence_no <= last {
                return Err(BoardError::SequenceRegression {
                    last,
                    got: msg.sequence_no,
                });
            }
        }
        let prev = self.head();
        let entry = BoardEntry {
            index: self.entries.len() as u64,
            prev_digest: prev,
            entry_digest: entry_digest(&prev, &msg),
            message: msg,
        };
        self.by_key.insert(key, self.entries.len());
        self.last_seq.insert(entry.message.pseudonym, entry.message.sequence_no);
        self.entries.push(entry.clone());
        Ok(Appended::New(entry))
    }
}

/// Index of the first entry that breaks the chain, if any.
pub fn first_broken(entries: &[BoardEntry]) -> Option<u64> {
    let mut prev = Digest::ZERO;
    for (i, e) in entries.iter().enumerate() {
        if e.index != i as u64 || e.prev_digest != prev || e.entry_digest != entry_digest(&prev, &e.message) {
            return Some(i as u64);
        }
        prev = e.entry_digest;
    }
    None
}

pub fn verify_chain(entries: &[BoardEntry]) -> bool {
    first_broken(entries).is_none()
}

/// Share of `delivered` messages that appear verbatim on the board; `1.0`
/// when nothing was delivered.
pub fn visibility_fraction(delivered: &[ProtestMessage], entries: &[BoardEntry]) -> f64 {
    if delivered.is_empty() {
        return 1.0;
    }
    let on_board: HashMap<(Pseudonym, u64), &ProtestMessage> = entries
        .iter()
        .map(|e| ((e.message.pseudonym, e.message.sequence_no), &e.message))
        .collect();
    let mirrored = delivered
        .iter()
        .filter(|m| on_board.get(&(m.pseudonym, m.sequence_no)) == Some(m))
        .count();
    mirrored as f64 / delivered.len() as f64
}

pub fn export_board(entries: &[BoardEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.index,
            e.prev_digest.to_hex(),
            e.entry_digest.to_hex(),
            B64.encode(e.message.canonical_bytes())
        ));
    }
    out
}

/// Parses an export. Every field must be in canonical form, so any textual
/// change either fails here or changes a digest input.
pub fn parse_board_export(text: &str) -> Result<Vec<BoardEntry>, BoardParseError> {
    let mut entries = Vec::new();
    if text.is_empty() {
        return Ok(entries);
    }
    let body = text.strip_suffix('\n').ok_or(BoardParseError {
        line: text.lines().count().max(1),
        message: "missing final newline".into(),
    })?;
    for (i, line) in body.split('\n').enumerate() {
        let err = |message: String| BoardParseError { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let index: u64 = fields[0]
            .parse()
            .ok()
            .filter(|n: &u64| n.to_string() == fields[0])
            .ok_or_else(|| err(format!("bad index `{}`", fields[0])))?;
        let prev_digest = Digest::from_hex(fields[1]).ok_or_else(|| err("bad prev_digest".into()))?;
        let entry_digest = Digest::from_hex(fields[2]).ok_or_else(|| err("bad entry_digest".into()))?;
        let raw = B64
            .decode(fields[3])
            .ok()
            .filter(|raw| B64.encode(raw) == fields[3])
            .ok_or_else(|| err("bad base64 message".into()))?;
        let message = ProtestMessage::from_canonical_bytes(&raw).map_err(err)?;
        entries.push(BoardEntry {
            index,
            prev_digest,
            entry_digest,
            message,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(who: u8, seq: u64) -> ProtestMessage {
        ProtestMessage {
            pseudonym: Pseudonym(sha256(&[&[who]])),
            assembly_id: AssemblyId::from_label("a"),
            sequence_no: seq,
            opinion_digest: sha256(&[b"op"]),
            body: format!("message {seq} from {who}"),
            timestamp: seq * 10,
        }
    }

    fn board_of(n: u64) -> Board {
        let mut b = Board::new(sha256(&[b"op"]));
        for i in 0..n {
            b.append(msg((i % 7) as u8, i)).unwrap();
        }
        b
    }

    #[test]
    fn genesis_entry_chains_to_zero() {
        let mut b = Board::new(sha256(&[b"op"]));
        let e = b.append(msg(1, 0)).unwrap();
        assert!(matches!(e, Appended::New(_)));
        assert_eq!(e.entry().index, 0);
        assert_eq!(e.entry().prev_digest, Digest::ZERO);
    }

    #[test]
    fn duplicate_sequence_is_idempotent() {
        let mut b = board_of(3);
        let again = b.append(msg(1, 1)).unwrap();
        assert!(matches!(again, Appended::Existing(ref e) if e.index == 1));
        assert_eq!(b.len(), 3);
        assert_eq!(
            b.append(msg(1, 0)).unwrap_err(),
            BoardError::SequenceRegression { last: 1, got: 0 }
        );
    }

    #[test]
    fn wrong_opinion_refused() {
        let mut b = board_of(0);
        let mut m = msg(1, 0);
        m.opinion_digest = sha256(&[b"other"]);
        assert_eq!(b.append(m), Err(BoardError::OpinionMismatch));
    }

    #[test]
    fn chain_checks() {
        assert!(verify_chain(&[]));
        let b = board_of(3);
        assert!(verify_chain(b.entries()));
        let mut gap = b.entries().to_vec();
        gap.remove(1);
        assert!(!verify_chain(&gap));
        assert_eq!(first_broken(&gap), Some(1));
    }

    #[test]
    fn visibility_counts() {
        let b = board_of(3);
        let mut delivered: Vec<ProtestMessage> = b.entries().iter().map(|e| e.message.clone()).collect();
        assert_eq!(visibility_fraction(&delivered, b.entries()), 1.0);
        delivered.push(msg(9, 99));
        assert_eq!(visibility_fraction(&delivered, b.entries()), 0.75);
        assert_eq!(visibility_fraction(&[], b.entries()), 1.0);
    }

    #[test]
    fn export_round_trips() {
        let b = board_of(5);
        let text = export_board(b.entries());
        assert_eq!(parse_board_export(&text).unwrap(), b.entries());
        assert!(parse_board_export("").unwrap().is_empty());
        assert!(parse_board_export("0,zz,zz,zz\n").is_err());
    }
}

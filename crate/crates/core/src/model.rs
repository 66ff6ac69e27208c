//! Domain types shared across the machine, board, authority and verifier.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Signature;
use crate::id::VoterId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("election has no candidates")]
    NoCandidates,
    #[error("duplicate candidate label {0:?}")]
    DuplicateCandidate(String),
    #[error("candidate label {0:?} is empty or contains a tab or newline")]
    BadLabel(String),
    #[error("selections per voter must satisfy 1 <= k < {candidates}, got {k}")]
    Selections { k: usize, candidates: usize },
    #[error("registered voters must be positive")]
    NoRegisteredVoters,
    #[error(
        "full bootstrap mode needs {registered} bootstrap votes per candidate, got {bootstrap}"
    )]
    FullBootstrap { bootstrap: u64, registered: u64 },
    #[error("header field {0} contains a newline")]
    BadHeader(&'static str),
}

fn default_selections() -> usize {
    1
}

/// Static description of one election on one machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionConfig {
    pub title: String,
    pub date: String,
    pub precinct: String,
    /// Choice labels in ballot order.
    pub candidates: Vec<String>,
    #[serde(default = "default_selections")]
    pub selections_per_voter: usize,
    pub bootstrap_per_candidate: u64,
    pub registered_voters: u64,
    #[serde(default)]
    pub full_bootstrap_mode: bool,
}

impl ElectionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, field) in [
            ("title", &self.title),
            ("date", &self.date),
            ("precinct", &self.precinct),
        ] {
            if field.contains('\n') {
                return Err(ConfigError::BadHeader(name));
            }
        }
        if self.candidates.is_empty() {
            return Err(ConfigError::NoCandidates);
        }
        let mut seen = HashSet::new();
        for label in &self.candidates {
            if label.is_empty() || label.contains(['\t', '\n']) {
                return Err(ConfigError::BadLabel(label.clone()));
            }
            if !seen.insert(label.as_str()) {
                return Err(ConfigError::DuplicateCandidate(label.clone()));
            }
        }
        let k = self.selections_per_voter;
        if k == 0 || k >= self.candidates.len() {
            return Err(ConfigError::Selections {
                k,
                candidates: self.candidates.len(),
            });
        }
        if self.registered_voters == 0 {
            return Err(ConfigError::NoRegisteredVoters);
        }
        if self.full_bootstrap_mode && self.bootstrap_per_candidate != self.registered_voters {
            return Err(ConfigError::FullBootstrap {
                bootstrap: self.bootstrap_per_candidate,
                registered: self.registered_voters,
            });
        }
        Ok(())
    }

    pub fn header(&self) -> ElectionHeader {
        ElectionHeader {
            title: self.title.clone(),
            date: self.date.clone(),
            precinct: self.precinct.clone(),
        }
    }

    pub fn candidate_index(&self, label: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == label)
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElectionHeader {
    pub title: String,
    pub date: String,
    pub precinct: String,
}

/// One `(choice, id)` row, on a receipt or on the board.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pairing {
    pub choice: String,
    pub id: VoterId,
}

impl Pairing {
    pub fn new(choice: impl Into<String>, id: VoterId) -> Self {
        Self {
            choice: choice.into(),
            id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReceiptBody {
    #[serde(flatten)]
    pub header: ElectionHeader,
    /// Exactly one pairing per candidate, in ballot order.
    pub pairings: Vec<Pairing>,
}

impl ReceiptBody {
    /// Bytes covered by the receipt signature: the three header lines, then
    /// one `label\tdigits` line per pairing, newline-separated, UTF-8.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut lines: Vec<String> = vec![
            self.header.title.clone(),
            self.header.date.clone(),
            self.header.precinct.clone(),
        ];
        lines.extend(
            self.pairings
                .iter()
                .map(|p| format!("{}\t{}", p.choice, p.id)),
        );
        lines.join("\n").into_bytes()
    }

    /// Checks that pairings cover the ballot exactly once, in ballot order.
    pub fn matches_ballot(&self, config: &ElectionConfig) -> bool {
        self.pairings.len() == config.candidates.len()
            && self
                .pairings
                .iter()
                .zip(&config.candidates)
                .all(|(p, c)| &p.choice == c)
    }
}

/// Free-function form of [`ReceiptBody::canonical_bytes`].
pub fn canonical_receipt_bytes(body: &ReceiptBody) -> Vec<u8> {
    body.canonical_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Receipt {
    #[serde(flatten)]
    pub body: ReceiptBody,
    pub signature: Signature,
}

/// Ground-truth provenance of a recorded entry. Never published.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Bootstrap,
    Fraudulent,
}

/// A recorded vote together with its (internal) origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoardEntry {
    pub choice: String,
    pub id: VoterId,
    pub origin: Origin,
}

impl BoardEntry {
    pub fn pairing(&self) -> Pairing {
        Pairing::new(self.choice.clone(), self.id.clone())
    }
}

/// The published bulletin board: anonymous pairings plus the signings count.
///
/// Entries are plain [`Pairing`]s, so origin tags cannot leak through any
/// serialization of a `Board`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Board {
    #[serde(flatten)]
    pub header: ElectionHeader,
    pub entries: Vec<Pairing>,
    pub signings_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voter_names: Option<Vec<String>>,
}

//! The trusted authority that receives and checks the bootstrap batch.
//!
//! It only ever sees the encrypted batch and the public board. It must be a
//! different party from the court handling voter complaints: nothing in
//! [`crate::verify`] accepts a [`BootstrapRecord`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::BoardIndex;
use crate::crypto::{self, Ciphertext, CryptoError, DecryptionKey, VerifyingKey};
use crate::id::VoterId;
use crate::machine::BootstrapBatch;
use crate::model::{Board, ElectionConfig, Pairing};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountDelta {
    pub choice: String,
    /// Received count minus the expected `B`.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthorityError {
    #[error("cannot decrypt bootstrap batch: {0}")]
    Decrypt(#[from] CryptoError),
    #[error("decrypted batch is malformed: {0}")]
    Malformed(String),
    #[error("machine signature on bootstrap batch does not verify")]
    BadSignature,
    #[error("bootstrap batch contains unknown choice {0:?}")]
    UnknownChoice(String),
    #[error("bootstrap batch reuses id {0}")]
    DuplicateId(VoterId),
    #[error("bootstrap counts differ from the expected value: {}", fmt_deltas(.0))]
    CountMismatch(Vec<CountDelta>),
    #[error("bootstrap record has been destroyed")]
    Destroyed,
    #[error("bootstrap record must be checked against the board before destruction")]
    NotChecked,
}

fn fmt_deltas(deltas: &[CountDelta]) -> String {
    deltas
        .iter()
        .map(|d| format!("{}:{:+}", d.choice, d.delta))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub entries: Vec<Pairing>,
    /// Logical timestamp supplied by the caller.
    pub verified_at: u64,
    pub destroyed: bool,
    #[serde(default)]
    checked: bool,
}

/// Decrypts the batch, verifies the machine signature and checks that every
/// candidate received exactly `B` bootstrap votes.
pub fn receive_batch(
    ciphertext: &Ciphertext,
    machine_pub: &VerifyingKey,
    authority_secret: &DecryptionKey,
    config: &ElectionConfig,
    verified_at: u64,
) -> Result<BootstrapRecord, AuthorityError> {
    let plaintext = crypto::decrypt(authority_secret, ciphertext)?;
    let batch: BootstrapBatch =
        serde_json::from_slice(&plaintext).map_err(|e| AuthorityError::Malformed(e.to_string()))?;
    if !crypto::verify(
        machine_pub,
        &BootstrapBatch::canonical_bytes(&batch.entries),
        &batch.machine_signature,
    ) {
        return Err(AuthorityError::BadSignature);
    }

    let mut counts = vec![0i64; config.num_candidates()];
    let mut seen = std::collections::HashSet::new();
    for p in &batch.entries {
        let ci = config
            .candidate_index(&p.choice)
            .ok_or_else(|| AuthorityError::UnknownChoice(p.choice.clone()))?;
        if !seen.insert(&p.id) {
            return Err(AuthorityError::DuplicateId(p.id.clone()));
        }
        counts[ci] += 1;
    }
    let expected = config.bootstrap_per_candidate as i64;
    let deltas: Vec<CountDelta> = config
        .candidates
        .iter()
        .zip(counts)
        .filter(|&(_, n)| n != expected)
        .map(|(c, n)| CountDelta {
            choice: c.clone(),
            delta: n - expected,
        })
        .collect();
    if !deltas.is_empty() {
        return Err(AuthorityError::CountMismatch(deltas));
    }

    Ok(BootstrapRecord {
        entries: batch.entries,
        verified_at,
        destroyed: false,
        checked: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovedEntry {
    pub id: VoterId,
    pub expected_choice: String,
    pub found_choice: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    Clean,
    Discrepancy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub missing: Vec<Pairing>,
    pub moved: Vec<MovedEntry>,
    pub verdict: CheckVerdict,
}

impl BootstrapRecord {
    /// Confirms every bootstrap vote appears on the board under its choice.
    pub fn end_of_day_check(&mut self, board: &Board) -> Result<CheckReport, AuthorityError> {
        if self.destroyed {
            return Err(AuthorityError::Destroyed);
        }
        let index = BoardIndex::new(board);
        let mut missing = Vec::new();
        let mut moved = Vec::new();
        for p in &self.entries {
            match index.lookup(&p.id) {
                None => missing.push(p.clone()),
                Some(found) if found != p.choice => moved.push(MovedEntry {
                    id: p.id.clone(),
                    expected_choice: p.choice.clone(),
                    found_choice: found.to_owned(),
                }),
                Some(_) => {}
            }
        }
        self.checked = true;
        let verdict = if missing.is_empty() && moved.is_empty() {
            CheckVerdict::Clean
        } else {
            CheckVerdict::Discrepancy
        };
        Ok(CheckReport {
            missing,
            moved,
            verdict,
        })
    }

    /// Clears the record. Any later use fails.
    pub fn destroy(&mut self) -> Result<usize, AuthorityError> {
        if self.destroyed {
            return Err(AuthorityError::Destroyed);
        }
        if !self.checked {
            return Err(AuthorityError::NotChecked);
        }
        let cleared = self.entries.len();
        // Overwrite before dropping the allocation.
        for p in &mut self.entries {
            p.choice.clear();
            p.id = VoterId::from_number(0).expect("zero is a valid id");
        }
        self.entries = Vec::new();
        self.destroyed = true;
        Ok(cleared)
    }
}

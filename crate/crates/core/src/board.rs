//! Bulletin board: publication, tally with bootstrap subtraction, lookup and
//! the public count audit.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::VoterId;
use crate::model::{Board, BoardEntry, ElectionConfig, ElectionHeader, Pairing};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("pairing ({}, {}) submitted twice", .0.choice, .0.id)]
    DuplicatePairing(Pairing),
    #[error("id {id} appears under both {first} and {second}")]
    CrossChoiceId {
        id: VoterId,
        first: String,
        second: String,
    },
    #[error("entry for unknown choice {0:?}")]
    UnknownChoice(String),
    #[error("{names} voter names published for {signings} signings")]
    NameCountMismatch { names: usize, signings: u64 },
    #[error(
        "candidate {choice} has {published} entries, fewer than the {bootstrap} bootstrap votes"
    )]
    Inconsistent {
        choice: String,
        published: u64,
        bootstrap: u64,
    },
    #[error("board has {actual} entries but {expected} were expected: votes are missing")]
    MissingVotes { expected: u64, actual: u64 },
    #[error("repair does not apply: {0}")]
    BadRepair(String),
}

/// Everything a machine hands over at close of day. Origins are kept for the
/// simulator and dropped by [`publish`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardSubmission {
    #[serde(flatten)]
    pub header: ElectionHeader,
    pub entries: Vec<BoardEntry>,
    pub signings_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voter_names: Option<Vec<String>>,
}

fn sort_entries(entries: &mut [Pairing], config: &ElectionConfig) -> Result<(), BoardError> {
    let rank: HashMap<&str, usize> = config
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    if let Some(bad) = entries
        .iter()
        .find(|e| !rank.contains_key(e.choice.as_str()))
    {
        return Err(BoardError::UnknownChoice(bad.choice.clone()));
    }
    entries.sort_by(|a, b| {
        rank[a.choice.as_str()]
            .cmp(&rank[b.choice.as_str()])
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(())
}

fn check_unique(entries: &[Pairing]) -> Result<(), BoardError> {
    let mut owner: HashMap<&VoterId, &str> = HashMap::with_capacity(entries.len());
    for e in entries {
        match owner.insert(&e.id, &e.choice) {
            None => {}
            Some(prev) if prev == e.choice => {
                return Err(BoardError::DuplicatePairing(e.clone()));
            }
            Some(prev) => {
                return Err(BoardError::CrossChoiceId {
                    id: e.id.clone(),
                    first: prev.to_owned(),
                    second: e.choice.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Publishes a submission: strips origins, rejects duplicates, sorts by
/// ballot order then ascending id.
pub fn publish(submission: &BoardSubmission, config: &ElectionConfig) -> Result<Board, BoardError> {
    if let Some(names) = &submission.voter_names {
        if names.len() as u64 != submission.signings_count {
            return Err(BoardError::NameCountMismatch {
                names: names.len(),
                signings: submission.signings_count,
            });
        }
    }
    let mut entries: Vec<Pairing> = submission.entries.iter().map(BoardEntry::pairing).collect();
    sort_entries(&mut entries, config)?;
    check_unique(&entries)?;
    Ok(Board {
        header: submission.header.clone(),
        entries,
        signings_count: submission.signings_count,
        voter_names: submission.voter_names.clone(),
    })
}

/// The choice published for `id`, if any.
pub fn lookup<'a>(board: &'a Board, id: &VoterId) -> Option<&'a str> {
    board
        .entries
        .iter()
        .find(|e| &e.id == id)
        .map(|e| e.choice.as_str())
}

/// Hash index over a board for repeated lookups.
pub struct BoardIndex<'a> {
    by_id: HashMap<&'a VoterId, &'a str>,
}

impl<'a> BoardIndex<'a> {
    pub fn new(board: &'a Board) -> Self {
        Self {
            by_id: board
                .entries
                .iter()
                .map(|e| (&e.id, e.choice.as_str()))
                .collect(),
        }
    }

    pub fn lookup(&self, id: &VoterId) -> Option<&'a str> {
        self.by_id.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCount {
    pub choice: String,
    pub published_count: u64,
    pub final_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjustment {
    pub choice: String,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Results {
    pub candidates: Vec<CandidateCount>,
    pub surplus: i64,
    pub adjusted: Option<Adjustment>,
}

impl Results {
    pub fn final_count(&self, choice: &str) -> Option<u64> {
        self.candidates
            .iter()
            .find(|c| c.choice == choice)
            .map(|c| c.final_count)
    }

    /// Applies the surplus adjustment from an audit.
    pub fn apply_audit(&self, report: &AuditReport) -> Results {
        let mut out = self.clone();
        out.surplus = report.surplus;
        if let Some(adj) = &report.adjustment {
            if let Some(c) = out.candidates.iter_mut().find(|c| c.choice == adj.choice) {
                c.final_count = c.final_count.saturating_sub(adj.amount);
            }
            out.adjusted = Some(adj.clone());
        }
        out
    }
}

fn published_counts(board: &Board, config: &ElectionConfig) -> Vec<u64> {
    let mut counts = vec![0u64; config.candidates.len()];
    let rank: HashMap<&str, usize> = config
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    for e in &board.entries {
        if let Some(&i) = rank.get(e.choice.as_str()) {
            counts[i] += 1;
        }
    }
    counts
}

/// Counts entries per candidate and removes the bootstrap votes.
pub fn tally(board: &Board, config: &ElectionConfig) -> Result<Results, BoardError> {
    if let Some(bad) = board
        .entries
        .iter()
        .find(|e| config.candidate_index(&e.choice).is_none())
    {
        return Err(BoardError::UnknownChoice(bad.choice.clone()));
    }
    let b = config.bootstrap_per_candidate;
    let candidates = config
        .candidates
        .iter()
        .zip(published_counts(board, config))
        .map(|(choice, published)| {
            let final_count = published
                .checked_sub(b)
                .ok_or_else(|| BoardError::Inconsistent {
                    choice: choice.clone(),
                    published,
                    bootstrap: b,
                })?;
            Ok(CandidateCount {
                choice: choice.clone(),
                published_count: published,
                final_count,
            })
        })
        .collect::<Result<_, BoardError>>()?;
    Ok(Results {
        candidates,
        surplus: 0,
        adjusted: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    Clean,
    SurplusDetected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub expected_entries: u64,
    pub actual_entries: u64,
    pub surplus: i64,
    pub winner_before: String,
    pub winner_after: String,
    pub adjustment: Option<Adjustment>,
    /// Set when the top final count is shared; the adjustment then targets
    /// the earliest candidate in ballot order.
    pub tie_flag: bool,
    pub verdict: AuditVerdict,
}

/// Index of the maximum, earliest on ties, plus whether a tie occurred.
fn winner(counts: &[i64]) -> (usize, bool) {
    let max = *counts.iter().max().expect("at least one candidate");
    let first = counts.iter().position(|&c| c == max).expect("max present");
    let ties = counts.iter().filter(|&&c| c == max).count() > 1;
    (first, ties)
}

/// Compares the entry count against `signings * k + m * B` and, on a
/// surplus, subtracts it from the winner.
pub fn audit_counts(board: &Board, config: &ElectionConfig) -> Result<AuditReport, BoardError> {
    let m = config.candidates.len() as u64;
    let expected = board.signings_count * config.selections_per_voter as u64
        + m * config.bootstrap_per_candidate;
    let actual = board.entries.len() as u64;
    if actual < expected {
        return Err(BoardError::MissingVotes { expected, actual });
    }
    let surplus = (actual - expected) as i64;

    let b = config.bootstrap_per_candidate as i64;
    let mut finals: Vec<i64> = published_counts(board, config)
        .into_iter()
        .map(|p| p as i64 - b)
        .collect();
    let (before, tie_flag) = winner(&finals);
    let adjustment = (surplus > 0).then(|| {
        finals[before] = (finals[before] - surplus).max(0);
        Adjustment {
            choice: config.candidates[before].clone(),
            amount: surplus as u64,
        }
    });
    let (after, _) = winner(&finals);

    Ok(AuditReport {
        expected_entries: expected,
        actual_entries: actual,
        surplus,
        winner_before: config.candidates[before].clone(),
        winner_after: config.candidates[after].clone(),
        adjustment,
        tie_flag,
        verdict: if surplus > 0 {
            AuditVerdict::SurplusDetected
        } else {
            AuditVerdict::Clean
        },
    })
}

/// A board correction ordered by a court.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoardRepair {
    Insert {
        pairing: Pairing,
    },
    Move {
        id: VoterId,
        from: String,
        to: String,
    },
}

impl Board {
    /// Returns a new board with `repair` applied, re-sorted and re-checked.
    pub fn repaired(
        &self,
        repair: &BoardRepair,
        config: &ElectionConfig,
    ) -> Result<Board, BoardError> {
        let mut entries = self.entries.clone();
        match repair {
            BoardRepair::Insert { pairing } => {
                if entries.iter().any(|e| e.id == pairing.id) {
                    return Err(BoardError::BadRepair(format!(
                        "id {} already published",
                        pairing.id
                    )));
                }
                entries.push(pairing.clone());
            }
            BoardRepair::Move { id, from, to } => {
                let entry = entries
                    .iter_mut()
                    .find(|e| &e.id == id && &e.choice == from)
                    .ok_or_else(|| BoardError::BadRepair(format!("({from}, {id}) not on board")))?;
                entry.choice = to.clone();
            }
        }
        sort_entries(&mut entries, config)?;
        check_unique(&entries)?;
        Ok(Board {
            entries,
            ..self.clone()
        })
    }

    pub fn ids(&self) -> HashSet<&VoterId> {
        self.entries.iter().map(|e| &e.id).collect()
    }
}

//! Voter-side receipt checks and court complaint adjudication.
//!
//! Every function here is a pure function of the receipt, the public board
//! and the machine verification key. No input carries the plaintiff's
//! identity, true choice or the authority's bootstrap record.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::board::{BoardIndex, BoardRepair};
use crate::crypto::{self, VerifyingKey};
use crate::id::VoterId;
use crate::model::{Board, Pairing, Receipt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Confirmed,
    Missing,
    WrongChoice { found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingStatus {
    pub pairing: Pairing,
    #[serde(flatten)]
    pub status: Status,
}

impl PairingStatus {
    pub fn is_confirmed(&self) -> bool {
        self.status == Status::Confirmed
    }
}

pub fn verify_receipt_signature(receipt: &Receipt, machine_pub: &VerifyingKey) -> bool {
    crypto::verify(
        machine_pub,
        &receipt.body.canonical_bytes(),
        &receipt.signature,
    )
}

/// One status per receipt pairing: confirmed iff the board pairs the id with
/// the same choice.
pub fn check_receipt_against_board(receipt: &Receipt, board: &Board) -> Vec<PairingStatus> {
    let index = BoardIndex::new(board);
    receipt
        .body
        .pairings
        .iter()
        .map(|p| pairing_status(p, &index))
        .collect()
}

fn pairing_status(pairing: &Pairing, index: &BoardIndex<'_>) -> PairingStatus {
    let status = match index.lookup(&pairing.id) {
        None => Status::Missing,
        Some(found) if found == pairing.choice => Status::Confirmed,
        Some(found) => Status::WrongChoice {
            found: found.to_owned(),
        },
    };
    PairingStatus {
        pairing: pairing.clone(),
        status,
    }
}

/// Ids printed more than once on the same receipt. An honest machine never
/// produces these.
pub fn duplicate_ids(receipt: &Receipt) -> Vec<VoterId> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for p in &receipt.body.pairings {
        if !seen.insert(&p.id) && !dups.contains(&p.id) {
            dups.push(p.id.clone());
        }
    }
    dups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ruling {
    CorrectionOrdered,
    DismissedInvalidReceipt,
    DismissedBoardConsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplaintOutcome {
    pub receipt_authentic: bool,
    pub disputed: Pairing,
    pub board_state: PairingStatus,
    pub ruling: Ruling,
    /// Present iff `ruling` is `correction_ordered`.
    pub repair: Option<BoardRepair>,
}

/// Adjudicates a complaint about one pairing of a receipt.
///
/// Returns `None` when `pairing_index` is out of range.
pub fn file_complaint(
    receipt: &Receipt,
    pairing_index: usize,
    board: &Board,
    machine_pub: &VerifyingKey,
) -> Option<ComplaintOutcome> {
    let disputed = receipt.body.pairings.get(pairing_index)?.clone();
    let receipt_authentic = verify_receipt_signature(receipt, machine_pub);
    let board_state = pairing_status(&disputed, &BoardIndex::new(board));
    let (ruling, repair) = if !receipt_authentic {
        (Ruling::DismissedInvalidReceipt, None)
    } else {
        match &board_state.status {
            Status::Confirmed => (Ruling::DismissedBoardConsistent, None),
            Status::Missing => (
                Ruling::CorrectionOrdered,
                Some(BoardRepair::Insert {
                    pairing: disputed.clone(),
                }),
            ),
            Status::WrongChoice { found } => (
                Ruling::CorrectionOrdered,
                Some(BoardRepair::Move {
                    id: disputed.id.clone(),
                    from: found.clone(),
                    to: disputed.choice.clone(),
                }),
            ),
        }
    };
    Some(ComplaintOutcome {
        receipt_authentic,
        disputed,
        board_state,
        ruling,
        repair,
    })
}

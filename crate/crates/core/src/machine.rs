//! The in-booth voting machine.
//!
//! A [`VotingMachine`] runs one strictly sequential day:
//!
//! 1. [`VotingMachine::start_of_day`] generates the bootstrap votes, signs the
//!    batch and encrypts it to the trusted authority;
//! 2. each voter goes through [`begin_session`](VotingMachine::begin_session)
//!    (ids displayed), [`make_choice`](VotingMachine::make_choice) (draft
//!    receipt behind glass), optionally [`cancel`](VotingMachine::cancel),
//!    and finally [`validate`](VotingMachine::validate);
//! 3. [`close_of_day`](VotingMachine::close_of_day) hands over every recorded
//!    entry for publication.
//!
//! [`MachineBehavior`] lets the simulator swap in the dishonest variants.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::BoardSubmission;
use crate::crypto::{
    self, Ciphertext, CryptoError, EncryptionKey, Signature, SigningKeyPair, VerifyingKey,
};
use crate::id::{generate_id, IdError, VoterId};
use crate::model::{
    BoardEntry, ConfigError, ElectionConfig, Origin, Pairing, Receipt, ReceiptBody,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown choice {0:?}")]
    UnknownChoice(String),
    #[error("a session is already in progress")]
    SessionActive,
    #[error("no session in progress")]
    NoSession,
    #[error("operation requires phase {expected}")]
    WrongPhase { expected: &'static str },
    #[error("expected exactly {expected} selections, got {got}")]
    SelectionCount { expected: usize, got: usize },
    #[error("choice {0:?} selected twice")]
    DuplicateSelection(String),
    #[error("no previously recorded vote to borrow for {0:?}")]
    NoPriorEntries(Vec<String>),
    #[error(transparent)]
    Id(#[from] IdError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// How the machine behaves. Everything except `Honest` is an attack.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MachineBehavior {
    #[default]
    Honest,
    /// Generates the given number of bootstrap votes per candidate instead of
    /// `B` each. Candidates missing from the map get none.
    SkewedBootstrap { counts: BTreeMap<String, u64> },
    /// Adds `count` votes with fresh ids for `beneficiary` at close of day.
    InjectFraud { count: u64, beneficiary: String },
    /// Shows the first voter an id already recorded under `target`.
    BetAttack { target: String },
}

impl MachineBehavior {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::SkewedBootstrap { .. } => "skewed_bootstrap",
            Self::InjectFraud { .. } => "inject_fraud",
            Self::BetAttack { .. } => "bet_attack",
        }
    }

    fn validate(&self, config: &ElectionConfig) -> Result<(), MachineError> {
        let known = |c: &String| {
            config
                .candidate_index(c)
                .map(|_| ())
                .ok_or_else(|| MachineError::UnknownChoice(c.clone()))
        };
        match self {
            Self::Honest => Ok(()),
            Self::SkewedBootstrap { counts } => counts.keys().try_for_each(known),
            Self::InjectFraud { beneficiary, .. } => known(beneficiary),
            Self::BetAttack { target } => known(target),
        }
    }
}

/// Signed record of the start-of-day votes, as sent to the authority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapBatch {
    pub entries: Vec<Pairing>,
    pub machine_signature: Signature,
}

impl BootstrapBatch {
    /// `label\tdigits` per entry in generation order, newline-separated.
    pub fn canonical_bytes(entries: &[Pairing]) -> Vec<u8> {
        entries
            .iter()
            .map(|p| format!("{}\t{}", p.choice, p.id))
            .collect::<Vec<_>>()
            .join("\n")
            .into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DraftReceipt {
    pub body: ReceiptBody,
    /// `(candidate index, position in the unshown pool)` per borrowed pairing;
    /// only tracked in full-bootstrap mode.
    #[serde(skip)]
    pool_slots: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    ChoicePending,
    ReceiptDisplayed { draft: DraftReceipt },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    /// The `k` ids shown to the voter on entry.
    pub assigned_ids: Vec<VoterId>,
    pub phase: Phase,
    /// Selections in ballot order, once made.
    pub selections: Option<Vec<String>>,
    /// Index into `assigned_ids` of an id reused by a bet attack.
    #[serde(skip)]
    reused: Option<usize>,
}

impl Session {
    pub fn draft(&self) -> Option<&DraftReceipt> {
        match &self.phase {
            Phase::ReceiptDisplayed { draft } => Some(draft),
            Phase::ChoicePending => None,
        }
    }
}

#[derive(Debug)]
pub struct VotingMachine {
    config: ElectionConfig,
    keys: SigningKeyPair,
    authority_pub: EncryptionKey,
    issued: HashSet<VoterId>,
    recorded: Vec<BoardEntry>,
    /// Indices into `recorded`, per candidate.
    by_choice: Vec<Vec<usize>>,
    /// Full-bootstrap mode: recorded entries never printed on a validated receipt.
    unshown: Vec<Vec<usize>>,
    signings: u64,
    behavior: MachineBehavior,
    bet_spent: bool,
    fraud_done: bool,
    session: Option<Session>,
    rng: ChaCha20Rng,
}

impl VotingMachine {
    /// Generates and records the bootstrap votes, returning the machine and
    /// the signed batch encrypted to `authority_pub`.
    pub fn start_of_day(
        config: ElectionConfig,
        keys: SigningKeyPair,
        authority_pub: EncryptionKey,
        behavior: MachineBehavior,
        mut rng: ChaCha20Rng,
    ) -> Result<(Self, Ciphertext), MachineError> {
        config.validate()?;
        behavior.validate(&config)?;
        let m = config.num_candidates();
        let mut machine = Self {
            config,
            keys,
            authority_pub,
            issued: HashSet::new(),
            recorded: Vec::new(),
            by_choice: vec![Vec::new(); m],
            unshown: vec![Vec::new(); m],
            signings: 0,
            behavior,
            bet_spent: false,
            fraud_done: false,
            session: None,
            rng: ChaCha20Rng::from_seed([0; 32]),
        };

        let counts: Vec<u64> = match &machine.behavior {
            MachineBehavior::SkewedBootstrap { counts } => machine
                .config
                .candidates
                .iter()
                .map(|c| counts.get(c).copied().unwrap_or(0))
                .collect(),
            _ => vec![machine.config.bootstrap_per_candidate; m],
        };
        let mut batch = Vec::new();
        for (ci, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let id = machine.fresh_id(&mut rng)?;
                let choice = machine.config.candidates[ci].clone();
                batch.push(Pairing::new(choice.clone(), id.clone()));
                let idx = machine.record(choice, id, Origin::Bootstrap);
                if machine.config.full_bootstrap_mode {
                    machine.unshown[ci].push(idx);
                }
            }
        }

        let signature = crypto::sign(
            &machine.keys.secret,
            &BootstrapBatch::canonical_bytes(&batch),
        )?;
        let batch = BootstrapBatch {
            entries: batch,
            machine_signature: signature,
        };
        let plaintext = serde_json::to_vec(&batch).expect("batch serializes");
        let ciphertext = crypto::encrypt_to(&machine.authority_pub, &plaintext, &mut rng)?;
        machine.rng = rng;
        Ok((machine, ciphertext))
    }

    fn fresh_id(&mut self, rng: &mut ChaCha20Rng) -> Result<VoterId, IdError> {
        let id = generate_id(rng, &self.issued)?;
        self.issued.insert(id.clone());
        Ok(id)
    }

    fn record(&mut self, choice: String, id: VoterId, origin: Origin) -> usize {
        let ci = self
            .config
            .candidate_index(&choice)
            .expect("validated choice");
        let idx = self.recorded.len();
        self.recorded.push(BoardEntry { choice, id, origin });
        self.by_choice[ci].push(idx);
        idx
    }

    pub fn config(&self) -> &ElectionConfig {
        &self.config
    }

    pub fn public_key(&self) -> &VerifyingKey {
        &self.keys.public
    }

    pub fn recorded(&self) -> &[BoardEntry] {
        &self.recorded
    }

    pub fn issued(&self) -> &HashSet<VoterId> {
        &self.issued
    }

    pub fn signings(&self) -> u64 {
        self.signings
    }

    pub fn behavior(&self) -> &MachineBehavior {
        &self.behavior
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// Voter enters the booth: `k` ids are drawn and displayed before any
    /// choice is made.
    pub fn begin_session(&mut self) -> Result<&Session, MachineError> {
        if self.session.is_some() {
            return Err(MachineError::SessionActive);
        }
        let k = self.config.selections_per_voter;
        let mut rng = self.rng.clone();
        let mut assigned = Vec::with_capacity(k);
        let mut reused = None;

        if let MachineBehavior::BetAttack { target } = &self.behavior {
            if !self.bet_spent {
                self.bet_spent = true;
                let ci = self
                    .config
                    .candidate_index(target)
                    .expect("validated target");
                let pool = &self.by_choice[ci];
                if !pool.is_empty() {
                    let idx = pool[rng.gen_range(0..pool.len())];
                    assigned.push(self.recorded[idx].id.clone());
                    reused = Some(0);
                }
            }
        }
        while assigned.len() < k {
            assigned.push(self.fresh_id(&mut rng)?);
        }
        self.rng = rng;
        Ok(self.session.insert(Session {
            assigned_ids: assigned,
            phase: Phase::ChoicePending,
            selections: None,
            reused,
        }))
    }

    /// Produces the draft receipt for `selections`: the voter's ids next to
    /// their choices, a randomly borrowed recorded id next to every other
    /// choice.
    pub fn make_choice<S: AsRef<str>>(
        &mut self,
        selections: &[S],
    ) -> Result<&DraftReceipt, MachineError> {
        let session = self.session.as_ref().ok_or(MachineError::NoSession)?;
        if !matches!(session.phase, Phase::ChoicePending) {
            return Err(MachineError::WrongPhase {
                expected: "choice_pending",
            });
        }
        let k = self.config.selections_per_voter;
        if selections.len() != k {
            return Err(MachineError::SelectionCount {
                expected: k,
                got: selections.len(),
            });
        }
        let mut selected = vec![false; self.config.num_candidates()];
        for s in selections {
            let s = s.as_ref();
            let ci = self
                .config
                .candidate_index(s)
                .ok_or_else(|| MachineError::UnknownChoice(s.to_owned()))?;
            if std::mem::replace(&mut selected[ci], true) {
                return Err(MachineError::DuplicateSelection(s.to_owned()));
            }
        }

        let full = self.config.full_bootstrap_mode;
        let empty: Vec<String> = selected
            .iter()
            .enumerate()
            .filter(|&(ci, &sel)| {
                !sel && if full {
                    self.unshown[ci].is_empty()
                } else {
                    self.by_choice[ci].is_empty()
                }
            })
            .map(|(ci, _)| self.config.candidates[ci].clone())
            .collect();
        if !empty.is_empty() {
            return Err(MachineError::NoPriorEntries(empty));
        }

        let mut own = session.assigned_ids.iter();
        let mut pairings = Vec::with_capacity(selected.len());
        let mut pool_slots = Vec::new();
        let mut ordered = Vec::with_capacity(k);
        for (ci, &sel) in selected.iter().enumerate() {
            let choice = self.config.candidates[ci].clone();
            let id = if sel {
                ordered.push(choice.clone());
                own.next().expect("k assigned ids").clone()
            } else if full {
                let slot = self.rng.gen_range(0..self.unshown[ci].len());
                pool_slots.push((ci, slot));
                self.recorded[self.unshown[ci][slot]].id.clone()
            } else {
                let pool = &self.by_choice[ci];
                self.recorded[pool[self.rng.gen_range(0..pool.len())]]
                    .id
                    .clone()
            };
            pairings.push(Pairing::new(choice, id));
        }

        let draft = DraftReceipt {
            body: ReceiptBody {
                header: self.config.header(),
                pairings,
            },
            pool_slots,
        };
        let session = self.session.as_mut().expect("checked above");
        session.selections = Some(ordered);
        session.phase = Phase::ReceiptDisplayed { draft };
        Ok(session.draft().expect("just set"))
    }

    /// Destroys the displayed receipt. The assigned ids stay with the session.
    pub fn cancel(&mut self) -> Result<&Session, MachineError> {
        let session = self.session.as_mut().ok_or(MachineError::NoSession)?;
        if !matches!(session.phase, Phase::ReceiptDisplayed { .. }) {
            return Err(MachineError::WrongPhase {
                expected: "receipt_displayed",
            });
        }
        session.phase = Phase::ChoicePending;
        session.selections = None;
        Ok(session)
    }

    /// The voter leaves without validating. Assigned ids are burned.
    pub fn abandon(&mut self) -> Result<(), MachineError> {
        self.session
            .take()
            .map(|_| ())
            .ok_or(MachineError::NoSession)
    }

    /// Records the vote, counts one signing and hands out the signed receipt.
    pub fn validate(&mut self) -> Result<Receipt, MachineError> {
        let session = self.session.as_ref().ok_or(MachineError::NoSession)?;
        let Phase::ReceiptDisplayed { draft } = &session.phase else {
            return Err(MachineError::WrongPhase {
                expected: "receipt_displayed",
            });
        };
        let signature = crypto::sign(&self.keys.secret, &draft.body.canonical_bytes())?;
        let session = self.session.take().expect("checked above");
        let Phase::ReceiptDisplayed { draft } = session.phase else {
            unreachable!("checked above")
        };
        let selections = session.selections.expect("set with the draft");

        for (i, (choice, id)) in selections.into_iter().zip(session.assigned_ids).enumerate() {
            let id = if session.reused == Some(i) {
                // The shown id already belongs to someone else: the vote is
                // recorded under a substitute so the board stays publishable.
                let mut rng = self.rng.clone();
                let sub = self.fresh_id(&mut rng)?;
                self.rng = rng;
                sub
            } else {
                id
            };
            self.record(choice, id, Origin::Real);
        }
        // Slots were drawn per candidate, so removing one never shifts another.
        for (ci, slot) in draft.pool_slots {
            self.unshown[ci].swap_remove(slot);
        }
        self.signings += 1;
        Ok(Receipt {
            body: draft.body,
            signature,
        })
    }

    /// Ends the day and returns everything recorded, origins included.
    pub fn close_of_day(
        &mut self,
        voter_names: Option<Vec<String>>,
    ) -> Result<BoardSubmission, MachineError> {
        if self.session.is_some() {
            return Err(MachineError::SessionActive);
        }
        if let MachineBehavior::InjectFraud { count, beneficiary } = self.behavior.clone() {
            if !self.fraud_done {
                self.fraud_done = true;
                let mut rng = self.rng.clone();
                for _ in 0..count {
                    let id = self.fresh_id(&mut rng)?;
                    self.record(beneficiary.clone(), id, Origin::Fraudulent);
                }
                self.rng = rng;
            }
        }
        Ok(BoardSubmission {
            header: self.config.header(),
            entries: self.recorded.clone(),
            signings_count: self.signings,
            voter_names,
        })
    }
}

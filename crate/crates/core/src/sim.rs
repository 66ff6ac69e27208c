//! Deterministic election simulator.
//!
//! [`run_scenario`] drives one machine through a whole day with a seeded
//! voter population, then publishes, tallies, audits and lets every voter
//! check their receipt. The resulting [`SimulationTrace`] records ground
//! truth next to everything the public could observe, so tests can compare
//! the two.
//!
//! Randomness is split into named streams derived from the scenario seed
//! (see [`stream_rng`]), so adding a consumer to one stream never perturbs
//! another, and batch runs are identical whether or not they run in
//! parallel.

use std::collections::HashMap;
use std::ops::Range;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::authority::{self, AuthorityError, CheckReport, CheckVerdict, CountDelta};
use crate::board::{self, AuditReport, BoardError, BoardSubmission, Results};
use crate::crypto::{
    Ciphertext, EncryptionKey, EncryptionKeyPair, EncryptionScheme, SignatureScheme,
    SigningKeyPair, VerifyingKey,
};
use crate::id::VoterId;
use crate::machine::{MachineBehavior, MachineError, VotingMachine};
use crate::model::{Board, ConfigError, ElectionConfig, Receipt};
use crate::verify::{self, ComplaintOutcome, PairingStatus, Status};

/// Derives an independent generator for `(seed, label)`.
pub fn stream_rng(seed: u64, label: &str) -> ChaCha20Rng {
    let digest = Sha256::new()
        .chain_update(b"receiptvote stream")
        .chain_update(seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    ChaCha20Rng::from_seed(digest.into())
}

/// Machine signing keys and authority encryption keys for a seed.
pub fn scenario_keys(seed: u64) -> (SigningKeyPair, EncryptionKeyPair) {
    (
        SignatureScheme::Ed25519.keygen(&mut stream_rng(seed, "machine-keys")),
        EncryptionScheme::X25519ChaCha20Poly1305.keygen(&mut stream_rng(seed, "authority-keys")),
    )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub election: ElectionConfig,
    pub num_voters: u64,
    /// Relative weight of each candidate, in ballot order.
    pub voter_choice_distribution: Vec<f64>,
    #[serde(default)]
    pub behavior: MachineBehavior,
    #[serde(default = "yes")]
    pub collect_receipts: bool,
    #[serde(default = "yes")]
    pub coercer_knows_order: bool,
    pub seed: u64,
    /// Probability that a voter cancels a displayed receipt and chooses again.
    #[serde(default)]
    pub cancel_rate: f64,
    #[serde(default = "yes")]
    pub destroy_bootstrap_record: bool,
    #[serde(default)]
    pub publish_voter_names: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.election.validate()?;
        let w = &self.voter_choice_distribution;
        if w.len() != self.election.num_candidates() {
            return Err(SimError::Scenario(format!(
                "{} weights for {} candidates",
                w.len(),
                self.election.num_candidates()
            )));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SimError::Scenario(
                "weights must be finite and non-negative".into(),
            ));
        }
        if w.iter().filter(|&&x| x > 0.0).count() < self.election.selections_per_voter {
            return Err(SimError::Scenario(
                "fewer candidates with positive weight than selections per voter".into(),
            ));
        }
        if self.num_voters > self.election.registered_voters {
            return Err(SimError::Scenario(format!(
                "{} voters exceed {} registered",
                self.num_voters, self.election.registered_voters
            )));
        }
        if !(0.0..1.0).contains(&self.cancel_rate) {
            return Err(SimError::Scenario("cancel_rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Ground truth and public observations for one voter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoterRecord {
    pub index: usize,
    pub selections: Vec<String>,
    pub assigned_ids: Vec<VoterId>,
    pub cancellations: u32,
    pub receipt: Option<Receipt>,
    pub signature_valid: bool,
    pub checks: Vec<PairingStatus>,
    pub duplicate_ids: Vec<VoterId>,
}

impl VoterRecord {
    pub fn has_discrepancy(&self) -> bool {
        !self.duplicate_ids.is_empty() || self.checks.iter().any(|c| !c.is_confirmed())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DetectionEvent {
    BootstrapRejected {
        reason: String,
        deltas: Vec<CountDelta>,
    },
    BootstrapCheckDiscrepancy {
        report: CheckReport,
    },
    AuthorityError {
        reason: String,
    },
    SessionFailed {
        voter: usize,
        reason: String,
    },
    PublishRejected {
        reason: String,
    },
    TallyInconsistent {
        reason: String,
    },
    SurplusDetected {
        surplus: i64,
    },
    MissingVotes {
        expected: u64,
        actual: u64,
    },
    InvalidReceiptSignature {
        voter: usize,
    },
    ReceiptDiscrepancy {
        voter: usize,
        pairings: Vec<PairingStatus>,
        duplicate_ids: Vec<VoterId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityOutcome {
    pub accepted_entries: Option<usize>,
    pub check: Option<CheckReport>,
    pub destroyed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplaintRecord {
    pub voter: usize,
    pub pairing_index: usize,
    pub outcome: ComplaintOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    DidNotVoteFor,
}

/// "The voter holding receipt `receipt` did not vote for `choice`", because
/// the id printed next to `choice` already appeared on receipt `evidence`.
/// Receipt numbers are 1-based positions in casting order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoercionStatement {
    pub receipt: usize,
    pub choice: String,
    pub polarity: Polarity,
    pub evidence: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoercionInference {
    pub statements: Vec<CoercionStatement>,
}

/// What a coercer holding `receipts` in casting order can infer.
///
/// A voter's own ids are drawn fresh when the session starts, so any id that
/// was already printed on an earlier receipt must have been borrowed. The
/// analyzer can only ever conclude "did not vote for".
pub fn coercion_infer<S: AsRef<str>>(
    receipts: &[Receipt],
    ballot_order: &[S],
) -> CoercionInference {
    let mut first_seen: HashMap<&VoterId, usize> = HashMap::new();
    let mut statements = Vec::new();
    for (j, receipt) in receipts.iter().enumerate() {
        for choice in ballot_order {
            let choice = choice.as_ref();
            for p in receipt.body.pairings.iter().filter(|p| p.choice == choice) {
                if let Some(&i) = first_seen.get(&p.id) {
                    statements.push(CoercionStatement {
                        receipt: j + 1,
                        choice: choice.to_owned(),
                        polarity: Polarity::DidNotVoteFor,
                        evidence: i + 1,
                    });
                }
            }
        }
        for p in &receipt.body.pairings {
            first_seen.entry(&p.id).or_insert(j);
        }
    }
    CoercionInference { statements }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoercionSummary {
    pub inference: CoercionInference,
    /// Statements contradicted by ground truth.
    pub false_statements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub scenario: ScenarioConfig,
    pub machine_public_key: VerifyingKey,
    pub authority_public_key: EncryptionKey,
    pub bootstrap_ciphertext: Ciphertext,
    pub voters: Vec<VoterRecord>,
    /// Origin-tagged ground truth; never published.
    pub submission: BoardSubmission,
    pub board: Option<Board>,
    pub results: Option<Results>,
    pub authority: AuthorityOutcome,
    pub audit: Option<AuditReport>,
    pub complaints: Vec<ComplaintRecord>,
    pub coercion: Option<CoercionSummary>,
    pub events: Vec<DetectionEvent>,
    pub warnings: Vec<String>,
}

impl SimulationTrace {
    /// Validated ground-truth votes per candidate, in ballot order.
    pub fn ground_truth_histogram(&self) -> Vec<u64> {
        let e = &self.scenario.election;
        let mut counts = vec![0u64; e.num_candidates()];
        for v in self.voters.iter().filter(|v| v.receipt.is_some()) {
            for s in &v.selections {
                counts[e.candidate_index(s).expect("valid selection")] += 1;
            }
        }
        counts
    }

    /// Receipts in casting order.
    pub fn receipts(&self) -> Vec<&Receipt> {
        self.voters
            .iter()
            .filter_map(|v| v.receipt.as_ref())
            .collect()
    }
}

fn sample_selections(
    rng: &mut ChaCha20Rng,
    weights: &[f64],
    k: usize,
    candidates: &[String],
) -> Vec<String> {
    let mut w = weights.to_vec();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let dist = WeightedIndex::new(&w).expect("validated weights");
        let i = dist.sample(rng);
        w[i] = 0.0;
        picked.push(i);
    }
    picked.sort_unstable();
    picked.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Runs a full simulated election day. Module failures become
/// [`DetectionEvent`]s; only an invalid configuration is an error.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationTrace, SimError> {
    config.validate()?;
    let election = &config.election;
    let seed = config.seed;
    let mut events = Vec::new();
    let mut warnings = Vec::new();

    let (machine_keys, authority_keys) = scenario_keys(seed);
    let machine_pub = machine_keys.public.clone();
    let (mut machine, ciphertext) = VotingMachine::start_of_day(
        election.clone(),
        machine_keys,
        authority_keys.public.clone(),
        config.behavior.clone(),
        stream_rng(seed, "machine"),
    )?;

    let mut record = match authority::receive_batch(
        &ciphertext,
        &machine_pub,
        &authority_keys.secret,
        election,
        0,
    ) {
        Ok(r) => Some(r),
        Err(AuthorityError::CountMismatch(deltas)) => {
            events.push(DetectionEvent::BootstrapRejected {
                reason: "count mismatch".into(),
                deltas,
            });
            None
        }
        Err(e) => {
            events.push(DetectionEvent::BootstrapRejected {
                reason: e.to_string(),
                deltas: vec![],
            });
            None
        }
    };
    let mut authority = AuthorityOutcome {
        accepted_entries: record.as_ref().map(|r| r.entries.len()),
        check: None,
        destroyed: false,
    };

    let mut voter_rng = stream_rng(seed, "voters");
    let mut voters = Vec::with_capacity(config.num_voters as usize);
    for index in 0..config.num_voters as usize {
        let assigned_ids = machine.begin_session()?.assigned_ids.clone();
        let mut selections = sample_selections(
            &mut voter_rng,
            &config.voter_choice_distribution,
            election.selections_per_voter,
            &election.candidates,
        );
        let mut cancellations = 0;
        let receipt = loop {
            if let Err(e) = machine.make_choice(&selections) {
                events.push(DetectionEvent::SessionFailed {
                    voter: index,
                    reason: e.to_string(),
                });
                machine.abandon()?;
                break None;
            }
            if config.cancel_rate > 0.0 && voter_rng.gen_bool(config.cancel_rate) {
                machine.cancel()?;
                cancellations += 1;
                selections = sample_selections(
                    &mut voter_rng,
                    &config.voter_choice_distribution,
                    election.selections_per_voter,
                    &election.candidates,
                );
                continue;
            }
            break Some(machine.validate()?);
        };
        voters.push(VoterRecord {
            index,
            selections,
            assigned_ids,
            cancellations,
            receipt,
            signature_valid: false,
            checks: vec![],
            duplicate_ids: vec![],
        });
    }

    let names = config.publish_voter_names.then(|| {
        voters
            .iter()
            .filter(|v| v.receipt.is_some())
            .map(|v| format!("voter-{:04}", v.index + 1))
            .collect()
    });
    let submission = machine.close_of_day(names)?;

    let board = match board::publish(&submission, election) {
        Ok(b) => Some(b),
        Err(e) => {
            events.push(DetectionEvent::PublishRejected {
                reason: e.to_string(),
            });
            None
        }
    };

    let mut results = None;
    let mut audit = None;
    let mut complaints = Vec::new();
    if let Some(board) = &board {
        let tallied = match board::tally(board, election) {
            Ok(r) => Some(r),
            Err(e) => {
                events.push(DetectionEvent::TallyInconsistent {
                    reason: e.to_string(),
                });
                None
            }
        };

        if let Some(rec) = record.as_mut() {
            match rec.end_of_day_check(board) {
                Ok(report) => {
                    if report.verdict == CheckVerdict::Discrepancy {
                        events.push(DetectionEvent::BootstrapCheckDiscrepancy {
                            report: report.clone(),
                        });
                    }
                    authority.check = Some(report);
                    if config.destroy_bootstrap_record {
                        match rec.destroy() {
                            Ok(_) => authority.destroyed = true,
                            Err(e) => events.push(DetectionEvent::AuthorityError {
                                reason: e.to_string(),
                            }),
                        }
                    }
                }
                Err(e) => events.push(DetectionEvent::AuthorityError {
                    reason: e.to_string(),
                }),
            }
        }

        match board::audit_counts(board, election) {
            Ok(report) => {
                if report.surplus > 0 {
                    events.push(DetectionEvent::SurplusDetected {
                        surplus: report.surplus,
                    });
                }
                results = tallied.map(|r| r.apply_audit(&report));
                audit = Some(report);
            }
            Err(BoardError::MissingVotes { expected, actual }) => {
                events.push(DetectionEvent::MissingVotes { expected, actual });
                results = tallied;
            }
            Err(e) => {
                events.push(DetectionEvent::TallyInconsistent {
                    reason: e.to_string(),
                });
                results = tallied;
            }
        }

        for v in &mut voters {
            let Some(receipt) = &v.receipt else { continue };
            v.signature_valid = verify::verify_receipt_signature(receipt, &machine_pub);
            v.checks = verify::check_receipt_against_board(receipt, board);
            v.duplicate_ids = verify::duplicate_ids(receipt);
            if !v.signature_valid {
                events.push(DetectionEvent::InvalidReceiptSignature { voter: v.index });
            }
            if v.has_discrepancy() {
                events.push(DetectionEvent::ReceiptDiscrepancy {
                    voter: v.index,
                    pairings: v
                        .checks
                        .iter()
                        .filter(|c| !c.is_confirmed())
                        .cloned()
                        .collect(),
                    duplicate_ids: v.duplicate_ids.clone(),
                });
                for (i, c) in v.checks.iter().enumerate() {
                    if c.is_confirmed() {
                        continue;
                    }
                    let outcome = verify::file_complaint(receipt, i, board, &machine_pub)
                        .expect("index from the receipt's own pairings");
                    complaints.push(ComplaintRecord {
                        voter: v.index,
                        pairing_index: i,
                        outcome,
                    });
                }
            }
        }
    }

    let coercion = (config.collect_receipts && config.coercer_knows_order).then(|| {
        let receipts: Vec<Receipt> = voters.iter().filter_map(|v| v.receipt.clone()).collect();
        let owners: Vec<&VoterRecord> = voters.iter().filter(|v| v.receipt.is_some()).collect();
        let inference = coercion_infer(&receipts, &election.candidates);
        let false_statements = inference
            .statements
            .iter()
            .filter(|s| owners[s.receipt - 1].selections.contains(&s.choice))
            .count();
        CoercionSummary {
            inference,
            false_statements,
        }
    });
    if config.collect_receipts && !config.coercer_knows_order {
        warnings.push("receipts collected without casting order: no inference possible".into());
    }
    if election.full_bootstrap_mode {
        warnings.push(
            "full bootstrap mode: the trusted authority can tell real votes from bootstrap votes"
                .into(),
        );
    }

    Ok(SimulationTrace {
        scenario: config.clone(),
        machine_public_key: machine_pub,
        authority_public_key: authority_keys.public,
        bootstrap_ciphertext: ciphertext,
        voters,
        submission,
        board,
        results,
        authority,
        audit,
        complaints,
        coercion,
        events,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionVerdict {
    Clean,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub behavior: String,
    pub detected: bool,
    pub verdict: DetectionVerdict,
    pub reason: String,
    pub events: usize,
    pub full_bootstrap_warning: bool,
}

/// Decides whether the attack configured in the trace was caught.
pub fn evaluate_detection(trace: &SimulationTrace) -> DetectionReport {
    let behavior = &trace.scenario.behavior;
    let (detected, reason) = match behavior {
        MachineBehavior::Honest => (
            !trace.events.is_empty(),
            format!("{} detection events", trace.events.len()),
        ),
        MachineBehavior::SkewedBootstrap { .. } => {
            let hit = trace.events.iter().any(|e| {
                matches!(e, DetectionEvent::BootstrapRejected { deltas, .. } if !deltas.is_empty())
            });
            (hit, "authority bootstrap count check".into())
        }
        MachineBehavior::InjectFraud { count, .. } => {
            let surplus = trace.audit.as_ref().map(|a| a.surplus);
            (
                surplus == Some(*count as i64),
                format!("audit surplus {surplus:?}, injected {count}"),
            )
        }
        MachineBehavior::BetAttack { .. } => {
            let hit = trace.voters.first().is_some_and(|victim| {
                !victim.duplicate_ids.is_empty()
                    || victim
                        .checks
                        .iter()
                        .any(|c| matches!(c.status, Status::WrongChoice { .. }))
            });
            (hit, "first voter's receipt check".into())
        }
    };
    DetectionReport {
        behavior: behavior.kind().into(),
        detected,
        verdict: if detected {
            DetectionVerdict::Detected
        } else {
            DetectionVerdict::Clean
        },
        reason,
        events: trace.events.len(),
        full_bootstrap_warning: trace.scenario.election.full_bootstrap_mode,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub behavior: String,
    pub runs: u64,
    pub detected: u64,
    pub rate: f64,
}

/// Runs `config` once per seed in `seeds` (in parallel) and aggregates the
/// detection verdicts.
pub fn run_batch(config: &ScenarioConfig, seeds: Range<u64>) -> Result<BatchReport, SimError> {
    let verdicts: Vec<bool> = seeds
        .clone()
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig {
                seed,
                ..config.clone()
            };
            run_scenario(&cfg).map(|t| evaluate_detection(&t).detected)
        })
        .collect::<Result<_, _>>()?;
    let runs = verdicts.len() as u64;
    let detected = verdicts.iter().filter(|&&d| d).count() as u64;
    Ok(BatchReport {
        behavior: config.behavior.kind().into(),
        runs,
        detected,
        rate: if runs == 0 {
            0.0
        } else {
            detected as f64 / runs as f64
        },
    })
}

/// Applies every ordered correction in turn and returns the repaired board.
pub fn apply_corrections<'a>(
    board: &Board,
    outcomes: impl IntoIterator<Item = &'a ComplaintOutcome>,
    config: &ElectionConfig,
) -> Result<Board, BoardError> {
    let mut current = board.clone();
    for outcome in outcomes {
        if let Some(repair) = &outcome.repair {
            current = current.repaired(repair, config)?;
        }
    }
    Ok(current)
}

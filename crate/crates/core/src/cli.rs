//! Command implementations behind the `receiptvote` binary.
//!
//! Each command writes human output to `out`, diagnostics to `err`, and
//! returns a process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | clean |
//! | 1 | usage error, malformed input or I/O failure |
//! | 2 | integrity finding (detection event, discrepancy, surplus) |
//! | 3 | authenticity failure (bad signature, undecryptable batch) |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::authority::{self, AuthorityError, CheckVerdict};
use crate::board::{self, AuditVerdict, BoardError};
use crate::crypto::{Ciphertext, DecryptionKey, VerifyingKey};
use crate::model::{Board, ElectionConfig, Receipt};
use crate::render::{render_board_text, render_receipt_text};
use crate::sim::{self, coercion_infer, evaluate_detection, scenario_keys, ScenarioConfig};
use crate::verify::{self, Status};

pub const EXIT_CLEAN: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INTEGRITY: u8 = 2;
pub const EXIT_AUTHENTICITY: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    #[default]
    Text,
}

/// Failure that maps to exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<u8, UsageError>;

fn finish(result: CmdResult, err: &mut dyn Write) -> u8 {
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, UsageError> {
    let text =
        fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), UsageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| UsageError(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

/// Accepts either a bare election config or a scenario config.
fn read_election(path: &Path) -> Result<ElectionConfig, UsageError> {
    let value: serde_json::Value = read_json(path)?;
    let election = if value.get("election").is_some() {
        serde_json::from_value::<ScenarioConfig>(value)?.election
    } else {
        serde_json::from_value::<ElectionConfig>(value)?
    };
    election.validate()?;
    Ok(election)
}

/// Runs a scenario and writes the full output tree under `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out_dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let mut config: ScenarioConfig = read_json(config_path)?;
        if let Some(seed) = seed {
            config.seed = seed;
        }
        let trace = sim::run_scenario(&config)?;
        let detection = evaluate_detection(&trace);
        let (_, authority_keys) = scenario_keys(config.seed);

        write_file(&out_dir.join("config.json"), to_json(&config))?;
        write_file(&out_dir.join("trace.json"), to_json(&trace))?;
        write_file(
            &out_dir.join("bootstrap_batch.json"),
            to_json(&trace.bootstrap_ciphertext),
        )?;
        write_file(
            &out_dir.join("keys/machine_pub.json"),
            to_json(&trace.machine_public_key),
        )?;
        write_file(
            &out_dir.join("keys/authority_pub.json"),
            to_json(&trace.authority_public_key),
        )?;
        write_file(
            &out_dir.join("keys/authority_secret.json"),
            to_json(&authority_keys.secret),
        )?;

        if let Some(board) = &trace.board {
            write_file(&out_dir.join("board.json"), to_json(board))?;
            if let Some(results) = &trace.results {
                write_file(
                    &out_dir.join("board.txt"),
                    render_board_text(board, results),
                )?;
                write_file(&out_dir.join("reports/results.json"), to_json(results))?;
            }
        }

        let mut order = String::new();
        for (n, receipt) in trace.receipts().into_iter().enumerate() {
            let stem = format!("{:04}", n + 1);
            write_file(
                &out_dir.join(format!("receipts/{stem}.json")),
                to_json(receipt),
            )?;
            write_file(
                &out_dir.join(format!("receipts/{stem}.txt")),
                render_receipt_text(receipt),
            )?;
            order.push_str(&format!("{stem}.json\n"));
        }
        write_file(&out_dir.join("receipts/order.txt"), order)?;

        let rejection: Vec<_> = trace
            .events
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    sim::DetectionEvent::BootstrapRejected { .. }
                        | sim::DetectionEvent::BootstrapCheckDiscrepancy { .. }
                        | sim::DetectionEvent::AuthorityError { .. }
                )
            })
            .collect();
        write_file(
            &out_dir.join("reports/authority.json"),
            to_json(&serde_json::json!({ "outcome": trace.authority, "events": rejection })),
        )?;
        let audit = match &trace.audit {
            Some(report) => serde_json::to_value(report)?,
            None => {
                serde_json::json!({ "error": "audit unavailable", "events": trace.events.iter().filter(|e| matches!(e, sim::DetectionEvent::MissingVotes { .. } | sim::DetectionEvent::PublishRejected { .. })).collect::<Vec<_>>() })
            }
        };
        write_file(&out_dir.join("reports/audit.json"), to_json(&audit))?;
        write_file(&out_dir.join("reports/detection.json"), to_json(&detection))?;
        if let Some(coercion) = &trace.coercion {
            write_file(&out_dir.join("reports/coercion.json"), to_json(coercion))?;
        }

        writeln!(
            out,
            "{}: {} voters, {} board entries, {} detection events, verdict {}",
            detection.behavior,
            trace.receipts().len(),
            trace.board.as_ref().map_or(0, |b| b.entries.len()),
            trace.events.len(),
            if trace.events.is_empty() {
                "clean"
            } else {
                "detected"
            }
        )?;
        Ok(if trace.events.is_empty() {
            EXIT_CLEAN
        } else {
            EXIT_INTEGRITY
        })
    })();
    finish(result, err)
}

/// Checks a receipt's signature and each of its pairings against a board.
pub fn cmd_verify_receipt(
    receipt_path: &Path,
    board_path: &Path,
    machine_pub_path: &Path,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let receipt: Receipt = read_json(receipt_path)?;
        let board: Board = read_json(board_path)?;
        let key: VerifyingKey = read_json(machine_pub_path)?;
        if !verify::verify_receipt_signature(&receipt, &key) {
            writeln!(out, "signature: INVALID")?;
            return Ok(EXIT_AUTHENTICITY);
        }
        let statuses = verify::check_receipt_against_board(&receipt, &board);
        let dups = verify::duplicate_ids(&receipt);
        match format {
            Format::Json => write!(
                out,
                "{}",
                to_json(
                    &serde_json::json!({ "signature_valid": true, "pairings": statuses, "duplicate_ids": dups })
                )
            )?,
            Format::Text => {
                writeln!(out, "signature: valid")?;
                for s in &statuses {
                    let status = match &s.status {
                        Status::Confirmed => "confirmed".to_owned(),
                        Status::Missing => "missing".to_owned(),
                        Status::WrongChoice { found } => {
                            format!("wrong_choice (board says {found})")
                        }
                    };
                    writeln!(out, "{} {} {}", s.pairing.choice, s.pairing.id, status)?;
                }
                for id in &dups {
                    writeln!(out, "duplicate id on receipt: {id}")?;
                }
            }
        }
        let clean = dups.is_empty() && statuses.iter().all(|s| s.is_confirmed());
        Ok(if clean { EXIT_CLEAN } else { EXIT_INTEGRITY })
    })();
    finish(result, err)
}

/// Prints the count audit for a published board.
pub fn cmd_audit(
    board_path: &Path,
    config_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let board: Board = read_json(board_path)?;
        let election = read_election(config_path)?;
        match board::audit_counts(&board, &election) {
            Ok(report) => {
                write!(out, "{}", to_json(&report))?;
                Ok(match report.verdict {
                    AuditVerdict::Clean => EXIT_CLEAN,
                    AuditVerdict::SurplusDetected => EXIT_INTEGRITY,
                })
            }
            Err(BoardError::MissingVotes { expected, actual }) => {
                write!(
                    out,
                    "{}",
                    to_json(&serde_json::json!({
                        "expected_entries": expected,
                        "actual_entries": actual,
                        "verdict": "missing_votes",
                    }))
                )?;
                Ok(EXIT_INTEGRITY)
            }
            Err(e) => Err(e.into()),
        }
    })();
    finish(result, err)
}

pub struct AuthorityCheckPaths<'a> {
    pub batch: &'a Path,
    pub machine_pub: &'a Path,
    pub authority_secret: &'a Path,
    pub config: &'a Path,
    pub board: &'a Path,
}

/// Authority side: open the bootstrap batch, check counts, confirm presence
/// on the board, destroy the record.
pub fn cmd_authority_check(
    paths: &AuthorityCheckPaths<'_>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let ciphertext: Ciphertext = read_json(paths.batch)?;
        let machine_pub: VerifyingKey = read_json(paths.machine_pub)?;
        let secret: DecryptionKey = read_json(paths.authority_secret)?;
        let election = read_election(paths.config)?;
        let board: Board = read_json(paths.board)?;

        let mut record =
            match authority::receive_batch(&ciphertext, &machine_pub, &secret, &election, 0) {
                Ok(r) => r,
                Err(AuthorityError::CountMismatch(deltas)) => {
                    write!(
                        out,
                        "{}",
                        to_json(
                            &serde_json::json!({ "verdict": "count_mismatch", "deltas": deltas })
                        )
                    )?;
                    return Ok(EXIT_INTEGRITY);
                }
                Err(e @ (AuthorityError::BadSignature | AuthorityError::Decrypt(_))) => {
                    writeln!(err, "authenticity failure: {e}")?;
                    return Ok(EXIT_AUTHENTICITY);
                }
                Err(e) => return Err(e.into()),
            };
        let report = record.end_of_day_check(&board)?;
        record.destroy()?;
        write!(out, "{}", to_json(&report))?;
        Ok(match report.verdict {
            CheckVerdict::Clean => EXIT_CLEAN,
            CheckVerdict::Discrepancy => EXIT_INTEGRITY,
        })
    })();
    finish(result, err)
}

/// Runs the coercion analyzer over receipts listed (in casting order) in
/// `order_file`; entries are paths relative to `receipts_dir`.
pub fn cmd_coerce(
    receipts_dir: &Path,
    order_file: &Path,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let order = fs::read_to_string(order_file)
            .map_err(|e| UsageError(format!("{}: {e}", order_file.display())))?;
        let receipts = order
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|name| read_json::<Receipt>(&receipts_dir.join(name)))
            .collect::<Result<Vec<_>, _>>()?;
        let ballot: Vec<String> = receipts
            .first()
            .map(|r| r.body.pairings.iter().map(|p| p.choice.clone()).collect())
            .unwrap_or_default();
        let inference = coercion_infer(&receipts, &ballot);
        match format {
            Format::Json => write!(out, "{}", to_json(&inference))?,
            Format::Text => {
                for s in &inference.statements {
                    writeln!(
                        out,
                        "receipt {} did not vote for {} (id already on receipt {})",
                        s.receipt, s.choice, s.evidence
                    )?;
                }
                writeln!(
                    out,
                    "{} statements from {} receipts",
                    inference.statements.len(),
                    receipts.len()
                )?;
            }
        }
        Ok(EXIT_CLEAN)
    })();
    finish(result, err)
}

/// Tallies a board and prints it as the results page or as JSON.
pub fn cmd_show_board(
    board_path: &Path,
    config_path: &Path,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let result = (|| -> CmdResult {
        let board: Board = read_json(board_path)?;
        let election = read_election(config_path)?;
        let results = match board::tally(&board, &election) {
            Ok(r) => r,
            Err(e) => {
                writeln!(err, "tally failed: {e}")?;
                return Ok(EXIT_INTEGRITY);
            }
        };
        match format {
            Format::Text => write!(out, "{}", render_board_text(&board, &results))?,
            Format::Json => write!(
                out,
                "{}",
                to_json(&serde_json::json!({ "board": board, "results": results }))
            )?,
        }
        Ok(EXIT_CLEAN)
    })();
    finish(result, err)
}

/// Lists every file under `dir`, relative and sorted. Used to compare output trees.
pub fn list_tree(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

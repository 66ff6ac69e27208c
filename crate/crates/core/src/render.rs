//! Human-readable renderings of receipts and the results page.

use std::fmt::Write as _;

use data_encoding::BASE32_NOPAD;

use crate::board::Results;
use crate::crypto::Signature;
use crate::model::{Board, ElectionHeader, Receipt};

/// Characters per line in the signature block.
pub const SIGNATURE_LINE_WIDTH: usize = 15;

/// Uppercase base32, no padding.
pub fn signature_display(signature: &Signature) -> String {
    BASE32_NOPAD.encode(signature.as_bytes())
}

pub fn wrap_fixed(text: &str, width: usize) -> Vec<&str> {
    let mut out = Vec::with_capacity(text.len().div_ceil(width));
    let mut rest = text;
    while !rest.is_empty() {
        let cut = rest
            .char_indices()
            .nth(width)
            .map_or(rest.len(), |(i, _)| i);
        let (line, tail) = rest.split_at(cut);
        out.push(line);
        rest = tail;
    }
    out
}

fn push_header(out: &mut String, header: &ElectionHeader) {
    for line in [&header.title, &header.date, &header.precinct] {
        out.push_str(line);
        out.push('\n');
    }
}

fn row(out: &mut String, label: &str, width: usize, value: impl std::fmt::Display) {
    writeln!(out, "{label:<width$}  {value}").expect("writing to a String");
}

pub fn render_receipt_text(receipt: &Receipt) -> String {
    let body = &receipt.body;
    let width = body
        .pairings
        .iter()
        .map(|p| p.choice.chars().count())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    push_header(&mut out, &body.header);
    out.push('\n');
    for p in &body.pairings {
        row(&mut out, &p.choice, width, &p.id);
    }
    out.push_str("\nSignature:\n");
    for line in wrap_fixed(&signature_display(&receipt.signature), SIGNATURE_LINE_WIDTH) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Results page: header, votes grouped by candidate in ballot order (ids
/// ascending within a group), then per-candidate final counts and the
/// signings count.
pub fn render_board_text(board: &Board, results: &Results) -> String {
    let width = results
        .candidates
        .iter()
        .map(|c| c.choice.chars().count())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    push_header(&mut out, &board.header);
    out.push_str("\nVotes:\n");
    for candidate in &results.candidates {
        let mut ids: Vec<_> = board
            .entries
            .iter()
            .filter(|e| e.choice == candidate.choice)
            .map(|e| &e.id)
            .collect();
        if ids.is_empty() {
            continue;
        }
        ids.sort();
        out.push('\n');
        for id in ids {
            row(&mut out, &candidate.choice, width, id);
        }
    }
    out.push_str("\nResults:\n\n");
    for c in &results.candidates {
        row(&mut out, &c.choice, width, c.final_count);
    }
    if let Some(adj) = &results.adjusted {
        writeln!(out, "\nSurplus removed from {}: {}", adj.choice, adj.amount).expect("String");
    }
    writeln!(out, "\nSignings: {}", board.signings_count).expect("String");
    if let Some(names) = &board.voter_names {
        out.push_str("\nVoters:\n\n");
        for name in names {
            out.push_str(name);
            out.push('\n');
        }
    }
    out
}

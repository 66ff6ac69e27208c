#![allow(dead_code)]

use receiptvote::crypto::{sign, SignatureScheme, SigningKeyPair};
use receiptvote::id::VoterId;
use receiptvote::machine::MachineBehavior;
use receiptvote::model::{Board, ElectionConfig, ElectionHeader, Pairing, Receipt, ReceiptBody};
use receiptvote::sim::{stream_rng, ScenarioConfig};

pub fn id(s: &str) -> VoterId {
    s.parse().unwrap()
}

pub fn sample_header() -> ElectionHeader {
    ElectionHeader {
        title: "Presidential Election".into(),
        date: "November 4, 2008".into(),
        precinct: "Foo County, Bar State".into(),
    }
}

pub fn sample_config(bootstrap: u64) -> ElectionConfig {
    ElectionConfig {
        title: "Presidential Election".into(),
        date: "November 4, 2008".into(),
        precinct: "Foo County, Bar State".into(),
        candidates: ["A", "B", "C", "D"].map(String::from).to_vec(),
        selections_per_voter: 1,
        bootstrap_per_candidate: bootstrap,
        registered_voters: 10_000,
        full_bootstrap_mode: false,
    }
}

pub const RECEIPT_ROWS: [(&str, &str); 4] = [
    ("A", "6597853518467"),
    ("B", "9431587321355"),
    ("C", "1597362523648"),
    ("D", "3943873165496"),
];

pub const BOARD_ROWS: [(&str, &str); 12] = [
    ("A", "5231897463515"),
    ("A", "6597853518467"),
    ("A", "8795462163516"),
    ("B", "4546138496616"),
    ("B", "7894611685366"),
    ("B", "9431587321355"),
    ("C", "1597362523648"),
    ("C", "2923578356914"),
    ("C", "7898756465486"),
    ("D", "3943873165496"),
    ("D", "4567315796865"),
    ("D", "7986543546933"),
];

/// Deterministic machine key used by the sample fixtures.
pub fn fixture_machine_key() -> SigningKeyPair {
    SignatureScheme::Ed25519.keygen(&mut stream_rng(2008, "fixture-machine"))
}

pub fn sample_receipt(keys: &SigningKeyPair) -> Receipt {
    let body = ReceiptBody {
        header: sample_header(),
        pairings: RECEIPT_ROWS
            .iter()
            .map(|(c, i)| Pairing::new(*c, id(i)))
            .collect(),
    };
    let signature = sign(&keys.secret, &body.canonical_bytes()).unwrap();
    Receipt { body, signature }
}

pub fn sample_board(signings: u64) -> Board {
    Board {
        header: sample_header(),
        entries: BOARD_ROWS
            .iter()
            .map(|(c, i)| Pairing::new(*c, id(i)))
            .collect(),
        signings_count: signings,
        voter_names: None,
    }
}

pub fn scenario(
    candidates: usize,
    voters: u64,
    bootstrap: u64,
    behavior: MachineBehavior,
    seed: u64,
) -> ScenarioConfig {
    let labels: Vec<String> = (0..candidates)
        .map(|i| char::from(b'A' + i as u8).to_string())
        .collect();
    ScenarioConfig {
        election: ElectionConfig {
            title: "Simulated Election".into(),
            date: "Day 1".into(),
            precinct: "Precinct 1".into(),
            candidates: labels,
            selections_per_voter: 1,
            bootstrap_per_candidate: bootstrap,
            registered_voters: voters.max(1) + 10,
            full_bootstrap_mode: false,
        },
        num_voters: voters,
        voter_choice_distribution: vec![1.0; candidates],
        behavior,
        collect_receipts: true,
        coercer_knows_order: true,
        seed,
        cancel_rate: 0.0,
        destroy_bootstrap_record: true,
        publish_voter_names: false,
    }
}

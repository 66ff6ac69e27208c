//! Anonymous voter identifiers.
//!
//! A [`VoterId`] is a 13-digit decimal string drawn uniformly at random. It is
//! the only link between a voter and the published vote, so every id must be
//! fresh within an election: [`generate_id`] rejects and re-draws on collision.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of decimal digits in a [`VoterId`].
pub const ID_DIGITS: usize = 13;

/// Size of the id space, `10^13`.
pub const ID_SPACE: u64 = 10_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("voter id must have exactly {ID_DIGITS} digits, got {0} characters")]
    Length(usize),
    #[error("voter id must contain only decimal digits: {0:?}")]
    NonDigit(String),
    #[error("voter id space exhausted ({0} ids issued)")]
    Exhausted(usize),
}

/// A fixed-width decimal voter identifier. Leading zeros are significant.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VoterId(String);

impl VoterId {
    /// Formats `value` (which must be below [`ID_SPACE`]) as a zero-padded id.
    pub fn from_number(value: u64) -> Result<Self, IdError> {
        if value >= ID_SPACE {
            return Err(IdError::Length(value.to_string().len()));
        }
        Ok(Self(format!("{value:013}")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for VoterId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != ID_DIGITS {
            return Err(IdError::Length(s.chars().count()));
        }
        if !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IdError::NonDigit(s.to_owned()));
        }
        Ok(Self(s.to_owned()))
    }
}

impl TryFrom<String> for VoterId {
    type Error = IdError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<VoterId> for String {
    fn from(id: VoterId) -> Self {
        id.0
    }
}

impl fmt::Display for VoterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VoterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VoterId({})", self.0)
    }
}

/// Draws an id uniformly from the unissued part of the id space.
///
/// Collisions with `issued` are rejected and re-drawn. The caller is
/// responsible for inserting the returned id into `issued`.
pub fn generate_id<R: Rng + ?Sized>(
    rng: &mut R,
    issued: &HashSet<VoterId>,
) -> Result<VoterId, IdError> {
    let n = draw_fresh(
        rng,
        ID_SPACE,
        |v| issued.contains(&VoterId::from_number(v).expect("draw below ID_SPACE")),
        issued.len(),
    )?;
    Ok(VoterId::from_number(n).expect("draw below ID_SPACE"))
}

fn draw_fresh<R: Rng + ?Sized>(
    rng: &mut R,
    space: u64,
    taken: impl Fn(u64) -> bool,
    taken_count: usize,
) -> Result<u64, IdError> {
    if taken_count as u64 >= space {
        return Err(IdError::Exhausted(taken_count));
    }
    loop {
        let v = rng.gen_range(0..space);
        if !taken(v) {
            return Ok(v);
        }
    }
}

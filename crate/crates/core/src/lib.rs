//! Receipt-based voting: machine, bulletin board, election authority,
//! voter verification and an adversary simulator.
//!
//! The guide under `book/` walks through the pieces; its snippets run as
//! doc-tests of this crate.

pub mod authority;
pub mod board;
pub mod cli;
pub mod crypto;
pub mod id;
pub mod machine;
pub mod model;
pub mod render;
pub mod sim;
pub mod verify;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/receipts.md")]
    mod receipts {}
    #[doc = include_str!("../../../book/src/bootstrap.md")]
    mod bootstrap {}
    #[doc = include_str!("../../../book/src/board.md")]
    mod board {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

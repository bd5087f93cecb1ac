//! Deterministic simulator and analysis toolkit for oblivious query
//! execution with controlled disclosure of intermediate result sizes.
//!
//! The pipeline: relational plans run over padded tables whose sizes are
//! data-independent; a resizer (mark/shuffle/trim) can be placed between
//! operators to discard a random subset of filler tuples, disclosing only
//! the trimmed size; a leakage ledger records every disclosed value; the
//! Rounds-to-Recover metric and a matching attacker simulation quantify
//! how much those disclosures reveal about true intermediate sizes.
//!
//! Everything is a pure function of its inputs and a 64-bit seed.

pub mod attacker;
pub mod cost;
pub mod csvio;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod ledger;
pub mod metric;
pub mod operators;
pub mod plan;
pub mod relation;
pub mod resizer;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use ledger::{DisclosureKind, LeakageLedger, LedgerEntry, OpId};
pub use relation::{multiset_equal, PaddedTable, ResultSet, Row, Schema, SchemaRef, Table, Value};

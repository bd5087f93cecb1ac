//! The leakage ledger: the ordered record of every publicly disclosed value.
//!
//! During oblivious execution nothing about the data may become visible
//! except sizes that the plan explicitly discloses: the base size of each
//! scanned table, the trimmed size of each resized intermediate, and the
//! final result size. The ledger is the simulator's stand-in for the
//! adversary's protocol view; anything not in it is considered secret.
//! Validity columns, true counts and sampled parameters must never be
//! written here.

use serde::{Serialize, Serializer};
use std::fmt;

/// Stable operator identifier. Base operators get post-order ids; a resizer
/// inserted above operator `i` gets `RESIZER_BASE + i` so that placement
/// edits never renumber unrelated operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId(pub u32);

impl OpId {
    pub const RESIZER_BASE: u32 = 1 << 20;

    pub fn resizer_over(child: OpId) -> OpId {
        OpId(Self::RESIZER_BASE + child.0)
    }

    pub fn is_resizer(self) -> bool {
        self.0 >= Self::RESIZER_BASE
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_resizer() {
            write!(f, "rz{}", self.0 - Self::RESIZER_BASE)
        } else {
            write!(f, "op{}", self.0)
        }
    }
}

impl Serialize for OpId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The only kinds of values execution is allowed to disclose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisclosureKind {
    BaseSize,
    TrimmedSize,
    FinalResultSize,
}

impl fmt::Display for DisclosureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DisclosureKind::BaseSize => "base-size",
            DisclosureKind::TrimmedSize => "trimmed-size",
            DisclosureKind::FinalResultSize => "final-result-size",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub op: OpId,
    pub kind: DisclosureKind,
    pub value: u64,
}

/// Append-only log of disclosures, in deterministic execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LeakageLedger {
    entries: Vec<LedgerEntry>,
}

impl LeakageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, op: OpId, kind: DisclosureKind, value: u64) {
        self.entries.push(LedgerEntry { op, kind, value });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries of the given kind.
    pub fn count_of(&self, kind: DisclosureKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

//! The mark/shuffle/trim pipeline that removes a random subset of filler
//! tuples and discloses only the trimmed size `S = T + eta`.
//!
//! Mark decides per row whether it survives (true tuples always do),
//! shuffle applies one uniform permutation so that surviving positions
//! cannot be linked across executions, and trim discards the unmarked rows
//! and discloses `S` to the ledger. Only `S` ever becomes public; the
//! sampled parameter and the validity column stay secret.

use crate::distributions::{draw_eta_count, p_from_eta, sample_eta_tlap, sample_p_beta};
use crate::distributions::FillerDistribution;
use crate::error::{Error, Result};
use crate::ledger::{DisclosureKind, LeakageLedger, OpId};
use crate::relation::PaddedTable;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How a resizer instance decides which fillers survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrimStrategy {
    /// Pass-through: fully oblivious, no disclosure.
    None,
    /// Weighted coin per row with `p` drawn from the distribution; the flips
    /// are independent, so the retained filler count is Binomial(N-T, p).
    CoinToss(FillerDistribution),
    /// Sequential scan keeping the first `eta` fillers (exact count).
    CounterBased(FillerDistribution),
    /// Baseline: sort by validity, cut `eta` fillers from the bottom,
    /// no shuffle — fillers stay contiguous.
    SortAndCut(FillerDistribution),
}

impl TrimStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrimStrategy::None => Ok(()),
            TrimStrategy::CoinToss(d)
            | TrimStrategy::CounterBased(d)
            | TrimStrategy::SortAndCut(d) => d.validate(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, TrimStrategy::None)
    }

    pub fn label(&self) -> String {
        match self {
            TrimStrategy::None => "none".to_string(),
            TrimStrategy::CoinToss(d) => format!("coin-toss/{}", d.label()),
            TrimStrategy::CounterBased(d) => format!("counter-based/{}", d.label()),
            TrimStrategy::SortAndCut(d) => format!("sort-and-cut/{}", d.label()),
        }
    }
}

/// Per-row retention flags. Invariant: a valid row is always retained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeepColumn(Vec<bool>);

impl KeepColumn {
    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn retained(&self) -> usize {
        self.0.iter().filter(|k| **k).count()
    }
}

/// Coin-toss mark step: `k[j] = (u_j < p) OR c[j]`, one uniform draw per row.
pub fn mark_cointoss<R: Rng + ?Sized>(
    table: &PaddedTable,
    p: f64,
    rng: &mut R,
) -> Result<KeepColumn> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let flags = table
        .valid()
        .iter()
        .map(|c| rng.random::<f64>() < p || *c)
        .collect();
    Ok(KeepColumn(flags))
}

/// Counter-based mark step: scan in row order, keep fillers until the
/// filler-keep counter reaches `eta`. Values above `N - T` behave as `N - T`.
pub fn mark_counter(table: &PaddedTable, eta: u64) -> KeepColumn {
    let mut kept_fillers = 0u64;
    let flags = table
        .valid()
        .iter()
        .map(|c| {
            if *c {
                true
            } else if kept_fillers < eta {
                kept_fillers += 1;
                true
            } else {
                false
            }
        })
        .collect();
    KeepColumn(flags)
}

/// One uniform Fisher-Yates permutation applied to rows, validity and keep
/// flags alike. Stands in for a secure shuffle; only the distribution
/// (uniform over permutations) is contractual.
///
/// The permutation is drawn on an index array and applied by one gather
/// pass, which is equivalent to swapping the rows in place but touches
/// each row exactly once.
pub fn shuffle<R: Rng + ?Sized>(
    table: PaddedTable,
    keep: KeepColumn,
    rng: &mut R,
) -> Result<(PaddedTable, KeepColumn)> {
    let n = table.public_size();
    if keep.0.len() != n {
        return Err(Error::KeepLength {
            keep: keep.0.len(),
            rows: n,
        });
    }
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }

    let (schema, rows, valid, origin) = table.into_parts();
    let flags = keep.0;
    let mut slots: Vec<Option<crate::relation::Row>> = rows.into_iter().map(Some).collect();
    let mut out_rows = Vec::with_capacity(n);
    let mut out_valid = Vec::with_capacity(n);
    let mut out_flags = Vec::with_capacity(n);
    for &src in &perm {
        let src = src as usize;
        out_rows.push(slots[src].take().expect("permutation visits each row once"));
        out_valid.push(valid[src]);
        out_flags.push(flags[src]);
    }
    Ok((
        PaddedTable::new(schema, out_rows, out_valid, origin)?,
        KeepColumn(out_flags),
    ))
}

/// Trim step: drop rows with `k = 0`, disclose the surviving size.
pub fn trim(
    table: PaddedTable,
    keep: &KeepColumn,
    ledger: &mut LeakageLedger,
) -> Result<PaddedTable> {
    let n = table.public_size();
    if keep.0.len() != n {
        return Err(Error::KeepLength {
            keep: keep.0.len(),
            rows: n,
        });
    }
    if let Some(bad) = table
        .valid()
        .iter()
        .zip(&keep.0)
        .position(|(c, k)| *c && !*k)
    {
        // A dropped valid tuple signals a bug upstream, never trim it away.
        return Err(Error::KeepInvariant(bad));
    }
    let (schema, rows, valid, origin) = table.into_parts();
    let mut kept_rows = Vec::new();
    let mut kept_valid = Vec::new();
    for ((row, v), k) in rows.into_iter().zip(valid).zip(&keep.0) {
        if *k {
            kept_rows.push(row);
            kept_valid.push(v);
        }
    }
    let out = PaddedTable::new(schema, kept_rows, kept_valid, origin)?;
    ledger.record(origin, DisclosureKind::TrimmedSize, out.public_size() as u64);
    Ok(out)
}

/// Sort&cut baseline: stable sort by validity descending, keep the first
/// `min(T + eta, N)` rows. No shuffle — the kept fillers form a contiguous
/// suffix, which is the modeled weakness of this baseline.
pub fn sort_and_cut(
    table: PaddedTable,
    eta: u64,
    ledger: &mut LeakageLedger,
) -> Result<PaddedTable> {
    let n = table.public_size();
    let t = table.true_count();
    let keep_count = (t as u64).saturating_add(eta).min(n as u64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| !table.valid()[i]);
    let (schema, rows, valid, origin) = table.into_parts();
    let mut indexed: Vec<Option<(crate::relation::Row, bool)>> =
        rows.into_iter().zip(valid).map(Some).collect();
    let mut kept_rows = Vec::with_capacity(keep_count);
    let mut kept_valid = Vec::with_capacity(keep_count);
    for &i in order.iter().take(keep_count) {
        let (row, v) = indexed[i].take().expect("each index visited once");
        kept_rows.push(row);
        kept_valid.push(v);
    }
    let out = PaddedTable::new(schema, kept_rows, kept_valid, origin)?;
    ledger.record(origin, DisclosureKind::TrimmedSize, out.public_size() as u64);
    Ok(out)
}

/// Full resize of one intermediate: draw the trimming parameter, mark,
/// shuffle, trim. `rz` is the resizer node id; the parameter draw, the coin
/// flips and the shuffle each use an independent stream keyed by
/// (seed, rz, purpose) so placement edits never perturb other operators.
pub fn resize(
    table: PaddedTable,
    strategy: &TrimStrategy,
    seed: u64,
    rz: OpId,
    ledger: &mut LeakageLedger,
) -> Result<PaddedTable> {
    strategy.validate()?;
    let n = table.public_size() as u64;
    let t = table.true_count() as u64;
    match strategy {
        TrimStrategy::None => Ok(table),
        TrimStrategy::CoinToss(dist) => {
            let mut param = rng::stream(seed, rz, "param");
            let p = match dist {
                FillerDistribution::Beta { alpha, beta } => {
                    sample_p_beta(*alpha, *beta, &mut param)?
                }
                FillerDistribution::TLap { .. } => {
                    p_from_eta(sample_eta_tlap(dist, &mut param)?, n, t)
                }
                FillerDistribution::FixedFraction { f } => *f,
            };
            let keep = mark_cointoss(&table, p, &mut rng::stream(seed, rz, "mark"))?;
            let (shuffled, keep) = shuffle(table, keep, &mut rng::stream(seed, rz, "shuffle"))?;
            trim(shuffled, &keep, ledger)
        }
        TrimStrategy::CounterBased(dist) => {
            let mut param = rng::stream(seed, rz, "param");
            let eta = draw_eta_count(dist, n - t, &mut param)?;
            let keep = mark_counter(&table, eta);
            let (shuffled, keep) = shuffle(table, keep, &mut rng::stream(seed, rz, "shuffle"))?;
            trim(shuffled, &keep, ledger)
        }
        TrimStrategy::SortAndCut(dist) => {
            let mut param = rng::stream(seed, rz, "param");
            let eta = draw_eta_count(dist, n - t, &mut param)?;
            sort_and_cut(table, eta, ledger)
        }
    }
}

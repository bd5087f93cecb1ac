//! Synthetic chain instances with exact target selectivities.
//!
//! Tables are generated for a left-deep join chain t0 ⋈ t1 ⋈ ... with an
//! optional equality filter per table. Filters pass exactly
//! `floor(s * N)` rows; every join produces exactly
//! `floor(s * left_true * right_true)` matching pairs.
//!
//! Exact join counts are arranged through key blocks: a block assigns one
//! fresh key to `u` left rows and `v` right rows, contributing `u * v`
//! pairs. A match count is realizable only if it decomposes into blocks
//! that fit both sides — counts just below the full cross product are
//! genuinely unachievable for an equality join (e.g. 99 pairs from 10x10
//! rows) and are reported as errors, never approximated.

use crate::error::{Error, Result};
use crate::relation::{Row, Schema, Table};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use std::collections::HashSet;

/// Parameters for one generated chain instance.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub table_sizes: Vec<u64>,
    /// Target selectivity for every filter and join, in (0, 1].
    pub selectivity: f64,
    /// Payload values are drawn uniformly from [0, key_domain).
    pub key_domain: i64,
    /// Give each table an equality filter passing floor(s * N) rows.
    pub with_filters: bool,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.table_sizes.is_empty() {
            return Err(Error::InvalidParameter("no table sizes given".into()));
        }
        if self.table_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("table sizes must be >= 1".into()));
        }
        if !(self.selectivity > 0.0 && self.selectivity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "selectivity must be in (0, 1], got {}",
                self.selectivity
            )));
        }
        if self.key_domain < 1 {
            return Err(Error::InvalidParameter(format!(
                "key domain must be >= 1, got {}",
                self.key_domain
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub table: String,
    pub input_rows: u64,
    pub passing_rows: u64,
    pub achieved_selectivity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JoinReport {
    pub join_index: usize,
    pub left_true: u64,
    pub right_true: u64,
    pub matches: u64,
    pub achieved_selectivity: f64,
}

/// Achieved selectivities of a generated instance.
#[derive(Debug, Clone, Serialize)]
pub struct GenReport {
    pub target_selectivity: f64,
    pub filters: Vec<FilterReport>,
    pub joins: Vec<JoinReport>,
}

/// Column layout of generated table `i`:
/// `t{i}_id, t{i}_in, t{i}_out, t{i}_f, t{i}_v`
/// where `_in` joins against the previous table's `_out`, `_f == 0` marks
/// the rows passing the table's filter, and `_v` is a payload.
pub const COL_ID: usize = 0;
pub const COL_IN: usize = 1;
pub const COL_OUT: usize = 2;
pub const COL_FILTER: usize = 3;
pub const COL_VALUE: usize = 4;

struct GenTable {
    rows: Vec<Row>,
    passing: Vec<usize>,
}

/// One key block: `units` left bundles and `rows` right rows share a key.
type Block = (u64, u64);

/// Deterministic synthetic generation. Pure function of (spec, seed):
/// byte-identical output across runs and platforms.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(Vec<Table>, GenReport)> {
    spec.validate()?;
    let s = spec.selectivity;
    let count = spec.table_sizes.len();

    let mut sentinel = -1i64;
    let mut next_sentinel = || {
        let v = sentinel;
        sentinel -= 1;
        v
    };

    let mut tables = Vec::with_capacity(count);
    let mut filters = Vec::new();
    for (i, &n) in spec.table_sizes.iter().enumerate() {
        let mut rng = rng::derive("synth-table", &[seed, i as u64]);
        let mut rows = Vec::with_capacity(n as usize);
        for id in 0..n as i64 {
            rows.push(vec![
                id,
                next_sentinel(),
                next_sentinel(),
                1,
                rng.random_range(0..spec.key_domain),
            ]);
        }
        let passing: Vec<usize> = if spec.with_filters {
            let pass_count = (s * n as f64).floor() as u64;
            if pass_count == 0 {
                return Err(Error::Selectivity {
                    selectivity: s,
                    reason: format!("floor(s * {n}) < 1 row for table t{i}"),
                });
            }
            let mut indices: Vec<usize> = (0..n as usize).collect();
            indices.shuffle(&mut rng);
            indices.truncate(pass_count as usize);
            indices.sort_unstable();
            indices
        } else {
            (0..n as usize).collect()
        };
        for &idx in &passing {
            rows[idx][COL_FILTER] = 0;
        }
        filters.push(FilterReport {
            table: format!("t{i}"),
            input_rows: n,
            passing_rows: passing.len() as u64,
            achieved_selectivity: passing.len() as f64 / n as f64,
        });
        tables.push(GenTable { rows, passing });
    }

    // Bundles: (table index, row index, multiplicity in the current chain
    // output). Initially the passing rows of t0, one chain row each.
    let mut bundles: Vec<(usize, usize, u64)> = tables[0]
        .passing
        .iter()
        .map(|&r| (0, r, 1u64))
        .collect();
    let mut joins = Vec::new();

    for i in 1..count {
        let left_true: u64 = bundles.iter().map(|b| b.2).sum();
        let right_rows = tables[i].passing.clone();
        let right_true = right_rows.len() as u64;
        let matches = (s * left_true as f64 * right_true as f64).floor() as u64;
        if matches == 0 {
            return Err(Error::Selectivity {
                selectivity: s,
                reason: format!(
                    "floor(s * {left_true} * {right_true}) < 1 match for join {i}"
                ),
            });
        }

        let bundle_size = bundles[0].2;
        if bundles.iter().any(|b| b.2 != bundle_size) {
            return Err(Error::Selectivity {
                selectivity: s,
                reason: format!(
                    "join {i} would need mixed key-group sizes; not realizable exactly"
                ),
            });
        }
        if matches % bundle_size != 0 {
            return Err(Error::Selectivity {
                selectivity: s,
                reason: format!(
                    "join {i}: {matches} matches not divisible by group size {bundle_size}"
                ),
            });
        }
        let blocks = decompose(
            matches / bundle_size,
            bundles.len() as u64,
            right_true,
            &mut HashSet::new(),
        )
        .ok_or_else(|| Error::Selectivity {
            selectivity: s,
            reason: format!(
                "join {i}: no exact key assignment for {matches} matches over {} x {} rows",
                bundles.len(),
                right_true
            ),
        })?;

        let mut bundle_pool = bundles.into_iter();
        let mut right_pool = right_rows.into_iter();
        let mut new_bundles = Vec::new();
        for (key, &(units, rows)) in blocks.iter().enumerate() {
            let key = key as i64;
            let mut block_chain_rows = 0u64;
            for _ in 0..units {
                let (tbl, row, size) = bundle_pool.next().expect("decompose fits the pool");
                tables[tbl].rows[row][COL_OUT] = key;
                block_chain_rows += size;
            }
            for _ in 0..rows {
                let row = right_pool.next().expect("decompose fits the pool");
                tables[i].rows[row][COL_IN] = key;
                new_bundles.push((i, row, block_chain_rows));
            }
        }
        bundles = new_bundles;

        joins.push(JoinReport {
            join_index: i,
            left_true,
            right_true,
            matches,
            achieved_selectivity: matches as f64 / (left_true * right_true) as f64,
        });
    }

    let out = tables
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let schema = Schema::shared(vec![
                format!("t{i}_id"),
                format!("t{i}_in"),
                format!("t{i}_out"),
                format!("t{i}_f"),
                format!("t{i}_v"),
            ])?;
            Table::new(schema, t.rows)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((
        out,
        GenReport {
            target_selectivity: s,
            filters,
            joins,
        },
    ))
}

/// Write `m` as a sum of blocks u*v with total u <= p and total v <= q.
/// Greedy on the largest left side first, with backtracking and a failure
/// memo. Returns None when no decomposition is found (which for counts
/// close to p*q can be a true impossibility of equality joins).
fn decompose(
    m: u64,
    p: u64,
    q: u64,
    failed: &mut HashSet<(u64, u64, u64)>,
) -> Option<Vec<Block>> {
    if m == 0 {
        return Some(Vec::new());
    }
    if p == 0 || q == 0 || p.checked_mul(q).is_none_or(|cap| m > cap) {
        return None;
    }
    if failed.contains(&(m, p, q)) {
        return None;
    }
    let mut units = p.min(m);
    while units >= 1 {
        let rows = q.min(m / units);
        if rows >= 1 {
            let used = units * rows;
            if let Some(mut rest) = decompose(m - used, p - units, q - rows, failed) {
                rest.push((units, rows));
                return Some(rest);
            }
        }
        units -= 1;
    }
    failed.insert((m, p, q));
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: count equal-key pairs over the passing rows.
    fn cross_matches(left: &Table, right: &Table) -> u64 {
        let mut count = 0;
        for l in left.rows() {
            if l[COL_FILTER] != 0 {
                continue;
            }
            for r in right.rows() {
                if r[COL_FILTER] == 0 && l[COL_OUT] == r[COL_IN] {
                    count += 1;
                }
            }
        }
        count
    }

    fn spec(sizes: &[u64], s: f64, with_filters: bool) -> SyntheticSpec {
        SyntheticSpec {
            table_sizes: sizes.to_vec(),
            selectivity: s,
            key_domain: 1000,
            with_filters,
        }
    }

    #[test]
    fn ten_by_ten_join_has_exactly_ten_matches() {
        let (tables, report) = gen_synthetic(&spec(&[10, 10], 0.1, false), 3).unwrap();
        assert_eq!(report.joins[0].matches, 10);
        assert_eq!(cross_matches(&tables[0], &tables[1]), 10);
    }

    #[test]
    fn full_selectivity_matches_everything() {
        let (tables, report) = gen_synthetic(&spec(&[6, 4], 1.0, false), 9).unwrap();
        assert_eq!(report.joins[0].matches, 24);
        assert_eq!(cross_matches(&tables[0], &tables[1]), 24);
    }

    #[test]
    fn canonical_chain_filters_pass_a_tenth() {
        let (tables, report) =
            gen_synthetic(&spec(&[1000, 1000, 1000, 1000], 0.1, true), 1).unwrap();
        for (i, f) in report.filters.iter().enumerate() {
            assert_eq!(f.passing_rows, 100, "table {i}");
            let recount = tables[i]
                .rows()
                .iter()
                .filter(|r| r[COL_FILTER] == 0)
                .count();
            assert_eq!(recount, 100, "table {i}");
        }
        // join chain: 100x100 -> 1000 pairs, then 10_000, then 100_000.
        let matches: Vec<u64> = report.joins.iter().map(|j| j.matches).collect();
        assert_eq!(matches, vec![1000, 10_000, 100_000]);
        assert_eq!(cross_matches(&tables[0], &tables[1]), 1000);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(&spec(&[50, 40], 0.2, true), 77).unwrap().0;
        let b = gen_synthetic(&spec(&[50, 40], 0.2, true), 77).unwrap().0;
        assert_eq!(a, b);
        let c = gen_synthetic(&spec(&[50, 40], 0.2, true), 78).unwrap().0;
        assert_ne!(a, c);
    }

    #[test]
    fn unachievable_selectivity_is_reported() {
        // floor(0.05 * 10) = 0 passing rows.
        assert!(matches!(
            gen_synthetic(&spec(&[10, 10], 0.05, true), 1),
            Err(Error::Selectivity { .. })
        ));
        // 99 of 100 pairs cannot come out of an equality join on 10x10.
        assert!(matches!(
            gen_synthetic(&spec(&[10, 10], 0.99, false), 1),
            Err(Error::Selectivity { .. })
        ));
    }

    #[test]
    fn randomized_single_join_instances_match_brute_force() {
        let mut rng = rng::derive("synth-prop", &[0]);
        let mut generated = 0;
        for trial in 0..200u64 {
            let n = rng.random_range(2..=30u64);
            let m = rng.random_range(2..=30u64);
            let s = match trial % 3 {
                0 => 0.1,
                1 => rng.random_range(0.05..0.5),
                _ => rng.random_range(0.5..1.0),
            };
            let declared = (s * n as f64 * m as f64).floor() as u64;
            match gen_synthetic(&spec(&[n, m], s, false), trial) {
                Ok((tables, report)) => {
                    assert_eq!(report.joins[0].matches, declared);
                    assert_eq!(cross_matches(&tables[0], &tables[1]), declared);
                    generated += 1;
                }
                Err(Error::Selectivity { .. }) => {}
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
        assert!(generated > 100, "only {generated} instances generated");
    }

    #[test]
    fn decompose_handles_the_backtracking_case() {
        // 82 over 10x10 needs (9,9)+(1,1); the greedy first try (10,8)
        // dead-ends.
        let blocks = decompose(82, 10, 10, &mut HashSet::new()).unwrap();
        let total: u64 = blocks.iter().map(|(u, v)| u * v).sum();
        assert_eq!(total, 82);
        assert!(blocks.iter().map(|(u, _)| u).sum::<u64>() <= 10);
        assert!(blocks.iter().map(|(_, v)| v).sum::<u64>() <= 10);
        // 99 over 10x10 is impossible.
        assert!(decompose(99, 10, 10, &mut HashSet::new()).is_none());
    }
}

//! Padded (oblivious) relational operators.
//!
//! Every operator's output size is a function of its input sizes only,
//! never of the data or of the validity flags: filters and sorts keep `N`,
//! the nested-loop join always materializes `N_l * N_r` slots, and group-by
//! pads its output to the input size. What changes with the data is only
//! the secret validity column.

use crate::error::{Error, Result};
use crate::ledger::{DisclosureKind, LeakageLedger, OpId};
use crate::relation::{PaddedTable, ResultSet, Row, Schema, Table, Value};
use std::sync::Arc;

/// Conjunction of column = constant tests.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PredicateSpec {
    pub conjuncts: Vec<(String, Value)>,
}

impl PredicateSpec {
    pub fn new(conjuncts: Vec<(String, Value)>) -> Result<Self> {
        if conjuncts.is_empty() {
            return Err(Error::InvalidParameter(
                "predicate needs at least one conjunct".into(),
            ));
        }
        Ok(PredicateSpec { conjuncts })
    }

    fn column_indices(&self, schema: &Schema) -> Result<Vec<(usize, Value)>> {
        self.conjuncts
            .iter()
            .map(|(name, v)| Ok((schema.index_of(name)?, *v)))
            .collect()
    }
}

/// Aggregate computed per group of equal keys.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Aggregate {
    Count,
    Sum(String),
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AggSpec {
    pub group_key: String,
    pub aggregate: Aggregate,
}

/// Scan: the base table is public knowledge, so every row is valid.
pub fn ob_scan(table: &Table, op: OpId) -> PaddedTable {
    let n = table.len();
    PaddedTable::new(
        Arc::clone(table.schema()),
        table.rows().to_vec(),
        vec![true; n],
        op,
    )
    .expect("table rows already validated")
}

/// Filter: rows and order preserved, matches recorded in the validity column.
pub fn ob_filter(input: &PaddedTable, pred: &PredicateSpec, op: OpId) -> Result<PaddedTable> {
    let tests = pred.column_indices(input.schema())?;
    let valid = input
        .rows()
        .iter()
        .zip(input.valid())
        .map(|(row, v)| *v && tests.iter().all(|(idx, want)| row[*idx] == *want))
        .collect();
    PaddedTable::new(
        Arc::clone(input.schema()),
        input.rows().to_vec(),
        valid,
        op,
    )
}

/// Nested-loop join: output has exactly `N_l * N_r` slots in left-major
/// order; slot (i, j) is valid iff both inputs are valid and the keys match.
pub fn ob_join(
    left: &PaddedTable,
    right: &PaddedTable,
    left_col: &str,
    right_col: &str,
    op: OpId,
) -> Result<PaddedTable> {
    let li = left.schema().index_of(left_col)?;
    let ri = right.schema().index_of(right_col)?;
    let out_size = left
        .public_size()
        .checked_mul(right.public_size())
        .ok_or(Error::JoinOverflow {
            left: left.public_size(),
            right: right.public_size(),
        })?;

    let schema = Arc::new(left.schema().concat(right.schema()));
    let mut rows = Vec::with_capacity(out_size);
    let mut valid = Vec::with_capacity(out_size);
    for (lrow, lv) in left.rows().iter().zip(left.valid()) {
        for (rrow, rv) in right.rows().iter().zip(right.valid()) {
            let mut row = Vec::with_capacity(lrow.len() + rrow.len());
            row.extend_from_slice(lrow);
            row.extend_from_slice(rrow);
            rows.push(row);
            valid.push(*lv && *rv && lrow[li] == rrow[ri]);
        }
    }
    PaddedTable::new(schema, rows, valid, op)
}

/// Sort-based group-by, padded to the input size.
///
/// Rows are sorted by (validity desc, key asc, row lex asc); within each run
/// of equal keys among valid rows exactly one representative keeps its flag
/// and carries the group aggregate in an appended column. The lexicographic
/// tie-break makes the representative independent of upstream shuffles.
pub fn ob_groupby(input: &PaddedTable, agg: &AggSpec, op: OpId) -> Result<PaddedTable> {
    let key_idx = input.schema().index_of(&agg.group_key)?;
    let sum_idx = match &agg.aggregate {
        Aggregate::Count => None,
        Aggregate::Sum(col) => Some(input.schema().index_of(col)?),
    };

    let n = input.public_size();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (input.valid()[a], input.valid()[b]);
        vb.cmp(&va)
            .then_with(|| input.rows()[a][key_idx].cmp(&input.rows()[b][key_idx]))
            .then_with(|| input.rows()[a].cmp(&input.rows()[b]))
            .then_with(|| a.cmp(&b))
    });

    let schema = Arc::new(input.schema().with_appended(match &agg.aggregate {
        Aggregate::Count => "cnt",
        Aggregate::Sum(_) => "sum",
    }));

    let mut rows: Vec<Row> = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let mut pos = 0;
    while pos < n {
        let first = order[pos];
        let run_valid = input.valid()[first];
        let key = input.rows()[first][key_idx];
        let mut end = pos;
        while end < n
            && input.valid()[order[end]] == run_valid
            && input.rows()[order[end]][key_idx] == key
        {
            end += 1;
        }

        for (offset, &idx) in order[pos..end].iter().enumerate() {
            let mut row = input.rows()[idx].clone();
            let value = if run_valid {
                group_aggregate(input, &order[pos..end], sum_idx, key)?
            } else {
                // Filler slot: carry the row's own contribution so payloads
                // stay in-domain. Never part of the result.
                match sum_idx {
                    None => 1,
                    Some(i) => input.rows()[idx][i],
                }
            };
            row.push(value);
            rows.push(row);
            valid.push(run_valid && offset == 0);
        }
        pos = end;
    }

    PaddedTable::new(schema, rows, valid, op)
}

fn group_aggregate(
    input: &PaddedTable,
    run: &[usize],
    sum_idx: Option<usize>,
    key: Value,
) -> Result<Value> {
    match sum_idx {
        None => Ok(run.len() as Value),
        Some(col) => {
            let mut acc: Value = 0;
            for &idx in run {
                acc = acc
                    .checked_add(input.rows()[idx][col])
                    .ok_or(Error::SumOverflow { key })?;
            }
            Ok(acc)
        }
    }
}

/// Order-by: valid rows first, sorted ascending by the key, ties broken by
/// the pre-sort position. `N` and `T` are unchanged.
pub fn ob_orderby(input: &PaddedTable, key: &str, op: OpId) -> Result<PaddedTable> {
    let key_idx = input.schema().index_of(key)?;
    let n = input.public_size();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (input.valid()[a], input.valid()[b]);
        vb.cmp(&va)
            .then_with(|| input.rows()[a][key_idx].cmp(&input.rows()[b][key_idx]))
            .then_with(|| a.cmp(&b))
    });
    let rows = order.iter().map(|&i| input.rows()[i].clone()).collect();
    let valid = order.iter().map(|&i| input.valid()[i]).collect();
    PaddedTable::new(Arc::clone(input.schema()), rows, valid, op)
}

/// Collect the final result: exactly the valid rows. The result size is, by
/// definition, disclosed to the analyst, and goes to the ledger.
pub fn to_result(input: &PaddedTable, ledger: &mut LeakageLedger) -> ResultSet {
    let result = input.induced_result();
    ledger.record(
        input.origin(),
        DisclosureKind::FinalResultSize,
        result.len() as u64,
    );
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::multiset_equal;

    fn padded(rows: Vec<Row>, valid: Vec<bool>) -> PaddedTable {
        let width = rows.first().map_or(1, |r| r.len());
        let names: Vec<String> = (0..width).map(|i| format!("c{i}")).collect();
        PaddedTable::new(Schema::shared(names).unwrap(), rows, valid, OpId(0)).unwrap()
    }

    #[test]
    fn scan_marks_everything_valid() {
        let schema = Schema::shared(vec!["a"]).unwrap();
        let empty = Table::new(Arc::clone(&schema), vec![]).unwrap();
        let scanned = ob_scan(&empty, OpId(0));
        assert_eq!(scanned.public_size(), 0);
        assert_eq!(scanned.true_count(), 0);

        let rows: Vec<Row> = (0..1000).map(|i| vec![i]).collect();
        let table = Table::new(schema, rows).unwrap();
        let scanned = ob_scan(&table, OpId(0));
        assert_eq!(scanned.public_size(), 1000);
        assert_eq!(scanned.true_count(), 1000);
    }

    #[test]
    fn scan_to_result_round_trips() {
        let schema = Schema::shared(vec!["a", "b"]).unwrap();
        let table = Table::new(schema, vec![vec![1, 2], vec![3, 4]]).unwrap();
        let mut ledger = LeakageLedger::new();
        let result = to_result(&ob_scan(&table, OpId(0)), &mut ledger);
        assert_eq!(result.rows(), table.rows());
        assert_eq!(ledger.entries()[0].kind, DisclosureKind::FinalResultSize);
        assert_eq!(ledger.entries()[0].value, 2);
    }

    #[test]
    fn filter_ands_with_existing_flags() {
        // N=4, c=(1,1,0,1), predicate matches rows 0 and 2 -> c_out=(1,0,0,0).
        let t = padded(
            vec![vec![5, 0], vec![6, 0], vec![5, 0], vec![7, 0]],
            vec![true, true, false, true],
        );
        let pred = PredicateSpec::new(vec![("c0".into(), 5)]).unwrap();
        let out = ob_filter(&t, &pred, OpId(1)).unwrap();
        assert_eq!(out.public_size(), 4);
        assert_eq!(out.valid(), &[true, false, false, false]);
        assert_eq!(out.true_count(), 1);
        assert_eq!(out.rows(), t.rows());
    }

    #[test]
    fn filter_matching_nothing_keeps_n() {
        let t = padded(vec![vec![1, 0], vec![2, 0]], vec![true, true]);
        let pred = PredicateSpec::new(vec![("c0".into(), 99)]).unwrap();
        let out = ob_filter(&t, &pred, OpId(1)).unwrap();
        assert_eq!(out.public_size(), 2);
        assert_eq!(out.true_count(), 0);
    }

    #[test]
    fn filter_tautology_preserves_flags() {
        let t = padded(vec![vec![5, 1], vec![5, 2]], vec![true, false]);
        let pred = PredicateSpec::new(vec![("c0".into(), 5)]).unwrap();
        let out = ob_filter(&t, &pred, OpId(1)).unwrap();
        assert_eq!(out.valid(), t.valid());
    }

    #[test]
    fn filter_unknown_column_errors() {
        let t = padded(vec![vec![1]], vec![true]);
        let pred = PredicateSpec::new(vec![("nope".into(), 1)]).unwrap();
        assert!(matches!(
            ob_filter(&t, &pred, OpId(1)),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn join_size_is_definitional() {
        let l = padded(vec![vec![1], vec![2]], vec![true, false]);
        let r = padded(vec![vec![1], vec![2], vec![3]], vec![true, true, true]);
        let out = ob_join(&l, &r, "c0", "c0", OpId(2)).unwrap();
        assert_eq!(out.public_size(), 6);
        // Left-major order: slot j = (j / N_r, j % N_r).
        assert_eq!(out.rows()[0], vec![1, 1]);
        assert_eq!(out.rows()[4], vec![2, 2]);
        // Row (1, 1) matches but only if both sides are valid.
        assert_eq!(out.valid(), &[true, false, false, false, false, false]);
    }

    #[test]
    fn join_with_dead_side_has_no_matches() {
        let l = padded(vec![vec![1], vec![2]], vec![false, false]);
        let r = padded(vec![vec![1]], vec![true]);
        let out = ob_join(&l, &r, "c0", "c0", OpId(2)).unwrap();
        assert_eq!(out.public_size(), 2);
        assert_eq!(out.true_count(), 0);
    }

    #[test]
    fn groupby_counts_runs_of_keys() {
        // Valid keys (7,7,9): representatives (7 -> 2), (9 -> 1), T_out = 2.
        let t = padded(
            vec![vec![9, 1], vec![7, 2], vec![7, 3]],
            vec![true, true, true],
        );
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Count,
        };
        let out = ob_groupby(&t, &agg, OpId(3)).unwrap();
        assert_eq!(out.public_size(), 3);
        assert_eq!(out.true_count(), 2);
        let winners: Vec<&Row> = out
            .rows()
            .iter()
            .zip(out.valid())
            .filter(|(_, v)| **v)
            .map(|(r, _)| r)
            .collect();
        assert_eq!(winners.len(), 2);
        assert_eq!(winners[0][0], 7);
        assert_eq!(*winners[0].last().unwrap(), 2);
        assert_eq!(winners[1][0], 9);
        assert_eq!(*winners[1].last().unwrap(), 1);
    }

    #[test]
    fn groupby_all_invalid_keeps_n() {
        let t = padded(vec![vec![1, 0], vec![1, 0]], vec![false, false]);
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Count,
        };
        let out = ob_groupby(&t, &agg, OpId(3)).unwrap();
        assert_eq!(out.public_size(), 2);
        assert_eq!(out.true_count(), 0);
    }

    #[test]
    fn groupby_single_valid_row_aggregates_itself() {
        let t = padded(vec![vec![4, 10], vec![4, 99]], vec![true, false]);
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Sum("c1".into()),
        };
        let out = ob_groupby(&t, &agg, OpId(3)).unwrap();
        assert_eq!(out.true_count(), 1);
        let rep = out
            .rows()
            .iter()
            .zip(out.valid())
            .find(|(_, v)| **v)
            .unwrap()
            .0;
        assert_eq!(*rep.last().unwrap(), 10);
    }

    #[test]
    fn groupby_sum_overflow_reported() {
        let t = padded(vec![vec![1, i64::MAX], vec![1, 1]], vec![true, true]);
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Sum("c1".into()),
        };
        assert!(matches!(
            ob_groupby(&t, &agg, OpId(3)),
            Err(Error::SumOverflow { key: 1 })
        ));
    }

    #[test]
    fn orderby_sorts_valid_rows_before_fillers() {
        let t = padded(
            vec![vec![3], vec![1], vec![2], vec![0]],
            vec![true, false, true, true],
        );
        let out = ob_orderby(&t, "c0", OpId(4)).unwrap();
        assert_eq!(out.public_size(), 4);
        assert_eq!(out.true_count(), 3);
        let flat: Vec<Value> = out.rows().iter().map(|r| r[0]).collect();
        assert_eq!(flat, vec![0, 2, 3, 1]);
        assert_eq!(out.valid(), &[true, true, true, false]);
    }

    #[test]
    fn orderby_identity_on_sorted_valid_input() {
        let t = padded(vec![vec![1], vec![2], vec![3]], vec![true, true, true]);
        let out = ob_orderby(&t, "c0", OpId(4)).unwrap();
        assert_eq!(out.rows(), t.rows());
    }

    #[test]
    fn orderby_reversed_input() {
        let t = padded(vec![vec![3], vec![2], vec![1]], vec![true, true, true]);
        let out = ob_orderby(&t, "c0", OpId(4)).unwrap();
        let flat: Vec<Value> = out.rows().iter().map(|r| r[0]).collect();
        assert_eq!(flat, vec![1, 2, 3]);
    }

    #[test]
    fn to_result_empty_when_no_valid_rows() {
        let t = padded(vec![vec![1]], vec![false]);
        let mut ledger = LeakageLedger::new();
        let result = to_result(&t, &mut ledger);
        assert!(result.is_empty());
        assert_eq!(ledger.entries()[0].value, 0);
    }

    #[test]
    fn output_sizes_are_data_independent() {
        // Same shapes, different contents and selectivities: every operator
        // must produce identical N.
        let mk = |k: Value| {
            padded(
                vec![vec![k, 1], vec![2, 2], vec![k, 3]],
                vec![true, k == 1, true],
            )
        };
        let (a, b) = (mk(1), mk(5));
        let pred = PredicateSpec::new(vec![("c0".into(), 1)]).unwrap();
        assert_eq!(
            ob_filter(&a, &pred, OpId(1)).unwrap().public_size(),
            ob_filter(&b, &pred, OpId(1)).unwrap().public_size()
        );
        assert_eq!(
            ob_join(&a, &a, "c0", "c0", OpId(2)).unwrap().public_size(),
            ob_join(&b, &b, "c0", "c0", OpId(2)).unwrap().public_size()
        );
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Count,
        };
        assert_eq!(
            ob_groupby(&a, &agg, OpId(3)).unwrap().public_size(),
            ob_groupby(&b, &agg, OpId(3)).unwrap().public_size()
        );
    }

    #[test]
    fn groupby_representative_is_shuffle_invariant() {
        // Two orderings of the same rows must elect the same representative.
        let rows = vec![vec![1, 8], vec![1, 3], vec![2, 5]];
        let a = padded(rows.clone(), vec![true, true, true]);
        let mut rev = rows;
        rev.reverse();
        let b = padded(rev, vec![true, true, true]);
        let agg = AggSpec {
            group_key: "c0".into(),
            aggregate: Aggregate::Sum("c1".into()),
        };
        let ra = ob_groupby(&a, &agg, OpId(3)).unwrap().induced_result();
        let rb = ob_groupby(&b, &agg, OpId(3)).unwrap().induced_result();
        assert!(multiset_equal(&ra, &rb).unwrap());
    }
}

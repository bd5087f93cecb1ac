//! End-to-end plan execution: oblivious with a leakage ledger, and the
//! plaintext reference engine used as a correctness oracle.

use crate::error::{Error, Result};
use crate::ledger::{DisclosureKind, LeakageLedger, OpId};
use crate::metric::{OperatorSizes, SizeMap};
use crate::operators::{
    ob_filter, ob_groupby, ob_join, ob_orderby, ob_scan, to_result, AggSpec, Aggregate,
};
use crate::plan::{NodeKind, PlanNode};
use crate::relation::{PaddedTable, ResultSet, Row, SchemaRef, Table};
use crate::resizer::resize;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Named base tables a plan executes over.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    tables: HashMap<String, Table>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, table: Table) {
        self.tables.insert(name.into(), table);
    }

    pub fn get(&self, name: &str) -> Result<&Table> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tables.keys()
    }

    /// Base sizes keyed by table name (for the cost model).
    pub fn sizes(&self) -> std::collections::BTreeMap<String, u64> {
        self.tables
            .iter()
            .map(|(k, v)| (k.clone(), v.len() as u64))
            .collect()
    }
}

/// Output size accounting for one operator: the oblivious size it
/// materialized and the size it effectively handed to its consumer
/// (after its attached resizer, if any).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpStat {
    pub op: OpId,
    pub kind: &'static str,
    pub oblivious_size: u64,
    pub effective_size: u64,
}

/// Per-operator sizes plus the total tuples processed: the sum of the
/// effective output sizes of all operators, scans included.
#[derive(Debug, Clone, Serialize)]
pub struct ExecStats {
    pub per_op: Vec<OpStat>,
    pub total_tuples: u128,
}

impl ExecStats {
    fn push(&mut self, op: OpId, kind: &'static str, n: u64) {
        self.per_op.push(OpStat {
            op,
            kind,
            oblivious_size: n,
            effective_size: n,
        });
    }

    fn set_effective(&mut self, op: OpId, effective: u64) {
        if let Some(stat) = self.per_op.iter_mut().rev().find(|s| s.op == op) {
            stat.effective_size = effective;
        }
    }

    fn finalize(&mut self) {
        self.total_tuples = self
            .per_op
            .iter()
            .map(|s| u128::from(s.effective_size))
            .sum();
    }
}

struct ExecCtx<'a> {
    catalog: &'a Catalog,
    seed: u64,
    ledger: LeakageLedger,
    stats: ExecStats,
}

/// Execute a plan bottom-up: scans disclose base sizes, resizers disclose
/// trimmed sizes, the root disclosures the final result size. Deterministic
/// given the seed.
pub fn execute(
    plan: &PlanNode,
    catalog: &Catalog,
    seed: u64,
) -> Result<(ResultSet, LeakageLedger, ExecStats)> {
    let mut ctx = ExecCtx {
        catalog,
        seed,
        ledger: LeakageLedger::new(),
        stats: ExecStats {
            per_op: Vec::new(),
            total_tuples: 0,
        },
    };
    let root = eval(&mut ctx, plan)?;
    let result = to_result(&root, &mut ctx.ledger);
    ctx.stats.finalize();
    Ok((result, ctx.ledger, ctx.stats))
}

fn eval(ctx: &mut ExecCtx, node: &PlanNode) -> Result<PaddedTable> {
    match node.kind() {
        NodeKind::Scan { table } => {
            let out = ob_scan(ctx.catalog.get(table)?, node.id());
            ctx.ledger.record(
                node.id(),
                DisclosureKind::BaseSize,
                out.public_size() as u64,
            );
            ctx.stats.push(node.id(), "scan", out.public_size() as u64);
            Ok(out)
        }
        NodeKind::Filter(pred) => {
            let input = eval(ctx, &node.children()[0])?;
            let out = ob_filter(&input, pred, node.id())?;
            ctx.stats
                .push(node.id(), "filter", out.public_size() as u64);
            Ok(out)
        }
        NodeKind::Join {
            left_col,
            right_col,
        } => {
            let left = eval(ctx, &node.children()[0])?;
            let right = eval(ctx, &node.children()[1])?;
            let out = ob_join(&left, &right, left_col, right_col, node.id())?;
            ctx.stats.push(node.id(), "join", out.public_size() as u64);
            Ok(out)
        }
        NodeKind::GroupBy(agg) => {
            let input = eval(ctx, &node.children()[0])?;
            let out = ob_groupby(&input, agg, node.id())?;
            ctx.stats
                .push(node.id(), "groupby", out.public_size() as u64);
            Ok(out)
        }
        NodeKind::OrderBy { key } => {
            let input = eval(ctx, &node.children()[0])?;
            let out = ob_orderby(&input, key, node.id())?;
            ctx.stats
                .push(node.id(), "orderby", out.public_size() as u64);
            Ok(out)
        }
        NodeKind::Resizer(strategy) => {
            let child = &node.children()[0];
            let input = eval(ctx, child)?;
            let out = resize(input, strategy, ctx.seed, node.id(), &mut ctx.ledger)?;
            ctx.stats
                .set_effective(child.id(), out.public_size() as u64);
            Ok(out)
        }
    }
}

/// Textbook evaluation without padding: the reference semantics every
/// oblivious execution must reproduce (as a multiset).
pub fn execute_plaintext(plan: &PlanNode, catalog: &Catalog) -> Result<ResultSet> {
    let (schema, rows) = eval_plain(plan, catalog)?;
    Ok(ResultSet::new(schema, rows))
}

fn eval_plain(node: &PlanNode, catalog: &Catalog) -> Result<(SchemaRef, Vec<Row>)> {
    match node.kind() {
        NodeKind::Scan { table } => {
            let t = catalog.get(table)?;
            Ok((Arc::clone(t.schema()), t.rows().to_vec()))
        }
        NodeKind::Filter(pred) => {
            let (schema, rows) = eval_plain(&node.children()[0], catalog)?;
            let tests: Vec<(usize, i64)> = pred
                .conjuncts
                .iter()
                .map(|(name, v)| Ok((schema.index_of(name)?, *v)))
                .collect::<Result<_>>()?;
            let rows = rows
                .into_iter()
                .filter(|row| tests.iter().all(|(i, v)| row[*i] == *v))
                .collect();
            Ok((schema, rows))
        }
        NodeKind::Join {
            left_col,
            right_col,
        } => {
            let (ls, lrows) = eval_plain(&node.children()[0], catalog)?;
            let (rs, rrows) = eval_plain(&node.children()[1], catalog)?;
            let li = ls.index_of(left_col)?;
            let ri = rs.index_of(right_col)?;
            let schema = Arc::new(ls.concat(&rs));
            let mut rows = Vec::new();
            for lrow in &lrows {
                for rrow in &rrows {
                    if lrow[li] == rrow[ri] {
                        let mut row = lrow.clone();
                        row.extend_from_slice(rrow);
                        rows.push(row);
                    }
                }
            }
            Ok((schema, rows))
        }
        NodeKind::GroupBy(agg) => eval_plain_groupby(node, catalog, agg),
        NodeKind::OrderBy { key } => {
            let (schema, mut rows) = eval_plain(&node.children()[0], catalog)?;
            let ki = schema.index_of(key)?;
            rows.sort_by(|a, b| a[ki].cmp(&b[ki]).then_with(|| a.cmp(b)));
            Ok((schema, rows))
        }
        NodeKind::Resizer(_) => eval_plain(&node.children()[0], catalog),
    }
}

fn eval_plain_groupby(
    node: &PlanNode,
    catalog: &Catalog,
    agg: &AggSpec,
) -> Result<(SchemaRef, Vec<Row>)> {
    let (schema, rows) = eval_plain(&node.children()[0], catalog)?;
    let ki = schema.index_of(&agg.group_key)?;
    let sum_idx = match &agg.aggregate {
        Aggregate::Count => None,
        Aggregate::Sum(col) => Some(schema.index_of(col)?),
    };
    let out_schema = Arc::new(schema.with_appended(match &agg.aggregate {
        Aggregate::Count => "cnt",
        Aggregate::Sum(_) => "sum",
    }));

    let mut groups: std::collections::BTreeMap<i64, Vec<&Row>> = Default::default();
    for row in &rows {
        groups.entry(row[ki]).or_default().push(row);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        // Representative: the lexicographically smallest row of the group,
        // mirroring the oblivious sort's tie-break.
        let rep = members.iter().min().unwrap();
        let value = match sum_idx {
            None => members.len() as i64,
            Some(col) => {
                let mut acc = 0i64;
                for row in &members {
                    acc = acc
                        .checked_add(row[col])
                        .ok_or(Error::SumOverflow { key })?;
                }
                acc
            }
        };
        let mut row = (*rep).clone();
        row.push(value);
        out.push(row);
    }
    Ok((out_schema, out))
}

/// Fully-oblivious calibration pass: the (N, T) every operator would have
/// with no trimming anywhere. These are the sizes the metric evaluates
/// repeated executions against.
pub fn calibrate_sizes(plan: &PlanNode, catalog: &Catalog) -> Result<SizeMap> {
    let mut sizes = SizeMap::new();
    calibrate(plan, catalog, &mut sizes)?;
    Ok(sizes)
}

fn calibrate(node: &PlanNode, catalog: &Catalog, sizes: &mut SizeMap) -> Result<PaddedTable> {
    let out = match node.kind() {
        NodeKind::Scan { table } => ob_scan(catalog.get(table)?, node.id()),
        NodeKind::Filter(pred) => {
            let input = calibrate(&node.children()[0], catalog, sizes)?;
            ob_filter(&input, pred, node.id())?
        }
        NodeKind::Join {
            left_col,
            right_col,
        } => {
            let left = calibrate(&node.children()[0], catalog, sizes)?;
            let right = calibrate(&node.children()[1], catalog, sizes)?;
            ob_join(&left, &right, left_col, right_col, node.id())?
        }
        NodeKind::GroupBy(agg) => {
            let input = calibrate(&node.children()[0], catalog, sizes)?;
            ob_groupby(&input, agg, node.id())?
        }
        NodeKind::OrderBy { key } => {
            let input = calibrate(&node.children()[0], catalog, sizes)?;
            ob_orderby(&input, key, node.id())?
        }
        NodeKind::Resizer(_) => return calibrate(&node.children()[0], catalog, sizes),
    };
    sizes.insert(
        node.id(),
        OperatorSizes {
            n: out.public_size() as u64,
            t: out.true_count() as u64,
        },
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::FillerDistribution;
    use crate::plan::{
        build_plan, join_chain_spec, place_resizers, PlacementRule, PlanSpec,
    };
    use crate::relation::{multiset_equal, Schema};
    use crate::resizer::TrimStrategy;

    fn tiny_catalog(sizes: &[usize]) -> Catalog {
        // Chain-compatible tables where everything joins with everything:
        // in/out keys all zero.
        let mut catalog = Catalog::new();
        for (i, &n) in sizes.iter().enumerate() {
            let schema = Schema::shared(vec![
                format!("t{i}_id"),
                format!("t{i}_in"),
                format!("t{i}_out"),
            ])
            .unwrap();
            let rows = (0..n as i64).map(|r| vec![r, 0, 0]).collect();
            catalog.insert(format!("t{i}"), Table::new(schema, rows).unwrap());
        }
        catalog
    }

    /// Chain tables where only even rows carry the shared key; odd rows get
    /// globally unique sentinels and never match.
    fn selective_catalog(sizes: &[usize]) -> Catalog {
        let mut catalog = Catalog::new();
        for (i, &n) in sizes.iter().enumerate() {
            let schema = Schema::shared(vec![
                format!("t{i}_id"),
                format!("t{i}_in"),
                format!("t{i}_out"),
            ])
            .unwrap();
            let rows = (0..n as i64)
                .map(|r| {
                    let key = if r % 2 == 0 {
                        0
                    } else {
                        -(i as i64 * 1000 + r + 1)
                    };
                    vec![r, key, key]
                })
                .collect();
            catalog.insert(format!("t{i}"), Table::new(schema, rows).unwrap());
        }
        catalog
    }

    #[test]
    fn scan_roundtrip() {
        let catalog = tiny_catalog(&[3]);
        let plan = build_plan(&PlanSpec::Scan { table: "t0".into() }).unwrap();
        let (result, ledger, stats) = execute(&plan, &catalog, 1).unwrap();
        assert_eq!(result.len(), 3);
        assert_eq!(ledger.len(), 2); // base-size + final-result-size
        assert_eq!(stats.total_tuples, 3);
        let plain = execute_plaintext(&plan, &catalog).unwrap();
        assert!(multiset_equal(&result, &plain).unwrap());
    }

    #[test]
    fn downscaled_chain_matches_cost_identity() {
        // 3-join over four 10-row tables, rule=none:
        // total = 40 + 100 + 1000 + 10000.
        let catalog = tiny_catalog(&[10, 10, 10, 10]);
        let plan = build_plan(&join_chain_spec(4)).unwrap();
        let (_, ledger, stats) = execute(&plan, &catalog, 7).unwrap();
        assert_eq!(stats.total_tuples, 40 + 100 + 1000 + 10000);
        // rule=none: exactly 4 base sizes and the final result, no trims.
        assert_eq!(ledger.len(), 5);
        assert_eq!(ledger.count_of(DisclosureKind::TrimmedSize), 0);
    }

    #[test]
    fn fully_revealed_counts_true_sizes_everywhere() {
        // Only even rows match: the 4x4 join has 2 * 2 = 4 true pairs.
        let catalog = selective_catalog(&[4, 4]);
        let plan = build_plan(&join_chain_spec(2)).unwrap();
        let placed = place_resizers(&plan, &PlacementRule::FullyRevealed);
        let (result, ledger, stats) = execute(&placed, &catalog, 11).unwrap();
        assert_eq!(result.len(), 4);
        // Scans stay 4 (T = N); the join's effective size is its true count.
        assert_eq!(stats.total_tuples, 4 + 4 + 4);
        assert_eq!(ledger.count_of(DisclosureKind::TrimmedSize), 3);
        let plain = execute_plaintext(&placed, &catalog).unwrap();
        assert!(multiset_equal(&result, &plain).unwrap());
    }

    #[test]
    fn resize_is_lossless_end_to_end() {
        let catalog = tiny_catalog(&[6, 5, 4]);
        let plan = build_plan(&join_chain_spec(3)).unwrap();
        let strategy = TrimStrategy::CoinToss(FillerDistribution::beta(2.0, 6.0).unwrap());
        let placed = place_resizers(&plan, &PlacementRule::AfterAll(strategy));
        let plain = execute_plaintext(&plan, &catalog).unwrap();
        for seed in 0..10 {
            let (result, ledger, _) = execute(&placed, &catalog, seed).unwrap();
            assert!(multiset_equal(&result, &plain).unwrap());
            assert_eq!(
                ledger.count_of(DisclosureKind::TrimmedSize),
                placed.active_resizers()
            );
        }
    }

    #[test]
    fn execution_is_deterministic_per_seed() {
        let catalog = selective_catalog(&[8, 8, 4]);
        let plan = build_plan(&join_chain_spec(3)).unwrap();
        let strategy = TrimStrategy::CoinToss(FillerDistribution::beta(2.0, 6.0).unwrap());
        let placed = place_resizers(&plan, &PlacementRule::AfterAll(strategy));
        let (r1, l1, s1) = execute(&placed, &catalog, 42).unwrap();
        let (r2, l2, s2) = execute(&placed, &catalog, 42).unwrap();
        assert_eq!(r1.rows(), r2.rows());
        assert_eq!(l1, l2);
        assert_eq!(s1.total_tuples, s2.total_tuples);
        // A different seed may disclose different trimmed sizes.
        let (_, l3, _) = execute(&placed, &catalog, 43).unwrap();
        assert_ne!(l1, l3);
    }

    #[test]
    fn calibration_reports_untrimmed_sizes() {
        let catalog = tiny_catalog(&[10, 10]);
        let plan = build_plan(&join_chain_spec(2)).unwrap();
        let strategy = TrimStrategy::CoinToss(FillerDistribution::beta(2.0, 6.0).unwrap());
        let placed = place_resizers(&plan, &PlacementRule::AfterAll(strategy));
        let sizes = calibrate_sizes(&placed, &catalog).unwrap();
        let join = sizes.get(&OpId(2)).unwrap();
        assert_eq!(join.n, 100);
        assert_eq!(join.t, 100); // all-zero keys: everything matches
        assert_eq!(sizes.len(), 3);
    }

    #[test]
    fn groupby_plan_agrees_with_plaintext() {
        let mut catalog = Catalog::new();
        let schema = Schema::shared(vec!["t0_id", "t0_in", "t0_out", "g", "v"]).unwrap();
        let rows = vec![
            vec![0, 0, 0, 7, 10],
            vec![1, 0, 0, 7, 5],
            vec![2, 0, 0, 9, 2],
            vec![3, 0, 0, 7, 1],
        ];
        catalog.insert("t0", Table::new(schema, rows).unwrap());
        let spec = PlanSpec::GroupBy {
            key: "g".into(),
            aggregate: crate::plan::AggregateSpec::Sum { column: "v".into() },
            child: Box::new(PlanSpec::Scan { table: "t0".into() }),
        };
        let plan = build_plan(&spec).unwrap();
        let (result, _, _) = execute(&plan, &catalog, 5).unwrap();
        let plain = execute_plaintext(&plan, &catalog).unwrap();
        assert!(multiset_equal(&result, &plain).unwrap());
        // Hand-computed group sums: 7 -> 16, 9 -> 2.
        let mut sums: Vec<(i64, i64)> = result
            .rows()
            .iter()
            .map(|r| (r[3], *r.last().unwrap()))
            .collect();
        sums.sort();
        assert_eq!(sums, vec![(7, 16), (9, 2)]);
    }
}

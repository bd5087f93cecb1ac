//! Query-plan trees and resizer placement rules.
//!
//! Plans are hand-assembled operator trees. Base operators receive stable
//! post-order ids; a resizer inserted above operator `i` is identified as
//! `rz(i)` so that changing the placement rule never renumbers (and never
//! re-seeds) unrelated operators.

use crate::distributions::FillerDistribution;
use crate::error::{Error, Result};
use crate::ledger::OpId;
use crate::operators::{AggSpec, Aggregate, PredicateSpec};
use crate::resizer::TrimStrategy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Scan { table: String },
    Filter(PredicateSpec),
    Join { left_col: String, right_col: String },
    GroupBy(AggSpec),
    OrderBy { key: String },
    Resizer(TrimStrategy),
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Scan { .. } => "scan",
            NodeKind::Filter(_) => "filter",
            NodeKind::Join { .. } => "join",
            NodeKind::GroupBy(_) => "groupby",
            NodeKind::OrderBy { .. } => "orderby",
            NodeKind::Resizer(_) => "resizer",
        }
    }

    fn arity(&self) -> usize {
        match self {
            NodeKind::Scan { .. } => 0,
            NodeKind::Join { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    id: OpId,
    kind: NodeKind,
    children: Vec<PlanNode>,
}

impl PlanNode {
    pub(crate) fn new(id: OpId, kind: NodeKind, children: Vec<PlanNode>) -> Result<PlanNode> {
        if children.len() != kind.arity() {
            return Err(Error::PlanArity {
                kind: kind.name(),
                expected: kind.arity(),
                got: children.len(),
            });
        }
        Ok(PlanNode { id, kind, children })
    }

    pub fn id(&self) -> OpId {
        self.id
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn children(&self) -> &[PlanNode] {
        &self.children
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(PlanNode::node_count).sum::<usize>()
    }

    /// Count of resizer nodes whose strategy actually discloses something.
    pub fn active_resizers(&self) -> usize {
        let own = match &self.kind {
            NodeKind::Resizer(s) if !s.is_none() => 1,
            _ => 0,
        };
        own + self
            .children
            .iter()
            .map(PlanNode::active_resizers)
            .sum::<usize>()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a PlanNode)) {
        for child in &self.children {
            child.visit(f);
        }
        f(self);
    }
}

// ---------------------------------------------------------------------------
// Plan descriptions (the structured configuration form of a plan)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualsSpec {
    pub column: String,
    pub value: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AggregateSpec {
    Count,
    Sum { column: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Beta { alpha: f64, beta: f64 },
    Tlap { epsilon: f64, delta: f64, sensitivity: f64 },
    FixedFraction { f: f64 },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<FillerDistribution> {
        match self {
            DistributionSpec::Beta { alpha, beta } => FillerDistribution::beta(*alpha, *beta),
            DistributionSpec::Tlap {
                epsilon,
                delta,
                sensitivity,
            } => FillerDistribution::tlap(*epsilon, *delta, *sensitivity),
            DistributionSpec::FixedFraction { f } => FillerDistribution::fixed_fraction(*f),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    None,
    CoinToss { distribution: DistributionSpec },
    CounterBased { distribution: DistributionSpec },
    SortAndCut { distribution: DistributionSpec },
}

impl StrategySpec {
    pub fn build(&self) -> Result<TrimStrategy> {
        Ok(match self {
            StrategySpec::None => TrimStrategy::None,
            StrategySpec::CoinToss { distribution } => {
                TrimStrategy::CoinToss(distribution.build()?)
            }
            StrategySpec::CounterBased { distribution } => {
                TrimStrategy::CounterBased(distribution.build()?)
            }
            StrategySpec::SortAndCut { distribution } => {
                TrimStrategy::SortAndCut(distribution.build()?)
            }
        })
    }
}

/// Declarative plan description, e.g. from a TOML experiment config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum PlanSpec {
    Scan {
        table: String,
    },
    Filter {
        equals: Vec<EqualsSpec>,
        child: Box<PlanSpec>,
    },
    Join {
        left_col: String,
        right_col: String,
        left: Box<PlanSpec>,
        right: Box<PlanSpec>,
    },
    GroupBy {
        key: String,
        aggregate: AggregateSpec,
        child: Box<PlanSpec>,
    },
    OrderBy {
        key: String,
        child: Box<PlanSpec>,
    },
    Resizer {
        strategy: StrategySpec,
        child: Box<PlanSpec>,
    },
}

/// Validate a plan description and assign stable ids (base operators in
/// post-order). A resizer at the root is rejected: the final operator's
/// output size is disclosed as the result anyway.
pub fn build_plan(spec: &PlanSpec) -> Result<PlanNode> {
    if matches!(spec, PlanSpec::Resizer { .. }) {
        return Err(Error::ResizerAtRoot);
    }
    let mut next_id = 0u32;
    build_node(spec, &mut next_id)
}

fn build_node(spec: &PlanSpec, next_id: &mut u32) -> Result<PlanNode> {
    let node = match spec {
        PlanSpec::Scan { table } => PlanNode::new(
            alloc_id(next_id),
            NodeKind::Scan {
                table: table.clone(),
            },
            vec![],
        )?,
        PlanSpec::Filter { equals, child } => {
            let child = build_node(child, next_id)?;
            let pred = PredicateSpec::new(
                equals.iter().map(|e| (e.column.clone(), e.value)).collect(),
            )?;
            PlanNode::new(alloc_id(next_id), NodeKind::Filter(pred), vec![child])?
        }
        PlanSpec::Join {
            left_col,
            right_col,
            left,
            right,
        } => {
            let l = build_node(left, next_id)?;
            let r = build_node(right, next_id)?;
            PlanNode::new(
                alloc_id(next_id),
                NodeKind::Join {
                    left_col: left_col.clone(),
                    right_col: right_col.clone(),
                },
                vec![l, r],
            )?
        }
        PlanSpec::GroupBy {
            key,
            aggregate,
            child,
        } => {
            let child = build_node(child, next_id)?;
            let agg = AggSpec {
                group_key: key.clone(),
                aggregate: match aggregate {
                    AggregateSpec::Count => Aggregate::Count,
                    AggregateSpec::Sum { column } => Aggregate::Sum(column.clone()),
                },
            };
            PlanNode::new(alloc_id(next_id), NodeKind::GroupBy(agg), vec![child])?
        }
        PlanSpec::OrderBy { key, child } => {
            let child = build_node(child, next_id)?;
            PlanNode::new(
                alloc_id(next_id),
                NodeKind::OrderBy { key: key.clone() },
                vec![child],
            )?
        }
        PlanSpec::Resizer { strategy, child } => {
            let child = build_node(child, next_id)?;
            let id = OpId::resizer_over(child.id());
            PlanNode::new(id, NodeKind::Resizer(strategy.build()?), vec![child])?
        }
    };
    Ok(node)
}

fn alloc_id(next_id: &mut u32) -> OpId {
    let id = OpId(*next_id);
    *next_id += 1;
    id
}

// ---------------------------------------------------------------------------
// Placement rules
// ---------------------------------------------------------------------------

/// Policy choosing which plan edges receive resizers.
#[derive(Debug, Clone, PartialEq)]
pub enum PlacementRule {
    /// No resizers: fully oblivious execution.
    None,
    /// A FixedFraction(0) resizer above every operator, the root included:
    /// every size is disclosed exactly (the "revealed" baseline).
    FullyRevealed,
    /// The shared strategy above every non-root operator.
    AfterAll(TrimStrategy),
    /// The shared strategy above every non-root join.
    AfterJoins(TrimStrategy),
    /// The shared strategy above every non-root group-by.
    AfterGroupBys(TrimStrategy),
}

impl PlacementRule {
    pub fn label(&self) -> &'static str {
        match self {
            PlacementRule::None => "none",
            PlacementRule::FullyRevealed => "fully-revealed",
            PlacementRule::AfterAll(_) => "after-all",
            PlacementRule::AfterJoins(_) => "after-joins",
            PlacementRule::AfterGroupBys(_) => "after-groupbys",
        }
    }
}

/// Insert resizer nodes per rule. Existing resizers are left alone and
/// their children are not double-wrapped.
pub fn place_resizers(plan: &PlanNode, rule: &PlacementRule) -> PlanNode {
    match rule {
        PlacementRule::None => plan.clone(),
        PlacementRule::FullyRevealed => {
            let strategy =
                TrimStrategy::CoinToss(FillerDistribution::FixedFraction { f: 0.0 });
            let placed = place(plan, &|_| true, &strategy, true);
            wrap(placed, &strategy)
        }
        PlacementRule::AfterAll(s) => place(plan, &|_| true, s, true),
        PlacementRule::AfterJoins(s) => {
            place(plan, &|k| matches!(k, NodeKind::Join { .. }), s, true)
        }
        PlacementRule::AfterGroupBys(s) => {
            place(plan, &|k| matches!(k, NodeKind::GroupBy(_)), s, true)
        }
    }
}

fn place(
    node: &PlanNode,
    matches_kind: &impl Fn(&NodeKind) -> bool,
    strategy: &TrimStrategy,
    is_root: bool,
) -> PlanNode {
    if let NodeKind::Resizer(existing) = &node.kind {
        // Keep the existing resizer; only transform below its child.
        let child = &node.children[0];
        let new_grandchildren: Vec<PlanNode> = child
            .children
            .iter()
            .map(|c| place(c, matches_kind, strategy, false))
            .collect();
        let new_child = PlanNode {
            id: child.id,
            kind: child.kind.clone(),
            children: new_grandchildren,
        };
        return PlanNode {
            id: node.id,
            kind: NodeKind::Resizer(existing.clone()),
            children: vec![new_child],
        };
    }

    let children: Vec<PlanNode> = node
        .children
        .iter()
        .map(|c| place(c, matches_kind, strategy, false))
        .collect();
    let rebuilt = PlanNode {
        id: node.id,
        kind: node.kind.clone(),
        children,
    };
    if !is_root && matches_kind(&rebuilt.kind) {
        wrap(rebuilt, strategy)
    } else {
        rebuilt
    }
}

fn wrap(node: PlanNode, strategy: &TrimStrategy) -> PlanNode {
    let id = OpId::resizer_over(node.id);
    PlanNode {
        id,
        kind: NodeKind::Resizer(strategy.clone()),
        children: vec![node],
    }
}

/// The canonical k-join chain over `k + 1` scans (joins left-deep, table i
/// linked to table i+1). Column names follow the synthetic generator.
pub fn join_chain_spec(tables: usize) -> PlanSpec {
    assert!(tables >= 2, "a join chain needs at least two tables");
    let mut plan = PlanSpec::Scan {
        table: "t0".into(),
    };
    for i in 1..tables {
        plan = PlanSpec::Join {
            left_col: format!("t{}_out", i - 1),
            right_col: format!("t{i}_in"),
            left: Box::new(plan),
            right: Box::new(PlanSpec::Scan {
                table: format!("t{i}"),
            }),
        };
    }
    plan
}

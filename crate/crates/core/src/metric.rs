//! The Rounds-to-Recover metric at operator and plan level.
//!
//! An attacker averaging `r` observations of the disclosed size `S` has a
//! standard error of `sigma_s / sqrt(r)`, so recovering the true count
//! within `err` at confidence `alpha` needs
//!
//! ```text
//! RtR >= z_{alpha/2}^2 * sigma_s^2 / err^2
//! ```
//!
//! rounds. We report the ceiling of the bound as "the" RtR (minimum 1).
//! z-scores are quoted at three decimals, the way confidence tables (and
//! the reference experiments, which fix z = 3.291 for 99.9%) do.

use crate::distributions::{moments_of_s, McConfig};
use crate::error::{Error, Result};
use crate::ledger::OpId;
use crate::plan::{NodeKind, PlanNode};
use crate::resizer::TrimStrategy;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Inverse standard-normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9, well inside the 1e-6 contract).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile probability must be in (0, 1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };
    Ok(x)
}

/// Two-sided z-score for confidence `alpha`, quoted at three decimals
/// (e.g. 99.9% -> 3.291, 95% -> 1.960).
pub fn z_score(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must be in (0, 1), got {alpha}"
        )));
    }
    let z = normal_quantile((1.0 + alpha) / 2.0)?;
    Ok((z * 1000.0).round() / 1000.0)
}

/// One RtR evaluation: variance of the disclosed size, error margin,
/// confidence.
#[derive(Debug, Clone, Copy)]
pub struct RtRQuery {
    pub sigma2: f64,
    pub err: f64,
    pub alpha: f64,
}

impl RtRQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "variance must be nonnegative, got {}",
                self.sigma2
            )));
        }
        if !(self.err > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "error margin must be positive, got {}",
                self.err
            )));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Rounds to recover: `ceil(z^2 sigma^2 / err^2)`, at least one round.
pub fn rtr(query: &RtRQuery) -> Result<u64> {
    query.validate()?;
    let z = z_score(query.alpha)?;
    let bound = z * z * query.sigma2 / (query.err * query.err);
    Ok((bound.ceil() as u64).max(1))
}

/// RtR value with a distinguished sentinel for fully oblivious operators;
/// never encoded as a large finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounds {
    Finite(u64),
    Infinite,
}

impl Rounds {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Rounds::Infinite)
    }

    pub fn min(self, other: Rounds) -> Rounds {
        match (self, other) {
            (Rounds::Finite(a), Rounds::Finite(b)) => Rounds::Finite(a.min(b)),
            (Rounds::Finite(a), Rounds::Infinite) | (Rounds::Infinite, Rounds::Finite(a)) => {
                Rounds::Finite(a)
            }
            (Rounds::Infinite, Rounds::Infinite) => Rounds::Infinite,
        }
    }
}

impl fmt::Display for Rounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rounds::Finite(r) => write!(f, "{r}"),
            Rounds::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Rounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Error-margin policy: a fixed number of tuples, or a fraction of the
/// operator's oblivious size (the reference experiments use err = 1 and
/// err = 1% N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum ErrPolicy {
    Absolute(f64),
    FractionOfN(f64),
}

impl ErrPolicy {
    pub fn err_for(&self, n_public: u64) -> f64 {
        match self {
            ErrPolicy::Absolute(e) => *e,
            ErrPolicy::FractionOfN(frac) => frac * n_public as f64,
        }
    }
}

/// Oblivious size and true count of one operator, as used for the metric.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OperatorSizes {
    pub n: u64,
    pub t: u64,
}

pub type SizeMap = BTreeMap<OpId, OperatorSizes>;

#[derive(Debug, Clone, Serialize)]
pub struct RtRRecord {
    pub op: OpId,
    pub n: u64,
    pub t: u64,
    pub strategy: String,
    pub sigma2: Option<f64>,
    pub rounds: Rounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct RtRReport {
    pub records: Vec<RtRRecord>,
    pub minimum: Rounds,
}

/// Per-operator RtR over a placed plan, and the plan-level minimum (the
/// weakest link). The root is excluded: its true size is the query answer
/// and is disclosed by definition. Operators without a resizer, and
/// resizers of kind none, disclose nothing and contribute the infinite
/// sentinel.
pub fn plan_min_rtr(
    plan: &PlanNode,
    sizes: &SizeMap,
    err_policy: ErrPolicy,
    alpha: f64,
    mc: McConfig,
) -> Result<RtRReport> {
    let mut records = Vec::new();
    collect_records(plan, true, None, sizes, err_policy, alpha, mc, &mut records)?;
    records.sort_by_key(|r| r.op);
    let minimum = records
        .iter()
        .map(|r| r.rounds)
        .fold(Rounds::Infinite, Rounds::min);
    Ok(RtRReport { records, minimum })
}

#[allow(clippy::too_many_arguments)]
fn collect_records(
    node: &PlanNode,
    is_root: bool,
    strategy_above: Option<&TrimStrategy>,
    sizes: &SizeMap,
    err_policy: ErrPolicy,
    alpha: f64,
    mc: McConfig,
    out: &mut Vec<RtRRecord>,
) -> Result<()> {
    if let NodeKind::Resizer(strategy) = node.kind() {
        let child = &node.children()[0];
        collect_records(child, is_root, Some(strategy), sizes, err_policy, alpha, mc, out)?;
        return Ok(());
    }

    if !is_root {
        let op_sizes = sizes
            .get(&node.id())
            .ok_or_else(|| Error::MissingSizes(node.id().to_string()))?;
        let record = match strategy_above {
            None | Some(TrimStrategy::None) => RtRRecord {
                op: node.id(),
                n: op_sizes.n,
                t: op_sizes.t,
                strategy: strategy_above.map_or_else(|| "none".into(), |s| s.label()),
                sigma2: None,
                rounds: Rounds::Infinite,
            },
            Some(strategy) => {
                let est = moments_of_s(strategy, op_sizes.n, op_sizes.t, mc)?;
                let query = RtRQuery {
                    sigma2: est.variance,
                    err: err_policy.err_for(op_sizes.n),
                    alpha,
                };
                RtRRecord {
                    op: node.id(),
                    n: op_sizes.n,
                    t: op_sizes.t,
                    strategy: strategy.label(),
                    sigma2: Some(est.variance),
                    rounds: Rounds::Finite(rtr(&query)?),
                }
            }
        };
        out.push(record);
    }

    for child in node.children() {
        collect_records(child, false, None, sizes, err_policy, alpha, mc, out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_scores_match_tables() {
        // alpha = 99.9% -> 3.291; alpha = 95% -> 1.960.
        assert_eq!(z_score(0.999).unwrap(), 3.291);
        assert_eq!(z_score(0.95).unwrap(), 1.960);
        assert!(z_score(0.0).is_err());
        assert!(z_score(1.0).is_err());
    }

    #[test]
    fn quantile_is_symmetric() {
        for alpha in [0.5, 0.9, 0.95, 0.99, 0.999] {
            let upper = normal_quantile(1.0 - (1.0 - alpha) / 2.0).unwrap();
            let lower = normal_quantile((1.0 - alpha) / 2.0).unwrap();
            assert!((upper + lower).abs() < 1e-9, "alpha {alpha}");
        }
    }

    #[test]
    fn quantile_matches_reference_values() {
        // Round-trip sanity against standard-normal table entries.
        let cases = [
            (0.9995, 3.290_526_731_491_926),
            (0.975, 1.959_963_984_540_054),
            (0.5, 0.0),
            (0.841_344_746_068_543, 1.0),
        ];
        for (p, z) in cases {
            assert!(
                (normal_quantile(p).unwrap() - z).abs() < 1e-6,
                "p = {p}"
            );
        }
    }

    #[test]
    fn rtr_reference_point() {
        // sigma^2 = 8, err = 1, alpha = 99.9% -> ceil(3.291^2 * 8) = 87.
        let r = rtr(&RtRQuery {
            sigma2: 8.0,
            err: 1.0,
            alpha: 0.999,
        })
        .unwrap();
        assert_eq!(r, 87);
    }

    #[test]
    fn rtr_floor_is_one_round() {
        let r = rtr(&RtRQuery {
            sigma2: 0.0,
            err: 1.0,
            alpha: 0.999,
        })
        .unwrap();
        assert_eq!(r, 1);
    }

    #[test]
    fn rtr_err_scaling() {
        // Doubling err divides the pre-ceiling bound by 4.
        let base = RtRQuery {
            sigma2: 1000.0,
            err: 1.0,
            alpha: 0.999,
        };
        let wide = RtRQuery { err: 2.0, ..base };
        let z = z_score(0.999).unwrap();
        let exact = z * z * 1000.0;
        assert_eq!(rtr(&base).unwrap(), exact.ceil() as u64);
        assert_eq!(rtr(&wide).unwrap(), (exact / 4.0).ceil() as u64);
    }

    #[test]
    fn rtr_is_monotone() {
        let r = |sigma2: f64, err: f64, alpha: f64| {
            rtr(&RtRQuery { sigma2, err, alpha }).unwrap()
        };
        assert!(r(10.0, 1.0, 0.999) <= r(20.0, 1.0, 0.999));
        assert!(r(10.0, 2.0, 0.999) <= r(10.0, 1.0, 0.999));
        assert!(r(10.0, 1.0, 0.95) <= r(10.0, 1.0, 0.999));
    }

    #[test]
    fn rounds_sentinel_display() {
        assert_eq!(Rounds::Infinite.to_string(), "inf");
        assert_eq!(Rounds::Finite(87).to_string(), "87");
        assert_eq!(
            Rounds::Infinite.min(Rounds::Finite(3)),
            Rounds::Finite(3)
        );
    }
}

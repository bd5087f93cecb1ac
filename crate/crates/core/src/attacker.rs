//! Mean-estimator attacker over repeated disclosed sizes.
//!
//! The attacker observes `S_1..S_r` across equivalent repetitions of one
//! operator and knows the strategy's moments (the conservative assumption);
//! averaging gives `T_hat = mean(S) - mu_eta`. The harness side simulates
//! executions and scores estimates against the true count; the estimator
//! itself ([`mean_estimate`]) sees only ledger-visible data.

use crate::distributions::{moments_of_s, sample_s, McConfig};
use crate::error::{Error, Result};
use crate::ledger::OpId;
use crate::resizer::TrimStrategy;
use crate::rng;
use rand::Rng;

/// One operator as the attacker model sees it: public size, secret true
/// count (used by the simulation harness only) and the trimming strategy.
#[derive(Debug, Clone)]
pub struct OperatorConfig {
    pub op: OpId,
    pub n_public: u64,
    pub true_count: u64,
    pub strategy: TrimStrategy,
}

impl OperatorConfig {
    pub fn new(op: OpId, n_public: u64, true_count: u64, strategy: TrimStrategy) -> Result<Self> {
        if true_count > n_public {
            return Err(Error::InvalidParameter(format!(
                "true count {true_count} exceeds public size {n_public}"
            )));
        }
        strategy.validate()?;
        Ok(OperatorConfig {
            op,
            n_public,
            true_count,
            strategy,
        })
    }
}

/// Disclosed sizes collected over `r` equivalent repetitions.
#[derive(Debug, Clone)]
pub struct ObservationSeries {
    pub op: OpId,
    pub strategy_label: String,
    observations: Vec<u64>,
}

impl ObservationSeries {
    pub fn observations(&self) -> &[u64] {
        &self.observations
    }

    pub fn rounds(&self) -> usize {
        self.observations.len()
    }
}

/// Simulate `r` independent resize executions of the configured operator,
/// recording each disclosed size. A strategy of kind none discloses
/// nothing: the series is empty and the attack does not apply.
pub fn observe_rounds<R: Rng + ?Sized>(
    config: &OperatorConfig,
    r: u64,
    rng: &mut R,
) -> Result<ObservationSeries> {
    if r < 1 {
        return Err(Error::InvalidParameter("need at least one round".into()));
    }
    let observations = if config.strategy.is_none() {
        Vec::new()
    } else {
        (0..r)
            .map(|_| sample_s(&config.strategy, config.n_public, config.true_count, rng))
            .collect::<Result<_>>()?
    };
    Ok(ObservationSeries {
        op: config.op,
        strategy_label: config.strategy.label(),
        observations,
    })
}

/// The attacker proper: estimate the true count from the observation mean
/// and the publicly known expected filler count. Consumes nothing but
/// disclosed sizes and strategy moments.
pub fn mean_estimate(series: &ObservationSeries, mu_eta: f64) -> Result<f64> {
    if series.observations.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sum: f64 = series.observations.iter().map(|&s| s as f64).sum();
    Ok(sum / series.observations.len() as f64 - mu_eta)
}

/// Attack outcome scored against the true count (harness side).
#[derive(Debug, Clone, Copy)]
pub struct AttackOutcome {
    pub estimate: f64,
    pub abs_error: f64,
    pub success: bool,
}

pub fn estimate_t(
    series: &ObservationSeries,
    mu_eta: f64,
    true_count: u64,
    err: f64,
) -> Result<AttackOutcome> {
    let estimate = mean_estimate(series, mu_eta)?;
    let abs_error = (estimate - true_count as f64).abs();
    Ok(AttackOutcome {
        estimate,
        abs_error,
        success: abs_error <= err,
    })
}

/// Empirical Rounds-to-Recover: the smallest `r` (doubling, then bisection)
/// at which the attack success fraction over `trials` reaches
/// `alpha - 2 * binomial standard error`. Deterministic given the seed.
pub fn empirical_rtr(
    config: &OperatorConfig,
    err: f64,
    alpha: f64,
    trials: u64,
    seed: u64,
    ceiling: u64,
) -> Result<u64> {
    if trials < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must be in (0, 1), got {alpha}"
        )));
    }
    let mu_eta = moments_of_s(
        &config.strategy,
        config.n_public,
        config.true_count,
        McConfig {
            samples: 1_000_000,
            seed,
        },
    )?
    .expected_fillers(config.true_count);
    let threshold = alpha - 2.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();

    let success_rate = |r: u64| -> Result<f64> {
        let mut hits = 0u64;
        for trial in 0..trials {
            let mut rng = rng::derive("attack-trial", &[seed, r, trial]);
            let series = observe_rounds(config, r, &mut rng)?;
            let outcome = estimate_t(&series, mu_eta, config.true_count, err)?;
            if outcome.success {
                hits += 1;
            }
        }
        Ok(hits as f64 / trials as f64)
    };

    if success_rate(1)? >= threshold {
        return Ok(1);
    }
    let mut hi = 2u64;
    while success_rate(hi)? < threshold {
        hi = hi.saturating_mul(2);
        if hi > ceiling {
            return Err(Error::ExceedsCeiling(ceiling));
        }
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if success_rate(mid)? >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

//! User-defined filler distributions and the moments of the disclosed
//! trimmed size `S` they induce.
//!
//! A trimming strategy keeps `eta` of the `n = N - T` fillers, so the
//! disclosed size is `S = T + eta`. For the coin-toss mark step `eta` is
//! Binomial(n, p) with `p` drawn from the configured distribution; for the
//! counter-based and sort&cut variants `eta` is drawn directly (clamped to
//! `n`). [`moments_of_s`] provides the mean and variance of `S` either in
//! closed form (Beta-Binomial, fixed fraction) or by simulating the exact
//! size law; both routes feed the privacy metric and the attacker model.

use crate::error::{Error, Result};
use crate::resizer::TrimStrategy;
use rand::Rng;
use rand_distr::{Beta as BetaDist, Binomial, Distribution};
use serde::{Deserialize, Serialize};

/// Distribution a resizer instance draws its trimming parameter from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FillerDistribution {
    /// `p ~ Beta(alpha, beta)`, used directly as the coin-toss probability.
    Beta { alpha: f64, beta: f64 },
    /// Truncated Laplace `TLap(epsilon, delta, sensitivity)`, yielding a
    /// filler count `eta >= 0`. Scale `b = sensitivity / epsilon`, location
    /// `mu = b * ln(1/(2*delta))`; negative draws are clamped to zero so the
    /// retained mass stays within `delta` of the untruncated distribution.
    TLap {
        epsilon: f64,
        delta: f64,
        sensitivity: f64,
    },
    /// Degenerate distribution keeping a fixed fraction `f` of the fillers.
    FixedFraction { f: f64 },
}

impl FillerDistribution {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(FillerDistribution::Beta { alpha, beta })
    }

    pub fn tlap(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "TLap epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "TLap delta must be in (0, 0.5], got {delta}"
            )));
        }
        if !(sensitivity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "TLap sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(FillerDistribution::TLap {
            epsilon,
            delta,
            sensitivity,
        })
    }

    pub fn fixed_fraction(f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidProbability(f));
        }
        Ok(FillerDistribution::FixedFraction { f })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FillerDistribution::Beta { alpha, beta } => {
                Self::beta(alpha, beta).map(|_| ())
            }
            FillerDistribution::TLap {
                epsilon,
                delta,
                sensitivity,
            } => Self::tlap(epsilon, delta, sensitivity).map(|_| ()),
            FillerDistribution::FixedFraction { f } => Self::fixed_fraction(f).map(|_| ()),
        }
    }

    /// TLap scale `b = sensitivity / epsilon`.
    pub fn tlap_scale(&self) -> Option<f64> {
        match self {
            FillerDistribution::TLap {
                epsilon,
                sensitivity,
                ..
            } => Some(sensitivity / epsilon),
            _ => None,
        }
    }

    /// TLap location `mu = b * ln(1/(2*delta))`.
    pub fn tlap_location(&self) -> Option<f64> {
        match self {
            FillerDistribution::TLap { delta, .. } => {
                Some(self.tlap_scale().unwrap() * (1.0 / (2.0 * delta)).ln())
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            FillerDistribution::Beta { alpha, beta } => format!("beta({alpha},{beta})"),
            FillerDistribution::TLap {
                epsilon,
                delta,
                sensitivity,
            } => format!("tlap({epsilon},{delta},{sensitivity})"),
            FillerDistribution::FixedFraction { f } => format!("fixed({f})"),
        }
    }
}

/// One draw of the coin-toss success probability from `Beta(alpha, beta)`.
pub fn sample_p_beta<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    let dist = BetaDist::new(alpha, beta).map_err(|e| {
        Error::InvalidParameter(format!("Beta({alpha}, {beta}): {e}"))
    })?;
    Ok(dist.sample(rng).clamp(0.0, 1.0))
}

/// One draw of the filler count from the truncated Laplace distribution.
///
/// The draw is Laplace(mu, b) with negative values clamped to zero, i.e.
/// truncation puts the offending mass (at most `delta`) on 0.
pub fn sample_eta_tlap<R: Rng + ?Sized>(dist: &FillerDistribution, rng: &mut R) -> Result<f64> {
    let (b, mu) = match (dist.tlap_scale(), dist.tlap_location()) {
        (Some(b), Some(mu)) => (b, mu),
        _ => {
            return Err(Error::InvalidParameter(
                "sample_eta_tlap needs a TLap distribution".into(),
            ))
        }
    };
    let u: f64 = rng.random::<f64>() - 0.5;
    let noise = if u >= 0.0 {
        -b * (1.0 - 2.0 * u).ln()
    } else {
        b * (1.0 + 2.0 * u).ln()
    };
    Ok((mu + noise).max(0.0))
}

/// Convert a filler count into the coin-toss success probability:
/// `min(n, eta) / n` with `n = N - T`, and 0 when there are no fillers.
pub fn p_from_eta(eta: f64, n_public: u64, true_count: u64) -> f64 {
    let n = n_public.saturating_sub(true_count);
    if n == 0 {
        return 0.0;
    }
    (eta.min(n as f64) / n as f64).clamp(0.0, 1.0)
}

/// Integer filler count drawn for the counter-based and sort&cut variants.
pub(crate) fn draw_eta_count<R: Rng + ?Sized>(
    dist: &FillerDistribution,
    fillers: u64,
    rng: &mut R,
) -> Result<u64> {
    let eta = match dist {
        FillerDistribution::TLap { .. } => sample_eta_tlap(dist, rng)?,
        FillerDistribution::Beta { alpha, beta } => {
            sample_p_beta(*alpha, *beta, rng)? * fillers as f64
        }
        FillerDistribution::FixedFraction { f } => f * fillers as f64,
    };
    Ok((eta.round() as u64).min(fillers))
}

/// The size law shared by the simulator, the moment estimator and the
/// attacker harness: one disclosed size `S` for one resize execution.
pub fn sample_s<R: Rng + ?Sized>(
    strategy: &TrimStrategy,
    n_public: u64,
    true_count: u64,
    rng: &mut R,
) -> Result<u64> {
    let n = n_public.saturating_sub(true_count);
    let kept = match strategy {
        TrimStrategy::None => n,
        TrimStrategy::CoinToss(dist) => {
            let p = match dist {
                FillerDistribution::Beta { alpha, beta } => sample_p_beta(*alpha, *beta, rng)?,
                FillerDistribution::TLap { .. } => {
                    p_from_eta(sample_eta_tlap(dist, rng)?, n_public, true_count)
                }
                FillerDistribution::FixedFraction { f } => *f,
            };
            if n == 0 {
                0
            } else {
                Binomial::new(n, p)
                    .map_err(|e| Error::InvalidParameter(format!("Binomial({n}, {p}): {e}")))?
                    .sample(rng)
            }
        }
        TrimStrategy::CounterBased(dist) | TrimStrategy::SortAndCut(dist) => {
            draw_eta_count(dist, n, rng)?
        }
    };
    Ok(true_count + kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Analytic,
    MonteCarlo,
}

/// Mean and variance of the disclosed size `S` for one operator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    pub method: MomentMethod,
    pub samples: Option<u64>,
}

impl MomentEstimate {
    /// Expected retained filler count `mu_eta = E[S] - T`.
    pub fn expected_fillers(&self, true_count: u64) -> f64 {
        self.mean - true_count as f64
    }
}

/// Monte-Carlo settings for strategies without a closed form.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Closed-form moments where they exist.
///
/// Coin-toss with `p ~ Beta(a, b)` makes `S - T` Beta-Binomial(n, a, b):
/// by the law of total variance
/// `Var(S) = E[n p (1-p)] + n^2 Var(p)
///         = n a b (a + b + n) / ((a + b)^2 (a + b + 1))`.
pub fn moments_analytic(
    strategy: &TrimStrategy,
    n_public: u64,
    true_count: u64,
) -> Option<MomentEstimate> {
    let t = true_count as f64;
    let n = n_public.saturating_sub(true_count) as f64;
    let done = |mean: f64, variance: f64| {
        Some(MomentEstimate {
            mean,
            variance,
            method: MomentMethod::Analytic,
            samples: None,
        })
    };
    match strategy {
        TrimStrategy::None => done(n_public as f64, 0.0),
        TrimStrategy::CoinToss(FillerDistribution::Beta { alpha, beta }) => {
            let (a, b) = (*alpha, *beta);
            let mean = t + n * a / (a + b);
            let var = n * a * b * (a + b + n) / ((a + b) * (a + b) * (a + b + 1.0));
            done(mean, var)
        }
        TrimStrategy::CoinToss(FillerDistribution::FixedFraction { f }) => {
            done(t + n * f, n * f * (1.0 - f))
        }
        TrimStrategy::CounterBased(FillerDistribution::FixedFraction { f })
        | TrimStrategy::SortAndCut(FillerDistribution::FixedFraction { f }) => {
            let eta = ((f * n).round() as u64).min(n as u64);
            done(t + eta as f64, 0.0)
        }
        _ => None,
    }
}

/// Sample moments of `S` from `samples` simulated executions of the
/// strategy's size law (Welford's online update).
pub fn moments_monte_carlo(
    strategy: &TrimStrategy,
    n_public: u64,
    true_count: u64,
    mc: McConfig,
) -> Result<MomentEstimate> {
    let mut rng = crate::rng::derive("moments-mc", &[mc.seed, n_public, true_count]);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..mc.samples {
        let s = sample_s(strategy, n_public, true_count, &mut rng)? as f64;
        let delta = s - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (s - mean);
    }
    let variance = if mc.samples > 1 {
        m2 / (mc.samples - 1) as f64
    } else {
        0.0
    };
    Ok(MomentEstimate {
        mean,
        variance,
        method: MomentMethod::MonteCarlo,
        samples: Some(mc.samples),
    })
}

/// Moments of the disclosed size: analytic where a closed form exists,
/// Monte-Carlo otherwise.
pub fn moments_of_s(
    strategy: &TrimStrategy,
    n_public: u64,
    true_count: u64,
    mc: McConfig,
) -> Result<MomentEstimate> {
    if true_count > n_public {
        return Err(Error::InvalidParameter(format!(
            "true count {true_count} exceeds public size {n_public}"
        )));
    }
    strategy.validate()?;
    match moments_analytic(strategy, n_public, true_count) {
        Some(est) => Ok(est),
        None => moments_monte_carlo(strategy, n_public, true_count, mc),
    }
}

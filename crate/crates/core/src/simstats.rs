//! Traffic allocation, simulated conversions, and Beta-posterior statistics.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{checked_beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::quad;

pub const DEFAULT_PRIOR_STRENGTH: f64 = 100.0;

/// Absolute error bound for [`prob_beats_control`].
pub const PBC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub impressions: u64,
    pub conversions: u64,
}

impl CandidateStats {
    pub fn new(impressions: u64, conversions: u64) -> Self {
        debug_assert!(conversions <= impressions);
        Self {
            impressions,
            conversions,
        }
    }

    pub fn record(&mut self, impressions: u64, conversions: u64) {
        debug_assert!(conversions <= impressions);
        self.impressions += impressions;
        self.conversions += conversions;
    }

    pub fn observed_rate(&self) -> Option<f64> {
        (self.impressions > 0).then(|| self.conversions as f64 / self.impressions as f64)
    }
}

impl std::ops::Add for CandidateStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.impressions + rhs.impressions,
            self.conversions + rhs.conversions,
        )
    }
}

impl std::iter::Sum for CandidateStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Numeric(format!("invalid Beta({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.alpha + self.beta;
        (self.alpha * self.beta / (n * n * (n + 1.0))).sqrt()
    }

    fn ln_pdf(&self, x: f64, ln_norm: f64) -> f64 {
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - ln_norm
    }

    /// P(X > x).
    pub fn sf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        if x >= 1.0 {
            return Ok(0.0);
        }
        checked_beta_reg(self.beta, self.alpha, 1.0 - x)
            .map_err(|e| Error::Numeric(format!("incomplete beta failed: {e}")))
    }

    /// Conjugate update with observed stats.
    pub fn update(&self, stats: &CandidateStats) -> BetaPosterior {
        BetaPosterior {
            alpha: self.alpha + stats.conversions as f64,
            beta: self.beta + (stats.impressions - stats.conversions) as f64,
        }
    }
}

/// Even split of `total` over `rows`; the first `total % rows` rows get one
/// extra impression.
pub fn allocate_taguchi(total: u64, rows: usize) -> Result<Vec<u64>> {
    if rows == 0 {
        return Err(Error::InsufficientTraffic { total, required: 0 });
    }
    if total < rows as u64 {
        return Err(Error::InsufficientTraffic {
            total,
            required: rows as u64,
        });
    }
    Ok(split_evenly(total, rows))
}

/// Splits `total` evenly over generations, then each generation's share over
/// its slots, remainders going to the earliest entries.
pub fn allocate_evolution(total: u64, generations: usize, slots: usize) -> Result<Vec<Vec<u64>>> {
    let required = (generations as u64).saturating_mul(slots as u64);
    if generations == 0 || slots == 0 || total < required {
        return Err(Error::InsufficientTraffic { total, required });
    }
    Ok(split_evenly(total, generations)
        .into_iter()
        .map(|g| split_evenly(g, slots))
        .collect())
}

fn split_evenly(total: u64, parts: usize) -> Vec<u64> {
    let n = parts as u64;
    let (base, extra) = (total / n, total % n);
    (0..n).map(|i| base + u64::from(i < extra)).collect()
}

/// Draws Binomial(impressions, true_cr).
pub fn simulate_conversions(true_cr: f64, impressions: u64, rng: &mut impl Rng) -> u64 {
    let p = true_cr.clamp(0.0, 1.0);
    if impressions == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return impressions;
    }
    Binomial::new(impressions, p)
        .expect("p is in (0, 1)")
        .sample(rng)
}

/// Beta prior centred on the pooled conversion rate of all tested
/// candidates, with `strength` pseudo-observations. A pooled rate of exactly
/// 0 or 1 is replaced by `(conversions + 1) / (impressions + 2)`.
pub fn global_prior<'a>(
    stats: impl IntoIterator<Item = &'a CandidateStats>,
    strength: f64,
) -> Result<BetaPosterior> {
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::Config(format!(
            "prior strength {strength} must be positive"
        )));
    }
    let pooled: CandidateStats = stats.into_iter().copied().sum();
    if pooled.impressions == 0 {
        return Err(Error::NoImpressions);
    }
    let (x, n) = (pooled.conversions as f64, pooled.impressions as f64);
    let mean = if pooled.conversions == 0 || pooled.conversions == pooled.impressions {
        (x + 1.0) / (n + 2.0)
    } else {
        x / n
    };
    BetaPosterior::new(mean * strength, (1.0 - mean) * strength)
}

pub fn posterior(stats: &CandidateStats, prior: &BetaPosterior) -> BetaPosterior {
    prior.update(stats)
}

/// P(X > Y) for independent X ~ `cand`, Y ~ `control`, i.e.
/// `∫ f_Y(y) · P(X > y) dy`, to within [`PBC_TOLERANCE`].
pub fn prob_beats_control(cand: &BetaPosterior, control: &BetaPosterior) -> Result<f64> {
    let ln_norm = ln_beta(control.alpha, control.beta);
    let mut failure = None;
    let integrand = |y: f64| -> f64 {
        let density = control.ln_pdf(y, ln_norm).exp();
        if density == 0.0 {
            return 0.0;
        }
        match cand.sf(y) {
            Ok(tail) => density * tail,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let breaks = breakpoints(&[cand, control]);
    let value = quad::integrate(integrand, &breaks, PBC_TOLERANCE * 1e-3, 20_000);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(value?.clamp(0.0, 1.0))
}

/// Partition of [0, 1] concentrated around each distribution's bulk, so that
/// sharply peaked posteriors are not missed by the initial quadrature rule.
fn breakpoints(dists: &[&BetaPosterior]) -> Vec<f64> {
    const OFFSETS: [f64; 12] = [
        0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0,
    ];
    let mut pts = vec![0.0, 1.0];
    for d in dists {
        let (m, s) = (d.mean(), d.std_dev());
        for k in OFFSETS {
            for x in [m - k * s, m + k * s] {
                if x > 0.0 && x < 1.0 {
                    pts.push(x);
                }
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    pts
}

/// Mean plus 2.5th and 97.5th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

pub fn aggregate_runs(values: &[f64]) -> Result<Interval> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(Interval {
        mean,
        lo: percentile(&sorted, 0.025),
        hi: percentile(&sorted, 0.975),
    })
}

/// Linear interpolation between order statistics at rank `q·(n−1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

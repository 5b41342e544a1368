//! Monte-Carlo check of the large-deviation rate for a linear event.
//!
//! The event is the half-space `mean(a) >= target` when the target lies above
//! the prior mean and `mean(a) <= target` otherwise. Trials are split into a
//! fixed number of batches, each with its own ChaCha8 stream, so results do
//! not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_partition, maxent_linear, LinearConstraint};
use crate::error::{Error, Result};
use crate::simplex::Distribution;

const BATCHES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Plain sampling from the prior.
    Direct,
    /// Importance sampling from the maxent projection, reweighted by the
    /// likelihood ratio. Sees events far too rare for direct sampling.
    Tilted,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "tilted" => Ok(Self::Tilted),
            other => Err(Error::Parse(format!("unknown estimator {other:?} (direct|tilted)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanovPoint {
    pub n: usize,
    /// Trials landing in the event.
    pub hits: u64,
    pub p_hat: f64,
    /// `-ln(p_hat) / n`; infinite when nothing was hit.
    #[serde(with = "crate::serde_ext")]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanovReport {
    pub estimator: Estimator,
    pub trials: u64,
    pub seed: u64,
    pub points: Vec<SanovPoint>,
    /// Least-squares slope of `-ln p_hat` against `n` over the points with
    /// hits (or `-ln p_hat / n` when only one such point exists).
    #[serde(with = "crate::serde_ext")]
    pub fitted_rate: f64,
    /// `K(projection||prior)` for the boundary of the event.
    pub theoretical_rate: f64,
    #[serde(with = "crate::serde_ext")]
    pub relative_error: f64,
    /// Sample sizes where no trial hit the event.
    pub zero_hit_n: Vec<usize>,
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cdf_of(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Estimates `P(event)` for each `n` and fits the exponential rate.
pub fn sanov_mc_check(
    fm: &Distribution,
    c: &LinearConstraint,
    n_values: &[usize],
    trials: u64,
    seed: u64,
    estimator: Estimator,
) -> Result<SanovReport> {
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::domain("sample sizes must be positive"));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    Error::check_len(fm.len(), c.coeffs().len())?;
    let a = c.coeffs();
    let target = c.target();
    let prior_mean = fm.mean_of(a)?;
    let upper = target >= prior_mean;
    let projection = maxent_linear(fm, c, 1e-13)?;
    let theoretical_rate = projection.divergence;
    let theta = projection.multipliers[0];
    if estimator == Estimator::Tilted && !theta.is_finite() {
        return Err(Error::Degenerate("event sits on the edge of the coefficient range; use direct sampling".into()));
    }
    let log_z = log_partition(fm.probs(), |j| theta * a[j]);
    let sampling = match estimator {
        Estimator::Direct => fm.probs().to_vec(),
        Estimator::Tilted => projection.projected.probs().to_vec(),
    };
    let cdf = cdf_of(&sampling);

    let mut points = Vec::with_capacity(n_values.len());
    for (ni, &n) in n_values.iter().enumerate() {
        let threshold = target * n as f64;
        let slack = 1e-9 * (n as f64) * a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        let per_batch = |b: u64| -> (u64, f64) {
            let count = trials / BATCHES + u64::from(b < trials % BATCHES);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((ni as u64) << 32) | b);
            let mut hits = 0;
            let mut weight = 0.0;
            for _ in 0..count {
                let s: f64 = (0..n).map(|_| a[sample_index(&cdf, rng.gen::<f64>())]).sum();
                let hit = if upper { s >= threshold - slack } else { s <= threshold + slack };
                if hit {
                    hits += 1;
                    if estimator == Estimator::Tilted {
                        weight += (n as f64 * log_z - theta * s).exp();
                    }
                }
            }
            (hits, weight)
        };
        let batches: Vec<(u64, f64)> = (0..BATCHES).into_par_iter().map(per_batch).collect();
        let hits: u64 = batches.iter().map(|b| b.0).sum();
        let p_hat = match estimator {
            Estimator::Direct => hits as f64 / trials as f64,
            Estimator::Tilted => batches.iter().map(|b| b.1).sum::<f64>() / trials as f64,
        };
        let rate = if p_hat > 0.0 { -p_hat.ln() / n as f64 } else { f64::INFINITY };
        points.push(SanovPoint { n, hits, p_hat, rate });
    }

    let usable: Vec<&SanovPoint> = points.iter().filter(|p| p.p_hat > 0.0).collect();
    let zero_hit_n = points.iter().filter(|p| p.p_hat <= 0.0).map(|p| p.n).collect();
    let fitted_rate = match usable.len() {
        0 => f64::NAN,
        1 => usable[0].rate,
        k => {
            let xs: Vec<f64> = usable.iter().map(|p| p.n as f64).collect();
            let ys: Vec<f64> = usable.iter().map(|p| -p.p_hat.ln()).collect();
            let mx = xs.iter().sum::<f64>() / k as f64;
            let my = ys.iter().sum::<f64>() / k as f64;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            if sxx > 0.0 { sxy / sxx } else { usable[0].rate }
        }
    };
    let relative_error = (fitted_rate - theoretical_rate).abs() / theoretical_rate;
    Ok(SanovReport {
        estimator,
        trials,
        seed,
        points,
        fitted_rate,
        theoretical_rate,
        relative_error,
        zero_hit_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> (Distribution, LinearConstraint) {
        (Distribution::uniform(2).unwrap(), LinearConstraint::new(vec![0.0, 1.0], 0.7).unwrap())
    }

    // exact binomial tail P(heads >= k) for a fair coin
    fn tail(n: u64, k: u64) -> f64 {
        let ln_choose = |n: u64, r: u64| {
            crate::special::ln_gamma((n + 1) as f64)
                - crate::special::ln_gamma((r + 1) as f64)
                - crate::special::ln_gamma((n - r + 1) as f64)
        };
        (k..=n).map(|r| (ln_choose(n, r) - n as f64 * 2f64.ln()).exp()).sum()
    }

    #[test]
    fn reproducible_for_a_seed() {
        let (fm, c) = coin();
        let a = sanov_mc_check(&fm, &c, &[20, 40], 5000, 7, Estimator::Direct).unwrap();
        let b = sanov_mc_check(&fm, &c, &[20, 40], 5000, 7, Estimator::Direct).unwrap();
        assert_eq!(a, b);
        let other = sanov_mc_check(&fm, &c, &[20, 40], 5000, 8, Estimator::Direct).unwrap();
        assert_ne!(a.points[0].hits, other.points[0].hits);
    }

    #[test]
    fn tilted_matches_exact_tail() {
        let (fm, c) = coin();
        let r = sanov_mc_check(&fm, &c, &[50, 200], 20000, 1, Estimator::Tilted).unwrap();
        for p in &r.points {
            let exact = tail(p.n as u64, (7 * p.n as u64).div_ceil(10));
            assert!((p.p_hat / exact - 1.0).abs() < 0.05, "n={} {} vs {}", p.n, p.p_hat, exact);
        }
    }

    #[test]
    fn direct_matches_exact_tail() {
        let (fm, c) = coin();
        let r = sanov_mc_check(&fm, &c, &[20], 100_000, 3, Estimator::Direct).unwrap();
        let exact = tail(20, 14);
        assert!((r.points[0].p_hat - exact).abs() < 4.0 * (exact / 1e5).sqrt());
    }

    #[test]
    fn lower_side_event() {
        let fm = Distribution::uniform(2).unwrap();
        let c = LinearConstraint::new(vec![0.0, 1.0], 0.3).unwrap();
        let r = sanov_mc_check(&fm, &c, &[50], 20000, 1, Estimator::Tilted).unwrap();
        assert!((r.points[0].p_hat / tail(50, 35) - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_hits_flagged() {
        let (fm, c) = coin();
        let r = sanov_mc_check(&fm, &c, &[10, 400], 1000, 1, Estimator::Direct).unwrap();
        assert_eq!(r.zero_hit_n, vec![400]);
        assert!(r.fitted_rate.is_finite());
    }
}

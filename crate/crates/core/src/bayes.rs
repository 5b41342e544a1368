//! Bayesian competition between simple hypotheses and Dirichlet updating.
//!
//! With `n` observations summarized by `fD`, hypothesis `g^a` has posterior
//! weight proportional to `P(g^a) exp(-n K(fD||g^a))`. The rate expression is
//! normalized exactly rather than treated as an asymptotic equivalence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{kl_of, Distribution};

/// Competing simple models with strictly positive prior weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HypothesisEntry>", into = "Vec<HypothesisEntry>")]
pub struct HypothesisSet {
    models: Vec<Distribution>,
    priors: Distribution,
}

/// One hypothesis as stored on disk: `{prior, probs}`. Priors are normalized
/// across the set on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub prior: f64,
    pub probs: Vec<f64>,
}

impl TryFrom<Vec<HypothesisEntry>> for HypothesisSet {
    type Error = Error;

    fn try_from(entries: Vec<HypothesisEntry>) -> Result<Self> {
        let priors = Distribution::from_weights(entries.iter().map(|e| e.prior).collect())?;
        let models = entries.into_iter().map(|e| Distribution::new(e.probs)).collect::<Result<_>>()?;
        HypothesisSet::new(models, priors)
    }
}

impl From<HypothesisSet> for Vec<HypothesisEntry> {
    fn from(h: HypothesisSet) -> Self {
        h.models
            .into_iter()
            .zip(h.priors.probs())
            .map(|(m, &prior)| HypothesisEntry { prior, probs: m.into_vec() })
            .collect()
    }
}

impl HypothesisSet {
    pub fn new(models: Vec<Distribution>, priors: Distribution) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::domain("no hypotheses"));
        }
        Error::check_len(models.len(), priors.len())?;
        let m = models[0].len();
        for g in &models {
            Error::check_len(m, g.len())?;
        }
        if !priors.is_strictly_positive() {
            return Err(Error::domain("every hypothesis needs positive prior weight"));
        }
        Ok(Self { models, priors })
    }

    /// Equal prior weight on each model.
    pub fn uniform(models: Vec<Distribution>) -> Result<Self> {
        let priors = Distribution::uniform(models.len())?;
        Self::new(models, priors)
    }

    pub fn models(&self) -> &[Distribution] {
        &self.models
    }

    pub fn priors(&self) -> &Distribution {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    fn divergences(&self, fd: &Distribution) -> Result<Vec<f64>> {
        Error::check_len(self.models[0].len(), fd.len())?;
        Ok(self.models.iter().map(|g| kl_of(fd.probs(), g.probs())).collect())
    }
}

/// Posterior over hypotheses after `n` observations with empirical
/// distribution `fD`. Models that cannot produce the data get weight 0.
pub fn posterior_over_hypotheses(h: &HypothesisSet, fd: &Distribution, n: u64) -> Result<Distribution> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let ks = h.divergences(fd)?;
    if ks.iter().all(|k| k.is_infinite()) {
        return Err(Error::Infeasible("every hypothesis has infinite divergence from the data".into()));
    }
    let logs: Vec<f64> = ks
        .iter()
        .zip(h.priors.probs())
        .map(|(&k, &p)| if k.is_finite() { p.ln() - n as f64 * k } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Distribution::from_weights(logs.iter().map(|l| (l - max).exp()).collect())
}

/// `K(fD||g^a) - ln P(g^a) / n` per hypothesis; smaller is better.
pub fn penalized_score(h: &HypothesisSet, fd: &Distribution, n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let ks = h.divergences(fd)?;
    Ok(ks.iter().zip(h.priors.probs()).map(|(k, p)| k - p.ln() / n as f64).collect())
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin(xs: &[f64]) -> Option<usize> {
    xs.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    xs.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Dirichlet prior with concentration `alpha = sum alpha_j` and prior
/// guess `pi_j = alpha_j / alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;

    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        DirichletParams::new(alpha)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(d: DirichletParams) -> Self {
        d.alpha
    }
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::domain("no Dirichlet parameters"));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::domain("Dirichlet parameters must be positive and finite"));
        }
        Ok(Self { alpha })
    }

    /// `alpha_j = alpha * pi_j`.
    pub fn from_guess(pi: &Distribution, alpha: f64) -> Result<Self> {
        Self::new(pi.probs().iter().map(|p| p * alpha).collect())
    }

    pub fn alpha_vec(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn pi(&self) -> Distribution {
        Distribution::from_weights(self.alpha.clone()).expect("positive parameters")
    }
}

/// Posterior mean `lambda pi + (1 - lambda) fD` with `lambda = alpha / (alpha + n)`.
pub fn dirichlet_posterior_mean(d: &DirichletParams, counts: &[u64]) -> Result<Distribution> {
    Error::check_len(d.alpha.len(), counts.len())?;
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Ok(d.pi());
    }
    let alpha = d.alpha_total();
    let lambda = alpha / (alpha + n as f64);
    let pi = d.pi();
    Distribution::from_weights(
        pi.probs()
            .iter()
            .zip(counts)
            .map(|(p, &c)| lambda * p + (1.0 - lambda) * c as f64 / n as f64)
            .collect(),
    )
}

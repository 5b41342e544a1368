//! Alternating KL minimization and its EM specialization for mixtures of
//! fixed component distributions.
//!
//! For observed group frequencies `F` and components `h^q`, EM looks for the
//! weights `rho` minimizing `K(F || sum_q rho_q h^q)`. The family of mixtures
//! is convex, so the minimizer is unique in `G` (not necessarily in `rho`
//! when components are linearly dependent).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{kl_of, Distribution};

const WEIGHT_FLOOR: f64 = 1e-15;
const DESCENT_SLACK: f64 = 1e-12;

/// Observed group distribution with fixed mixture components over the same groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem")]
pub struct MixtureProblem {
    components: Vec<Distribution>,
    observed: Distribution,
}

#[derive(Deserialize)]
struct RawProblem {
    components: Vec<Vec<f64>>,
    observed: Vec<f64>,
}

impl TryFrom<RawProblem> for MixtureProblem {
    type Error = Error;

    fn try_from(r: RawProblem) -> Result<Self> {
        let components = r.components.into_iter().map(Distribution::new).collect::<Result<_>>()?;
        MixtureProblem::new(components, Distribution::new(r.observed)?)
    }
}

impl MixtureProblem {
    pub fn new(components: Vec<Distribution>, observed: Distribution) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("mixture with no components"));
        }
        for h in &components {
            Error::check_len(observed.len(), h.len())?;
        }
        for j in observed.support() {
            if components.iter().all(|h| h.probs()[j] == 0.0) {
                return Err(Error::Infeasible(format!("group {j} is observed but no component can produce it")));
            }
        }
        Ok(Self { components, observed })
    }

    pub fn components(&self) -> &[Distribution] {
        &self.components
    }

    pub fn observed(&self) -> &Distribution {
        &self.observed
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn num_groups(&self) -> usize {
        self.observed.len()
    }

    fn predict_raw(&self, rho: &[f64]) -> Vec<f64> {
        (0..self.num_groups())
            .map(|j| self.components.iter().zip(rho).map(|(h, r)| r * h.probs()[j]).sum())
            .collect()
    }
}

/// `G_J = sum_q rho_q h^q_J`.
pub fn mixture_predict(p: &MixtureProblem, rho: &Distribution) -> Result<Distribution> {
    Error::check_len(p.num_components(), rho.len())?;
    Distribution::from_weights(p.predict_raw(rho.probs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    pub rho: Distribution,
    /// `K(F||G)` at the start and after every update.
    #[serde(with = "crate::serde_ext::vec")]
    pub divergence_path: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn em_step(p: &MixtureProblem, rho: &[f64]) -> Vec<f64> {
    let g = p.predict_raw(rho);
    let f = p.observed.probs();
    let mut next: Vec<f64> = p
        .components
        .iter()
        .zip(rho)
        .map(|(h, &r)| {
            let s: f64 = (0..f.len()).filter(|&j| f[j] > 0.0).map(|j| h.probs()[j] * f[j] / g[j]).sum();
            (r * s).max(WEIGHT_FLOOR)
        })
        .collect();
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|r| *r /= total);
    next
}

/// Multiplicative EM updates `rho_q <- rho_q sum_J h^q_J F_J / G_J` until
/// no weight moves by `tol` or more. Hitting `max_iter` is reported through
/// `converged`, not as an error.
pub fn em_fit(p: &MixtureProblem, rho0: &Distribution, tol: f64, max_iter: usize) -> Result<EmTrace> {
    Error::check_len(p.num_components(), rho0.len())?;
    if !rho0.is_strictly_positive() {
        return Err(Error::domain("initial weights must be strictly positive"));
    }
    let f = p.observed.probs();
    let mut rho = rho0.probs().to_vec();
    let mut path = vec![kl_of(f, &p.predict_raw(&rho))];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = em_step(p, &rho);
        iterations += 1;
        let moved = next.iter().zip(&rho).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        rho = next;
        path.push(kl_of(f, &p.predict_raw(&rho)));
        if moved < tol {
            converged = true;
            break;
        }
    }
    Ok(EmTrace { rho: Distribution::from_weights(rho)?, divergence_path: path, iterations, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternatingTrace {
    pub f: Distribution,
    pub g: Distribution,
    /// `K(f^(n)||g^(n))` after each round.
    #[serde(with = "crate::serde_ext::vec")]
    pub divergence_path: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates `f <- project_f(g)` and `g <- project_g(f)` from `g0`.
///
/// `project_f(g)` must return the minimizer of `K(.||g)` over the data family
/// and `project_g(f)` the minimizer of `K(f||.)` over the model family. A
/// half-step that raises the objective by more than `1e-12` is reported as a
/// broken projection. Stops once `g` moves by less than `tol` in max norm.
pub fn alternating_minimize<PF, PG>(
    project_f: PF,
    project_g: PG,
    g0: &Distribution,
    tol: f64,
    max_iter: usize,
) -> Result<AlternatingTrace>
where
    PF: Fn(&Distribution) -> Result<Distribution>,
    PG: Fn(&Distribution) -> Result<Distribution>,
{
    let mut g = g0.clone();
    let mut f = project_f(&g)?;
    Error::check_len(g.len(), f.len())?;
    let mut objective = kl_of(f.probs(), g.probs());
    let mut path = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let g_next = project_g(&f)?;
        Error::check_len(f.len(), g_next.len())?;
        let half = kl_of(f.probs(), g_next.probs());
        check_descent(objective, half, "model-side projection")?;
        let f_next = project_f(&g_next)?;
        Error::check_len(g_next.len(), f_next.len())?;
        let full = kl_of(f_next.probs(), g_next.probs());
        check_descent(half, full, "data-side projection")?;
        let moved = g_next.max_abs_diff(&g);
        g = g_next;
        f = f_next;
        objective = full;
        path.push(objective);
        if moved < tol {
            converged = true;
            break;
        }
    }
    Ok(AlternatingTrace { f, g, divergence_path: path, iterations, converged })
}

fn check_descent(before: f64, after: f64, which: &str) -> Result<()> {
    if after > before + DESCENT_SLACK {
        return Err(Error::domain(format!("{which} raised the divergence from {before} to {after}")));
    }
    Ok(())
}

/// EM written as alternating minimization on the joint space of
/// (group, component) pairs, indexed `J * c + q`. Returns the weights after
/// every round, which coincide with the iterates of [`em_fit`] up to rounding.
pub fn em_as_alternating(p: &MixtureProblem, rho0: &Distribution, tol: f64, max_iter: usize) -> Result<(AlternatingTrace, Vec<Distribution>)> {
    Error::check_len(p.num_components(), rho0.len())?;
    let c = p.num_components();
    let m = p.num_groups();
    let joint = |rho: &[f64]| -> Result<Distribution> {
        Distribution::from_weights((0..m * c).map(|idx| rho[idx % c] * p.components[idx % c].probs()[idx / c]).collect())
    };
    let weights_of = |g: &Distribution| -> Vec<f64> {
        (0..c).map(|q| (0..m).map(|j| g.probs()[j * c + q]).sum()).collect()
    };
    let obs = p.observed.probs();
    // E-step: rescale each group of g to the observed group mass
    let project_f = |g: &Distribution| -> Result<Distribution> {
        let gp = g.probs();
        Distribution::from_weights(
            (0..m * c)
                .map(|idx| {
                    let j = idx / c;
                    let gj: f64 = gp[j * c..(j + 1) * c].iter().sum();
                    if gj > 0.0 { gp[idx] * obs[j] / gj } else { 0.0 }
                })
                .collect(),
        )
    };
    let history = std::cell::RefCell::new(Vec::new());
    // M-step: weights are the component marginals of f
    let project_g = |f: &Distribution| -> Result<Distribution> {
        let rho = weights_of(f);
        history.borrow_mut().push(Distribution::from_weights(rho.clone())?);
        joint(&rho)
    };
    let trace = alternating_minimize(project_f, project_g, &joint(rho0.probs())?, tol, max_iter)?;
    Ok((trace, history.into_inner()))
}

//! Maximum-entropy projections: the distribution closest (in `K(.||prior)`)
//! to a prior among those meeting partial information about the data.
//!
//! Under linear constraints the solution has exponential form
//! `f_j = prior_j exp(sum_a lambda_a coeff_a_j) / Z(lambda)`. A single
//! constraint is solved by monotone root finding on the multiplier, several
//! by Newton's method on the convex dual.

mod sanov;

pub use sanov::{sanov_mc_check, Estimator, SanovPoint, SanovReport};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::simplex::{kl_of, Distribution, Partition, SquareTable};

/// Constraint `sum_j f_j coeffs_j = target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraint")]
pub struct LinearConstraint {
    coeffs: Vec<f64>,
    target: f64,
}

#[derive(Deserialize)]
struct RawConstraint {
    coeffs: Vec<f64>,
    target: f64,
}

impl TryFrom<RawConstraint> for LinearConstraint {
    type Error = Error;

    fn try_from(r: RawConstraint) -> Result<Self> {
        LinearConstraint::new(r.coeffs, r.target)
    }
}

impl LinearConstraint {
    /// Requires `min coeffs <= target <= max coeffs`.
    pub fn new(coeffs: Vec<f64>, target: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("constraint with no coefficients"));
        }
        if coeffs.iter().any(|a| !a.is_finite()) || !target.is_finite() {
            return Err(Error::domain("constraint values must be finite"));
        }
        let (lo, hi) = min_max(coeffs.iter().copied());
        if target < lo || target > hi {
            return Err(Error::Infeasible(format!("target {target} outside [{lo}, {hi}]")));
        }
        Ok(Self { coeffs, target })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// `sum_j f_j coeffs_j - target`.
    pub fn residual(&self, f: &Distribution) -> Result<f64> {
        Ok(f.mean_of(&self.coeffs)? - self.target)
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// A maximum-entropy projection.
///
/// Multipliers may be `+inf`/`-inf` when the target sits on the boundary of
/// the feasible range and the solution concentrates on extremal categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxentResult<T = Distribution> {
    pub projected: T,
    #[serde(with = "crate::serde_ext::vec")]
    pub multipliers: Vec<f64>,
    /// `K(projected||prior)`.
    #[serde(with = "crate::serde_ext")]
    pub divergence: f64,
    pub iterations: usize,
    pub converged: bool,
}

// Tilted weights prior_j exp(theta . a_j) normalized, via log-sum-exp.
fn tilt(prior: &[f64], exponent: impl Fn(usize) -> f64) -> Vec<f64> {
    let logs: Vec<f64> = prior
        .iter()
        .enumerate()
        .map(|(j, &p)| if p > 0.0 { p.ln() + exponent(j) } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn log_partition(prior: &[f64], exponent: impl Fn(usize) -> f64) -> f64 {
    let logs: Vec<f64> = prior
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(j, &p)| p.ln() + exponent(j))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

fn dot(w: &[f64], a: &[f64]) -> f64 {
    w.iter().zip(a).filter(|(p, _)| **p > 0.0).map(|(p, x)| p * x).sum()
}

/// Mean of `coeffs` under the prior tilted by `theta`.
pub fn tilted_mean(prior: &Distribution, coeffs: &[f64], theta: f64) -> Result<f64> {
    Error::check_len(prior.len(), coeffs.len())?;
    Ok(dot(&tilt(prior.probs(), |j| theta * coeffs[j]), coeffs))
}

/// Solves one constraint against a (possibly unnormalized positive) prior.
/// Returns `(weights, theta, iterations, residual)`.
fn solve_single(prior: &[f64], coeffs: &[f64], target: f64, tol: f64) -> Result<(Vec<f64>, f64, usize, f64)> {
    let support: Vec<usize> = (0..prior.len()).filter(|&j| prior[j] > 0.0).collect();
    let (lo, hi) = min_max(support.iter().map(|&j| coeffs[j]));
    if target < lo - tol || target > hi + tol {
        return Err(Error::Infeasible(format!(
            "target {target} outside [{lo}, {hi}] attainable on the prior's support"
        )));
    }
    let total: f64 = prior.iter().sum();
    let base: Vec<f64> = prior.iter().map(|p| p / total).collect();
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        if (target - lo).abs() <= tol {
            return Ok((base, 0.0, 0, 0.0));
        }
        return Err(Error::Degenerate(format!(
            "coefficients are constant ({lo}) on the prior's support but the target is {target}"
        )));
    }
    let extremal = |value: f64| -> Vec<f64> {
        let w: Vec<f64> = base
            .iter()
            .zip(coeffs)
            .map(|(&p, &a)| if p > 0.0 && a == value { p } else { 0.0 })
            .collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    if target >= hi {
        return Ok((extremal(hi), f64::INFINITY, 0, 0.0));
    }
    if target <= lo {
        return Ok((extremal(lo), f64::NEG_INFINITY, 0, 0.0));
    }
    let mean_at = |theta: f64| dot(&tilt(&base, |j| theta * coeffs[j]), coeffs);
    let gap = |theta: f64| mean_at(theta) - target;
    let g0 = gap(0.0);
    if g0.abs() <= tol {
        return Ok((base, 0.0, 0, g0));
    }
    // expand a bracket on the side where the root lies
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let (mut near, mut far) = (0.0, dir);
    let mut expansions = 0;
    while gap(far) * dir < 0.0 {
        near = far;
        far *= 2.0;
        expansions += 1;
        if far.abs() > 1e15 {
            let w = tilt(&base, |j| near * coeffs[j]);
            let r = dot(&w, coeffs) - target;
            return Ok((w, near, expansions, r));
        }
    }
    let (a, b) = if dir > 0.0 { (near, far) } else { (far, near) };
    let (theta, iters) = brent(gap, a, b, tol.clamp(0.0, 1e-12), 0.0, 500)?;
    let w = tilt(&base, |j| theta * coeffs[j]);
    let r = dot(&w, coeffs) - target;
    Ok((w, theta, expansions + iters, r))
}

/// Projection of `fm` onto `{f : sum_j f_j a_j = target}`.
///
/// The multiplier `theta` solves `abar(theta) = target`, where `abar` is
/// strictly increasing whenever the coefficients vary on the prior's support.
/// Targets at the extremes of the coefficient range return the limit
/// distribution with `theta = +inf` or `-inf`.
pub fn maxent_linear(fm: &Distribution, c: &LinearConstraint, tol: f64) -> Result<MaxentResult> {
    Error::check_len(fm.len(), c.coeffs.len())?;
    let (w, theta, iterations, residual) = solve_single(fm.probs(), &c.coeffs, c.target, tol)?;
    let projected = Distribution::from_weights(w)?;
    let divergence = kl_of(projected.probs(), fm.probs());
    Ok(MaxentResult {
        projected,
        multipliers: vec![theta],
        divergence,
        iterations,
        converged: residual.abs() <= tol,
    })
}

/// Projection of `fm` onto the intersection of several linear constraints.
///
/// Minimizes the convex dual `ln Z(lambda) - lambda . targets` by damped Newton
/// steps with backtracking. The Hessian (the covariance of the coefficients)
/// gets a small ridge so redundant constraints do not stall the solve; if a
/// Newton direction fails to descend, one sweep of exact coordinate updates is
/// taken instead. Unbounded multipliers signal infeasible constraints.
pub fn maxent_multi(fm: &Distribution, cs: &[LinearConstraint], tol: f64, max_iter: usize) -> Result<MaxentResult> {
    if cs.is_empty() {
        return Err(Error::domain("no constraints given"));
    }
    for c in cs {
        Error::check_len(fm.len(), c.coeffs.len())?;
        let (lo, hi) = min_max(fm.support().into_iter().map(|j| c.coeffs[j]));
        if c.target < lo - tol || c.target > hi + tol {
            return Err(Error::Infeasible(format!(
                "target {} outside [{lo}, {hi}] attainable on the prior's support",
                c.target
            )));
        }
    }
    let q = cs.len();
    let prior = fm.probs();
    let exponent = |lambda: &[f64], j: usize| -> f64 { lambda.iter().zip(cs).map(|(l, c)| l * c.coeffs[j]).sum() };
    let dual = |lambda: &[f64]| -> f64 {
        log_partition(prior, |j| exponent(lambda, j)) - lambda.iter().zip(cs).map(|(l, c)| l * c.target).sum::<f64>()
    };
    let mut lambda = vec![0.0; q];
    let mut iterations = 0;
    loop {
        let w = tilt(prior, |j| exponent(&lambda, j));
        let means: Vec<f64> = cs.iter().map(|c| dot(&w, &c.coeffs)).collect();
        let grad: Vec<f64> = means.iter().zip(cs).map(|(m, c)| m - c.target).collect();
        let worst = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        if worst <= tol || iterations >= max_iter {
            let projected = Distribution::from_weights(w)?;
            let divergence = kl_of(projected.probs(), prior);
            if worst > tol {
                return Err(Error::NonConvergence {
                    iterations,
                    context: format!("maxent dual solve, constraint residual {worst:e}"),
                });
            }
            return Ok(MaxentResult { projected, multipliers: lambda, divergence, iterations, converged: true });
        }
        iterations += 1;

        let mut hess = DMatrix::<f64>::zeros(q, q);
        for a in 0..q {
            for b in a..q {
                let cov: f64 = w
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| p * (cs[a].coeffs[j] - means[a]) * (cs[b].coeffs[j] - means[b]))
                    .sum();
                hess[(a, b)] = cov;
                hess[(b, a)] = cov;
            }
        }
        let direction = newton_direction(&hess, &grad);
        let current = dual(&lambda);
        let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut step = 1.0;
        let mut accepted = false;
        if slope < 0.0 {
            while step > 1e-12 {
                let trial: Vec<f64> = lambda.iter().zip(&direction).map(|(l, d)| l + step * d).collect();
                if dual(&trial) <= current + 1e-4 * step * slope {
                    lambda = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !accepted {
            // coordinate-wise exact updates
            for a in 0..q {
                let others: Vec<f64> = prior
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        if p > 0.0 {
                            let e: f64 = (0..q).filter(|&b| b != a).map(|b| lambda[b] * cs[b].coeffs[j]).sum();
                            p.ln() + e
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                let max = others.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tilted: Vec<f64> = others.iter().map(|l| (l - max).exp()).collect();
                let (_, theta, _, _) = solve_single(&tilted, &cs[a].coeffs, cs[a].target, tol)?;
                if !theta.is_finite() {
                    return Err(Error::Infeasible("constraints force a multiplier to infinity".into()));
                }
                lambda[a] = theta;
            }
        }
        if lambda.iter().any(|l| !l.is_finite() || l.abs() > 1e8) {
            return Err(Error::Infeasible("dual multipliers diverge; constraints are inconsistent".into()));
        }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let q = grad.len();
    let g = DVector::from_column_slice(grad);
    let scale = (0..q).map(|i| hess[(i, i)]).sum::<f64>().max(1e-300);
    let mut ridge = 1e-12 * scale;
    for _ in 0..30 {
        let h = hess + DMatrix::<f64>::identity(q, q) * ridge;
        if let Some(ch) = h.cholesky() {
            return (-ch.solve(&g)).iter().copied().collect();
        }
        ridge *= 10.0;
    }
    grad.iter().map(|g| -g).collect()
}

/// Boltzmann-Gibbs distribution `exp(-beta E_j) / Z(beta)`.
pub fn boltzmann_gibbs(energies: &[f64], beta: f64) -> Result<Distribution> {
    if energies.is_empty() {
        return Err(Error::domain("no energy levels"));
    }
    if energies.iter().any(|e| !e.is_finite()) || !beta.is_finite() {
        return Err(Error::domain("energies and beta must be finite"));
    }
    let logs: Vec<f64> = energies.iter().map(|e| -beta * e).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Distribution::from_weights(logs.iter().map(|l| (l - max).exp()).collect())
}

/// Projection when category `j0` is known never to occur: the prior
/// conditioned on the other categories. `K = -ln(1 - fm_j0)`.
pub fn maxent_unobserved(fm: &Distribution, j0: usize) -> Result<MaxentResult> {
    if j0 >= fm.len() {
        return Err(Error::domain(format!("category {j0} out of range 0..{}", fm.len())));
    }
    let mass = fm.probs()[j0];
    if mass >= 1.0 {
        return Err(Error::Infeasible(format!("category {j0} carries all prior mass")));
    }
    let w: Vec<f64> = fm.probs().iter().enumerate().map(|(j, &p)| if j == j0 { 0.0 } else { p }).collect();
    let projected = Distribution::from_weights(w)?;
    Ok(MaxentResult {
        projected,
        multipliers: vec![f64::NEG_INFINITY],
        divergence: -(1.0 - mass).ln(),
        iterations: 0,
        converged: true,
    })
}

/// Projection onto `{f : coarse_grain(f) = FD}`: rescale each group of the
/// prior to the observed group mass. `K(result||fm) = K(FD||FM)`.
pub fn maxent_coarse(fm: &Distribution, p: &Partition, fd_groups: &Distribution) -> Result<MaxentResult> {
    Error::check_len(p.num_categories(), fm.len())?;
    Error::check_len(p.num_groups(), fd_groups.len())?;
    let fm_groups = p.aggregate(fm.probs());
    for (g, (&model, &data)) in fm_groups.iter().zip(fd_groups.probs()).enumerate() {
        if model <= 0.0 && data > 0.0 {
            return Err(Error::Infeasible(format!("group {g} has observed mass {data} but no prior mass")));
        }
    }
    let w: Vec<f64> = fm
        .probs()
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let g = p.group_of(j);
            if fm_groups[g] > 0.0 { f * fd_groups.probs()[g] / fm_groups[g] } else { 0.0 }
        })
        .collect();
    let projected = Distribution::from_weights(w)?;
    let divergence = kl_of(projected.probs(), fm.probs());
    let multipliers = fm_groups
        .iter()
        .zip(fd_groups.probs())
        .map(|(&model, &data)| if data > 0.0 { (data / model).ln() } else { f64::NEG_INFINITY })
        .collect();
    Ok(MaxentResult { projected, multipliers, divergence, iterations: 0, converged: true })
}

/// Projection onto symmetric tables: the normalized geometric mean
/// `sqrt(f_jk f_kj) / Z`.
pub fn maxent_symmetric(fm: &SquareTable) -> Result<MaxentResult<SquareTable>> {
    let m = fm.size();
    let mut w = vec![0.0; m * m];
    for j in 0..m {
        for k in 0..m {
            w[j * m + k] = (fm.get(j, k) * fm.get(k, j)).sqrt();
        }
    }
    let z: f64 = w.iter().sum();
    if z <= 0.0 {
        return Err(Error::Infeasible("no cell pair carries mass in both directions".into()));
    }
    w.iter_mut().for_each(|x| *x /= z);
    let divergence = kl_of(&w, fm.table().probs());
    Ok(MaxentResult {
        projected: SquareTable::from_probs_unchecked(m, w, fm.table()),
        multipliers: vec![],
        divergence,
        iterations: 0,
        converged: true,
    })
}

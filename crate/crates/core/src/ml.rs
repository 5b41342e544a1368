//! Maximum-likelihood projections `argmin_{g in family} K(fD||g)` onto the
//! classical families: coarse-grained specifications, independence,
//! symmetry, quasi-symmetry and three three-way log-linear models.
//!
//! Family dimensions follow the usual parameter counts so that callers can
//! form test degrees of freedom as `dim(saturated) - dim(family)`:
//!
//! | family | dimension |
//! |---|---|
//! | saturated `m1 x m2` table | `m1 m2 - 1` |
//! | independence | `m1 + m2 - 2` |
//! | symmetric `m x m` | `m(m+1)/2 - 1` |
//! | quasi-symmetric `m x m` | `m(m+1)/2 - 1 + (m - 1)` |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{entropy_of, kl_of, Distribution, JointTable, Partition, SquareTable, ThreeWayTable};

/// An ML fit together with its divergence from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub fitted: T,
    /// `K(fD||fitted)`.
    #[serde(with = "crate::serde_ext")]
    pub divergence: f64,
    pub dim_family: usize,
    /// Zero for closed-form fits.
    pub iterations: usize,
    pub converged: bool,
}

impl<T> FitResult<T> {
    fn closed_form(fitted: T, divergence: f64, dim_family: usize) -> Self {
        Self { fitted, divergence, dim_family, iterations: 0, converged: true }
    }
}

/// Fit to the family `{g : coarse_grain(g) = FM}`: rescale each group of `fd`
/// to the prescribed group mass.
///
/// `K(fD||fitted) = K(FD||FM)`.
pub fn fit_coarse_grained(fd: &Distribution, p: &Partition, fm_groups: &Distribution) -> Result<FitResult<Distribution>> {
    Error::check_len(p.num_categories(), fd.len())?;
    Error::check_len(p.num_groups(), fm_groups.len())?;
    let fd_groups = p.aggregate(fd.probs());
    for (g, (&data, &model)) in fd_groups.iter().zip(fm_groups.probs()).enumerate() {
        if data <= 0.0 && model > 0.0 {
            return Err(Error::Degenerate(format!(
                "group {g} has no observed mass but model mass {model}"
            )));
        }
    }
    let fitted: Vec<f64> = fd
        .probs()
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let g = p.group_of(j);
            if fd_groups[g] > 0.0 { f * fm_groups.probs()[g] / fd_groups[g] } else { 0.0 }
        })
        .collect();
    let fitted = Distribution::from_weights(fitted)?;
    let divergence = kl_of(fd.probs(), fitted.probs());
    Ok(FitResult::closed_form(fitted, divergence, fd.len() - p.num_groups()))
}

/// Independence fit `f_{j.} f_{.k}`; the divergence is the mutual information.
pub fn fit_independence(t: &JointTable) -> FitResult<JointTable> {
    let fitted = JointTable::product(&t.row_marginal(), &t.col_marginal()).expect("product of marginals is valid");
    let divergence = kl_of(t.probs(), fitted.probs());
    let fitted = fitted
        .with_labels(t.row_labels().map(<[String]>::to_vec), t.col_labels().map(<[String]>::to_vec))
        .expect("labels come from a table of the same shape");
    FitResult::closed_form(fitted, divergence, t.rows() + t.cols() - 2)
}

pub fn symmetric_dim(m: usize) -> usize {
    m * (m + 1) / 2 - 1
}

pub fn quasi_symmetric_dim(m: usize) -> usize {
    symmetric_dim(m) + m - 1
}

/// Symmetric fit `(f_jk + f_kj) / 2`.
pub fn fit_symmetry(t: &SquareTable) -> FitResult<SquareTable> {
    let m = t.size();
    let mut probs = vec![0.0; m * m];
    for j in 0..m {
        for k in 0..m {
            probs[j * m + k] = 0.5 * (t.get(j, k) + t.get(k, j));
        }
    }
    let divergence = kl_of(t.table().probs(), &probs);
    FitResult::closed_form(SquareTable::from_probs_unchecked(m, probs, t.table()), divergence, symmetric_dim(m))
}

/// Largest violation of the quasi-symmetry likelihood equations:
/// symmetrized sums, row margins, and column margins of `fit` against `data`.
pub fn qs_condition_violation(data: &SquareTable, fit: &SquareTable) -> f64 {
    let m = data.size();
    let mut worst = 0.0_f64;
    for j in 0..m {
        let (mut dr, mut fr, mut dc, mut fc) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..m {
            dr += data.get(j, k);
            fr += fit.get(j, k);
            dc += data.get(k, j);
            fc += fit.get(k, j);
            let s = data.get(j, k) + data.get(k, j) - fit.get(j, k) - fit.get(k, j);
            worst = worst.max(s.abs());
        }
        worst = worst.max((dr - fr).abs()).max((dc - fc).abs());
    }
    worst
}

/// Quasi-symmetric fit `a_j b_k c_jk` (with `c` symmetric) by iterative
/// proportional fitting over the three sets of likelihood equations.
///
/// Each cycle rescales rows to the observed row margins, columns to the
/// observed column margins, and each pair `{jk, kj}` to the observed
/// symmetrized sum. Every step stays inside the family. Cells with
/// `f_jk + f_kj = 0` are held at zero.
pub fn fit_quasi_symmetry(t: &SquareTable, tol: f64, max_iter: usize) -> Result<FitResult<SquareTable>> {
    let m = t.size();
    let data = t.table().probs();
    let cell = |j: usize, k: usize| j * m + k;
    let mut g: Vec<f64> = (0..m * m)
        .map(|idx| {
            let (j, k) = (idx / m, idx % m);
            if data[cell(j, k)] + data[cell(k, j)] > 0.0 { 1.0 } else { 0.0 }
        })
        .collect();
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    let row_target: Vec<f64> = (0..m).map(|j| (0..m).map(|k| data[cell(j, k)]).sum()).collect();
    let col_target: Vec<f64> = (0..m).map(|k| (0..m).map(|j| data[cell(j, k)]).sum()).collect();

    let ratio = |target: f64, current: f64| if current > 0.0 { target / current } else { 0.0 };
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        for j in 0..m {
            let s: f64 = (0..m).map(|k| g[cell(j, k)]).sum();
            let r = ratio(row_target[j], s);
            (0..m).for_each(|k| g[cell(j, k)] *= r);
        }
        for k in 0..m {
            let s: f64 = (0..m).map(|j| g[cell(j, k)]).sum();
            let r = ratio(col_target[k], s);
            (0..m).for_each(|j| g[cell(j, k)] *= r);
        }
        for j in 0..m {
            for k in j..m {
                let current = if j == k { g[cell(j, j)] } else { g[cell(j, k)] + g[cell(k, j)] };
                let target = if j == k { data[cell(j, j)] } else { data[cell(j, k)] + data[cell(k, j)] };
                let r = ratio(target, current);
                g[cell(j, k)] *= r;
                if j != k {
                    g[cell(k, j)] *= r;
                }
            }
        }
        let fit = SquareTable::from_probs_unchecked(m, g.clone(), t.table());
        violation = qs_condition_violation(t, &fit);
        if violation < tol {
            break;
        }
    }
    if violation >= tol {
        return Err(Error::NonConvergence {
            iterations,
            context: format!("quasi-symmetry IPF, condition violation {violation:e}"),
        });
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    let divergence = kl_of(data, &g);
    Ok(FitResult {
        fitted: SquareTable::from_probs_unchecked(m, g, t.table()),
        divergence,
        dim_family: quasi_symmetric_dim(m),
        iterations,
        converged: true,
    })
}

/// Three-way log-linear models on `(X, Y, Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreeWayModel {
    /// `Z` independent of `(X, Y)`: `f_ijk = a_ij b_k`.
    L,
    /// `Y` independent of `Z`: the `(Y, Z)` margin factorizes.
    M,
    /// `X` and `Z` conditionally independent given `Y`: `f_ijk = e_ij h_jk`.
    N,
}

impl ThreeWayModel {
    /// Degrees of freedom of the test of this model against the saturated table.
    pub fn df(self, dims: [usize; 3]) -> usize {
        let [i, j, k] = dims;
        match self {
            ThreeWayModel::L => (i * j - 1) * (k - 1),
            ThreeWayModel::M => (j - 1) * (k - 1),
            ThreeWayModel::N => j * (i - 1) * (k - 1),
        }
    }

    pub fn dim_family(self, dims: [usize; 3]) -> usize {
        dims.iter().product::<usize>() - 1 - self.df(dims)
    }
}

impl std::str::FromStr for ThreeWayModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(ThreeWayModel::L),
            "M" | "m" => Ok(ThreeWayModel::M),
            "N" | "n" => Ok(ThreeWayModel::N),
            other => Err(Error::Parse(format!("unknown three-way model {other:?}, expected L, M or N"))),
        }
    }
}

/// Closed-form ML fit of a three-way model.
pub fn fit_threeway(t: &ThreeWayTable, model: ThreeWayModel) -> Result<FitResult<ThreeWayTable>> {
    let dims = t.dims();
    let [d0, d1, d2] = dims;
    let xy = t.xy();
    let yz = t.yz();
    let y = t.y();
    let z = t.z();
    let mut probs = vec![0.0; t.probs().len()];
    for i in 0..d0 {
        for j in 0..d1 {
            for k in 0..d2 {
                let idx = t.index(i, j, k);
                probs[idx] = match model {
                    ThreeWayModel::L => xy.get(i, j) * z.probs()[k],
                    ThreeWayModel::M => {
                        let cond = yz.get(j, k);
                        if cond > 0.0 {
                            t.get(i, j, k) / cond * y.probs()[j] * z.probs()[k]
                        } else if y.probs()[j] * z.probs()[k] > 0.0 {
                            return Err(Error::Degenerate(format!(
                                "zero (Y,Z) margin at ({j},{k}) where Y and Z margins are positive"
                            )));
                        } else {
                            0.0
                        }
                    }
                    ThreeWayModel::N => {
                        let cond = y.probs()[j];
                        if cond > 0.0 { xy.get(i, j) * yz.get(j, k) / cond } else { 0.0 }
                    }
                };
            }
        }
    }
    let divergence = kl_of(t.probs(), &probs);
    let fitted = ThreeWayTable::from_probs_unchecked(dims, probs);
    Ok(FitResult::closed_form(fitted, divergence, model.dim_family(dims)))
}

/// The entropy identity for each model's divergence, used as an independent check.
pub fn threeway_divergence_from_entropies(t: &ThreeWayTable, model: ThreeWayModel) -> f64 {
    let h_xyz = entropy_of(t.probs());
    let h_xy = entropy_of(t.xy().probs());
    let h_yz = entropy_of(t.yz().probs());
    let h_y = entropy_of(t.y().probs());
    let h_z = entropy_of(t.z().probs());
    match model {
        ThreeWayModel::L => h_xy + h_z - h_xyz,
        ThreeWayModel::M => h_y + h_z - h_yz,
        ThreeWayModel::N => h_xy + h_yz - h_xyz - h_y,
    }
}

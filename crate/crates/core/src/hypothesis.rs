//! Chi-square tests built on `2n K`, the Neyman-Pearson geometry of two
//! simple hypotheses, and Chernoff information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml;
use crate::roots::golden_section_min;
use crate::simplex::{kl_of, relative_entropy, Distribution, JointTable};
use crate::special::{chi2_quantile, chi2_sf};

/// Slack allowed on `K(fD||fit0) - K(fD||fit1)` before a nested pair is rejected as inconsistent.
pub const NESTED_TOL: f64 = 1e-9;

/// Outcome of a chi-square test on the statistic `2n K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    #[serde(with = "crate::serde_ext")]
    pub statistic: f64,
    pub df: u64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl TestReport {
    /// Compares `statistic` against the `1 - alpha` chi-square quantile; ties reject.
    pub fn from_statistic(statistic: f64, df: u64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if df == 0 {
            return Err(Error::domain("test has zero degrees of freedom"));
        }
        if statistic.is_nan() || statistic < 0.0 {
            return Err(Error::domain(format!("test statistic must be nonnegative, got {statistic}")));
        }
        let df32 = u32::try_from(df).map_err(|_| Error::domain(format!("{df} degrees of freedom is too many")))?;
        let critical_value = chi2_quantile(1.0 - alpha, df32)?;
        let p_value = if statistic.is_infinite() { 0.0 } else { chi2_sf(statistic, df32)? };
        Ok(Self { statistic, df, critical_value, p_value, alpha, reject: statistic >= critical_value })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("significance level must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    Ok(())
}

/// Goodness of fit of the empirical `fd` to the fully specified model `fm`.
///
/// `df = m - 1`. If `fd` puts mass where `fm` has none the statistic is `+inf`
/// and the model is rejected with `p = 0`.
pub fn test_simple(fd: &Distribution, fm: &Distribution, n: u64, alpha: f64) -> Result<TestReport> {
    check_n(n)?;
    let k = relative_entropy(fd, fm)?;
    if fd.len() < 2 {
        return Err(Error::domain("a one-category distribution has no degrees of freedom"));
    }
    TestReport::from_statistic(2.0 * n as f64 * k, fd.len() as u64 - 1, alpha)
}

/// Fit of `fd` to a family, given its ML projection `fitted`.
///
/// `dim_s` is the dimension of the ambient simplex and `dim_m` that of the family.
pub fn test_composite(
    fd: &Distribution,
    fitted: &Distribution,
    dim_s: usize,
    dim_m: usize,
    n: u64,
    alpha: f64,
) -> Result<TestReport> {
    check_n(n)?;
    if dim_m >= dim_s {
        return Err(Error::Degenerate(format!(
            "family dimension {dim_m} is not below the ambient dimension {dim_s} (saturated model)"
        )));
    }
    let k = relative_entropy(fd, fitted)?;
    TestReport::from_statistic(2.0 * n as f64 * k, (dim_s - dim_m) as u64, alpha)
}

/// Independence of rows and columns of a table observed on `n` units.
pub fn test_independence(t: &JointTable, n: u64, alpha: f64) -> Result<TestReport> {
    let fit = ml::fit_independence(t);
    test_composite(&t.as_distribution(), &fit.fitted.as_distribution(), t.saturated_dim(), fit.dim_family, n, alpha)
}

/// Test of the smaller family `M0` within `M1`, given the ML fits of both.
pub fn test_nested(
    fd: &Distribution,
    fit0: &Distribution,
    fit1: &Distribution,
    df_delta: u64,
    n: u64,
    alpha: f64,
) -> Result<TestReport> {
    check_n(n)?;
    let k0 = relative_entropy(fd, fit0)?;
    let k1 = relative_entropy(fd, fit1)?;
    if k1.is_infinite() {
        return Err(Error::Degenerate("data are not absolutely continuous w.r.t. the larger family's fit".into()));
    }
    let diff = k0 - k1;
    if diff < -NESTED_TOL {
        return Err(Error::domain(format!(
            "K(fD||fit0) - K(fD||fit1) = {diff} < 0: fit0 is not nested in fit1"
        )));
    }
    TestReport::from_statistic(2.0 * n as f64 * diff.max(0.0), df_delta, alpha)
}

/// Multiplicative (geometric) mixture `f0^mu f1^(1-mu) / Z`.
///
/// The endpoints return `f0` (mu = 1) and `f1` (mu = 0) exactly. Inside the
/// interval the support is the intersection of the two supports.
pub fn np_mixture(f0: &Distribution, f1: &Distribution, mu: f64) -> Result<Distribution> {
    Error::check_len(f0.len(), f1.len())?;
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("mixing exponent must lie in [0,1], got {mu}")));
    }
    if mu == 1.0 {
        return Ok(f0.clone());
    }
    if mu == 0.0 {
        return Ok(f1.clone());
    }
    let w = geometric_weights(f0.probs(), f1.probs(), mu);
    Distribution::from_weights(w).map_err(|_| Error::Degenerate("supports of f0 and f1 are disjoint".into()))
}

// Unnormalized f0^mu f1^(1-mu) for mu in (0,1), in log space with a max shift.
fn geometric_weights(f0: &[f64], f1: &[f64], mu: f64) -> Vec<f64> {
    let logs: Vec<f64> = f0
        .iter()
        .zip(f1)
        .map(|(&a, &b)| if a > 0.0 && b > 0.0 { mu * a.ln() + (1.0 - mu) * b.ln() } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; f0.len()];
    }
    logs.iter().map(|&l| (l - max).exp()).collect()
}

fn log_partition(f0: &[f64], f1: &[f64], mu: f64) -> f64 {
    f0.iter()
        .zip(f1)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(&a, &b)| (mu * a.ln() + (1.0 - mu) * b.ln()).exp())
        .sum::<f64>()
        .ln()
}

/// `D(mu) = K(f(mu)||f0) - K(f(mu)||f1)`.
fn np_gap(f0: &Distribution, f1: &Distribution, mu: f64) -> Result<f64> {
    let f = np_mixture(f0, f1, mu)?;
    Ok(kl_of(f.probs(), f0.probs()) - kl_of(f.probs(), f1.probs()))
}

/// Exponent `mu` whose mixture sits on the Neyman-Pearson boundary
/// `K(f(mu)||f0) - K(f(mu)||f1) = tau`.
///
/// `D(mu)` decreases from `K(f1||f0)` at 0 to `-K(f0||f1)` at 1; the root is
/// found by bisection. When `f0 = f1` every `mu` works and 0.5 is returned.
pub fn np_solve_mu(f0: &Distribution, f1: &Distribution, tau: f64) -> Result<f64> {
    Error::check_len(f0.len(), f1.len())?;
    let upper = relative_entropy(f1, f0)?;
    let lower = -relative_entropy(f0, f1)?;
    if f0.max_abs_diff(f1) == 0.0 {
        if tau == 0.0 {
            return Ok(0.5);
        }
        return Err(Error::Infeasible(format!("tau = {tau} but f0 = f1 only admits tau = 0")));
    }
    if tau.is_nan() || tau > upper || tau < lower {
        return Err(Error::Infeasible(format!("tau = {tau} outside the attainable range [{lower}, {upper}]")));
    }
    if tau == upper {
        return Ok(0.0);
    }
    if tau == lower {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut mid = 0.5;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gap = np_gap(f0, f1, mid)? - tau;
        if gap.abs() <= 1e-12 || hi - lo < 1e-15 {
            break;
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Chernoff information and the minimizing exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chernoff {
    #[serde(with = "crate::serde_ext")]
    pub information: f64,
    pub mu_star: f64,
}

/// `C(f0, f1) = -min_{mu in [0,1]} ln sum_k f0_k^mu f1_k^(1-mu)`.
///
/// `ln Z(mu)` is convex, so a golden-section search at tolerance 1e-10 in `mu`
/// finds the minimum. Disjoint supports give `+inf`.
pub fn chernoff_information(f0: &Distribution, f1: &Distribution) -> Result<Chernoff> {
    Error::check_len(f0.len(), f1.len())?;
    let common = f0.probs().iter().zip(f1.probs()).any(|(a, b)| *a > 0.0 && *b > 0.0);
    if !common {
        return Ok(Chernoff { information: f64::INFINITY, mu_star: 0.5 });
    }
    if f0.max_abs_diff(f1) == 0.0 {
        return Ok(Chernoff { information: 0.0, mu_star: 0.5 });
    }
    let (mu_star, min) = golden_section_min(|mu| log_partition(f0.probs(), f1.probs(), mu), 0.0, 1.0, 1e-10);
    // ln Z is 0 at both endpoints, so the interior minimum is never above it.
    Ok(Chernoff { information: (-min).max(0.0), mu_star })
}

/// `ln Z(mu)` of the geometric mixture, exposed for diagnostics.
pub fn np_log_partition(f0: &Distribution, f1: &Distribution, mu: f64) -> Result<f64> {
    Error::check_len(f0.len(), f1.len())?;
    if mu <= 0.0 || mu >= 1.0 {
        return Ok(0.0);
    }
    Ok(log_partition(f0.probs(), f1.probs(), mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn report_serializes_exact_fields() {
        let r = TestReport::from_statistic(f64::INFINITY, 1, 0.05).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 6);
        for k in ["statistic", "df", "critical_value", "p_value", "alpha", "reject"] {
            assert!(keys.contains(&k.to_string()));
        }
        assert_eq!(v["statistic"], "inf");
        assert_eq!(v["p_value"], 0.0);
    }

    #[test]
    fn tie_rejects() {
        let crit = chi2_quantile(0.95, 3).unwrap();
        assert!(TestReport::from_statistic(crit, 3, 0.05).unwrap().reject);
    }

    #[test]
    fn simple_test_examples() {
        let fair = d(&[0.5, 0.5]);
        let r = test_simple(&fair, &fair, 100, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        assert_eq!(r.p_value, 1.0);

        let r = test_simple(&d(&[0.7, 0.3]), &fair, 100, 0.05).unwrap();
        assert!((r.statistic - 16.46).abs() < 0.01);
        assert_eq!(r.df, 1);
        assert!((r.critical_value - 3.84).abs() < 0.01);
        assert!(r.reject);

        let r = test_simple(&d(&[0.9, 0.1]), &d(&[1.0, 0.0]), 10, 0.05).unwrap();
        assert!(r.statistic.is_infinite() && r.reject && r.p_value == 0.0);
        assert!(test_simple(&fair, &d(&[0.2, 0.3, 0.5]), 10, 0.05).is_err());
    }

    #[test]
    fn composite_examples() {
        let f = d(&[0.1, 0.2, 0.3, 0.4]);
        let r = test_composite(&f, &f, 3, 1, 50, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 2);
        assert!(matches!(test_composite(&f, &f, 3, 3, 50, 0.05), Err(Error::Degenerate(_))));
    }

    #[test]
    fn independence_df() {
        let t = JointTable::from_weight_rows(&[vec![1.0, 2.0, 3.0, 1.0], vec![2.0, 2.0, 1.0, 5.0], vec![4.0, 1.0, 1.0, 1.0]])
            .unwrap();
        let r = test_independence(&t, 24, 0.05).unwrap();
        assert_eq!(r.df, 6);
    }

    #[test]
    fn nested_examples() {
        let f = d(&[0.1, 0.2, 0.3, 0.4]);
        let g = d(&[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(test_nested(&f, &g, &g, 2, 10, 0.05).unwrap().statistic, 0.0);
        assert!(test_nested(&f, &f, &g, 2, 10, 0.05).is_err());
    }

    #[test]
    fn mixture_endpoints_and_midpoint() {
        let f0 = d(&[0.5, 0.5]);
        let f1 = d(&[0.7, 0.3]);
        assert_eq!(np_mixture(&f0, &f1, 1.0).unwrap(), f0);
        assert_eq!(np_mixture(&f0, &f1, 0.0).unwrap(), f1);
        let m = np_mixture(&f0, &f1, 0.5).unwrap();
        let (a, b) = (0.35f64.sqrt(), 0.15f64.sqrt());
        assert!((m.probs()[0] - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn mixture_support_is_intersection() {
        let f0 = d(&[0.5, 0.5, 0.0]);
        let f1 = d(&[0.0, 0.5, 0.5]);
        let m = np_mixture(&f0, &f1, 0.3).unwrap();
        assert_eq!(m.support(), vec![1]);
        let g = d(&[0.0, 0.0, 1.0]);
        assert!(matches!(np_mixture(&d(&[1.0, 0.0, 0.0]), &g, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn solve_mu_examples() {
        let f = d(&[0.3, 0.7]);
        assert_eq!(np_solve_mu(&f, &f, 0.0).unwrap(), 0.5);
        let f0 = d(&[0.5, 0.5]);
        let f1 = d(&[0.9, 0.1]);
        let top = relative_entropy(&f1, &f0).unwrap();
        assert_eq!(np_solve_mu(&f0, &f1, top).unwrap(), 0.0);
        assert!(np_solve_mu(&f0, &f1, top + 0.1).is_err());
    }

    #[test]
    fn solve_mu_matches_grid_scan() {
        let f0 = d(&[0.5, 0.5]);
        let f1 = d(&[0.9, 0.1]);
        // oracle: scan D(mu) at step 1e-4 for the sign change
        let gap = |mu: f64| {
            let w0 = 0.5f64.powf(mu) * 0.9f64.powf(1.0 - mu);
            let w1 = 0.5f64.powf(mu) * 0.1f64.powf(1.0 - mu);
            let (p, q) = (w0 / (w0 + w1), w1 / (w0 + w1));
            (p * (p / 0.5).ln() + q * (q / 0.5).ln()) - (p * (p / 0.9).ln() + q * (q / 0.1).ln())
        };
        let mut cross = None;
        for i in 0..10_000 {
            let (a, b) = (i as f64 * 1e-4, (i + 1) as f64 * 1e-4);
            if gap(a) >= 0.0 && gap(b) <= 0.0 {
                cross = Some((a, b));
                break;
            }
        }
        let (a, b) = cross.unwrap();
        let mu = np_solve_mu(&f0, &f1, 0.0).unwrap();
        assert!(mu >= a - 1e-12 && mu <= b + 1e-12, "mu = {mu} not in [{a}, {b}]");
        assert!(np_gap(&f0, &f1, mu).unwrap().abs() < 1e-9);
    }

    #[test]
    fn chernoff_coin_examples() {
        let f = d(&[0.5, 0.5]);
        let g = d(&[0.7, 0.3]);
        let h = d(&[0.9, 0.1]);
        let r = d(&[1.0, 0.0]);
        let c = |a: &Distribution, b: &Distribution| chernoff_information(a, b).unwrap().information;
        assert!((c(&f, &g) - 0.02).abs() <= 0.005);
        assert!((c(&f, &h) - 0.11).abs() <= 0.005);
        assert!((c(&g, &h) - 0.03).abs() <= 0.005);
        assert!((c(&f, &r) - 2f64.ln()).abs() <= 1e-9);
        assert!(c(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).is_infinite());
        assert_eq!(c(&f, &f), 0.0);
    }

    fn positive(m: usize) -> impl Strategy<Value = Distribution> {
        proptest::collection::vec(0.02f64..1.0, m).prop_map(|w| Distribution::from_weights(w).unwrap())
    }

    fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
        (2usize..7).prop_flat_map(|m| (positive(m), positive(m)))
    }

    proptest! {
        #[test]
        fn chernoff_symmetric_and_equalizing((f0, f1) in pair()) {
            let c01 = chernoff_information(&f0, &f1).unwrap();
            let c10 = chernoff_information(&f1, &f0).unwrap();
            prop_assert!((c01.information - c10.information).abs() < 1e-9);
            let fm = np_mixture(&f0, &f1, c01.mu_star).unwrap();
            let k0 = relative_entropy(&fm, &f0).unwrap();
            let k1 = relative_entropy(&fm, &f1).unwrap();
            prop_assert!((k0 - k1).abs() <= 1e-6, "{} vs {}", k0, k1);
            prop_assert!((k0 - c01.information).abs() <= 1e-6);
        }

        #[test]
        fn log_partition_convex((f0, f1) in pair()) {
            let h = 1e-2;
            for i in 1..99 {
                let mu = i as f64 * h;
                let l = |x| np_log_partition(&f0, &f1, x).unwrap();
                prop_assert!(l(mu - h) + l(mu + h) - 2.0 * l(mu) >= -1e-9);
            }
        }

        #[test]
        fn simple_statistic_permutation_invariant((f0, f1) in pair(), rot in 0usize..7) {
            let m = f0.len();
            let perm: Vec<usize> = (0..m).map(|j| (j + rot) % m).collect();
            let a = test_simple(&f0, &f1, 37, 0.05).unwrap();
            let b = test_simple(&f0.permuted(&perm).unwrap(), &f1.permuted(&perm).unwrap(), 37, 0.05).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-10);
        }
    }
}

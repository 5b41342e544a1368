use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ngram::{count_ngrams, count_windows, NGramTable};
use super::{Alphabet, ConditionalModel, SymbolSequence};
use crate::error::{Error, Result};
use crate::hypothesis::TestReport;
use crate::simplex::{entropy_of, Distribution};

const ROW_TOL: f64 = 1e-9;

/// Block entropy `H_r` of the length-`r` windows; `H_0 = 0`.
pub fn gram_entropy(s: &SymbolSequence, r: usize) -> Result<f64> {
    Ok(count_ngrams(s, r)?.entropy())
}

/// Conditional entropy of a symbol given the `k - 1` preceding ones, from
/// counts of order `k`: `H(table) - H(prefix marginal)`. Both terms use the
/// same windows, so the result is never negative.
pub fn cond_entropy_of_counts(t: &NGramTable) -> Result<f64> {
    if t.order() == 0 {
        return Err(Error::domain("conditional entropy needs grams of order at least 1"));
    }
    Ok((t.entropy() - t.prefix_marginal(t.order() - 1)?.entropy()).max(0.0))
}

/// `h_{r+1}`: entropy of the next symbol given the previous `r`, over the
/// `n - r` transitions of the sequence. `cond_entropy(s, 0) = H_1`.
pub fn cond_entropy(s: &SymbolSequence, r: usize) -> Result<f64> {
    if r + 1 > s.len() {
        return Err(Error::domain(format!("order {r} needs at least {} symbols, got {}", r + 1, s.len())));
    }
    cond_entropy_of_counts(&count_windows(s, r + 1, s.len() - r)?)
}

/// Closed-form entropy rate `-sum_j pi_j sum_k w_jk ln w_jk` of a first-order
/// chain with transition matrix `w` and stationary distribution `pi`.
pub fn entropy_rate_markov1(w: &[Vec<f64>], pi: &Distribution) -> Result<f64> {
    let m = pi.len();
    Error::check_len(m, w.len())?;
    for (j, row) in w.iter().enumerate() {
        Error::check_len(m, row.len())?;
        let s: f64 = row.iter().sum();
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) || (s - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidDistribution(format!("row {j} of the transition matrix is not a distribution")));
        }
    }
    let p = pi.probs();
    for k in 0..m {
        let next: f64 = (0..m).map(|j| p[j] * w[j][k]).sum();
        if (next - p[k]).abs() > ROW_TOL {
            return Err(Error::domain(format!("distribution is not stationary (component {k}: {next} vs {})", p[k])));
        }
    }
    Ok(p.iter().zip(w).map(|(pj, row)| pj * entropy_of(row)).sum::<f64>().max(0.0))
}

/// `R = 1 - h / ln m`.
pub fn redundancy(h: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("redundancy needs at least two symbols"));
    }
    let max = (m as f64).ln();
    if !(-1e-12..=max + 1e-12).contains(&h) {
        return Err(Error::domain(format!("entropy rate {h} outside [0, ln {m}]")));
    }
    Ok((1.0 - h / max).clamp(0.0, 1.0))
}

/// Conditional divergence of transition counts from a model:
/// `sum_a f(a) sum_w f(w|a) ln(f(w|a) / g(w|a))`. The model may have lower
/// order than the counts' contexts, in which case it reads the context
/// suffix. Infinite when the data uses a transition the model lacks.
pub fn kappa_counts(t: &NGramTable, model: &ConditionalModel) -> Result<f64> {
    Error::check_len(model.alphabet().len(), t.alphabet_size())?;
    let r = t
        .order()
        .checked_sub(1)
        .ok_or_else(|| Error::domain("transition counts need order at least 1"))?;
    let s = model.order();
    if s > r {
        return Err(Error::domain(format!("model order {s} exceeds context length {r}")));
    }
    if t.total() == 0 {
        return Err(Error::domain("no transitions counted"));
    }
    let contexts = t.prefix_marginal(r)?;
    let total = t.total() as f64;
    let mut k = 0.0;
    for (gram, c) in t.entries() {
        let g = model.prob(&gram[r - s..r], gram[r]);
        if g <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let f = c as f64 / contexts.count(&gram[..r]) as f64;
        k += c as f64 / total * (f / g).ln();
    }
    Ok(k.max(0.0))
}

/// [`kappa_counts`] on the `n - r` transitions of `s`, `r` the model order.
pub fn kappa(s: &SymbolSequence, model: &ConditionalModel) -> Result<f64> {
    if s.alphabet() != model.alphabet() {
        return Err(Error::domain("sequence and model use different alphabets"));
    }
    let r = model.order();
    if r + 1 > s.len() {
        return Err(Error::domain(format!("order {r} needs at least {} symbols, got {}", r + 1, s.len())));
    }
    kappa_counts(&count_windows(s, r + 1, s.len() - r)?, model)
}

fn order_df(m: usize, s: usize, r: usize) -> Result<u64> {
    let pow = |k: usize| {
        u32::try_from(k).ok().and_then(|k| (m as u64).checked_pow(k)).ok_or_else(|| Error::domain("too many degrees of freedom"))
    };
    (m as u64 - 1)
        .checked_mul(pow(r)? - pow(s)?)
        .ok_or_else(|| Error::domain("too many degrees of freedom"))
}

/// Tests order `s_order` against order `r_order > s_order` with statistic
/// `2n [h_{s+1} - h_{r+1}]` and `(m - 1)(m^r - m^s)` degrees of freedom.
///
/// Both conditional entropies come from the same `n - r` windows of length
/// `r + 1`, the lower-order one through the suffix marginal, so the
/// statistic is never negative.
pub fn test_order(s: &SymbolSequence, s_order: usize, r_order: usize, alpha: f64) -> Result<TestReport> {
    if s_order >= r_order {
        return Err(Error::domain(format!("null order {s_order} must be below alternative order {r_order}")));
    }
    if r_order + 1 > s.len() {
        return Err(Error::domain(format!("order {r_order} needs at least {} symbols, got {}", r_order + 1, s.len())));
    }
    if s.m() < 2 {
        return Err(Error::Degenerate("a one-symbol alphabet has no order to test".into()));
    }
    let t = count_windows(s, r_order + 1, s.len() - r_order)?;
    let h_r = cond_entropy_of_counts(&t)?;
    let h_s = cond_entropy_of_counts(&t.suffix_marginal(s_order + 1)?)?;
    let statistic = (2.0 * s.len() as f64 * (h_s - h_r)).max(0.0);
    TestReport::from_statistic(statistic, order_df(s.m(), s_order, r_order)?, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStep {
    pub r: usize,
    /// `h_r`, the conditional entropy given `r - 1` symbols.
    pub h_r: f64,
    /// Order `r - 1` against order `r`.
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScan {
    pub n: usize,
    pub m: usize,
    /// `floor(ln n / (2 ln m))`.
    pub r_max: usize,
    pub steps: Vec<OrderStep>,
    /// Largest `r` whose test rejects, 0 if none does.
    pub detected_order: usize,
}

/// Sequential order tests `r - 1` against `r` for `r = 1..=r_max`.
pub fn order_scan(s: &SymbolSequence, alpha: f64) -> Result<OrderScan> {
    let (n, m) = (s.len(), s.m());
    if m < 2 {
        return Err(Error::Degenerate("a one-symbol alphabet has no order to test".into()));
    }
    if (n as u64) < (m as u64).saturating_mul(m as u64) {
        return Err(Error::domain(format!("order scan needs n >= m^2 = {}, got n = {n}", m * m)));
    }
    let r_max = ((n as f64).ln() / (2.0 * (m as f64).ln()) + 1e-12).floor() as usize;
    let steps = (1..=r_max)
        .map(|r| {
            Ok(OrderStep { r, h_r: cond_entropy(s, r - 1)?, report: test_order(s, r - 1, r, alpha)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let detected_order = steps.iter().filter(|st| st.report.reject).map(|st| st.r).max().unwrap_or(0);
    Ok(OrderScan { n, m, r_max, steps, detected_order })
}

/// Binary sequence `X_t = a` if the mean of `Z_t, ..., Z_{t-window+1}` is at
/// least 1/2, else `b`, with `Z` i.i.d. uniform on (0, 1).
pub fn moving_threshold_chain(n: usize, window: usize, seed: u64) -> Result<SymbolSequence> {
    if n == 0 || window == 0 {
        return Err(Error::domain("length and window must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n + window - 1).map(|_| rng.gen::<f64>()).collect();
    let data = z
        .windows(window)
        .map(|w| u32::from(w.iter().sum::<f64>() / (window as f64) < 0.5))
        .collect();
    SymbolSequence::new(Alphabet::new(vec!['a', 'b'])?, data)
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ngram::{count_windows, NGramTable};
use super::{Alphabet, NormalizationSpec, SymbolSequence};
use crate::error::{Error, Result};
use crate::simplex::NORMALIZATION_TOL;

/// Order-`r` transition probabilities `f(w|context)` for every observed
/// context, with context weights proportional to how often each context
/// starts a transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ConditionalModel {
    order: usize,
    alphabet: Alphabet,
    normalization: NormalizationSpec,
    rows: BTreeMap<Vec<u32>, Vec<f64>>,
    weights: BTreeMap<Vec<u32>, f64>,
}

impl ConditionalModel {
    /// Rows must be distributions over the alphabet; weights must cover
    /// exactly the row contexts and sum to 1.
    pub fn new(
        order: usize,
        alphabet: Alphabet,
        rows: BTreeMap<Vec<u32>, Vec<f64>>,
        weights: BTreeMap<Vec<u32>, f64>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("model has no contexts"));
        }
        let m = alphabet.len();
        for (ctx, row) in &rows {
            Error::check_len(order, ctx.len())?;
            Error::check_len(m, row.len())?;
            if ctx.iter().any(|&x| x as usize >= m) {
                return Err(Error::domain(format!("context {ctx:?} uses a symbol outside the alphabet")));
            }
            check_distribution(row, &format!("row {}", alphabet.decode(ctx)))?;
        }
        if weights.len() != rows.len() || weights.keys().any(|k| !rows.contains_key(k)) {
            return Err(Error::domain("context weights must cover exactly the model's contexts"));
        }
        let w: Vec<f64> = weights.values().copied().collect();
        check_distribution(&w, "context weights")?;
        Ok(Self { order, alphabet, normalization: NormalizationSpec::default(), rows, weights })
    }

    /// Conditional frequencies from counts of order `r + 1`.
    pub fn from_transition_counts(t: &NGramTable, alphabet: Alphabet) -> Result<Self> {
        if t.order() == 0 {
            return Err(Error::domain("transition counts need order at least 1"));
        }
        Error::check_len(alphabet.len(), t.alphabet_size())?;
        if t.total() == 0 {
            return Err(Error::domain("no transitions counted"));
        }
        let r = t.order() - 1;
        let m = alphabet.len();
        let mut counts: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
        for (gram, c) in t.entries() {
            counts.entry(gram[..r].to_vec()).or_insert_with(|| vec![0; m])[gram[r] as usize] += c;
        }
        let total = t.total() as f64;
        let mut rows = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for (ctx, row) in counts {
            let n: u64 = row.iter().sum();
            rows.insert(ctx.clone(), row.iter().map(|&c| c as f64 / n as f64).collect());
            weights.insert(ctx, n as f64 / total);
        }
        Ok(Self { order: r, alphabet, normalization: NormalizationSpec::default(), rows, weights })
    }

    pub fn with_normalization(mut self, norm: NormalizationSpec) -> Self {
        self.normalization = norm;
        self
    }

    pub(crate) fn from_parts_unchecked(
        order: usize,
        alphabet: Alphabet,
        normalization: NormalizationSpec,
        rows: BTreeMap<Vec<u32>, Vec<f64>>,
        weights: BTreeMap<Vec<u32>, f64>,
    ) -> Self {
        Self { order, alphabet, normalization, rows, weights }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn normalization(&self) -> &NormalizationSpec {
        &self.normalization
    }

    pub fn num_contexts(&self) -> usize {
        self.rows.len()
    }

    /// `f(.|context)`, if the context was observed.
    pub fn row(&self, context: &[u32]) -> Option<&[f64]> {
        self.rows.get(context).map(Vec::as_slice)
    }

    /// `f(w|context)`, 0 for unseen contexts.
    pub fn prob(&self, context: &[u32], w: u32) -> f64 {
        self.row(context).map_or(0.0, |r| r[w as usize])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<f64>)> {
        self.rows.iter()
    }

    pub fn context_weights(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.weights.iter().map(|(k, &w)| (k, w))
    }

    pub fn context_weight(&self, context: &[u32]) -> f64 {
        self.weights.get(context).copied().unwrap_or(0.0)
    }

    pub(crate) fn rows_map(&self) -> &BTreeMap<Vec<u32>, Vec<f64>> {
        &self.rows
    }

    pub(crate) fn weights_map(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.weights
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Order-`r` conditional model of a sequence: `f(w|a) = n(aw) / sum_w' n(aw')`
/// over the `n - r` transitions. Order 0 is the single empty context holding
/// the symbol frequencies.
pub fn fit_conditional(s: &SymbolSequence, r: usize) -> Result<ConditionalModel> {
    if r + 1 > s.len() {
        return Err(Error::domain(format!("order {r} needs at least {} symbols, got {}", r + 1, s.len())));
    }
    let t = count_windows(s, r + 1, s.len() - r)?;
    ConditionalModel::from_transition_counts(&t, s.alphabet().clone())
}

// On-disk layout: grams and symbols spelled out as strings.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    order: usize,
    alphabet: Vec<char>,
    #[serde(default)]
    normalization: NormalizationSpec,
    contexts: BTreeMap<String, BTreeMap<String, f64>>,
    context_weights: BTreeMap<String, f64>,
}

impl From<ConditionalModel> for ModelFile {
    fn from(m: ConditionalModel) -> Self {
        let a = &m.alphabet;
        let contexts = m
            .rows
            .iter()
            .map(|(ctx, row)| {
                let probs = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(w, &p)| (a.symbol(w as u32).to_string(), p))
                    .collect();
                (a.decode(ctx), probs)
            })
            .collect();
        let context_weights = m.weights.iter().map(|(ctx, &w)| (a.decode(ctx), w)).collect();
        ModelFile {
            order: m.order,
            alphabet: a.symbols().to_vec(),
            normalization: m.normalization.clone(),
            contexts,
            context_weights,
        }
    }
}

impl TryFrom<ModelFile> for ConditionalModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let alphabet = Alphabet::new(f.alphabet)?;
        let m = alphabet.len();
        let mut rows = BTreeMap::new();
        for (ctx, probs) in f.contexts {
            let key = alphabet.encode(&ctx)?;
            let mut row = vec![0.0; m];
            for (sym, p) in probs {
                let w = alphabet.encode(&sym)?;
                if w.len() != 1 {
                    return Err(Error::Parse(format!("{sym:?} is not a single symbol")));
                }
                row[w[0] as usize] = p;
            }
            if rows.insert(key, row).is_some() {
                return Err(Error::Parse(format!("context {ctx:?} listed twice")));
            }
        }
        let mut weights = BTreeMap::new();
        for (ctx, w) in f.context_weights {
            weights.insert(alphabet.encode(&ctx)?, w);
        }
        Ok(ConditionalModel::new(f.order, alphabet, rows, weights)?.with_normalization(f.normalization))
    }
}

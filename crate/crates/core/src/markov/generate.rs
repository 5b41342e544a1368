use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConditionalModel, SymbolSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub sequence: SymbolSequence,
    /// Times the walk reached an unseen context and restarted from a fresh
    /// context drawn from the context weights.
    pub restarts: usize,
}

fn sample(weights: impl Iterator<Item = f64>, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if u < acc {
                return last;
            }
        }
    }
    last
}

/// Draws `length` symbols: a starting context from the context weights, then
/// each symbol from `f(.|last r symbols)`. A pure function of its arguments.
pub fn generate(model: &ConditionalModel, length: usize, seed: u64) -> Result<Generated> {
    let r = model.order();
    if length < r {
        return Err(Error::domain(format!("length {length} is shorter than the model order {r}")));
    }
    let starts: Vec<(&Vec<u32>, f64)> = model.context_weights().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh_context = |rng: &mut ChaCha8Rng| -> Vec<u32> {
        let i = sample(starts.iter().map(|s| s.1), rng.gen::<f64>()).expect("weights sum to one");
        starts[i].0.clone()
    };
    let mut out = Vec::with_capacity(length + r);
    out.extend(fresh_context(&mut rng));
    let mut restarts = 0;
    while out.len() < length {
        match model.row(&out[out.len() - r..]) {
            Some(row) => {
                let w = sample(row.iter().copied(), rng.gen::<f64>()).expect("rows sum to one");
                out.push(w as u32);
            }
            None => {
                restarts += 1;
                out.extend(fresh_context(&mut rng));
            }
        }
    }
    out.truncate(length);
    Ok(Generated { sequence: SymbolSequence::new(model.alphabet().clone(), out)?, restarts })
}

/// Heats (`beta < 1`) or cools (`beta > 1`) every row: `f^beta / Z`. Row
/// supports and context weights are kept.
pub fn anneal(model: &ConditionalModel, beta: f64) -> Result<ConditionalModel> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive and finite, got {beta}")));
    }
    let rows = model
        .rows_map()
        .iter()
        .map(|(ctx, row)| {
            let logs: Vec<f64> = row.iter().map(|&p| if p > 0.0 { beta * p.ln() } else { f64::NEG_INFINITY }).collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = w.iter().sum();
            (ctx.clone(), w.into_iter().map(|x| x / z).collect())
        })
        .collect();
    Ok(ConditionalModel::from_parts_unchecked(
        model.order(),
        model.alphabet().clone(),
        model.normalization().clone(),
        rows,
        model.weights_map().clone(),
    ))
}

fn check_compatible(f: &ConditionalModel, g: &ConditionalModel) -> Result<()> {
    if f.alphabet() != g.alphabet() {
        return Err(Error::domain("models use different alphabets"));
    }
    if f.order() != g.order() {
        return Err(Error::domain(format!("models have different orders ({} and {})", f.order(), g.order())));
    }
    Ok(())
}

fn normalized(mut w: BTreeMap<Vec<u32>, f64>) -> BTreeMap<Vec<u32>, f64> {
    let total: f64 = w.values().sum();
    if total > 0.0 {
        w.values_mut().for_each(|x| *x /= total);
    } else {
        let k = w.len() as f64;
        w.values_mut().for_each(|x| *x = 1.0 / k);
    }
    w
}

/// Rowwise `lambda f + (1 - lambda) g` on the union of contexts; a context
/// known to one model only keeps that model's row.
pub fn mix_additive(mf: &ConditionalModel, mg: &ConditionalModel, lambda: f64) -> Result<ConditionalModel> {
    check_compatible(mf, mg)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let mut rows = BTreeMap::new();
    let mut weights = BTreeMap::new();
    let contexts: std::collections::BTreeSet<&Vec<u32>> = mf.rows_map().keys().chain(mg.rows_map().keys()).collect();
    for ctx in contexts {
        let row = match (mf.row(ctx), mg.row(ctx)) {
            (Some(f), Some(g)) => f.iter().zip(g).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
            (Some(f), None) => f.to_vec(),
            (None, Some(g)) => g.to_vec(),
            (None, None) => unreachable!(),
        };
        rows.insert(ctx.clone(), row);
        weights.insert(ctx.clone(), lambda * mf.context_weight(ctx) + (1.0 - lambda) * mg.context_weight(ctx));
    }
    Ok(ConditionalModel::from_parts_unchecked(
        mf.order(),
        mf.alphabet().clone(),
        mf.normalization().clone(),
        rows,
        normalized(weights),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixed {
    pub model: ConditionalModel,
    /// Contexts without any transition allowed by both models.
    pub dropped_contexts: Vec<String>,
}

/// Rowwise geometric mixture `f^mu g^(1 - mu) / Z` on contexts and
/// transitions present in both models.
pub fn mix_multiplicative(mf: &ConditionalModel, mg: &ConditionalModel, mu: f64) -> Result<Mixed> {
    check_compatible(mf, mg)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("mu must lie strictly between 0 and 1, got {mu}")));
    }
    let mut rows = BTreeMap::new();
    let mut weights = BTreeMap::new();
    let mut dropped = Vec::new();
    let contexts: std::collections::BTreeSet<&Vec<u32>> = mf.rows_map().keys().chain(mg.rows_map().keys()).collect();
    for ctx in contexts {
        let (Some(f), Some(g)) = (mf.row(ctx), mg.row(ctx)) else {
            dropped.push(mf.alphabet().decode(ctx));
            continue;
        };
        let w: Vec<f64> = f
            .iter()
            .zip(g)
            .map(|(&a, &b)| if a > 0.0 && b > 0.0 { (mu * a.ln() + (1.0 - mu) * b.ln()).exp() } else { 0.0 })
            .collect();
        let z: f64 = w.iter().sum();
        if z <= 0.0 {
            dropped.push(mf.alphabet().decode(ctx));
            continue;
        }
        rows.insert(ctx.clone(), w.into_iter().map(|x| x / z).collect());
        let (wf, wg) = (mf.context_weight(ctx), mg.context_weight(ctx));
        let cw = if wf > 0.0 && wg > 0.0 { (mu * wf.ln() + (1.0 - mu) * wg.ln()).exp() } else { 0.0 };
        weights.insert(ctx.clone(), cw);
    }
    if rows.is_empty() {
        return Err(Error::Infeasible("no context has a transition allowed by both models".into()));
    }
    let model = ConditionalModel::from_parts_unchecked(
        mf.order(),
        mf.alphabet().clone(),
        mf.normalization().clone(),
        rows,
        normalized(weights),
    );
    Ok(Mixed { model, dropped_contexts: dropped })
}

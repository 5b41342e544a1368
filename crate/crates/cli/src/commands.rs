use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use relent::bayes::{argmax, argmin, penalized_score, posterior_over_hypotheses, HypothesisSet};
use relent::em::{em_fit, mixture_predict, MixtureProblem};
use relent::error::Error;
use relent::hypothesis::{test_composite, test_independence, test_nested, test_simple};
use relent::io;
use relent::markov::{
    anneal, cond_entropy, count_ngrams, fit_conditional, generate, gram_entropy, ingest_corpus, mix_additive,
    mix_multiplicative, order_scan, redundancy, ConditionalModel, Mixed, SymbolSequence,
};
use relent::maxent::{
    boltzmann_gibbs, maxent_coarse, maxent_linear, maxent_multi, maxent_symmetric, maxent_unobserved,
    sanov_mc_check, LinearConstraint,
};
use relent::ml::{fit_independence, fit_quasi_symmetry, fit_symmetry, fit_threeway};
use relent::simplex::{chi_square_stat, entropy, relative_entropy, Distribution, JointTable, Partition, SquareTable, ThreeWayTable};

use crate::args::*;

/// A mistake in how the command was invoked rather than in the data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn to_json<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn converged(ok: bool, iterations: usize, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::NonConvergence { iterations, context: what.into() }.into())
    }
}

fn ext(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn run(cli: &Cli) -> Result<Value> {
    let g = &cli.global;
    match &cli.command {
        Command::Entropy(a) => {
            let f = if a.weights { io::read_weights(&a.f)? } else { io::read_distribution(&a.f)? };
            let h = entropy(&f);
            let m = f.len();
            Ok(json!({
                "entropy": h,
                "max_entropy": (m as f64).ln(),
                "redundancy": if m > 1 { json!(redundancy(h, m)?) } else { Value::Null },
            }))
        }
        Command::Kl(a) => {
            let read = |p: &Path| if a.weights { io::read_weights(p) } else { io::read_distribution(p) };
            let (f, gm) = (read(&a.f)?, read(&a.g)?);
            Ok(json!({
                "divergence": ext(relative_entropy(&f, &gm)?),
                "chi_square_over_2n": ext(chi_square_stat(&f, &gm, 1)? / 2.0),
            }))
        }
        Command::Test(t) => run_test(t, g),
        Command::Fit(f) => run_fit(f, g),
        Command::Maxent(m) => run_maxent(m, g),
        Command::SanovCheck(a) => {
            let prior = io::read_distribution(&a.prior)?;
            let c = read_one_constraint(&a.constraint)?;
            to_json(&sanov_mc_check(&prior, &c, &a.n, a.trials, g.seed, a.estimator)?)
        }
        Command::Bayes(BayesCmd::Select { hypotheses, data }) => {
            let h: HypothesisSet = io::read_json(hypotheses)?;
            let counts = io::read_counts(data)?;
            let n: u64 = counts.iter().sum();
            let fd = Distribution::from_counts(&counts)?;
            let posterior = posterior_over_hypotheses(&h, &fd, n)?;
            let scores = penalized_score(&h, &fd, n)?;
            Ok(json!({
                "n": n,
                "posterior": posterior.probs(),
                "penalized_scores": scores.iter().map(|&s| ext(s)).collect::<Vec<_>>(),
                "map_index": argmax(posterior.probs()),
                "min_score_index": argmin(&scores),
            }))
        }
        Command::Em(EmCmd::Fit { problem, rho0 }) => {
            let raw: RawMixture = io::read_json(problem)?;
            let p = MixtureProblem::new(
                raw.components.into_iter().map(Distribution::new).collect::<relent::error::Result<_>>()?,
                Distribution::new(raw.observed)?,
            )?;
            let rho0 = match rho0 {
                Some(path) => io::read_distribution(path)?,
                None => Distribution::uniform(p.num_components())?,
            };
            let trace = em_fit(&p, &rho0, g.tol, g.max_iter)?;
            converged(trace.converged, trace.iterations, "EM weights still moving")?;
            let predicted = mixture_predict(&p, &trace.rho)?;
            let mut out = to_json(&trace)?;
            out["predicted"] = to_json(&predicted)?;
            Ok(out)
        }
        Command::Markov(m) => run_markov(m, g),
    }
}

// Built through the constructor so an unreachable group reports as infeasible.
#[derive(Deserialize)]
struct RawMixture {
    components: Vec<Vec<f64>>,
    observed: Vec<f64>,
}

enum Data {
    Two(JointTable),
    Three(ThreeWayTable),
}

fn integral_total<'a>(xs: impl IntoIterator<Item = &'a f64>, path: &Path) -> Result<u64> {
    let mut total = 0.0;
    for &x in xs {
        if x < 0.0 || x.fract() != 0.0 {
            return Err(usage(format!(
                "{} holds non-integer entries; pass --n with the sample size",
                path.display()
            )));
        }
        total += x;
    }
    if total <= 0.0 {
        bail!(Error::Degenerate(format!("{} has no observations", path.display())));
    }
    Ok(total as u64)
}

fn flat_numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(x) => out.extend(x.as_f64()),
        Value::Array(xs) => xs.iter().for_each(|x| flat_numbers(x, out)),
        Value::Object(o) => o.get("probs").into_iter().for_each(|x| flat_numbers(x, out)),
        _ => {}
    }
}

fn load_data(a: &TableArgs, three: bool) -> Result<(Data, u64)> {
    if three {
        let t = io::read_threeway(&a.table, true)?;
        let n = match a.n {
            Some(n) => n,
            None => {
                let v: Value = io::read_json(&a.table)?;
                let mut xs = Vec::new();
                flat_numbers(&v, &mut xs);
                integral_total(&xs, &a.table)?
            }
        };
        return Ok((Data::Three(t), n));
    }
    let m = io::read_matrix(&a.table)?;
    let n = match a.n {
        Some(n) => n,
        None => integral_total(m.rows.iter().flatten(), &a.table)?,
    };
    let t = JointTable::from_weight_rows(&m.rows)
        .and_then(|t| t.with_labels(m.row_labels, m.col_labels))
        .with_context(|| a.table.display().to_string())?;
    Ok((Data::Two(t), n))
}

struct FamilyFit {
    data: Distribution,
    fitted: Distribution,
    dim_saturated: usize,
    dim_family: usize,
}

fn fit_family(d: &Data, family: Family, g: &Global) -> Result<FamilyFit> {
    match (d, family.threeway()) {
        (Data::Three(t), Some(model)) => {
            let fit = fit_threeway(t, model)?;
            let [a, b, c] = t.dims();
            Ok(FamilyFit {
                data: Distribution::new(t.probs().to_vec())?,
                fitted: Distribution::new(fit.fitted.probs().to_vec())?,
                dim_saturated: a * b * c - 1,
                dim_family: fit.dim_family,
            })
        }
        (Data::Two(t), None) => {
            let (fitted, dim_family) = match family {
                Family::Independence => {
                    let fit = fit_independence(t);
                    (fit.fitted, fit.dim_family)
                }
                Family::Symmetry => {
                    let fit = fit_symmetry(&SquareTable::new(t.clone())?);
                    (fit.fitted.into_table(), fit.dim_family)
                }
                _ => {
                    let fit = fit_quasi_symmetry(&SquareTable::new(t.clone())?, g.tol, g.max_iter)?;
                    converged(fit.converged, fit.iterations, "quasi-symmetric fit")?;
                    (fit.fitted.into_table(), fit.dim_family)
                }
            };
            Ok(FamilyFit {
                data: t.as_distribution(),
                fitted: fitted.as_distribution(),
                dim_saturated: t.saturated_dim(),
                dim_family,
            })
        }
        _ => Err(usage("families L, M and N apply to three-way tables, the others to two-way tables")),
    }
}

fn run_test(t: &TestCmd, g: &Global) -> Result<Value> {
    let report = match t {
        TestCmd::Simple { data, model } => {
            let counts = io::read_counts(data)?;
            let fm = io::read_distribution(model)?;
            test_simple(&Distribution::from_counts(&counts)?, &fm, counts.iter().sum(), g.alpha)?
        }
        TestCmd::Composite { table, family } => {
            let (d, n) = load_data(table, family.threeway().is_some())?;
            let fit = fit_family(&d, *family, g)?;
            test_composite(&fit.data, &fit.fitted, fit.dim_saturated, fit.dim_family, n, g.alpha)?
        }
        TestCmd::Independence { table } => {
            let (d, n) = load_data(table, false)?;
            let Data::Two(t) = d else { unreachable!() };
            test_independence(&t, n, g.alpha)?
        }
        TestCmd::Nested { table, null, alt } => {
            if null.threeway().is_some() != alt.threeway().is_some() {
                return Err(usage("--null and --alt must both be two-way or both three-way families"));
            }
            let (d, n) = load_data(table, null.threeway().is_some())?;
            let f0 = fit_family(&d, *null, g)?;
            let f1 = fit_family(&d, *alt, g)?;
            if f1.dim_family <= f0.dim_family {
                return Err(usage(format!(
                    "the alternative family (dimension {}) must be larger than the null (dimension {})",
                    f1.dim_family, f0.dim_family
                )));
            }
            let df = (f1.dim_family - f0.dim_family) as u64;
            test_nested(&f0.data, &f0.fitted, &f1.fitted, df, n, g.alpha)?
        }
    };
    to_json(&report)
}

fn run_fit(f: &FitCmd, g: &Global) -> Result<Value> {
    match f {
        FitCmd::Independence { table } => to_json(&fit_independence(&io::read_table(table, true)?)),
        FitCmd::Symmetry { table } => to_json(&fit_symmetry(&SquareTable::new(io::read_table(table, true)?)?)),
        FitCmd::Qs { table } => {
            let fit = fit_quasi_symmetry(&SquareTable::new(io::read_table(table, true)?)?, g.tol, g.max_iter)?;
            converged(fit.converged, fit.iterations, "quasi-symmetric fit")?;
            to_json(&fit)
        }
        FitCmd::Threeway { table, model } => to_json(&fit_threeway(&io::read_threeway(table, true)?, *model)?),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Constraints {
    One(LinearConstraint),
    Many(Vec<LinearConstraint>),
}

fn read_constraints(path: &Path) -> Result<Vec<LinearConstraint>> {
    Ok(match io::read_json(path)? {
        Constraints::One(c) => vec![c],
        Constraints::Many(cs) => cs,
    })
}

fn read_one_constraint(path: &Path) -> Result<LinearConstraint> {
    let mut cs = read_constraints(path)?;
    if cs.len() != 1 {
        bail!(Error::Parse(format!("{}: expected one constraint, found {}", path.display(), cs.len())));
    }
    Ok(cs.remove(0))
}

fn run_maxent(m: &MaxentCmd, g: &Global) -> Result<Value> {
    match m {
        MaxentCmd::Linear { prior, constraint } => {
            let fm = io::read_distribution(prior)?;
            to_json(&maxent_linear(&fm, &read_one_constraint(constraint)?, g.tol)?)
        }
        MaxentCmd::Multi { prior, constraints } => {
            let fm = io::read_distribution(prior)?;
            let r = maxent_multi(&fm, &read_constraints(constraints)?, g.tol, g.max_iter)?;
            converged(r.converged, r.iterations, "dual Newton iterations")?;
            to_json(&r)
        }
        MaxentCmd::Gibbs { energies, beta } => {
            let e = io::read_values(energies)?;
            let f = boltzmann_gibbs(&e.values, *beta)?;
            let f = match e.labels {
                Some(l) => f.with_labels(l)?,
                None => f,
            };
            let mean_energy = f.mean_of(&e.values)?;
            Ok(json!({ "distribution": to_json(&f)?, "mean_energy": mean_energy, "entropy": entropy(&f) }))
        }
        MaxentCmd::Coarse { prior, partition, groups } => {
            let fm = io::read_distribution(prior)?;
            let p: Partition = io::read_json(partition)?;
            to_json(&maxent_coarse(&fm, &p, &io::read_distribution(groups)?)?)
        }
        MaxentCmd::Unobserved { prior, category } => {
            to_json(&maxent_unobserved(&io::read_distribution(prior)?, *category)?)
        }
        MaxentCmd::Symmetric { table } => to_json(&maxent_symmetric(&SquareTable::new(io::read_table(table, true)?)?)?),
    }
}

fn corpus(path: &Path, norm: &NormArgs) -> Result<SymbolSequence> {
    let text = io::read_text(path)?;
    ingest_corpus(&text, &norm.spec()).with_context(|| path.display().to_string())
}

/// Accepts a bare model file or a report that carries one.
fn read_model(path: &Path) -> Result<ConditionalModel> {
    let mut v: Value = io::read_json(path)?;
    if let Some(r) = v.get_mut("result") {
        v = r.take();
    }
    if let Some(m) = v.get_mut("model") {
        v = m.take();
    }
    serde_json::from_value(v)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        .map_err(Into::into)
}

fn run_markov(m: &MarkovCmd, g: &Global) -> Result<Value> {
    match m {
        MarkovCmd::Train { input, order, norm } => {
            let s = corpus(input, norm)?;
            to_json(&fit_conditional(&s, *order)?.with_normalization(norm.spec()))
        }
        MarkovCmd::Counts { input, order, norm } => {
            let s = corpus(input, norm)?;
            let t = count_ngrams(&s, *order)?;
            let counts: BTreeMap<String, u64> = t.labeled(s.alphabet()).into_iter().collect();
            Ok(json!({
                "order": order,
                "length": s.len(),
                "alphabet": s.alphabet().symbols(),
                "total": t.total(),
                "counts": counts,
            }))
        }
        MarkovCmd::Entropy { input, max_order, norm } => {
            let s = corpus(input, norm)?;
            let rows = (1..=*max_order)
                .map(|r| {
                    let h = cond_entropy(&s, r - 1)?;
                    Ok(json!({
                        "r": r,
                        "block_entropy": gram_entropy(&s, r)?,
                        "cond_entropy": h,
                        "redundancy": if s.m() > 1 { json!(redundancy(h, s.m())?) } else { Value::Null },
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({ "length": s.len(), "m": s.m(), "orders": rows }))
        }
        MarkovCmd::OrderScan { input, norm } => to_json(&order_scan(&corpus(input, norm)?, g.alpha)?),
        MarkovCmd::Generate { model, length } => {
            let out = generate(&read_model(model)?, *length, g.seed)?;
            Ok(json!({ "text": out.sequence.to_text(), "length": out.sequence.len(), "restarts": out.restarts }))
        }
        MarkovCmd::Anneal { model, beta } => to_json(&anneal(&read_model(model)?, *beta)?),
        MarkovCmd::Mix { f, g: gm, lambda, mu } => {
            let (mf, mg) = (read_model(f)?, read_model(gm)?);
            let mixed = match (lambda, mu) {
                (Some(l), _) => Mixed { model: mix_additive(&mf, &mg, *l)?, dropped_contexts: Vec::new() },
                (None, Some(mu)) => mix_multiplicative(&mf, &mg, *mu)?,
                (None, None) => return Err(usage("pass --lambda or --mu")),
            };
            to_json(&mixed)
        }
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relent::em::{em_fit, mixture_predict, MixtureProblem};
use relent::hypothesis::chernoff_information;
use relent::markov::{count_ngrams, ingest_corpus, moving_threshold_chain, order_scan, NormalizationSpec};
use relent::maxent::{maxent_linear, sanov_mc_check, Estimator, LinearConstraint};
use relent::ml::{fit_independence, fit_symmetry, fit_threeway, ThreeWayModel};
use relent::simplex::{chi_square_stat, relative_entropy, Distribution, JointTable, SquareTable, ThreeWayTable};
use relent::special::chi2_quantile;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn d(v: &[f64]) -> Distribution {
    Distribution::new(v.to_vec()).unwrap()
}

// |got - printed| within the printed precision, never tighter than 5e-4
fn matches_printed(got: f64, printed: &str) -> bool {
    if printed == "inf" {
        return got.is_infinite() && got > 0.0;
    }
    let want: f64 = printed.parse().unwrap();
    let decimals = printed.split('.').nth(1).map_or(0, str::len) as i32;
    (got - want).abs() <= (0.5 * 10f64.powi(-decimals)).max(5e-4) + 1e-12
}

fn fmt(x: f64) -> String {
    if x.is_infinite() { "inf".into() } else { format!("{x:.4}") }
}

fn coin_table() -> Outcome {
    let rows = [
        ("a", [0.5, 0.5], [0.5, 0.5], "0", "0"),
        ("b", [0.5, 0.5], [0.7, 0.3], "0.0823", "0.08"),
        ("c", [0.7, 0.3], [0.5, 0.5], "0.0822", "0.095"),
        ("d", [0.7, 0.3], [0.7, 0.3], "0", "0"),
        ("e", [0.5, 0.5], [1.0, 0.0], "0.69", "0.5"),
        ("f", [1.0, 0.0], [0.99, 0.01], "inf", "inf"),
    ];
    let mut bad = Vec::new();
    let mut seen = Vec::new();
    for (name, fm, fd, k_printed, chi_printed) in rows {
        let (fm, fd) = (d(&fm), d(&fd));
        let k = relative_entropy(&fd, &fm).unwrap();
        let chi = chi_square_stat(&fd, &fm, 1).unwrap() / 2.0;
        seen.push(format!("{name}: K={} chi2/2n={}", fmt(k), fmt(chi)));
        if !matches_printed(k, k_printed) {
            bad.push(format!("row {name} K={} vs printed {k_printed}", fmt(k)));
        }
        if !matches_printed(chi, chi_printed) {
            bad.push(format!("row {name} chi2/2n={} vs printed {chi_printed}", fmt(chi)));
        }
    }
    if bad.is_empty() { Ok(seen.join("; ")) } else { Err(bad.join("; ")) }
}

fn chernoff() -> Outcome {
    let f = d(&[0.5, 0.5]);
    let g = d(&[0.7, 0.3]);
    let h = d(&[0.9, 0.1]);
    let r = d(&[1.0, 0.0]);
    let cases = [("C(f,g)", &f, &g, 0.02), ("C(f,h)", &f, &h, 0.11), ("C(g,h)", &g, &h, 0.03), ("C(f,r)", &f, &r, 0.69)];
    let mut out = Vec::new();
    let mut ok = true;
    for (name, a, b, want) in cases {
        let c = chernoff_information(a, b).unwrap().information;
        ok &= (c - want).abs() <= 0.005;
        out.push(format!("{name}={c:.4} (want {want})"));
    }
    if ok { Ok(out.join(", ")) } else { Err(out.join(", ")) }
}

fn dice() -> Outcome {
    let fm = Distribution::uniform(6).unwrap();
    let c = LinearConstraint::new((1..=6).map(f64::from).collect(), 4.0).unwrap();
    let r = maxent_linear(&fm, &c, 1e-12).unwrap();
    let theta = r.multipliers[0];
    let want = [0.10, 0.12, 0.15, 0.17, 0.25, 0.30];
    let mut bad = Vec::new();
    if (theta - 0.175).abs() > 0.003 {
        bad.push(format!("theta={theta:.4}"));
    }
    for (j, (got, w)) in r.projected.probs().iter().zip(want).enumerate() {
        if (got - w).abs() > 0.005 {
            bad.push(format!("f{}={got:.4} vs {w}", j + 1));
        }
    }
    let probs: Vec<String> = r.projected.probs().iter().map(|p| format!("{p:.4}")).collect();
    let detail = format!("theta={theta:.4}, f=({})", probs.join(", "));
    if bad.is_empty() { Ok(detail) } else { Err(format!("{detail}; off: {}", bad.join(", "))) }
}

fn quantiles() -> Outcome {
    let table = [(1, "3.84"), (2, "5.99"), (4, "9.49"), (8, "15.5"), (16, "26.3")];
    let mut out = Vec::new();
    let mut ok = true;
    for (df, printed) in table {
        let q = chi2_quantile(0.95, df).unwrap();
        let decimals = printed.split('.').nth(1).unwrap().len() as i32;
        ok &= (q - printed.parse::<f64>().unwrap()).abs() <= 0.5 * 10f64.powi(-decimals);
        out.push(format!("df{df}={q:.3}"));
    }
    if ok { Ok(out.join(", ")) } else { Err(out.join(", ")) }
}

fn tetragrams() -> Outcome {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/binary202.txt")).unwrap();
    let s = ingest_corpus(&text, &NormalizationSpec::default()).unwrap();
    let t = count_ngrams(&s, 4).unwrap();
    let printed = [
        ("aaba", 16),
        ("aabb", 35),
        ("abaa", 16),
        ("abba", 22),
        ("abbb", 11),
        ("baab", 51),
        ("bbaa", 35),
        ("bbba", 11),
        ("bbbb", 2),
    ];
    let mut bad = Vec::new();
    if s.len() != 202 {
        bad.push(format!("n={}", s.len()));
    }
    if t.total() != 199 {
        bad.push(format!("total={}", t.total()));
    }
    for code in 0..16u64 {
        let gram = s.alphabet().decode(&t.decode(code));
        let want = printed.iter().find(|p| p.0 == gram).map_or(0, |p| p.1);
        let got = t.count(&t.decode(code));
        if got != want {
            bad.push(format!("{gram}={got} vs printed {want}"));
        }
    }
    if bad.is_empty() { Ok("all 16 counts and total 199 match".into()) } else { Err(bad.join(", ")) }
}

fn order_detection() -> Outcome {
    let runs = 100;
    let mut hits = 0;
    let mut reject_at = [0usize; 5];
    for seed in 0..runs {
        let s = moving_threshold_chain(1024, 4, seed).unwrap();
        let scan = order_scan(&s, 0.05).unwrap();
        assert_eq!(scan.r_max, 5);
        let rej: Vec<bool> = scan.steps.iter().map(|st| st.report.reject).collect();
        for (r, &x) in rej.iter().enumerate() {
            reject_at[r] += usize::from(x);
        }
        if rej[2] && !rej[3] && !rej[4] {
            hits += 1;
        }
    }
    let detail = format!("{hits}/{runs} runs reject at r=3 and accept at r=4,5; rejections by r=1..5: {reject_at:?}");
    if hits * 10 >= runs as usize * 9 { Ok(detail) } else { Err(detail) }
}

fn random_dist(rng: &mut ChaCha8Rng, m: usize) -> Distribution {
    Distribution::from_weights((0..m).map(|_| rng.gen_range(0.01..1.0)).collect()).unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r).map(|_| (0..c).map(|_| rng.gen_range(0.01..1.0)).collect()).collect()
}

fn pythagoras() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let instances = 1000;
    let (mut convex, mut indep, mut sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        // data-side: f meets the constraint, g is the prior
        let m = rng.gen_range(2..8);
        let g = random_dist(&mut rng, m);
        let f = random_dist(&mut rng, m);
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let c = LinearConstraint::new(a.clone(), f.mean_of(&a).unwrap()).unwrap();
        let p = maxent_linear(&g, &c, 1e-14).unwrap().projected;
        let lhs = relative_entropy(&f, &g).unwrap();
        let rhs = relative_entropy(&f, &p).unwrap() + relative_entropy(&p, &g).unwrap();
        convex = convex.max((lhs - rhs).abs());

        // model-side: independence family
        let (r, k) = (rng.gen_range(2..6), rng.gen_range(2..6));
        let data = JointTable::from_weight_rows(&random_rows(&mut rng, r, k)).unwrap();
        let model = JointTable::product(&random_dist(&mut rng, r), &random_dist(&mut rng, k)).unwrap();
        let fit = fit_independence(&data).fitted;
        let lhs = data.divergence_to(&model).unwrap();
        let rhs = data.divergence_to(&fit).unwrap() + fit.divergence_to(&model).unwrap();
        indep = indep.max((lhs - rhs).abs());

        // model-side: symmetric family
        let s = rng.gen_range(2..6);
        let data = SquareTable::new(JointTable::from_weight_rows(&random_rows(&mut rng, s, s)).unwrap()).unwrap();
        let raw = random_rows(&mut rng, s, s);
        let sym_rows: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| raw[i][j] + raw[j][i]).collect()).collect();
        let model = SquareTable::new(JointTable::from_weight_rows(&sym_rows).unwrap()).unwrap();
        let fit = fit_symmetry(&data).fitted;
        let lhs = data.divergence_to(&model).unwrap();
        let rhs = data.divergence_to(&fit).unwrap() + fit.divergence_to(&model).unwrap();
        sym = sym.max((lhs - rhs).abs());
    }
    let detail = format!("{instances} instances each; max residual convex={convex:.1e} independence={indep:.1e} symmetry={sym:.1e}");
    if convex.max(indep).max(sym) <= 1e-8 { Ok(detail) } else { Err(detail) }
}

fn threeway() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut df_ok = true;
    for _ in 0..100 {
        let dims = [rng.gen_range(2..5), rng.gen_range(2..5), rng.gen_range(2..5)];
        let w: Vec<f64> = (0..dims.iter().product::<usize>()).map(|_| rng.gen_range(0.01..1.0)).collect();
        let t = ThreeWayTable::from_weights(dims, w).unwrap();
        let k = |m| fit_threeway(&t, m).unwrap().divergence;
        worst = worst.max((k(ThreeWayModel::L) - k(ThreeWayModel::M) - k(ThreeWayModel::N)).abs());
        df_ok &= ThreeWayModel::L.df(dims) == ThreeWayModel::M.df(dims) + ThreeWayModel::N.df(dims);
    }
    let detail = format!("100 tensors; max |K_L - K_M - K_N| = {worst:.1e}; df additive: {df_ok}");
    if worst <= 1e-10 && df_ok { Ok(detail) } else { Err(detail) }
}

fn em() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_rise = 0.0f64;
    for _ in 0..100 {
        let groups = rng.gen_range(2..8);
        let c = rng.gen_range(1..5);
        let comps = (0..c).map(|_| random_dist(&mut rng, groups)).collect();
        let p = MixtureProblem::new(comps, random_dist(&mut rng, groups)).unwrap();
        let rho0 = random_dist(&mut rng, c);
        let trace = em_fit(&p, &rho0, 1e-12, 5000).unwrap();
        for w in trace.divergence_path.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    let mut worst_err = 0.0f64;
    let mut unconverged = 0;
    for _ in 0..100 {
        let comps: Vec<Distribution> = (0..3).map(|_| random_dist(&mut rng, 6)).collect();
        let planted = Distribution::from_weights((0..3).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap();
        let scratch = MixtureProblem::new(comps.clone(), Distribution::uniform(6).unwrap()).unwrap();
        let f = mixture_predict(&scratch, &planted).unwrap();
        let p = MixtureProblem::new(comps, f).unwrap();
        let trace = em_fit(&p, &Distribution::uniform(3).unwrap(), 1e-14, 2_000_000).unwrap();
        unconverged += usize::from(!trace.converged);
        worst_err = worst_err.max(trace.rho.max_abs_diff(&planted));
    }
    let detail = format!(
        "max path increase {worst_rise:.1e} over 100 problems; max planted-weight error {worst_err:.1e} over 100 problems ({unconverged} unconverged)"
    );
    if worst_rise <= 1e-12 && worst_err <= 1e-6 { Ok(detail) } else { Err(detail) }
}

fn sanov() -> Outcome {
    let fm = Distribution::uniform(2).unwrap();
    let c = LinearConstraint::new(vec![0.0, 1.0], 0.7).unwrap();
    let r = sanov_mc_check(&fm, &c, &[50, 100, 200], 100_000, 2024, Estimator::Tilted).unwrap();
    let points: Vec<String> = r.points.iter().map(|p| format!("n={} p={:.3e}", p.n, p.p_hat)).collect();
    let detail = format!(
        "tilted estimator, fitted rate {:.4} vs K = {:.4} ({:.1}% off); {}",
        r.fitted_rate,
        r.theoretical_rate,
        100.0 * r.relative_error,
        points.join(", ")
    );
    if r.relative_error <= 0.15 && (r.theoretical_rate - 0.0823).abs() < 5e-4 { Ok(detail) } else { Err(detail) }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("coin-table oracle", coin_table),
        ("Chernoff oracle", chernoff),
        ("dice maxent oracle", dice),
        ("chi-square quantile oracle", quantiles),
        ("tetragram fixture", tetragrams),
        ("order detection", order_detection),
        ("Pythagorean property suites", pythagoras),
        ("three-way decomposition", threeway),
        ("EM monotonicity and recovery", em),
        ("Sanov Monte-Carlo slope", sanov),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({ms} ms): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({ms} ms): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

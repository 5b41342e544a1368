use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use relent::maxent::Estimator;
use relent::ml::ThreeWayModel;
use relent::markov::NormalizationSpec;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "relent",
    version,
    about = "Relative-entropy inference: goodness-of-fit tests, ML fits, maximum entropy, Bayesian selection, EM and Markov text models",
    after_help = "Every command writes one JSON report {config, result} to standard output or to --out.\n\
                  Exit codes: 0 success, 1 usage, 2 data or format, 3 no convergence, 4 infeasible or degenerate input."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Write the report to this file instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long, global = true, value_parser = positive_usize)]
    pub threads: Option<usize>,
    /// Significance level of tests
    #[arg(long, global = true, default_value_t = 0.05, value_parser = open_unit)]
    pub alpha: f64,
    /// Convergence tolerance of iterative solvers
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = positive_f64)]
    pub tol: f64,
    /// Iteration cap of iterative solvers
    #[arg(long, global = true, default_value_t = 10_000, value_parser = positive_usize)]
    pub max_iter: usize,
    /// Seed of every random stream
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Shannon entropy (nats) of a distribution
    #[command(after_help = "Example:\n  relent entropy --f fair_die.csv")]
    Entropy(EntropyArgs),
    /// Relative entropy K(f||g) in nats
    #[command(after_help = "Example (observed 70/30 coin against a fair one, K = 0.0823):\n  relent kl --f coins_d.csv --g coins_m.csv")]
    Kl(KlArgs),
    /// Likelihood-ratio tests
    #[command(subcommand)]
    Test(TestCmd),
    /// Maximum-likelihood fits to a family
    #[command(subcommand)]
    Fit(FitCmd),
    /// Maximum-entropy projections
    #[command(subcommand)]
    Maxent(MaxentCmd),
    /// Monte-Carlo check of the large-deviation rate of a linear event
    #[command(after_help = "Example (fair coin, at least 70% tails):\n  relent sanov-check --prior coin.json --constraint tails70.json --n 50,100,200 --trials 100000 --seed 7")]
    SanovCheck(SanovArgs),
    /// Bayesian selection among simple hypotheses
    #[command(subcommand)]
    Bayes(BayesCmd),
    /// Mixture weights by EM
    #[command(subcommand)]
    Em(EmCmd),
    /// Markov models of text
    #[command(subcommand)]
    Markov(MarkovCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    /// Distribution file (CSV `label,prob`, a column, or a JSON array)
    #[arg(long)]
    pub f: PathBuf,
    /// Normalize the values instead of requiring them to sum to 1
    #[arg(long)]
    pub weights: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct KlArgs {
    /// Data-side distribution
    #[arg(long)]
    pub f: PathBuf,
    /// Model-side distribution
    #[arg(long)]
    pub g: PathBuf,
    /// Normalize both inputs
    #[arg(long)]
    pub weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Independence,
    Symmetry,
    Qs,
    #[value(name = "L", alias = "l")]
    L,
    #[value(name = "M", alias = "m")]
    M,
    #[value(name = "N", alias = "n")]
    N,
}

impl Family {
    pub fn threeway(self) -> Option<ThreeWayModel> {
        match self {
            Family::L => Some(ThreeWayModel::L),
            Family::M => Some(ThreeWayModel::M),
            Family::N => Some(ThreeWayModel::N),
            _ => None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TableArgs {
    /// Table of counts (CSV matrix or JSON; three-way tables are JSON)
    #[arg(long)]
    pub table: PathBuf,
    /// Sample size, when the table holds frequencies rather than counts
    #[arg(long, value_parser = positive_u64)]
    pub n: Option<u64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestCmd {
    /// Goodness of fit to a fully specified model
    #[command(after_help = "Example (fair-die hypothesis against observed counts):\n  relent test simple --data die_counts.csv --model fair_die.csv")]
    Simple {
        /// Observed counts
        #[arg(long)]
        data: PathBuf,
        /// Model distribution
        #[arg(long)]
        model: PathBuf,
    },
    /// Goodness of fit to a family through its ML fit
    #[command(after_help = "Example (symmetry of a square contingency table):\n  relent test composite --table mobility.csv --family symmetry")]
    Composite {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, value_enum)]
        family: Family,
    },
    /// Independence of rows and columns
    #[command(after_help = "Example:\n  relent test independence --table eye_hair.csv")]
    Independence {
        #[command(flatten)]
        table: TableArgs,
    },
    /// A smaller family against a larger one containing it
    #[command(after_help = "Example (symmetry within quasi-symmetry):\n  relent test nested --table mobility.csv --null symmetry --alt qs")]
    Nested {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, value_enum)]
        null: Family,
        #[arg(long, value_enum)]
        alt: Family,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitCmd {
    /// Product of the margins
    #[command(after_help = "Example:\n  relent fit independence --table eye_hair.csv")]
    Independence {
        #[arg(long)]
        table: PathBuf,
    },
    /// Average of the table and its transpose
    #[command(after_help = "Example:\n  relent fit symmetry --table mobility.csv")]
    Symmetry {
        #[arg(long)]
        table: PathBuf,
    },
    /// Quasi-symmetric fit by iterative proportional fitting
    #[command(after_help = "Example:\n  relent fit qs --table mobility.csv --tol 1e-12")]
    Qs {
        #[arg(long)]
        table: PathBuf,
    },
    /// Three-way log-linear model L, M or N
    #[command(after_help = "Example:\n  relent fit threeway --table xyz.json --model L")]
    Threeway {
        /// JSON: nested [[[..]]] or {dims, probs}
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_parser = parse_threeway)]
        model: ThreeWayModel,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxentCmd {
    /// One linear constraint
    #[command(after_help = "Example (die with mean 4, theta = 0.175):\n  relent maxent linear --prior fair_die.csv --constraint mean4.json")]
    Linear {
        #[arg(long)]
        prior: PathBuf,
        /// JSON {coeffs, target} or a one-element array of them
        #[arg(long)]
        constraint: PathBuf,
    },
    /// Several linear constraints
    #[command(after_help = "Example (row and column margins of a 2x2 table):\n  relent maxent multi --prior flat4.csv --constraints margins.json")]
    Multi {
        #[arg(long)]
        prior: PathBuf,
        /// JSON array of {coeffs, target}
        #[arg(long)]
        constraints: PathBuf,
    },
    /// Boltzmann-Gibbs distribution exp(-beta E) / Z
    #[command(after_help = "Example:\n  relent maxent gibbs --energies levels.csv --beta 2")]
    Gibbs {
        #[arg(long)]
        energies: PathBuf,
        #[arg(long, value_parser = finite_f64, allow_hyphen_values = true)]
        beta: f64,
    },
    /// Prescribed group masses of a partition
    #[command(after_help = "Example:\n  relent maxent coarse --prior fair_die.csv --partition parity.json --groups parity_masses.csv")]
    Coarse {
        #[arg(long)]
        prior: PathBuf,
        /// JSON array giving the group of each category
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        groups: PathBuf,
    },
    /// One category never observed
    #[command(after_help = "Example (face 6 never shows):\n  relent maxent unobserved --prior fair_die.csv --category 5")]
    Unobserved {
        #[arg(long)]
        prior: PathBuf,
        /// Zero-based index of the unobserved category
        #[arg(long)]
        category: usize,
    },
    /// Closest symmetric table to a prior table
    #[command(after_help = "Example:\n  relent maxent symmetric --table mobility.csv")]
    Symmetric {
        #[arg(long)]
        table: PathBuf,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct SanovArgs {
    #[arg(long)]
    pub prior: PathBuf,
    /// JSON {coeffs, target}; the event is a sample mean at or beyond the target
    #[arg(long)]
    pub constraint: PathBuf,
    /// Sample sizes
    #[arg(long, value_delimiter = ',', required = true, value_parser = positive_usize)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100_000, value_parser = positive_u64)]
    pub trials: u64,
    #[arg(long, default_value = "tilted", value_parser = parse_estimator)]
    pub estimator: Estimator,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BayesCmd {
    /// Posterior over hypotheses and penalized scores
    #[command(after_help = "Example (three coins, 70 tails in 100 throws):\n  relent bayes select --hypotheses coins.json --data throws.csv")]
    Select {
        /// JSON array of {prior, probs}
        #[arg(long)]
        hypotheses: PathBuf,
        /// Observed counts
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmCmd {
    /// Fit mixture weights
    #[command(after_help = "Example:\n  relent em fit --problem mixture.json --tol 1e-12")]
    Fit {
        /// JSON {components: [[..],..], observed: [..]}
        #[arg(long)]
        problem: PathBuf,
        /// Initial weights; uniform when absent
        #[arg(long)]
        rho0: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct NormArgs {
    /// Lowercase the text
    #[arg(long)]
    pub lowercase: bool,
    /// Drop characters that are neither alphanumeric nor whitespace
    #[arg(long)]
    pub strip_punctuation: bool,
    /// Punctuation kept when stripping
    #[arg(long, default_value = "")]
    pub keep: String,
    /// Collapse whitespace runs into one blank
    #[arg(long)]
    pub collapse_whitespace: bool,
    /// Fixed alphabet, one symbol per character
    #[arg(long)]
    pub alphabet: Option<String>,
}

impl NormArgs {
    pub fn spec(&self) -> NormalizationSpec {
        NormalizationSpec {
            lowercase: self.lowercase,
            strip_punctuation: self.strip_punctuation,
            keep: self.keep.clone(),
            collapse_whitespace: self.collapse_whitespace,
            alphabet: self.alphabet.as_ref().map(|a| a.chars().collect()),
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovCmd {
    /// Fit an order-r conditional model
    #[command(after_help = "Example (trigram contexts of the binary fixture):\n  relent markov train --in binary202.txt --order 3 --out model.json")]
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Counts of the r-grams of a corpus
    #[command(after_help = "Example (tetragram table of the binary fixture):\n  relent markov counts --in binary202.txt --order 4")]
    Counts {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = positive_usize)]
        order: usize,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Block and conditional entropies up to an order
    #[command(after_help = "Example:\n  relent markov entropy --in binary202.txt --max-order 5")]
    Entropy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_order: usize,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Sequential order tests up to the largest reliable order
    #[command(after_help = "Example:\n  relent markov order-scan --in chain.txt --alpha 0.05")]
    OrderScan {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Sample text from a model
    #[command(after_help = "Example:\n  relent markov generate --model model.json --length 1000 --seed 2024")]
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = positive_usize)]
        length: usize,
    },
    /// Heat (beta < 1) or cool (beta > 1) a model
    #[command(after_help = "Example (a hot English model):\n  relent markov anneal --model emma3.json --beta 0.5")]
    Anneal {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = positive_f64)]
        beta: f64,
    },
    /// Additive (--lambda) or multiplicative (--mu) mixture of two models
    #[command(
        group(ArgGroup::new("weight").required(true).args(["lambda", "mu"])),
        after_help = "Example (half English, half French):\n  relent markov mix --f english3.json --g french3.json --lambda 0.5"
    )]
    Mix {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, value_parser = closed_unit)]
        lambda: Option<f64>,
        #[arg(long, value_parser = open_unit)]
        mu: Option<f64>,
    },
}

fn number(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn finite_f64(s: &str) -> Result<f64, String> {
    number(s).and_then(|x| if x.is_finite() { Ok(x) } else { Err("must be finite".into()) })
}

fn positive_f64(s: &str) -> Result<f64, String> {
    finite_f64(s).and_then(|x| if x > 0.0 { Ok(x) } else { Err("must be positive".into()) })
}

fn open_unit(s: &str) -> Result<f64, String> {
    number(s).and_then(|x| if x > 0.0 && x < 1.0 { Ok(x) } else { Err("must lie in (0, 1)".into()) })
}

fn closed_unit(s: &str) -> Result<f64, String> {
    number(s).and_then(|x| if (0.0..=1.0).contains(&x) { Ok(x) } else { Err("must lie in [0, 1]".into()) })
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(x) => Ok(x),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    positive_usize(s).map(|x| x as u64)
}

fn parse_threeway(s: &str) -> Result<ThreeWayModel, String> {
    s.parse().map_err(|e: relent::error::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: relent::error::Error| e.to_string())
}

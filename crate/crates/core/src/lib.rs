//! Relative-entropy inference on finite discrete distributions and Markov chains.
//!
//! The crate is organised around [`Distribution`], a probability vector on the
//! simplex, and the two functionals [`entropy`] and [`relative_entropy`]. On
//! top of those sit goodness-of-fit and nested chi-square tests
//! ([`hypothesis`]), maximum-likelihood projections onto classical table
//! families ([`ml`]), maximum-entropy projections under linear constraints
//! ([`maxent`]), Bayesian selection among simple hypotheses ([`bayes`]),
//! EM for mixtures with fixed components ([`em`]), and character n-gram
//! Markov models ([`markov`]).

pub mod bayes;
pub mod em;
pub mod error;
pub mod hypothesis;
pub mod io;
pub mod markov;
pub mod maxent;
pub mod ml;
mod roots;
pub mod serde_ext;
pub mod simplex;
pub mod special;

pub use error::{Error, Result};
pub use simplex::{
    chi_square_stat, coarse_grain, entropy, mutual_information, relative_entropy, Distribution, JointTable, Partition,
    SquareTable, ThreeWayTable,
};

//! Meta-analysis of study twins: frequentist and Bayesian heterogeneity
//! inference for pairs of studies under the normal-normal hierarchical
//! model, the calculus of homogeneity-indicator events, corpus summaries and
//! a Monte Carlo check of the analytic results.

pub mod bayes;
pub mod empirical;
pub mod error;
pub mod events;
pub mod freq;
pub mod model;
pub mod multipair;
pub mod sim;
pub mod statfn;

pub use error::{Error, Result};

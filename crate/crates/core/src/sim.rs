//! Monte Carlo simulation of pairs under the normal-normal hierarchical
//! model, used to check the analytic event probabilities and the
//! distribution of Q.
//!
//! Replications are split into fixed-size chunks; chunk `c` draws from
//! stream `c` of the seed, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{event_indicator, EventSpec};
use crate::statfn::StreamRng;

/// Replications per RNG stream.
pub const CHUNK: u64 = 1 << 16;

/// Smallest replication count accepted for probability estimates.
pub const MIN_REPS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mu: f64,
    pub tau: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub reps: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::domain("mu", self.mu, "finite"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::domain("tau", self.tau, "[0, inf)"));
        }
        for (name, s) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::domain(name, s, "(0, inf)"));
            }
        }
        if self.reps == 0 {
            return Err(Error::domain("reps", 0.0, "[1, inf)"));
        }
        Ok(())
    }

    fn chunks(&self) -> u64 {
        self.reps.div_ceil(CHUNK)
    }

    fn chunk_len(&self, c: u64) -> u64 {
        CHUNK.min(self.reps - c * CHUNK)
    }
}

/// One replication: latent study means and observed estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimDraw {
    pub y1: f64,
    pub y2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

fn chunk_draws(config: SimConfig, c: u64) -> impl Iterator<Item = SimDraw> {
    let mut rng = StreamRng::new(config.seed, c);
    (0..config.chunk_len(c)).map(move |_| {
        let theta1 = config.mu + config.tau * rng.standard_normal();
        let theta2 = config.mu + config.tau * rng.standard_normal();
        let y1 = theta1 + config.sigma1 * rng.standard_normal();
        let y2 = theta2 + config.sigma2 * rng.standard_normal();
        SimDraw {
            y1,
            y2,
            theta1,
            theta2,
        }
    })
}

/// Sequential stream of all replications, in chunk order.
pub fn simulate_pairs(config: SimConfig) -> Result<impl Iterator<Item = SimDraw>> {
    config.validate()?;
    Ok((0..config.chunks()).flat_map(move |c| chunk_draws(config, c)))
}

/// Folds each chunk in parallel and returns the per-chunk results in chunk
/// order, so any further combination is deterministic.
fn per_chunk<T, F>(config: &SimConfig, fold: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn Iterator<Item = SimDraw>) -> T + Sync,
{
    (0..config.chunks())
        .into_par_iter()
        .map(|c| fold(&mut chunk_draws(*config, c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub event: EventSpec,
    pub hits: u64,
    pub reps: u64,
    pub estimate: f64,
    /// Binomial standard error `√(p(1−p)/reps)`.
    pub mc_std_err: f64,
}

pub fn mc_event_probability(config: &SimConfig, spec: &EventSpec) -> Result<McEstimate> {
    Ok(mc_event_probabilities(config, std::slice::from_ref(spec))?.remove(0))
}

/// Estimates several events from the same replications.
pub fn mc_event_probabilities(config: &SimConfig, specs: &[EventSpec]) -> Result<Vec<McEstimate>> {
    config.validate()?;
    if config.reps < MIN_REPS {
        return Err(Error::domain("reps", config.reps as f64, "[10000, inf)"));
    }
    // surface parameter errors before the parallel loop
    for spec in specs {
        event_indicator(spec, 0.0, config.sigma1, 0.0, config.sigma2)?;
    }
    let counts = per_chunk(config, |draws| {
        let mut hits = vec![0u64; specs.len()];
        for d in draws {
            for (h, spec) in hits.iter_mut().zip(specs) {
                if event_indicator(spec, d.y1, config.sigma1, d.y2, config.sigma2).unwrap_or(false) {
                    *h += 1;
                }
            }
        }
        hits
    });
    Ok(specs
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let hits: u64 = counts.iter().map(|c| c[j]).sum();
            let p = hits as f64 / config.reps as f64;
            McEstimate {
                event: *spec,
                hits,
                reps: config.reps,
                estimate: p,
                mc_std_err: (p * (1.0 - p) / config.reps as f64).sqrt(),
            }
        })
        .collect())
}

/// Cochran's Q of every replication, in replication order.
pub fn simulated_q_values(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let s = config.sigma1 * config.sigma1 + config.sigma2 * config.sigma2;
    let chunks = per_chunk(config, |draws| {
        draws.map(|d| (d.y2 - d.y1).powi(2) / s).collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Sample moments of the simulated estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimMoments {
    pub reps: u64,
    pub mean_y1: f64,
    pub se_mean_y1: f64,
    pub var_diff: f64,
    /// Mean of `((y₂−y₁)² − σ₁² − σ₂²)/2`, the moment estimator of τ²
    /// without truncation at zero.
    pub mean_tau2_untruncated: f64,
    pub se_tau2_untruncated: f64,
}

pub fn simulated_moments(config: &SimConfig) -> Result<SimMoments> {
    config.validate()?;
    if config.reps < 2 {
        return Err(Error::domain("reps", config.reps as f64, "[2, inf)"));
    }
    let s = config.sigma1 * config.sigma1 + config.sigma2 * config.sigma2;
    // sums are centred on μ to limit cancellation
    let sums = per_chunk(config, |draws| {
        let mut acc = [0.0f64; 6];
        for d in draws {
            let y = d.y1 - config.mu;
            let diff = d.y2 - d.y1;
            let t2 = 0.5 * (diff * diff - s);
            acc[0] += y;
            acc[1] += y * y;
            acc[2] += diff;
            acc[3] += diff * diff;
            acc[4] += t2;
            acc[5] += t2 * t2;
        }
        acc
    });
    let mut tot = [0.0f64; 6];
    for chunk in &sums {
        for (t, v) in tot.iter_mut().zip(chunk) {
            *t += v;
        }
    }
    let n = config.reps as f64;
    let var = |sum: f64, sumsq: f64| (sumsq - sum * sum / n) / (n - 1.0);
    Ok(SimMoments {
        reps: config.reps,
        mean_y1: config.mu + tot[0] / n,
        se_mean_y1: (var(tot[0], tot[1]) / n).sqrt(),
        var_diff: var(tot[2], tot[3]),
        mean_tau2_untruncated: tot[4] / n,
        se_tau2_untruncated: (var(tot[4], tot[5]) / n).sqrt(),
    })
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

//! Bayesian analysis of a pair under the normal-normal hierarchical model:
//! half-normal prior on τ, τ and μ posteriors on quadrature grids, the
//! homogeneity Bayes factor and prior summaries.

mod grid;
mod mixture;

pub use grid::GridPosterior;
pub(crate) use grid::shortest_by_quantile;
pub use mixture::{HalfNormalMixture, NormalMixture};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{generalized_q, weighted_mean};
use crate::model::{
    EffectMethod, HeterogeneityResult, Interval, PooledEffect, StudyPair, TauMethod,
};
use crate::statfn::quad::{linspace, trapezoid_weights};
use crate::statfn::{normal_cdf, normal_quantile};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfNormalPrior {
    scale: f64,
}

impl HalfNormalPrior {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain("prior scale", scale, "(0, inf)"));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn ln_pdf(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = tau / self.scale;
        std::f64::consts::LN_2 - self.scale.ln() - 0.5 * LN_2PI - 0.5 * z * z
    }

    pub fn pdf(&self, tau: f64) -> f64 {
        self.ln_pdf(tau).exp()
    }

    pub fn cdf(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else {
            2.0 * normal_cdf(tau / self.scale) - 1.0
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain("p", p, "[0, 1)"));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok(self.scale * normal_quantile(0.5 + 0.5 * p)?)
    }
}

/// Prior on τ for joint analyses, which also allow the improper flat prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauPrior {
    HalfNormal(HalfNormalPrior),
    ImproperUniform,
}

impl TauPrior {
    pub fn ln_pdf(&self, tau: f64) -> f64 {
        match self {
            TauPrior::HalfNormal(p) => p.ln_pdf(tau),
            TauPrior::ImproperUniform => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum MuPrior {
    #[default]
    ImproperUniform,
    Normal { mean: f64, sd: f64 },
}

/// Log marginal likelihood of the estimates at heterogeneity `tau` with μ
/// integrated out. For the improper prior this is the usual conditional
/// marginal (it drops the flat-prior constant); for a normal prior it is the
/// proper multivariate normal density with covariance `diag(v) + τ²I + sd²J`.
pub fn log_marginal(ys: &[f64], vs: &[f64], tau: f64, mu_prior: MuPrior) -> f64 {
    let k = ys.len() as f64;
    let t2 = tau * tau;
    let sum_log_d: f64 = vs.iter().map(|v| (v + t2).ln()).sum();
    match mu_prior {
        MuPrior::ImproperUniform => {
            let (_, sw) = weighted_mean(ys, vs, tau);
            -0.5 * (k - 1.0) * LN_2PI
                - 0.5 * sum_log_d
                - 0.5 * sw.ln()
                - 0.5 * generalized_q(ys, vs, tau)
        }
        MuPrior::Normal { mean, sd } => {
            let s2 = sd * sd;
            let (mut sw, mut swr, mut swr2) = (0.0, 0.0, 0.0);
            for (&y, &v) in ys.iter().zip(vs) {
                let w = 1.0 / (v + t2);
                let r = y - mean;
                sw += w;
                swr += w * r;
                swr2 += w * r * r;
            }
            let denom = 1.0 + s2 * sw;
            let quad = swr2 - s2 * swr * swr / denom;
            -0.5 * k * LN_2PI - 0.5 * sum_log_d - 0.5 * denom.ln() - 0.5 * quad
        }
    }
}

pub fn marginal_likelihood(pair: &StudyPair, tau: f64, mu_prior: MuPrior) -> Result<f64> {
    check_mu_prior(mu_prior)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain("tau", tau, "[0, inf)"));
    }
    Ok(log_marginal(&pair.estimates(), &pair.variances(), tau, mu_prior))
}

fn check_mu_prior(mu_prior: MuPrior) -> Result<()> {
    if let MuPrior::Normal { mean, sd } = mu_prior {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::domain("mu prior sd", sd, "(0, inf)"));
        }
        if !mean.is_finite() {
            return Err(Error::domain("mu prior mean", mean, "finite"));
        }
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("level", level, "(0, 1)"))
    }
}

fn check_pair(pair: &StudyPair) -> Result<()> {
    if pair.k() < 2 {
        return Err(Error::Unsupported(format!(
            "pair {} needs at least 2 studies",
            pair.pair_id
        )));
    }
    Ok(())
}

/// Controls for the adaptive τ quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Knots on the first refinement pass (at least 400).
    pub min_knots: usize,
    /// Upper bound is extended until the estimated mass beyond it is below this.
    pub tail_mass: f64,
    /// Relative change of the normalizing constant that stops refinement.
    pub refine_tol: f64,
    /// Relative change above which refinement is reported as a failure.
    pub drift_tol: f64,
    pub max_doublings: u32,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            min_knots: 801,
            tail_mass: 1e-8,
            refine_tol: 1e-9,
            drift_tol: 1e-4,
            max_doublings: 5,
        }
    }
}

/// Knots on `[0, base]` followed by `segments` doublings of the range, each
/// doubling holding half as many knots as the base so the relative
/// resolution stays fixed in the tail.
fn segmented_grid(base: f64, segments: u32, n: usize) -> Vec<f64> {
    let mut grid = linspace(0.0, base, n);
    let m = n / 2 + 1;
    let mut lo = base;
    for _ in 0..segments {
        grid.extend(linspace(lo, 2.0 * lo, m).into_iter().skip(1));
        lo *= 2.0;
    }
    grid
}

/// Trapezoid posterior over τ ≥ 0 for an unnormalized log density. The
/// range starts at `[0, initial_upper]` and is doubled until the tail beyond
/// it is negligible; knots are then doubled until the normalizer settles.
pub fn adaptive_tau_posterior<F: Fn(f64) -> f64>(
    log_unnorm: F,
    initial_upper: f64,
    opts: &GridOptions,
) -> Result<GridPosterior> {
    if !(initial_upper > 0.0 && initial_upper.is_finite()) {
        return Err(Error::domain("initial_upper", initial_upper, "(0, inf)"));
    }
    let n0 = opts.min_knots.max(400);
    let build = |segments: u32, n: usize| {
        let grid = segmented_grid(initial_upper, segments, n);
        let ld: Vec<f64> = grid.iter().map(|&t| log_unnorm(t)).collect();
        GridPosterior::from_log_density(grid, &ld)
    };
    let mut segments = 0;
    let mut post = build(segments, n0)?;
    loop {
        // mass beyond the end for a density decaying at least like τ⁻²
        let last = *post.density().last().expect("nonempty");
        if last * post.upper() <= opts.tail_mass {
            break;
        }
        segments += 1;
        if segments > 60 {
            return Err(Error::Numerical(format!(
                "posterior tail mass does not vanish up to tau = {}",
                post.upper()
            )));
        }
        post = build(segments, n0)?;
    }
    let mut n = n0;
    let mut drift = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        n = 2 * n - 1;
        let finer = build(segments, n)?;
        drift = (finer.log_normalizer() - post.log_normalizer()).abs();
        post = finer;
        if drift < opts.refine_tol {
            return Ok(post);
        }
    }
    if opts.max_doublings > 0 && drift > opts.drift_tol {
        return Err(Error::Numerical(format!(
            "normalization drift {drift:.3e} after refinement to {n} base knots"
        )));
    }
    Ok(post)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauPosterior {
    pub result: HeterogeneityResult,
    pub posterior: GridPosterior,
}

pub fn tau_posterior(pair: &StudyPair, prior: &HalfNormalPrior, level: f64) -> Result<TauPosterior> {
    tau_posterior_with(pair, prior, level, &GridOptions::default())
}

pub fn tau_posterior_with(
    pair: &StudyPair,
    prior: &HalfNormalPrior,
    level: f64,
    opts: &GridOptions,
) -> Result<TauPosterior> {
    check_pair(pair)?;
    check_level(level)?;
    let ys = pair.estimates();
    let vs = pair.variances();
    let posterior = adaptive_tau_posterior(
        |t| log_marginal(&ys, &vs, t, MuPrior::ImproperUniform) + prior.ln_pdf(t),
        6.0 * prior.scale(),
        opts,
    )?;
    Ok(TauPosterior {
        result: summarize_tau(&posterior, level),
        posterior,
    })
}

pub(crate) fn summarize_tau(posterior: &GridPosterior, level: f64) -> HeterogeneityResult {
    HeterogeneityResult {
        tau_hat: posterior.median(),
        interval: posterior.shortest_interval(level),
        level,
        method: TauMethod::BayesMedian,
        upper_unbounded: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuPosterior {
    /// Summary on the analysis scale.
    pub effect: PooledEffect,
    /// Exponentiated summary for log-scale measures.
    pub back_transformed: Option<PooledEffect>,
    pub tau: TauPosterior,
    pub mixture: NormalMixture,
    pub posterior: GridPosterior,
}

pub fn mu_posterior(pair: &StudyPair, prior: &HalfNormalPrior, level: f64) -> Result<MuPosterior> {
    mu_posterior_with(pair, prior, level, &GridOptions::default())
}

pub fn mu_posterior_with(
    pair: &StudyPair,
    prior: &HalfNormalPrior,
    level: f64,
    opts: &GridOptions,
) -> Result<MuPosterior> {
    let tau = tau_posterior_with(pair, prior, level, opts)?;
    let ys = pair.estimates();
    let vs = pair.variances();
    let grid = tau.posterior.grid();
    let weights: Vec<f64> = trapezoid_weights(grid)
        .iter()
        .zip(tau.posterior.density())
        .map(|(w, d)| w * d)
        .collect();
    let (means, sds): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&t| {
            let (mu, sw) = weighted_mean(&ys, &vs, t);
            (mu, sw.sqrt().recip())
        })
        .unzip();
    let mixture = NormalMixture::new(weights, means, sds);

    // A fine grid locates the shortest interval; its ends and the median are
    // then taken from the exact mixture distribution.
    let lo = mixture.quantile(1e-10)?;
    let hi = mixture.quantile(1.0 - 1e-10)?;
    let mu_grid = linspace(lo, hi, 4001);
    let dens: Vec<f64> = mu_grid.iter().map(|&m| mixture.pdf(m)).collect();
    let posterior = GridPosterior::from_density(mu_grid, dens)?;
    let (a, _) = shortest_by_quantile(|p| posterior.quantile(p), level);
    let interval = Interval::new(mixture.quantile(a)?, mixture.quantile(a + level)?);
    let median = mixture.quantile(0.5)?;
    let effect = PooledEffect::new(median, interval, level, EffectMethod::Bayes);
    let back_transformed = pair.is_log_scale().then(|| effect.back_transform());
    Ok(MuPosterior {
        effect,
        back_transformed,
        tau,
        mixture,
        posterior,
    })
}

/// Posterior of μ given a fixed τ: normal with the weighted mean and
/// variance `1/Σw`. At τ = 0 this is the fixed-effect result.
pub fn mu_posterior_at_tau(pair: &StudyPair, tau: f64, level: f64) -> Result<PooledEffect> {
    check_pair(pair)?;
    check_level(level)?;
    let (mu, sw) = weighted_mean(&pair.estimates(), &pair.variances(), tau);
    let half = normal_quantile(0.5 + 0.5 * level)? / sw.sqrt();
    Ok(PooledEffect::new(
        mu,
        Interval::new(mu - half, mu + half),
        level,
        EffectMethod::Bayes,
    ))
}

/// BF01 for τ = 0 against the half-normal alternative. Pairs share τ and
/// each gets its own proper normal μ prior.
pub fn bayes_factor_homogeneity(
    pairs: &[StudyPair],
    mu_prior: MuPrior,
    tau_prior: &HalfNormalPrior,
) -> Result<f64> {
    if matches!(mu_prior, MuPrior::ImproperUniform) {
        return Err(Error::Unsupported(
            "Bayes factor requires a proper normal prior on mu".into(),
        ));
    }
    check_mu_prior(mu_prior)?;
    if pairs.is_empty() {
        return Err(Error::Unsupported("Bayes factor needs at least one pair".into()));
    }
    for p in pairs {
        check_pair(p)?;
    }
    let data: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|p| (p.estimates(), p.variances())).collect();
    let joint = |t: f64| -> f64 {
        data.iter()
            .map(|(ys, vs)| log_marginal(ys, vs, t, mu_prior))
            .sum()
    };
    let alt = adaptive_tau_posterior(
        |t| joint(t) + tau_prior.ln_pdf(t),
        6.0 * tau_prior.scale(),
        &GridOptions::default(),
    )?;
    Ok((joint(0.0) - alt.log_normalizer()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSummary {
    pub median: f64,
    pub interval: Interval,
}

pub fn prior_summary(prior: &HalfNormalPrior, level: f64) -> Result<PriorSummary> {
    check_level(level)?;
    Ok(PriorSummary {
        median: prior.quantile(0.5)?,
        interval: Interval::new(0.0, prior.quantile(level)?),
    })
}

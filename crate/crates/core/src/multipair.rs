//! Heterogeneity shared across many pairs: a common τ (Paule-Mandel and
//! Bayesian) and the hierarchical model with pair-specific τⱼ drawn from a
//! half-normal population with scale φ.

use rayon::prelude::*;
use serde::Serialize;

use crate::bayes::{
    adaptive_tau_posterior, log_marginal, summarize_tau, GridOptions, GridPosterior,
    HalfNormalMixture, MuPrior, TauPosterior, TauPrior,
};
use crate::error::{Error, Result};
use crate::freq::{generalized_q, q_profile_interval, QResult};
use crate::model::{HeterogeneityResult, Interval, Scale, StudyPair, TauMethod, TwinCorpus, ValidationReport};
use crate::statfn::normal_pdf;
use crate::statfn::quad::{linspace, log_sum_exp, trapezoid_weights};
use crate::statfn::roots::{brent, expand_upper};

struct Stratum {
    ys: Vec<f64>,
    vs: Vec<f64>,
}

fn strata(pairs: &[StudyPair]) -> Result<Vec<Stratum>> {
    if pairs.is_empty() {
        return Err(Error::Unsupported("no pairs supplied".into()));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        if p.k() < 2 {
            return Err(Error::Unsupported(format!(
                "pair {} needs at least 2 studies",
                p.pair_id
            )));
        }
        out.push(Stratum {
            ys: p.estimates(),
            vs: p.variances(),
        });
    }
    Ok(out)
}

fn stratified_q(strata: &[Stratum], tau: f64) -> f64 {
    strata.iter().map(|s| generalized_q(&s.ys, &s.vs, tau)).sum()
}

fn total_df(strata: &[Stratum]) -> u32 {
    strata.iter().map(|s| (s.ys.len() - 1) as u32).sum()
}

/// Fails unless every pair is analysed on the same scale.
pub fn require_common_scale(corpus: &TwinCorpus) -> Result<Scale> {
    let first = corpus
        .pairs
        .first()
        .ok_or_else(|| Error::Unsupported("empty corpus".into()))?
        .scale;
    let odd: Vec<String> = corpus
        .pairs
        .iter()
        .filter(|p| p.scale != first)
        .map(|p| p.pair_id.clone())
        .collect();
    if odd.is_empty() {
        Ok(first)
    } else {
        Err(ValidationReport::failed(
            "corpus".into(),
            vec![format!(
                "mixed scales: pairs {} are not on the {first:?} scale",
                odd.join(", ")
            )],
        )
        .into())
    }
}

/// Paule-Mandel estimate of a τ shared by all pairs, each with its own mean:
/// the root of `Q_gen(τ) = df`, truncated at 0.
pub fn paule_mandel(pairs: &[StudyPair]) -> Result<f64> {
    let s = strata(pairs)?;
    paule_mandel_strata(&s)
}

fn paule_mandel_strata(s: &[Stratum]) -> Result<f64> {
    let df = total_df(s) as f64;
    let f = |t: f64| stratified_q(s, t) - df;
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let scale = s
        .iter()
        .flat_map(|st| st.vs.iter())
        .sum::<f64>()
        .sqrt();
    let hi = expand_upper(f, 0.0, scale, scale * 1e12)?;
    brent(f, 0.0, hi, 1e-15 * hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommonTauResult {
    pub tau_hat: f64,
    pub interval: Interval,
    pub level: f64,
    pub upper_unbounded: bool,
    pub q_total: f64,
    pub df: u32,
    pub p_value: f64,
}

impl CommonTauResult {
    pub fn as_heterogeneity(&self) -> HeterogeneityResult {
        HeterogeneityResult {
            tau_hat: self.tau_hat,
            interval: self.interval,
            level: self.level,
            method: TauMethod::PauleMandelJoint,
            upper_unbounded: self.upper_unbounded,
        }
    }
}

pub fn common_tau_freq(corpus: &TwinCorpus, level: f64) -> Result<CommonTauResult> {
    require_common_scale(corpus)?;
    let s = strata(&corpus.pairs)?;
    let df = total_df(&s);
    let tau_hat = paule_mandel_strata(&s)?;
    let tau_max = 100.0 * s.iter().flat_map(|st| st.vs.iter()).sum::<f64>().sqrt();
    let (interval, upper_unbounded) =
        q_profile_interval(|t| stratified_q(&s, t), df, level, tau_max)?;
    let q = QResult::from_statistic(stratified_q(&s, 0.0), df)?;
    Ok(CommonTauResult {
        tau_hat,
        interval,
        level,
        upper_unbounded,
        q_total: q.q,
        df,
        p_value: q.p_value,
    })
}

/// Posterior for a τ shared by all pairs, each pair's mean under a flat prior.
pub fn common_tau_bayes(corpus: &TwinCorpus, prior: TauPrior, level: f64) -> Result<TauPosterior> {
    require_common_scale(corpus)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "(0, 1)"));
    }
    let s = strata(&corpus.pairs)?;
    let initial_upper = match prior {
        TauPrior::HalfNormal(p) => 6.0 * p.scale(),
        TauPrior::ImproperUniform => {
            // the flat-prior posterior has a τ^(−df) tail
            if total_df(&s) < 2 {
                return Err(Error::Unsupported(
                    "flat tau prior gives an improper posterior with fewer than 2 degrees of freedom"
                        .into(),
                ));
            }
            let vmax = s
                .iter()
                .flat_map(|st| st.vs.iter().copied())
                .fold(0.0, f64::max);
            6.0 * vmax.sqrt()
        }
    };
    let posterior = adaptive_tau_posterior(
        |t| {
            prior.ln_pdf(t)
                + s.iter()
                    .map(|st| log_marginal(&st.ys, &st.vs, t, MuPrior::ImproperUniform))
                    .sum::<f64>()
        },
        initial_upper,
        &GridOptions::default(),
    )?;
    Ok(TauPosterior {
        result: summarize_tau(&posterior, level),
        posterior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HierOptions {
    /// Lower end of the φ grid, avoiding the degenerate HN(0).
    pub phi_min: f64,
    pub phi_knots: usize,
    /// Knots for u = τ/φ on [0, u_max].
    pub u_knots: usize,
    pub u_max: f64,
    /// Knots of the reported predictive density grid.
    pub predictive_knots: usize,
}

impl Default for HierOptions {
    fn default() -> Self {
        Self {
            phi_min: 1e-4,
            phi_knots: 400,
            u_knots: 401,
            u_max: 9.0,
            predictive_knots: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierTauResult {
    pub phi_posterior: GridPosterior,
    /// Density of τ* for a new pair on a grid starting at 0.
    pub predictive: GridPosterior,
    pub predictive_mixture: HalfNormalMixture,
    pub predictive_median: f64,
    pub predictive_q95: f64,
    /// Trapezoid mass of the predictive density before normalization.
    pub predictive_raw_mass: f64,
}

pub fn random_tau_predictive(corpus: &TwinCorpus, hyper_upper: f64) -> Result<HierTauResult> {
    random_tau_predictive_with(corpus, hyper_upper, &HierOptions::default())
}

pub fn random_tau_predictive_with(
    corpus: &TwinCorpus,
    hyper_upper: f64,
    opts: &HierOptions,
) -> Result<HierTauResult> {
    require_common_scale(corpus)?;
    if !(hyper_upper > opts.phi_min && hyper_upper.is_finite()) {
        return Err(Error::domain("hyper_upper", hyper_upper, "(phi_min, inf)"));
    }
    let s = strata(&corpus.pairs)?;
    let phis = linspace(opts.phi_min, hyper_upper, opts.phi_knots);
    let us = linspace(0.0, opts.u_max, opts.u_knots);
    // ln of trapezoid weight × 2ϕ(u), shared by every inner integral
    let ln_uw: Vec<f64> = trapezoid_weights(&us)
        .iter()
        .zip(&us)
        .map(|(w, &u)| (w * 2.0 * normal_pdf(u)).ln())
        .collect();
    let log_post: Vec<f64> = phis
        .par_iter()
        .map(|&phi| {
            s.iter()
                .map(|st| {
                    log_sum_exp(us.iter().zip(&ln_uw).map(|(&u, &lw)| {
                        lw + log_marginal(&st.ys, &st.vs, phi * u, MuPrior::ImproperUniform)
                    }).collect::<Vec<_>>())
                })
                .sum()
        })
        .collect();
    let phi_posterior = GridPosterior::from_log_density(phis.clone(), &log_post)?;

    let weights: Vec<f64> = trapezoid_weights(&phis)
        .iter()
        .zip(phi_posterior.density())
        .map(|(w, d)| w * d)
        .collect();
    let mixture = HalfNormalMixture::new(weights, phis);
    let predictive_median = mixture.quantile(0.5)?;
    let predictive_q95 = mixture.quantile(0.95)?;

    // geometric knots resolve the narrow components near τ = 0
    let t_lo = opts.phi_min * 1e-2;
    let t_hi = 8.0 * hyper_upper;
    let n = opts.predictive_knots;
    let ratio = (t_hi / t_lo).ln() / (n - 1) as f64;
    let mut grid = Vec::with_capacity(n + 1);
    grid.push(0.0);
    grid.extend((0..n).map(|i| t_lo * (ratio * i as f64).exp()));
    let dens: Vec<f64> = grid.iter().map(|&t| mixture.pdf(t)).collect();
    let raw_mass = crate::statfn::quad::trapezoid(&grid, &dens);
    if (raw_mass - 1.0).abs() > 1e-5 {
        return Err(Error::Numerical(format!(
            "predictive density integrates to {raw_mass} on its grid"
        )));
    }
    let predictive = GridPosterior::from_density(grid, dens)?;
    Ok(HierTauResult {
        phi_posterior,
        predictive,
        predictive_mixture: mixture,
        predictive_median,
        predictive_q95,
        predictive_raw_mass: raw_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::tau_estimate_k2;
    use crate::model::EffectMeasure;

    fn lor(id: &str, data: &[(f64, f64)]) -> StudyPair {
        StudyPair::from_estimates(id, EffectMeasure::LogOddsRatio, data).unwrap()
    }

    fn corpus(pairs: Vec<StudyPair>) -> TwinCorpus {
        TwinCorpus::new(pairs, None).unwrap()
    }

    #[test]
    fn identical_pairs_are_homogeneous() {
        let c = corpus(vec![
            lor("a", &[(0.1, 0.2), (0.1, 0.3)]),
            lor("b", &[(-0.4, 0.5), (-0.4, 0.25)]),
        ]);
        let r = common_tau_freq(&c, 0.95).unwrap();
        assert_eq!(r.tau_hat, 0.0);
        assert_eq!(r.df, 2);
        assert!(r.p_value > 0.999_999);
    }

    #[test]
    fn single_pair_matches_closed_form() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..50 {
            let p = lor(
                "x",
                &[(4.0 * next() - 2.0, 0.05 + next()), (4.0 * next() - 2.0, 0.05 + next())],
            );
            let joint = common_tau_freq(&corpus(vec![p.clone()]), 0.95).unwrap();
            let single = tau_estimate_k2(&p, 0.95).unwrap();
            assert!((joint.tau_hat - single.tau_hat).abs() < 1e-10, "case {i}");
            assert!((joint.interval.lo - single.interval.lo).abs() < 1e-10);
            assert!((joint.interval.hi - single.interval.hi).abs() < 1e-9);
        }
    }

    #[test]
    fn stratified_q_decreases() {
        let c = corpus(vec![
            lor("a", &[(0.9, 0.2), (0.1, 0.3)]),
            lor("b", &[(-0.4, 0.15), (0.6, 0.25)]),
        ]);
        let s = strata(&c.pairs).unwrap();
        let qs: Vec<f64> = linspace(0.0, 5.0, 500).iter().map(|&t| stratified_q(&s, t)).collect();
        assert!(qs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mixed_scales_rejected() {
        let md = StudyPair::from_estimates("m", EffectMeasure::MeanDifference, &[(1.0, 1.0), (2.0, 1.0)])
            .unwrap();
        let c = corpus(vec![lor("a", &[(0.1, 0.2), (0.3, 0.3)]), md]);
        assert!(matches!(common_tau_freq(&c, 0.95), Err(Error::Validation(_))));
    }

    #[test]
    fn flat_prior_needs_two_df() {
        let c = corpus(vec![lor("a", &[(0.1, 0.2), (0.3, 0.3)])]);
        assert!(common_tau_bayes(&c, TauPrior::ImproperUniform, 0.95).is_err());
        let c = corpus(vec![
            lor("a", &[(0.1, 0.2), (0.3, 0.3)]),
            lor("b", &[(0.2, 0.2), (-0.3, 0.3)]),
            lor("c", &[(0.0, 0.2), (0.1, 0.3)]),
        ]);
        let r = common_tau_bayes(&c, TauPrior::ImproperUniform, 0.95).unwrap();
        assert!((r.posterior.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uninformative_corpus_recovers_prior() {
        let c = corpus(vec![
            lor("a", &[(0.1, 1e5), (0.3, 1e5)]),
            lor("b", &[(0.2, 1e5), (-0.3, 1e5)]),
        ]);
        let prior = crate::bayes::HalfNormalPrior::new(0.5).unwrap();
        let r = common_tau_bayes(&c, TauPrior::HalfNormal(prior), 0.95).unwrap();
        assert!((r.result.tau_hat - 0.5 * 0.674_489_75).abs() < 1e-4);
    }

    #[test]
    fn uninformative_pair_gives_flat_phi_posterior() {
        let c = corpus(vec![lor("a", &[(0.1, 1e4), (0.3, 1e4)])]);
        let r = random_tau_predictive(&c, 10.0).unwrap();
        let flat = 1.0 / (10.0 - 1e-4);
        for &d in r.phi_posterior.density() {
            assert!((d - flat).abs() < 1e-6 * flat);
        }
        assert!((r.predictive_raw_mass - 1.0).abs() < 1e-5);
    }

    #[test]
    fn point_mass_mixture_is_half_normal() {
        let m = HalfNormalMixture::point_mass(0.3);
        assert!((m.quantile(0.5).unwrap() - 0.3 * 0.674_489_750_196_082).abs() < 1e-10);
    }

    #[test]
    fn predictive_stable_under_grid_halving() {
        let c = corpus(vec![
            lor("a", &[(0.1, 0.2), (0.3, 0.3)]),
            lor("b", &[(0.2, 0.2), (-0.3, 0.3)]),
            lor("c", &[(0.0, 0.1), (0.1, 0.15)]),
        ]);
        let base = HierOptions::default();
        let fine = HierOptions {
            phi_knots: 2 * base.phi_knots - 1,
            u_knots: 2 * base.u_knots - 1,
            ..base
        };
        let a = random_tau_predictive_with(&c, 10.0, &base).unwrap();
        let b = random_tau_predictive_with(&c, 10.0, &fine).unwrap();
        assert!(((a.predictive_median - b.predictive_median) / b.predictive_median).abs() < 1e-3);
    }
}

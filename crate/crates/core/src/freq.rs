//! Frequentist analysis of a pair: Cochran's Q, the k = 2 heterogeneity
//! estimate with its Q-profile interval, and the FE / RE / HKSJ / mKH pooled
//! effects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EffectMethod, HeterogeneityResult, Interval, PooledEffect, StudyPair, StudyResult, TauMethod,
};
use crate::multipair;
use crate::statfn::roots::brent;
use crate::statfn::{chisq_quantile, chisq_sf, normal_quantile, student_t_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QResult {
    pub q: f64,
    pub df: u32,
    pub p_value: f64,
}

impl QResult {
    /// Wraps an already computed statistic with its χ² p-value.
    pub fn from_statistic(q: f64, df: u32) -> Result<Self> {
        Ok(Self {
            q,
            df,
            p_value: chisq_sf(q, df)?,
        })
    }
}

/// Inverse-variance weighted mean with weights `1/(vᵢ + τ²)`; also returns
/// the weight sum.
pub fn weighted_mean(ys: &[f64], vs: &[f64], tau: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let (mut sw, mut swy) = (0.0, 0.0);
    for (&y, &v) in ys.iter().zip(vs) {
        let w = 1.0 / (v + t2);
        sw += w;
        swy += w * y;
    }
    (swy / sw, sw)
}

/// Generalized Q statistic `Σ (yᵢ − μ̂(τ))² / (vᵢ + τ²)`; at τ = 0 this is
/// Cochran's Q.
pub fn generalized_q(ys: &[f64], vs: &[f64], tau: f64) -> f64 {
    let (mu, _) = weighted_mean(ys, vs, tau);
    let t2 = tau * tau;
    ys.iter()
        .zip(vs)
        .map(|(&y, &v)| (y - mu) * (y - mu) / (v + t2))
        .sum()
}

pub fn cochran_q(pair: &StudyPair) -> Result<QResult> {
    if pair.k() < 2 {
        return Err(Error::Unsupported(format!(
            "pair {} needs at least 2 studies",
            pair.pair_id
        )));
    }
    let q = generalized_q(&pair.estimates(), &pair.variances(), 0.0);
    QResult::from_statistic(q, (pair.k() - 1) as u32)
}

/// A study is significant when `|y/s|` exceeds the two-sided normal critical
/// value at `level`.
pub fn is_significant(study: &StudyResult, level: f64) -> Result<bool> {
    let z = normal_quantile(0.5 + 0.5 * level)?;
    Ok((study.estimate / study.std_err).abs() > z)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QProfileConfig {
    /// Upper end of the τ search bracket. Defaults to `100·√(Σ sᵢ²)`.
    pub tau_max: Option<f64>,
}

impl QProfileConfig {
    pub fn tau_max_for(&self, vs: &[f64]) -> f64 {
        self.tau_max
            .unwrap_or_else(|| 100.0 * vs.iter().sum::<f64>().sqrt())
    }
}

/// Q-profile interval for τ. `qgen` must be decreasing in τ. Returns the
/// interval and whether the upper end stopped at `tau_max`.
pub fn q_profile_interval<F: Fn(f64) -> f64>(
    qgen: F,
    df: u32,
    level: f64,
    tau_max: f64,
) -> Result<(Interval, bool)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "(0, 1)"));
    }
    let lower_target = chisq_quantile(0.5 + 0.5 * level, df)?;
    let upper_target = chisq_quantile(0.5 - 0.5 * level, df)?;
    let q0 = qgen(0.0);
    let xtol = 1e-12 * tau_max.max(1.0);
    let solve = |target: f64| -> Result<(f64, bool)> {
        if q0 <= target {
            return Ok((0.0, false));
        }
        if qgen(tau_max) > target {
            return Ok((tau_max, true));
        }
        Ok((brent(|t| qgen(t) - target, 0.0, tau_max, xtol)?, false))
    };
    let (lo, _) = solve(lower_target)?;
    let (hi, unbounded) = solve(upper_target)?;
    Ok((Interval::new(lo, hi), unbounded))
}

/// Closed-form k = 2 estimate `τ̂² = max(0, ((y₂−y₁)² − s₁² − s₂²)/2)`, on
/// which DerSimonian-Laird, REML and Paule-Mandel all agree.
pub fn tau_squared_k2(pair: &StudyPair) -> Result<f64> {
    let (a, b) = pair.require_two()?;
    let d = b.estimate - a.estimate;
    Ok((0.5 * (d * d - a.variance() - b.variance())).max(0.0))
}

pub fn tau_estimate_k2(pair: &StudyPair, level: f64) -> Result<HeterogeneityResult> {
    tau_estimate_k2_with(pair, level, &QProfileConfig::default())
}

pub fn tau_estimate_k2_with(
    pair: &StudyPair,
    level: f64,
    config: &QProfileConfig,
) -> Result<HeterogeneityResult> {
    let tau_hat = tau_squared_k2(pair)?.sqrt();
    let ys = pair.estimates();
    let vs = pair.variances();
    let (interval, upper_unbounded) = q_profile_interval(
        |t| generalized_q(&ys, &vs, t),
        1,
        level,
        config.tau_max_for(&vs),
    )?;
    Ok(HeterogeneityResult {
        tau_hat,
        interval,
        level,
        method: TauMethod::FrequentistK2,
        upper_unbounded,
    })
}

/// Plug-in heterogeneity used by the random-effects methods: the k = 2
/// closed form, or Paule-Mandel for larger k.
pub fn plug_in_tau(pair: &StudyPair) -> Result<f64> {
    if pair.k() == 2 {
        Ok(tau_squared_k2(pair)?.sqrt())
    } else {
        multipair::paule_mandel(std::slice::from_ref(pair))
    }
}

pub fn pooled_effect(pair: &StudyPair, method: EffectMethod, level: f64) -> Result<PooledEffect> {
    let tau = match method {
        EffectMethod::FE => 0.0,
        EffectMethod::RE | EffectMethod::HKSJ | EffectMethod::MKH => plug_in_tau(pair)?,
        EffectMethod::Bayes => {
            return Err(Error::Unsupported(
                "Bayesian pooled effects come from bayes::mu_posterior".into(),
            ))
        }
    };
    pooled_effect_with_tau(pair, method, level, tau)
}

/// Pooled effect at a given heterogeneity value (ignored for FE).
pub fn pooled_effect_with_tau(
    pair: &StudyPair,
    method: EffectMethod,
    level: f64,
    tau: f64,
) -> Result<PooledEffect> {
    if pair.k() < 2 {
        return Err(Error::Unsupported(format!(
            "pair {} needs at least 2 studies",
            pair.pair_id
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "(0, 1)"));
    }
    let ys = pair.estimates();
    let vs = pair.variances();
    let tau = if method == EffectMethod::FE { 0.0 } else { tau };
    let (mu, sw) = weighted_mean(&ys, &vs, tau);
    let df = (pair.k() - 1) as u32;
    let p = 0.5 + 0.5 * level;
    let (variance, quantile) = match method {
        EffectMethod::FE | EffectMethod::RE => (1.0 / sw, normal_quantile(p)?),
        EffectMethod::HKSJ | EffectMethod::MKH => {
            let q = generalized_q(&ys, &vs, tau) / df as f64;
            let hksj = q / sw;
            let var = if method == EffectMethod::MKH {
                hksj.max(1.0 / sw)
            } else {
                hksj
            };
            (var, student_t_quantile(p, df)?)
        }
        EffectMethod::Bayes => unreachable!("handled by caller"),
    };
    let half = quantile * variance.sqrt();
    Ok(PooledEffect::new(
        mu,
        Interval::new(mu - half, mu + half),
        level,
        method,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EffectMeasure;

    fn pair(y: [f64; 2], s: [f64; 2]) -> StudyPair {
        StudyPair::from_estimates("t", EffectMeasure::MeanDifference, &[(y[0], s[0]), (y[1], s[1])])
            .unwrap()
    }

    #[test]
    fn identical_estimates_give_zero_q() {
        let q = cochran_q(&pair([5.0, 5.0], [1.0, 3.0])).unwrap();
        assert_eq!(q.q, 0.0);
        assert_eq!(q.p_value, 1.0);
        assert_eq!(q.df, 1);
    }

    #[test]
    fn k2_q_closed_form() {
        let p = pair([1.0, 4.0], [1.5, 0.5]);
        let q = cochran_q(&p).unwrap();
        assert!((q.q - 9.0 / (2.25 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn anchor_p_values() {
        let p = |q| QResult::from_statistic(q, 1).unwrap().p_value;
        assert!((p(5.6) - 0.018).abs() < 0.002);
        assert!((p(0.0076) - 0.93).abs() < 0.005);
        assert!((p(0.54) - 0.46).abs() < 0.005);
    }

    #[test]
    fn tau_closed_form_examples() {
        let r = tau_estimate_k2(&pair([0.0, 2.0], [1.0, 1.0]), 0.95).unwrap();
        assert!((r.tau_hat - 1.0).abs() < 1e-15);
        assert!(r.interval.contains(r.tau_hat));
        // boundary: (y2 - y1)^2 = s1^2 + s2^2
        let r = tau_estimate_k2(&pair([0.0, 5.0], [3.0, 4.0]), 0.95).unwrap();
        assert_eq!(r.tau_hat, 0.0);
    }

    #[test]
    fn q_profile_bounds_hit_targets() {
        let p = pair([0.0, 6.0], [1.0, 1.2]);
        let r = tau_estimate_k2(&p, 0.95).unwrap();
        let ys = p.estimates();
        let vs = p.variances();
        let lo_t = chisq_quantile(0.975, 1).unwrap();
        let hi_t = chisq_quantile(0.025, 1).unwrap();
        assert!(r.interval.lo > 0.0);
        assert!((generalized_q(&ys, &vs, r.interval.lo) - lo_t).abs() < 1e-6);
        assert!((generalized_q(&ys, &vs, r.interval.hi) - hi_t).abs() < 1e-6);
        // k = 2 profile: d^2 / (S + 2 τ^2) = target
        let s = vs[0] + vs[1];
        let hi = ((36.0 / hi_t - s) / 2.0).sqrt();
        assert!((r.interval.hi - hi).abs() < 1e-8);
        assert!(!r.upper_unbounded);
    }

    #[test]
    fn q_profile_unbounded_flag() {
        let p = pair([0.0, 6.0], [1.0, 1.2]);
        let r = tau_estimate_k2_with(&p, 0.95, &QProfileConfig { tau_max: Some(10.0) }).unwrap();
        assert!(r.upper_unbounded);
        assert_eq!(r.interval.hi, 10.0);
        // identical estimates: profile never crosses either target
        let r = tau_estimate_k2(&pair([1.0, 1.0], [1.0, 1.0]), 0.95).unwrap();
        assert_eq!(r.interval, Interval::new(0.0, 0.0));
    }

    #[test]
    fn fe_equals_re_when_tau_zero() {
        let p = pair([1.0, 1.5], [1.0, 1.0]);
        let fe = pooled_effect(&p, EffectMethod::FE, 0.95).unwrap();
        let re = pooled_effect(&p, EffectMethod::RE, 0.95).unwrap();
        assert_eq!(fe.estimate, re.estimate);
        assert_eq!(fe.interval, re.interval);
    }

    #[test]
    fn mkh_width_ratio_when_homogeneous() {
        let p = pair([1.0, 1.5], [1.0, 1.2]);
        let re = pooled_effect(&p, EffectMethod::RE, 0.95).unwrap();
        let mkh = pooled_effect(&p, EffectMethod::MKH, 0.95).unwrap();
        assert!((mkh.width / re.width - 6.4821).abs() < 1e-3);
    }

    #[test]
    fn hksj_zero_width_and_mkh_fallback() {
        let p = pair([2.0, 2.0], [1.0, 2.0]);
        let h = pooled_effect(&p, EffectMethod::HKSJ, 0.95).unwrap();
        assert_eq!(h.width, 0.0);
        let m = pooled_effect(&p, EffectMethod::MKH, 0.95).unwrap();
        assert!(m.width > 0.0);
    }

    #[test]
    fn hksj_equals_mkh_when_tau_positive() {
        // for k = 2 with τ̂ > 0 the generalized Q at τ̂ is exactly 1
        let p = pair([0.0, 4.0], [1.0, 1.0]);
        let h = pooled_effect(&p, EffectMethod::HKSJ, 0.95).unwrap();
        let m = pooled_effect(&p, EffectMethod::MKH, 0.95).unwrap();
        assert!((h.width - m.width).abs() < 1e-12);
    }

    #[test]
    fn significance_rule() {
        let s = StudyResult::new("a", 1.97, 1.0, EffectMeasure::MeanDifference).unwrap();
        assert!(is_significant(&s, 0.95).unwrap());
        let s = StudyResult::new("a", -1.95, 1.0, EffectMeasure::MeanDifference).unwrap();
        assert!(!is_significant(&s, 0.95).unwrap());
    }

    #[test]
    fn bayes_method_is_rejected_here() {
        let p = pair([0.0, 1.0], [1.0, 1.0]);
        assert!(pooled_effect(&p, EffectMethod::Bayes, 0.95).is_err());
    }
}

//! Probabilities of the four homogeneity-indicator events for a pair, the
//! distribution of Q under heterogeneity, and the I² correspondence.
//!
//! Every event is `|y₂ − y₁| ≤ c` for a threshold `c` depending only on the
//! standard errors, so its probability is `F_χ²₁(c² / Var(y₂ − y₁))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statfn::roots::{brent, expand_upper};
use crate::statfn::{chisq_cdf, chisq_quantile, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The two confidence intervals overlap.
    Overlap,
    /// Cochran's Q test does not reject homogeneity.
    NonsigQ,
    /// Each confidence interval contains the other estimate.
    MutualCoverage,
    /// The heterogeneity estimate is zero.
    ZeroTau,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::Overlap,
        EventKind::NonsigQ,
        EventKind::MutualCoverage,
        EventKind::ZeroTau,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EventKind::Overlap => "overlap",
            EventKind::NonsigQ => "nonsig_q",
            EventKind::MutualCoverage => "mutual_coverage",
            EventKind::ZeroTau => "zero_tau",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "overlap" => Some(EventKind::Overlap),
            "nonsig_q" | "nonsig" => Some(EventKind::NonsigQ),
            "mutual_coverage" | "mutual" => Some(EventKind::MutualCoverage),
            "zero_tau" => Some(EventKind::ZeroTau),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    /// Level of the Q test.
    pub alpha: f64,
    /// Coverage of the per-study confidence intervals.
    pub ci_level: f64,
}

impl EventSpec {
    pub fn new(kind: EventKind) -> Self {
        Self {
            kind,
            alpha: 0.05,
            ci_level: 0.95,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha", self.alpha, "(0, 1)"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::domain("ci_level", self.ci_level, "(0, 1)"));
        }
        Ok(())
    }
}

/// Variance of the difference of the two estimates under heterogeneity τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceConvention {
    /// `σ₁² + σ₂² + 2τ²`, as implied by the hierarchical model.
    #[default]
    #[serde(rename = "model-2tau2")]
    Model2Tau2,
    /// `σ₁² + σ₂² + τ²`, which reproduces older published event tables.
    #[serde(rename = "paper-table1-tau2")]
    Table1Tau2,
}

impl VarianceConvention {
    pub fn tag(self) -> &'static str {
        match self {
            VarianceConvention::Model2Tau2 => "model-2tau2",
            VarianceConvention::Table1Tau2 => "paper-table1-tau2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model" | "model-2tau2" => Some(VarianceConvention::Model2Tau2),
            "table1" | "paper-table1-tau2" => Some(VarianceConvention::Table1Tau2),
            _ => None,
        }
    }

    fn tau_multiplier(self) -> f64 {
        match self {
            VarianceConvention::Model2Tau2 => 2.0,
            VarianceConvention::Table1Tau2 => 1.0,
        }
    }
}

impl fmt::Display for VarianceConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

fn check_sigmas(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 > 0.0 && sigma1.is_finite()) {
        return Err(Error::domain("sigma1", sigma1, "(0, inf)"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain("sigma2", sigma2, "(0, inf)"));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("tau", tau, "[0, inf)"))
    }
}

/// Threshold `c` such that the event holds iff `|y₂ − y₁| ≤ c`.
pub fn event_threshold(spec: &EventSpec, sigma1: f64, sigma2: f64) -> Result<f64> {
    spec.check()?;
    check_sigmas(sigma1, sigma2)?;
    let se_diff = sigma1.hypot(sigma2);
    Ok(match spec.kind {
        EventKind::Overlap => normal_quantile(0.5 + 0.5 * spec.ci_level)? * (sigma1 + sigma2),
        EventKind::MutualCoverage => {
            normal_quantile(0.5 + 0.5 * spec.ci_level)? * sigma1.min(sigma2)
        }
        EventKind::ZeroTau => se_diff,
        EventKind::NonsigQ => normal_quantile(1.0 - 0.5 * spec.alpha)? * se_diff,
    })
}

pub fn difference_variance(sigma1: f64, sigma2: f64, tau: f64, convention: VarianceConvention) -> f64 {
    sigma1 * sigma1 + sigma2 * sigma2 + convention.tau_multiplier() * tau * tau
}

pub fn event_probability(
    spec: &EventSpec,
    sigma1: f64,
    sigma2: f64,
    tau: f64,
    convention: VarianceConvention,
) -> Result<f64> {
    check_tau(tau)?;
    let c = event_threshold(spec, sigma1, sigma2)?;
    chisq_cdf(c * c / difference_variance(sigma1, sigma2, tau, convention), 1)
}

/// Whether the event holds for observed estimates `y₁, y₂` with standard
/// errors `σ₁, σ₂`.
pub fn event_indicator(spec: &EventSpec, y1: f64, sigma1: f64, y2: f64, sigma2: f64) -> Result<bool> {
    let d = y2 - y1;
    match spec.kind {
        // same comparison as the truncated k = 2 heterogeneity estimate
        EventKind::ZeroTau => {
            check_sigmas(sigma1, sigma2)?;
            Ok(d * d <= sigma1 * sigma1 + sigma2 * sigma2)
        }
        EventKind::NonsigQ => {
            spec.check()?;
            check_sigmas(sigma1, sigma2)?;
            let q = d * d / (sigma1 * sigma1 + sigma2 * sigma2);
            Ok(q <= chisq_quantile(1.0 - spec.alpha, 1)?)
        }
        _ => Ok(d.abs() <= event_threshold(spec, sigma1, sigma2)?),
    }
}

/// CDF of Cochran's Q (k = 2) at `x` when the true heterogeneity is `tau`:
/// Q is a scaled χ²₁ with factor `Var(y₂ − y₁)/(σ₁² + σ₂²)`.
pub fn q_cdf_under_alternative(
    x: f64,
    sigma1: f64,
    sigma2: f64,
    tau: f64,
    convention: VarianceConvention,
) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("x", x, "[0, inf)"));
    }
    check_sigmas(sigma1, sigma2)?;
    check_tau(tau)?;
    let s = sigma1 * sigma1 + sigma2 * sigma2;
    chisq_cdf(x * s / difference_variance(sigma1, sigma2, tau, convention), 1)
}

/// I² for heterogeneity ratio `r = τ/σ` with equal standard errors.
pub fn i2_from_ratio(ratio: f64) -> Result<f64> {
    if !(ratio >= 0.0) {
        return Err(Error::domain("tau/sigma", ratio, "[0, inf)"));
    }
    if ratio.is_infinite() {
        return Ok(1.0);
    }
    let r2 = ratio * ratio;
    Ok(r2 / (1.0 + r2))
}

pub fn ratio_from_i2(i2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&i2) {
        return Err(Error::domain("I2", i2, "[0, 1)"));
    }
    Ok((i2 / (1.0 - i2)).sqrt())
}

/// Heterogeneity ratio τ/σ (equal standard errors) at which the event has
/// probability `target`.
pub fn invert_event_probability(
    spec: &EventSpec,
    target: f64,
    convention: VarianceConvention,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain("target probability", target, "(0, 1)"));
    }
    let prob = |r: f64| event_probability(spec, 1.0, 1.0, r, convention);
    let p0 = prob(0.0)?;
    if target >= p0 {
        return Err(Error::NoSolution(format!(
            "{} has probability {p0:.6} at tau = 0; target {target} is not below it",
            spec.kind
        )));
    }
    // probabilities are finite for valid inputs, checked above
    let f = |r: f64| prob(r).unwrap_or(f64::NAN) - target;
    let hi = expand_upper(f, 0.0, 1.0, 1e9)?;
    brent(f, 0.0, hi, 1e-13)
}

/// Event probabilities along a grid of τ/σ with equal standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTable {
    pub convention: VarianceConvention,
    pub events: Vec<EventSpec>,
    pub ratios: Vec<f64>,
    pub i2: Vec<f64>,
    /// `rows[i][j]` is the probability of event `j` at `ratios[i]`.
    pub rows: Vec<Vec<f64>>,
}

pub fn probability_curves(
    events: &[EventSpec],
    ratios: &[f64],
    convention: VarianceConvention,
) -> Result<ProbabilityTable> {
    let rows = ratios
        .iter()
        .map(|&r| {
            events
                .iter()
                .map(|e| event_probability(e, 1.0, 1.0, r, convention))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let i2 = ratios
        .iter()
        .map(|&r| i2_from_ratio(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable {
        convention,
        events: events.to_vec(),
        ratios: ratios.to_vec(),
        i2,
        rows,
    })
}

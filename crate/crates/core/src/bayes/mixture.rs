//! Finite scale/location mixtures used for marginal posteriors and
//! predictive distributions.

use serde::Serialize;

use crate::error::Result;
use crate::statfn::roots::brent;
use crate::statfn::{normal_cdf, normal_pdf, normal_sf};

/// Σ wᵢ·Normal(meanᵢ, sdᵢ²) with weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl NormalMixture {
    /// Drops negligible components and renormalizes the weights.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let keep = |w: f64| w > 1e-16 * total;
        let mut out = Self {
            weights: Vec::new(),
            means: Vec::new(),
            sds: Vec::new(),
        };
        for ((w, m), s) in weights.into_iter().zip(means).zip(sds) {
            if keep(w) {
                out.weights.push(w / total);
                out.means.push(m);
                out.sds.push(s);
            }
        }
        out
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * normal_pdf((x - m) / s) / s)
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * normal_cdf((x - m) / s))
            .sum()
    }

    fn sf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * normal_sf((x - m) / s))
            .sum()
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((&w, &m), &s)| (w, m, s))
    }

    /// Exact quantile by Brent on the mixture CDF (upper tail for p > ½).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let lo = self
            .components()
            .map(|(_, m, s)| m - 40.0 * s)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .components()
            .map(|(_, m, s)| m + 40.0 * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = self.sds.iter().copied().fold(f64::INFINITY, f64::min);
        if p < 0.5 {
            brent(|x| self.cdf(x) - p, lo, hi, 1e-13 * scale)
        } else {
            brent(|x| (1.0 - p) - self.sf(x), lo, hi, 1e-13 * scale)
        }
    }
}

/// Σ wᵢ·HalfNormal(scaleᵢ) on τ ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfNormalMixture {
    pub weights: Vec<f64>,
    pub scales: Vec<f64>,
}

impl HalfNormalMixture {
    pub fn new(weights: Vec<f64>, scales: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
            scales,
        }
    }

    pub fn point_mass(scale: f64) -> Self {
        Self::new(vec![1.0], vec![scale])
    }

    pub fn pdf(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        self.weights
            .iter()
            .zip(&self.scales)
            .map(|(w, s)| w * 2.0 * normal_pdf(tau / s) / s)
            .sum()
    }

    pub fn cdf(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        1.0 - self.sf(tau)
    }

    /// P(τ* > tau) = Σ wᵢ·2·(1 − Φ(tau/sᵢ)).
    pub fn sf(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 1.0;
        }
        self.weights
            .iter()
            .zip(&self.scales)
            .map(|(w, s)| w * 2.0 * normal_sf(tau / s))
            .sum()
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        let smax = self.scales.iter().copied().fold(0.0, f64::max);
        let smin = self.scales.iter().copied().fold(f64::INFINITY, f64::min);
        brent(|t| (1.0 - p) - self.sf(t), 0.0, 40.0 * smax, 1e-13 * smin)
    }
}

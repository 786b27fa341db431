//! Discretized densities on explicit knot sets.
//!
//! The density is taken as piecewise linear between knots, so the CDF is
//! piecewise quadratic and agrees with the trapezoid rule at every knot.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::statfn::quad::linspace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPosterior {
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    /// ln of the trapezoid integral of the unnormalized density.
    log_normalizer: f64,
}

impl GridPosterior {
    /// Builds a normalized density from unnormalized log-density values at
    /// strictly increasing knots.
    pub fn from_log_density(grid: Vec<f64>, log_density: &[f64]) -> Result<Self> {
        if grid.len() < 2 || grid.len() != log_density.len() {
            return Err(Error::Numerical(
                "grid posterior needs at least two knots with one value each".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numerical("grid knots must be strictly increasing".into()));
        }
        let max = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("log density has no finite maximum".into()));
        }
        let scaled: Vec<f64> = log_density.iter().map(|l| (l - max).exp()).collect();
        let mut post = Self::from_density(grid, scaled)?;
        post.log_normalizer += max;
        Ok(post)
    }

    /// Builds from (unnormalized, nonnegative) density values.
    pub fn from_density(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..grid.len() {
            acc += 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Numerical(format!("density integrates to {acc}")));
        }
        let density = density.into_iter().map(|d| d / acc).collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            grid,
            density,
            cdf,
            log_normalizer: acc.ln(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Normalized density at the knots.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Trapezoid integral of the normalized density; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        crate::statfn::quad::trapezoid(&self.grid, &self.density)
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    fn cell(&self, x: f64) -> usize {
        let n = self.grid.len();
        match self.grid.binary_search_by(|g| g.partial_cmp(&x).expect("finite knots")) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let i = self.cell(x);
        let h = self.grid[i + 1] - self.grid[i];
        let t = (x - self.grid[i]) / h;
        self.density[i] * (1.0 - t) + self.density[i + 1] * t
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let i = self.cell(x);
        let h = self.grid[i + 1] - self.grid[i];
        let t = x - self.grid[i];
        let slope = (self.density[i + 1] - self.density[i]) / h;
        self.cdf[i] + self.density[i] * t + 0.5 * slope * t * t
    }

    /// Quantile for p in [0, 1], exact for the piecewise-linear density.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if p <= 0.0 {
            // first knot with positive mass to its right
            return self.lower();
        }
        if p >= 1.0 {
            return self.upper();
        }
        let i = match self.cdf.binary_search_by(|c| c.partial_cmp(&p).expect("finite cdf")) {
            Ok(i) => return self.grid[i],
            Err(i) => i - 1,
        };
        let h = self.grid[i + 1] - self.grid[i];
        let b = self.density[i];
        let c = 0.5 * (self.density[i + 1] - self.density[i]) / h;
        let delta = p - self.cdf[i];
        let disc = (b * b + 4.0 * c * delta).max(0.0);
        let denom = b + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * delta / denom } else { 0.0 };
        self.grid[i] + t.clamp(0.0, h)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        // exact for piecewise-linear density
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, f)| {
                let h = x[1] - x[0];
                h / 6.0 * (f[0] * (2.0 * x[0] + x[1]) + f[1] * (x[0] + 2.0 * x[1]))
            })
            .sum()
    }

    pub fn equal_tailed_interval(&self, level: f64) -> Interval {
        Interval::new(
            self.quantile(0.5 - 0.5 * level),
            self.quantile(0.5 + 0.5 * level),
        )
    }

    /// Narrowest interval holding `level` of the mass.
    pub fn shortest_interval(&self, level: f64) -> Interval {
        shortest_by_quantile(|p| self.quantile(p), level).1
    }
}

/// Minimizes `q(a + level) − q(a)` over `a ∈ [0, 1 − level]`: a coarse scan
/// followed by golden-section refinement around the best scan point.
/// Returns the optimal lower tail mass and the interval.
pub(crate) fn shortest_by_quantile<Q: Fn(f64) -> f64>(q: Q, level: f64) -> (f64, Interval) {
    let span = 1.0 - level;
    let width = |a: f64| q(a + level) - q(a);
    const SCAN: usize = 200;
    let scan = linspace(0.0, span, SCAN + 1);
    let (best_i, _) = scan
        .iter()
        .map(|&a| width(a))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, w)| if w < acc.1 { (i, w) } else { acc });
    let mut lo = scan[best_i.saturating_sub(1)];
    let mut hi = scan[(best_i + 1).min(SCAN)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (width(x1), width(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = width(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = width(x2);
        }
    }
    let mut best = (0.5 * (lo + hi), width(0.5 * (lo + hi)));
    for a in [scan[best_i], 0.0, span] {
        let w = width(a);
        if w <= best.1 {
            best = (a, w);
        }
    }
    (best.0, Interval::new(q(best.0), q(best.0 + level)))
}

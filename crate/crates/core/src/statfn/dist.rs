//! Distribution functions: standard normal, chi-square, Student-t and the
//! asymptotic Kolmogorov distribution.
//!
//! CDFs target an absolute error of 1e-10 or better; quantiles are right
//! inverses to 1e-8 or better.

use std::f64::consts::{PI, SQRT_2};

use super::roots::{brent, expand_upper};
use super::special::{beta_inc, erfc, gamma_p, gamma_q};
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn check_open_unit(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, p, "(0, 1)"))
    }
}

fn check_df(df: u32) -> Result<()> {
    if df >= 1 {
        Ok(())
    } else {
        Err(Error::domain("df", df as f64, "df >= 1"))
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail 1 − Φ(x), without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    Ok(normal_quantile_unchecked(p))
}

// Rational approximation (relative error ~1e-9) for the lower half, polished
// by two Halley steps against the erfc-based CDF.
pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile_unchecked(1.0 - p);
    }
    if p == 0.5 {
        return 0.0;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let mut x = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Namespace for the standard normal distribution functions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl Gaussian {
    pub fn cdf(x: f64) -> f64 {
        normal_cdf(x)
    }

    pub fn quantile(p: f64) -> Result<f64> {
        normal_quantile(p)
    }
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chisq_cdf(x: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("x", x, "x >= 0"));
    }
    Ok(gamma_p(0.5 * df as f64, 0.5 * x))
}

/// Chi-square upper tail probability, the p-value of an observed statistic.
pub fn chisq_sf(x: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("x", x, "x >= 0"));
    }
    Ok(gamma_q(0.5 * df as f64, 0.5 * x))
}

/// Chi-square quantile: the `x` with `chisq_cdf(x, df) = p`.
pub fn chisq_quantile(p: f64, df: u32) -> Result<f64> {
    check_open_unit("p", p)?;
    check_df(df)?;
    let a = 0.5 * df as f64;
    let f = |x: f64| {
        if p < 0.5 {
            gamma_p(a, 0.5 * x) - p
        } else {
            (1.0 - p) - gamma_q(a, 0.5 * x)
        }
    };
    let hi = expand_upper(f, 0.0, 2.0 * df as f64 + 2.0, 1e7)?;
    brent(f, 0.0, hi, 1e-15)
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    let tail = t_tail(t.abs(), df as f64);
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

// P(T > t) for t >= 0
fn t_tail(t: f64, nu: f64) -> f64 {
    0.5 * beta_inc(nu / (nu + t * t), 0.5 * nu, 0.5)
}

/// Student-t quantile for p in (0, 1).
pub fn student_t_quantile(p: f64, df: u32) -> Result<f64> {
    check_open_unit("p", p)?;
    check_df(df)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    let upper = p.min(1.0 - p);
    let nu = df as f64;
    let f = |t: f64| t_tail(t, nu) - upper;
    let hi = expand_upper(f, 0.0, 2.0, 1e15)?;
    let t = brent(f, 0.0, hi, 1e-13 * hi.max(1.0))?;
    Ok(if p > 0.5 { t } else { -t })
}

/// Asymptotic Kolmogorov p-value of a one-sample KS statistic `d` from `n`
/// observations, using λ = √n·d.
pub fn kolmogorov_p(d: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::domain("d", d, "[0, 1]"));
    }
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    Ok(kolmogorov_sf((n as f64).sqrt() * d))
}

/// Upper tail of the Kolmogorov distribution, P(K > λ).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // theta-function form; converges fast for small λ
        let c = PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=100 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            s += term;
            if term < 1e-16 {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-16 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_examples() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_cdf_symmetry() {
        for i in 0..100 {
            let x = 0.083 * i as f64;
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_quantile_far_tails() {
        for &p in &[1e-300, 1e-100, 1e-20, 1e-8, 0.0123] {
            let x = normal_quantile(p).unwrap();
            assert!((normal_cdf(x) / p - 1.0).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn chisq_examples() {
        assert!((chisq_quantile(0.95, 1).unwrap() - 3.841_458_820_694_124).abs() < 1e-9);
        assert_eq!(chisq_cdf(0.0, 1).unwrap(), 0.0);
        assert!((chisq_cdf(1.0, 1).unwrap() - 0.682_689_492_137_086).abs() < 1e-12);
        assert!(chisq_cdf(-1.0, 1).is_err());
        assert!(chisq_cdf(1.0, 0).is_err());
        // df = 2 is exponential with mean 2
        assert!((chisq_cdf(3.0, 2).unwrap() - (1.0 - (-1.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn chisq_df1_identity() {
        for i in 0..=400 {
            let x = 0.1 * i as f64;
            let lhs = chisq_cdf(x, 1).unwrap();
            let rhs = 2.0 * normal_cdf(x.sqrt()) - 1.0;
            assert!((lhs - rhs).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn chisq_lower_quantile_for_profile_bounds() {
        let q = chisq_quantile(0.025, 1).unwrap();
        let z = normal_quantile(0.5125).unwrap();
        assert!((q / (z * z) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn student_t_examples() {
        let t = student_t_quantile(0.975, 1).unwrap();
        assert!((t - (0.475 * PI).tan()).abs() < 1e-8);
        assert!((t - 12.706_204_736_174_7).abs() < 1e-8);
        assert_eq!(student_t_quantile(0.5, 7).unwrap(), 0.0);
        let ratio = t / normal_quantile(0.975).unwrap();
        // tan(0.475π)/z₀.₉₇₅, roughly six and a half
        assert!((ratio - 6.482_876_642_836).abs() < 1e-9);
        assert!(student_t_quantile(1.2, 3).is_err());
    }

    #[test]
    fn student_t_cauchy_cdf() {
        for i in -40..=40 {
            let t = 0.37 * i as f64;
            let exact = 0.5 + t.atan() / PI;
            assert!((student_t_cdf(t, 1).unwrap() - exact).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn student_t_known_quantiles() {
        assert!((student_t_quantile(0.975, 2).unwrap() - 4.302_652_729_911_275).abs() < 1e-9);
        assert!((student_t_quantile(0.975, 12).unwrap() - 2.178_812_829_667_228).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_examples() {
        assert_eq!(kolmogorov_p(0.0, 26).unwrap(), 1.0);
        let n = 400usize;
        let p = kolmogorov_p(1.36 / (n as f64).sqrt(), n).unwrap();
        assert!((p - 0.05).abs() < 0.002, "p = {p}");
        assert!(kolmogorov_p(1.5, 3).is_err());
    }

    #[test]
    fn kolmogorov_branches_agree() {
        let lam = 1.18;
        let below = kolmogorov_sf(lam - 1e-9);
        let above = kolmogorov_sf(lam + 1e-9);
        assert!((below - above).abs() < 1e-8);
    }
}

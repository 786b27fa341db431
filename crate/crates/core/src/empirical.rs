//! Descriptive analysis of a corpus of pairs: observed event frequencies,
//! direction/significance concordance, precision ratios and uniformity of
//! the Q-test p-values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{event_indicator, EventKind, EventSpec};
use crate::freq::cochran_q;
use crate::model::TwinCorpus;
use crate::statfn::{kolmogorov_p, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EventCounts {
    pub overlap: usize,
    pub nonsig_q: usize,
    pub mutual_coverage: usize,
    pub zero_tau: usize,
}

impl EventCounts {
    pub fn get(&self, kind: EventKind) -> usize {
        match kind {
            EventKind::Overlap => self.overlap,
            EventKind::NonsigQ => self.nonsig_q,
            EventKind::MutualCoverage => self.mutual_coverage,
            EventKind::ZeroTau => self.zero_tau,
        }
    }

    fn bump(&mut self, kind: EventKind) {
        match kind {
            EventKind::Overlap => self.overlap += 1,
            EventKind::NonsigQ => self.nonsig_q += 1,
            EventKind::MutualCoverage => self.mutual_coverage += 1,
            EventKind::ZeroTau => self.zero_tau += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSummary {
    pub median: f64,
    pub max: f64,
}

fn ratio_summary(mut ratios: Vec<f64>) -> Option<RatioSummary> {
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let median = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };
    Some(RatioSummary {
        median,
        max: ratios[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub n_pairs: usize,
    pub event_counts: EventCounts,
    /// Counts divided by `n_pairs`, in the order overlap, nonsig Q, mutual
    /// coverage, zero τ̂.
    pub event_frequencies: [f64; 4],
    /// Rows: same / opposite direction; columns: none / one / both
    /// studies significant.
    pub concordance: [[usize; 3]; 2],
    pub size_ratio: Option<RatioSummary>,
    pub se_ratio: RatioSummary,
    /// Q-test p-value per pair, in corpus order.
    pub q_pvalues: Vec<f64>,
    pub notes: Vec<String>,
}

/// Summarizes a corpus of two-study pairs. Events use 95% intervals
/// `yᵢ ± z·sᵢ` and a 5% Q test; a study is significant when `|yᵢ/sᵢ| > z`.
pub fn summarize_corpus(corpus: &TwinCorpus) -> Result<CorpusSummary> {
    if corpus.is_empty() {
        return Err(Error::Unsupported("empty corpus".into()));
    }
    let z = normal_quantile(0.975)?;
    let mut counts = EventCounts::default();
    let mut concordance = [[0usize; 3]; 2];
    let mut size_ratios = Vec::new();
    let mut se_ratios = Vec::new();
    let mut q_pvalues = Vec::new();
    let mut missing_sizes = Vec::new();
    for pair in &corpus.pairs {
        let (a, b) = pair.require_two()?;
        for kind in EventKind::ALL {
            if event_indicator(&EventSpec::new(kind), a.estimate, a.std_err, b.estimate, b.std_err)? {
                counts.bump(kind);
            }
        }
        let significant = [a, b]
            .iter()
            .filter(|s| (s.estimate / s.std_err).abs() > z)
            .count();
        // a zero estimate has no direction and is counted as agreeing
        let row = usize::from(a.estimate * b.estimate < 0.0);
        concordance[row][significant] += 1;
        se_ratios.push(a.std_err.max(b.std_err) / a.std_err.min(b.std_err));
        match (a.sample_size, b.sample_size) {
            (Some(na), Some(nb)) if na > 0 && nb > 0 => {
                size_ratios.push(na.max(nb) as f64 / na.min(nb) as f64)
            }
            _ => missing_sizes.push(pair.pair_id.clone()),
        }
        q_pvalues.push(cochran_q(pair)?.p_value);
    }
    let n = corpus.len();
    let mut notes = Vec::new();
    let size_ratio = if missing_sizes.is_empty() {
        ratio_summary(size_ratios)
    } else {
        notes.push(format!(
            "size ratio omitted: sample sizes missing for {}",
            missing_sizes.join(", ")
        ));
        None
    };
    let freq = |k| counts.get(k) as f64 / n as f64;
    Ok(CorpusSummary {
        n_pairs: n,
        event_counts: counts,
        event_frequencies: EventKind::ALL.map(freq),
        concordance,
        size_ratio,
        se_ratio: ratio_summary(se_ratios).expect("nonempty corpus"),
        q_pvalues,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityDiagnostics {
    pub n: usize,
    pub ks_d: f64,
    pub ks_p: f64,
    pub min_p: f64,
    /// Beta(1, n) CDF at `min_p`.
    pub min_p_quantile: f64,
    /// Number of repeated values among the p-values.
    pub ties: usize,
}

/// `1 − (1 − p)ⁿ`, the CDF of the minimum of n uniforms.
pub fn min_p_quantile(min_p: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&min_p) {
        return Err(Error::domain("min_p", min_p, "[0, 1]"));
    }
    if n == 0 {
        return Err(Error::domain("n", 0.0, "[1, inf)"));
    }
    Ok(-(n as f64 * (-min_p).ln_1p()).exp_m1())
}

/// One-sample Kolmogorov-Smirnov comparison with Uniform(0, 1) plus the
/// minimum-p check.
pub fn uniformity_diagnostics(p_values: &[f64]) -> Result<UniformityDiagnostics> {
    if p_values.is_empty() {
        return Err(Error::domain("number of p-values", 0.0, "[1, inf)"));
    }
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain("p-value", bad, "[0, 1]"));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let ks_d = sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / nf - p).max(p - i as f64 / nf))
        .fold(0.0, f64::max);
    let ties = sorted.windows(2).filter(|w| w[0] == w[1]).count();
    let min_p = sorted[0];
    Ok(UniformityDiagnostics {
        n,
        ks_d,
        ks_p: kolmogorov_p(ks_d, n)?,
        min_p,
        min_p_quantile: min_p_quantile(min_p, n)?,
        ties,
    })
}

/// Whole-percent rendering, e.g. 0.372 → "37%".
pub fn format_percent(x: f64) -> String {
    format!("{:.0}%", 100.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::tau_squared_k2;
    use crate::model::{EffectMeasure, StudyPair, StudyResult};

    fn pair(id: &str, a: (f64, f64, u64), b: (f64, f64, u64)) -> StudyPair {
        let m = EffectMeasure::LogOddsRatio;
        let s1 = StudyResult::new("a", a.0, a.1, m).unwrap().with_sample_size(a.2);
        let s2 = StudyResult::new("b", b.0, b.1, m).unwrap().with_sample_size(b.2);
        StudyPair::new(id, vec![s1, s2], m)
    }

    #[test]
    fn identical_pairs_fire_everything() {
        let c = TwinCorpus::new(
            vec![
                pair("a", (0.3, 0.1, 100), (0.3, 0.2, 120)),
                pair("b", (-1.0, 0.5, 50), (-1.0, 0.4, 50)),
            ],
            None,
        )
        .unwrap();
        let s = summarize_corpus(&c).unwrap();
        assert_eq!(s.event_frequencies, [1.0; 4]);
        for p in &c.pairs {
            assert_eq!(tau_squared_k2(p).unwrap(), 0.0);
        }
        assert_eq!(s.concordance.iter().flatten().sum::<usize>(), 2);
        assert_eq!(s.concordance[0][2], 1);
        assert_eq!(s.concordance[0][1], 1);
        assert_eq!(s.size_ratio.unwrap().max, 1.2);
        assert_eq!(s.se_ratio.max, 2.0);
        assert_eq!(s.se_ratio.median, 1.625);
    }

    #[test]
    fn missing_sizes_noted() {
        let m = EffectMeasure::LogOddsRatio;
        let p = StudyPair::from_estimates("x", m, &[(0.1, 0.2), (-0.5, 0.2)]).unwrap();
        let s = summarize_corpus(&TwinCorpus::new(vec![p], None).unwrap()).unwrap();
        assert!(s.size_ratio.is_none());
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.concordance[1][1], 1);
    }

    #[test]
    fn min_p_quantile_examples() {
        let q = min_p_quantile(0.0177, 26).unwrap();
        assert!((q - 0.372).abs() < 0.003);
        assert_eq!(format_percent(q), "37%");
        assert!((min_p_quantile(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let direct = 1.0 - (1.0 - p).powi(26);
            assert!((min_p_quantile(p, 26).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn equispaced_p_values() {
        let n = 25;
        let ps: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let u = uniformity_diagnostics(&ps).unwrap();
        assert!((u.ks_d - 1.0 / (n + 1) as f64).abs() < 1e-15);
        assert!(u.ks_p > 0.999);
        assert_eq!(u.ties, 0);
        assert!(uniformity_diagnostics(&[]).is_err());
        assert!(uniformity_diagnostics(&[1.2]).is_err());
    }
}

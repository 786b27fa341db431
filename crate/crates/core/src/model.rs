//! Domain types shared by every analysis: studies, pairs, corpora, and the
//! result records for heterogeneity and pooled effects.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statfn::normal_quantile;

/// Effect measure of a study estimate. Ratio measures are always held on the
/// log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectMeasure {
    #[serde(rename = "MD")]
    MeanDifference,
    #[serde(rename = "logOR")]
    LogOddsRatio,
    #[serde(rename = "logRR")]
    LogRiskRatio,
    #[serde(rename = "logIRR")]
    LogRateRatio,
    #[serde(rename = "logHR")]
    LogHazardRatio,
}

impl EffectMeasure {
    pub const ALL: [EffectMeasure; 5] = [
        EffectMeasure::MeanDifference,
        EffectMeasure::LogOddsRatio,
        EffectMeasure::LogRiskRatio,
        EffectMeasure::LogRateRatio,
        EffectMeasure::LogHazardRatio,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EffectMeasure::MeanDifference => "MD",
            EffectMeasure::LogOddsRatio => "logOR",
            EffectMeasure::LogRiskRatio => "logRR",
            EffectMeasure::LogRateRatio => "logIRR",
            EffectMeasure::LogHazardRatio => "logHR",
        }
    }

    /// Accepts the canonical tags and the bare ratio names (`OR`, `RR`,
    /// `IRR`, `HR`), case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bare = lower.strip_prefix("log").unwrap_or(&lower);
        match bare {
            "md" if !lower.starts_with("log") => Some(EffectMeasure::MeanDifference),
            "or" => Some(EffectMeasure::LogOddsRatio),
            "rr" => Some(EffectMeasure::LogRiskRatio),
            "irr" => Some(EffectMeasure::LogRateRatio),
            "hr" => Some(EffectMeasure::LogHazardRatio),
            _ => None,
        }
    }

    pub fn scale(self) -> Scale {
        match self {
            EffectMeasure::MeanDifference => Scale::Identity,
            _ => Scale::Log,
        }
    }

    pub fn is_ratio(self) -> bool {
        self.scale() == Scale::Log
    }
}

impl fmt::Display for EffectMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Identity,
    Log,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" | "linear" => Some(Scale::Identity),
            "log" => Some(Scale::Log),
            _ => None,
        }
    }
}

/// One study's estimate and standard error on the analysis scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub label: String,
    pub estimate: f64,
    pub std_err: f64,
    pub measure: EffectMeasure,
    pub sample_size: Option<u64>,
}

impl StudyResult {
    pub fn new(
        label: impl Into<String>,
        estimate: f64,
        std_err: f64,
        measure: EffectMeasure,
    ) -> Result<Self> {
        let study = Self {
            label: label.into(),
            estimate,
            std_err,
            measure,
            sample_size: None,
        };
        let issues = study.issues();
        if issues.is_empty() {
            Ok(study)
        } else {
            Err(ValidationReport::failed(format!("study {}", study.label), issues).into())
        }
    }

    pub fn with_sample_size(mut self, n: u64) -> Self {
        self.sample_size = Some(n);
        self
    }

    pub fn variance(&self) -> f64 {
        self.std_err * self.std_err
    }

    /// Symmetric confidence interval `y ± z·s` at `level`.
    pub fn interval(&self, level: f64) -> Result<Interval> {
        let z = normal_quantile(0.5 + 0.5 * level)?;
        Ok(Interval::new(
            self.estimate - z * self.std_err,
            self.estimate + z * self.std_err,
        ))
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.estimate.is_finite() {
            out.push(format!("study {}: estimate must be finite", self.label));
        }
        if !(self.std_err > 0.0 && self.std_err.is_finite()) {
            out.push(format!("study {}: std_err must be positive", self.label));
        }
        if self.sample_size == Some(0) {
            out.push(format!("study {}: sample_size must be positive", self.label));
        }
        out
    }
}

/// Converts a ratio estimate with its confidence interval into a log-scale
/// study result. The standard error comes from the full interval width:
/// `s = (ln hi − ln lo) / (2·z)`.
pub fn from_ratio_ci(
    label: impl Into<String>,
    point: f64,
    lo: f64,
    hi: f64,
    level: f64,
    measure: EffectMeasure,
) -> Result<StudyResult> {
    let label = label.into();
    let mut issues = Vec::new();
    if !measure.is_ratio() {
        issues.push(format!("measure {measure} is not a ratio measure"));
    }
    if !(point > 0.0) {
        issues.push("point must be positive".to_string());
    }
    if !(lo > 0.0) {
        issues.push("ci_lower must be positive".to_string());
    }
    if !(hi > 0.0) {
        issues.push("ci_upper must be positive".to_string());
    }
    if issues.is_empty() {
        if !(lo < point) {
            issues.push("ci_lower must be below the point estimate".to_string());
        }
        if !(point < hi) {
            issues.push("ci_upper must be above the point estimate".to_string());
        }
    }
    if !(level > 0.0 && level < 1.0) {
        issues.push("level must lie in (0, 1)".to_string());
    }
    if !issues.is_empty() {
        return Err(ValidationReport::failed(format!("study {label}"), issues).into());
    }
    let z = normal_quantile(0.5 + 0.5 * level)?;
    let std_err = (hi.ln() - lo.ln()) / (2.0 * z);
    StudyResult::new(label, point.ln(), std_err, measure)
}

/// Relative difference between the upper and lower half-widths of a ratio CI
/// on the log scale, |u − l| / ((u + l)/2).
pub fn log_ci_asymmetry(point: f64, lo: f64, hi: f64) -> f64 {
    let upper = hi.ln() - point.ln();
    let lower = point.ln() - lo.ln();
    (upper - lower).abs() / (0.5 * (upper + lower))
}

/// Half-width asymmetry above which ingestion emits a warning.
pub const CI_ASYMMETRY_WARNING: f64 = 0.05;

/// A twin pair (or small set) of studies sharing one effect measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPair {
    pub pair_id: String,
    pub studies: Vec<StudyResult>,
    pub measure: EffectMeasure,
    pub scale: Scale,
}

impl StudyPair {
    /// Builds a pair with the scale implied by `measure`. Not validated; see
    /// [`validate_pair`].
    pub fn new(pair_id: impl Into<String>, studies: Vec<StudyResult>, measure: EffectMeasure) -> Self {
        Self {
            pair_id: pair_id.into(),
            studies,
            measure,
            scale: measure.scale(),
        }
    }

    /// Convenience constructor for two studies given as `(y, s)`.
    pub fn from_estimates(
        pair_id: impl Into<String>,
        measure: EffectMeasure,
        data: &[(f64, f64)],
    ) -> Result<Self> {
        let pair_id = pair_id.into();
        let studies = data
            .iter()
            .enumerate()
            .map(|(i, &(y, s))| StudyResult::new(format!("{pair_id}-{}", i + 1), y, s, measure))
            .collect::<Result<Vec<_>>>()?;
        validate_pair(Self::new(pair_id, studies, measure)).map_err(Error::from)
    }

    pub fn k(&self) -> usize {
        self.studies.len()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.estimate).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.studies.iter().map(StudyResult::variance).collect()
    }

    pub fn is_log_scale(&self) -> bool {
        self.scale == Scale::Log
    }

    pub(crate) fn require_two(&self) -> Result<(&StudyResult, &StudyResult)> {
        match self.studies.as_slice() {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Unsupported(format!(
                "pair {} has {} studies; this operation needs exactly 2",
                self.pair_id,
                self.k()
            ))),
        }
    }
}

/// Checks every pair invariant, returning the pair unchanged when they all
/// hold and a report listing each violation otherwise.
pub fn validate_pair(pair: StudyPair) -> std::result::Result<StudyPair, ValidationReport> {
    let mut issues = Vec::new();
    if pair.k() < 2 {
        issues.push(format!("at least 2 studies required, found {}", pair.k()));
    }
    for s in &pair.studies {
        issues.extend(s.issues());
    }
    let measures: HashSet<EffectMeasure> = pair.studies.iter().map(|s| s.measure).collect();
    if measures.len() > 1 {
        issues.push("mixed effect measures".to_string());
    } else if let Some(m) = measures.iter().next() {
        if *m != pair.measure {
            issues.push(format!(
                "study measure {m} does not match pair measure {}",
                pair.measure
            ));
        }
    }
    if pair.scale != pair.measure.scale() {
        issues.push(format!(
            "mixed scales: measure {} is analysed on the {:?} scale",
            pair.measure,
            pair.measure.scale()
        ));
    }
    if issues.is_empty() {
        Ok(pair)
    } else {
        Err(ValidationReport::failed(format!("pair {}", pair.pair_id), issues))
    }
}

/// Collection of twin pairs with unique identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinCorpus {
    pub pairs: Vec<StudyPair>,
    pub provenance: Option<String>,
}

impl TwinCorpus {
    pub fn new(pairs: Vec<StudyPair>, provenance: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        let dups: Vec<String> = pairs
            .iter()
            .filter(|p| !seen.insert(p.pair_id.clone()))
            .map(|p| format!("duplicate pair_id {}", p.pair_id))
            .collect();
        if !dups.is_empty() {
            return Err(ValidationReport::failed("corpus".to_string(), dups).into());
        }
        Ok(Self { pairs, provenance })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, pair_id: &str) -> Option<&StudyPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }

    /// The sub-corpus of log-scale (ratio measure) pairs.
    pub fn log_scale_subset(&self) -> TwinCorpus {
        TwinCorpus {
            pairs: self.pairs.iter().filter(|p| p.is_log_scale()).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// List of invariant violations (and non-fatal warnings) for one subject.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub subject: String,
    pub issues: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn failed(subject: String, issues: Vec<String>) -> Self {
        Self {
            subject,
            issues,
            warnings: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.issues.join("; "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauMethod {
    #[serde(rename = "freq-k2")]
    FrequentistK2,
    #[serde(rename = "PM-joint")]
    PauleMandelJoint,
    #[serde(rename = "bayes-median")]
    BayesMedian,
}

/// Heterogeneity point estimate with its interval.
///
/// For the frequentist and Bayesian-median methods the point lies inside the
/// interval. The Q-profile interval is not built around the point, but for
/// the k = 2 closed form and Paule-Mandel the point is the root of the same
/// profile at its median, so it is always covered as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityResult {
    pub tau_hat: f64,
    pub interval: Interval,
    pub level: f64,
    pub method: TauMethod,
    /// The upper bound hit the search limit rather than a profile crossing.
    pub upper_unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectMethod {
    FE,
    RE,
    HKSJ,
    #[serde(rename = "mKH")]
    MKH,
    Bayes,
}

impl EffectMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fe" => Some(EffectMethod::FE),
            "re" => Some(EffectMethod::RE),
            "hksj" => Some(EffectMethod::HKSJ),
            "mkh" => Some(EffectMethod::MKH),
            "bayes" => Some(EffectMethod::Bayes),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EffectMethod::FE => "FE",
            EffectMethod::RE => "RE",
            EffectMethod::HKSJ => "HKSJ",
            EffectMethod::MKH => "mKH",
            EffectMethod::Bayes => "Bayes",
        }
    }
}

/// Pooled effect estimate with interval; `width` is always `hi − lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEffect {
    pub estimate: f64,
    pub interval: Interval,
    pub width: f64,
    pub level: f64,
    pub method: EffectMethod,
    pub back_transformed: bool,
}

impl PooledEffect {
    pub fn new(estimate: f64, interval: Interval, level: f64, method: EffectMethod) -> Self {
        Self {
            estimate,
            interval,
            width: interval.width(),
            level,
            method,
            back_transformed: false,
        }
    }

    /// Exponentiated copy for display of log-scale results.
    pub fn back_transform(&self) -> Self {
        let interval = Interval::new(self.interval.lo.exp(), self.interval.hi.exp());
        Self {
            estimate: self.estimate.exp(),
            interval,
            width: interval.width(),
            level: self.level,
            method: self.method,
            back_transformed: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study(label: &str, y: f64, s: f64, m: EffectMeasure) -> StudyResult {
        StudyResult {
            label: label.into(),
            estimate: y,
            std_err: s,
            measure: m,
            sample_size: None,
        }
    }

    #[test]
    fn ratio_ci_closed_form() {
        let s = from_ratio_ci("a", 1.0, 0.5, 2.0, 0.95, EffectMeasure::LogOddsRatio).unwrap();
        assert_eq!(s.estimate, 0.0);
        let z = normal_quantile(0.975).unwrap();
        assert!((s.std_err - 4f64.ln() / (2.0 * z)).abs() < 1e-15);
        assert!((s.std_err - 0.3537).abs() < 5e-5);
    }

    #[test]
    fn ratio_ci_degenerate_point() {
        let err = from_ratio_ci("a", 0.5, 0.5, 2.0, 0.95, EffectMeasure::LogRiskRatio).unwrap_err();
        assert!(err.to_string().contains("ci_lower"), "{err}");
        let err = from_ratio_ci("a", 1.0, -0.5, 2.0, 0.95, EffectMeasure::LogRiskRatio).unwrap_err();
        assert!(err.to_string().contains("ci_lower must be positive"), "{err}");
        assert!(from_ratio_ci("a", 1.0, 0.5, 2.0, 0.95, EffectMeasure::MeanDifference).is_err());
    }

    #[test]
    fn ratio_ci_round_trip() {
        let (p, lo, hi) = (0.72, 0.56, 0.92);
        let s = from_ratio_ci("x", p, lo, hi, 0.95, EffectMeasure::LogRateRatio).unwrap();
        // symmetric by construction on the log scale only after re-centering
        let z = normal_quantile(0.975).unwrap();
        let half = 0.5 * (hi.ln() - lo.ln());
        assert!((s.std_err * z - half).abs() < 1e-14);
        assert!((s.estimate.exp() / p - 1.0).abs() < 1e-12);
        // a symmetric interval is recovered exactly
        let (p, lo, hi) = (0.8, 0.8 / 1.5, 0.8 * 1.5);
        let s = from_ratio_ci("x", p, lo, hi, 0.95, EffectMeasure::LogRateRatio).unwrap();
        let back_lo = (s.estimate - z * s.std_err).exp();
        let back_hi = (s.estimate + z * s.std_err).exp();
        assert!((back_lo / lo - 1.0).abs() < 1e-12);
        assert!((back_hi / hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetry_measure() {
        assert!(log_ci_asymmetry(1.0, 0.5, 2.0) < 1e-12);
        assert!(log_ci_asymmetry(0.72, 0.56, 0.92) < CI_ASYMMETRY_WARNING);
        assert!(log_ci_asymmetry(0.72, 0.50, 0.92) > CI_ASYMMETRY_WARNING);
    }

    #[test]
    fn validate_pair_passes_well_formed() {
        let m = EffectMeasure::MeanDifference;
        let p = StudyPair::new("p", vec![study("a", 1.0, 1.0, m), study("b", 2.0, 1.5, m)], m);
        assert_eq!(validate_pair(p.clone()).unwrap(), p);
    }

    #[test]
    fn validate_pair_reports_zero_se() {
        let m = EffectMeasure::MeanDifference;
        let p = StudyPair::new("p", vec![study("a", 1.0, 1.0, m), study("b", 2.0, 0.0, m)], m);
        let r = validate_pair(p).unwrap_err();
        assert!(r.issues.iter().any(|i| i.contains("std_err must be positive")));
    }

    #[test]
    fn validate_pair_reports_mixed_measures_and_small_k() {
        let p = StudyPair::new(
            "p",
            vec![
                study("a", 1.0, 1.0, EffectMeasure::LogOddsRatio),
                study("b", 2.0, 1.0, EffectMeasure::MeanDifference),
            ],
            EffectMeasure::LogOddsRatio,
        );
        let r = validate_pair(p).unwrap_err();
        assert!(r.issues.contains(&"mixed effect measures".to_string()));

        let m = EffectMeasure::LogHazardRatio;
        let mut p = StudyPair::new("q", vec![study("a", 0.0, 0.0, m)], m);
        p.scale = Scale::Identity;
        let r = validate_pair(p).unwrap_err();
        assert_eq!(r.issues.len(), 3, "{r}");
    }

    #[test]
    fn validate_pair_is_idempotent() {
        let m = EffectMeasure::LogOddsRatio;
        let p = StudyPair::new("p", vec![study("a", 0.1, 0.2, m), study("b", 0.3, 0.25, m)], m);
        let once = validate_pair(p).unwrap();
        let twice = validate_pair(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let p = StudyPair::from_estimates("p", EffectMeasure::MeanDifference, &[(0.0, 1.0), (1.0, 1.0)])
            .unwrap();
        assert!(TwinCorpus::new(vec![p.clone(), p], None).is_err());
    }

    #[test]
    fn measure_parsing() {
        assert_eq!(EffectMeasure::parse("IRR"), Some(EffectMeasure::LogRateRatio));
        assert_eq!(EffectMeasure::parse("logOR"), Some(EffectMeasure::LogOddsRatio));
        assert_eq!(EffectMeasure::parse("md"), Some(EffectMeasure::MeanDifference));
        assert_eq!(EffectMeasure::parse("logMD"), None);
        assert_eq!(EffectMeasure::parse("SMD"), None);
    }

    #[test]
    fn back_transform_width() {
        let e = PooledEffect::new(0.0, Interval::new(-1.0, 1.0), 0.95, EffectMethod::FE);
        let b = e.back_transform();
        assert!(b.back_transformed);
        assert_eq!(b.width, b.interval.hi - b.interval.lo);
        assert_eq!(b.estimate, 1.0);
    }
}

//! CSV ingestion of study-level data.
//!
//! Columns: `pair_id, study_label, estimate, se, ci_lower, ci_upper,
//! measure, scale, n`. Each row carries either `se` or both CI bounds. Ratio
//! measures given on the ratio scale (`scale` empty, `ratio` or `natural`)
//! must come with a CI and are log-transformed; with `scale = log` the
//! estimate, se and CI are already on the log scale.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};
use twinmeta::model::{
    from_ratio_ci, log_ci_asymmetry, validate_pair, EffectMeasure, StudyPair, StudyResult,
    TwinCorpus, CI_ASYMMETRY_WARNING,
};
use twinmeta::statfn::normal_quantile;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Accept pairs with more than two studies.
    pub allow_k_gt_2: bool,
    /// Coverage of the CIs in the file.
    pub ci_level: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            allow_k_gt_2: false,
            ci_level: 0.95,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: TwinCorpus,
    pub warnings: Vec<String>,
    /// Hex SHA-256 of the raw file bytes.
    pub sha256: String,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> CliResult<Ingested> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    let mut ingested = ingest_bytes(&bytes, opts)?;
    ingested.corpus.provenance = Some(path.display().to_string());
    Ok(ingested)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index
            .get(name)
            .and_then(|&i| rec.get(i))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }
}

fn number(row: u64, name: &str, raw: &str) -> CliResult<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Input(format!("row {row}: {name} '{raw}' is not a finite number")))
}

pub fn ingest_bytes(bytes: &[u8], opts: &IngestOptions) -> CliResult<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("header: {e}")))?
        .clone();
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect();
    for required in ["pair_id", "study_label", "estimate", "measure"] {
        if !index.contains_key(required) {
            return Err(CliError::Input(format!("header lacks column {required}")));
        }
    }
    let cols = Columns { index };
    let z = normal_quantile(0.5 + 0.5 * opts.ci_level)?;

    let mut warnings = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<StudyResult>> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("csv: {e}")))?;
        let row = rec.position().map_or(0, |p| p.line());
        let field = |name: &str| cols.get(&rec, name);
        let pair_id = field("pair_id")
            .ok_or_else(|| CliError::Input(format!("row {row}: pair_id is empty")))?
            .to_string();
        let label = field("study_label").unwrap_or("").to_string();
        let measure_raw = field("measure").unwrap_or("");
        let measure = EffectMeasure::parse(measure_raw).ok_or_else(|| {
            CliError::Input(format!("row {row}: unknown measure tag '{measure_raw}'"))
        })?;
        let estimate = number(
            row,
            "estimate",
            field("estimate")
                .ok_or_else(|| CliError::Input(format!("row {row}: estimate is empty")))?,
        )?;
        let se = field("se").map(|s| number(row, "se", s)).transpose()?;
        let lo = field("ci_lower").map(|s| number(row, "ci_lower", s)).transpose()?;
        let hi = field("ci_upper").map(|s| number(row, "ci_upper", s)).transpose()?;
        let scale = field("scale").unwrap_or("").to_ascii_lowercase();
        let on_log = match scale.as_str() {
            "log" => true,
            "" | "ratio" | "natural" | "identity" => false,
            other => {
                return Err(CliError::Input(format!("row {row}: unknown scale '{other}'")))
            }
        };
        if on_log && !measure.is_ratio() {
            return Err(CliError::Input(format!(
                "row {row}: measure {measure} has no log scale"
            )));
        }
        if scale == "identity" && measure.is_ratio() {
            return Err(CliError::Input(format!(
                "row {row}: ratio measure {measure} needs scale log or ratio"
            )));
        }
        let with_row = |e: twinmeta::Error| CliError::Input(format!("row {row}: {e}"));
        let study = match (se, lo, hi) {
            (Some(se), None, None) => {
                if measure.is_ratio() && !on_log {
                    return Err(CliError::Input(format!(
                        "row {row}: an se for ratio measure {measure} must be on the log scale (set scale=log)"
                    )));
                }
                StudyResult::new(label, estimate, se, measure).map_err(with_row)?
            }
            (None, Some(lo), Some(hi)) => {
                if measure.is_ratio() && !on_log {
                    if log_ci_asymmetry(estimate, lo, hi) > CI_ASYMMETRY_WARNING {
                        warnings.push(format!(
                            "row {row}: CI half-widths on the log scale differ by more than {:.0}%",
                            100.0 * CI_ASYMMETRY_WARNING
                        ));
                    }
                    from_ratio_ci(label, estimate, lo, hi, opts.ci_level, measure).map_err(with_row)?
                } else {
                    if !(lo < estimate && estimate < hi) {
                        return Err(CliError::Input(format!(
                            "row {row}: CI [{lo}, {hi}] does not bracket the estimate {estimate}"
                        )));
                    }
                    StudyResult::new(label, estimate, (hi - lo) / (2.0 * z), measure)
                        .map_err(with_row)?
                }
            }
            (Some(_), _, _) => {
                return Err(CliError::Input(format!(
                    "row {row}: supply either se or ci_lower+ci_upper, not both"
                )))
            }
            (None, _, _) => {
                return Err(CliError::Input(format!(
                    "row {row}: supply se or both ci_lower and ci_upper"
                )))
            }
        };
        let study = match field("n") {
            Some(raw) => study.with_sample_size(raw.parse::<u64>().map_err(|_| {
                CliError::Input(format!("row {row}: n '{raw}' is not a nonnegative integer"))
            })?),
            None => study,
        };
        if !groups.contains_key(&pair_id) {
            order.push(pair_id.clone());
        }
        groups.entry(pair_id).or_default().push(study);
    }
    if order.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    let mut pairs = Vec::with_capacity(order.len());
    for id in order {
        let studies = groups.remove(&id).expect("grouped");
        let k = studies.len();
        if k < 2 || (k > 2 && !opts.allow_k_gt_2) {
            return Err(CliError::Input(format!(
                "pair {id} has {k} studies; pairs need exactly 2 (use --allow-k-gt-2 for larger sets)"
            )));
        }
        let measure = studies[0].measure;
        let pair = validate_pair(StudyPair::new(id, studies, measure))
            .map_err(twinmeta::Error::from)?;
        pairs.push(pair);
    }
    Ok(Ingested {
        corpus: TwinCorpus::new(pairs, None)?,
        warnings,
        sha256: sha256_hex(bytes),
    })
}

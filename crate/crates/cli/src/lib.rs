//! Batch front end for twinmeta: CSV ingestion, JSON reports, CSV tables
//! and SVG plots.

pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use twinmeta::bayes::{bayes_factor_homogeneity, HalfNormalPrior, MuPrior, TauPrior};
use twinmeta::empirical::{summarize_corpus, uniformity_diagnostics, CorpusSummary, UniformityDiagnostics};
use twinmeta::events::{
    event_probability, i2_from_ratio, probability_curves, EventKind, EventSpec,
    VarianceConvention,
};
use twinmeta::freq::{cochran_q, pooled_effect};
use twinmeta::model::{EffectMethod, HeterogeneityResult, StudyPair, TwinCorpus};
use twinmeta::multipair::{common_tau_bayes, common_tau_freq, random_tau_predictive, CommonTauResult};
use twinmeta::sim::{mc_event_probabilities, SimConfig};

use crate::config::FileConfig;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_csv, IngestOptions, Ingested};
use crate::report::{analyze_pair, bayes_label, render_text, AnalysisReport, AnalyzeConfig, InputInfo};

#[derive(Debug, Parser)]
#[command(name = "twinmeta", version, about = "Meta-analysis of study twins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frequentist and Bayesian analysis of one pair.
    Analyze(AnalyzeArgs),
    /// Analytic event probabilities.
    Events(EventsArgs),
    /// Monte Carlo event probabilities next to their analytic values.
    Simulate(SimulateArgs),
    /// Descriptive summary of a corpus of pairs.
    Corpus(CorpusArgs),
    /// Forest plot of one pair.
    Forest(ForestArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Accept pairs with more than two studies.
    #[arg(long)]
    pub allow_k_gt_2: bool,
    /// Coverage of confidence intervals given in the input.
    #[arg(long)]
    pub input_ci_level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input CSV; optional with --replay.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub allow_k_gt_2: bool,
    #[arg(long)]
    pub input_ci_level: Option<f64>,
    /// Pair to analyse; may be omitted when the file holds one pair.
    #[arg(long)]
    pub pair_id: Option<String>,
    /// Comma-separated subset of fe,re,hksj,mkh,bayes.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Half-normal prior scales for the Bayesian analyses.
    #[arg(long, value_delimiter = ',')]
    pub hn_scale: Option<Vec<f64>>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Upper end of the Q-profile search bracket.
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Report JSON; the summary goes to stdout. Without it JSON goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run the configuration echoed in an earlier report.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EventsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Single heterogeneity value.
    #[arg(long, conflicts_with = "ratio_grid")]
    pub tau: Option<f64>,
    /// Grid of tau/sigma as lo:hi:step (equal standard errors).
    #[arg(long)]
    pub ratio_grid: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    /// model (default) or table1.
    #[arg(long)]
    pub convention: Option<String>,
    /// Comma-separated events; default all four.
    #[arg(long, value_delimiter = ',')]
    pub events: Option<Vec<String>>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated events; default all four.
    #[arg(long, value_delimiter = ',')]
    pub event: Option<Vec<String>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-pair Q statistics and p-values.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also fit the joint heterogeneity models to the log-scale pairs.
    #[arg(long)]
    pub joint: bool,
    #[arg(long)]
    pub hn_scale: Option<f64>,
    #[arg(long)]
    pub mu_prior_sd: Option<f64>,
    #[arg(long)]
    pub hyper_upper: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub pair_id: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub hn_scale: Option<Vec<f64>>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub svg: PathBuf,
}

/// Files written by a command; removed again unless the command succeeds.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn write(&mut self, path: &Path, contents: &[u8]) -> CliResult<()> {
        self.written.push(path.to_path_buf());
        std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Runs one command; outputs are removed if it fails.
pub fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::from_env()?;
    let mut out = Outputs::default();
    match cli.command {
        Command::Analyze(a) => analyze(a, &file, &mut out)?,
        Command::Events(a) => events(a, &file, &mut out)?,
        Command::Simulate(a) => simulate(a, &file, &mut out)?,
        Command::Corpus(a) => corpus(a, &file, &mut out)?,
        Command::Forest(a) => forest(a, &file, &mut out)?,
    }
    out.commit();
    Ok(())
}

/// Full-precision number for CSV output (17 significant digits, round-trips).
pub fn full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn parse_methods(names: &[String]) -> CliResult<Vec<EffectMethod>> {
    names
        .iter()
        .map(|m| {
            EffectMethod::parse(m).ok_or_else(|| CliError::Input(format!("unknown method '{m}'")))
        })
        .collect()
}

fn parse_events(names: Option<&[String]>, alpha: f64, ci_level: f64) -> CliResult<Vec<EventSpec>> {
    let kinds = match names {
        None => EventKind::ALL.to_vec(),
        Some(list) => list
            .iter()
            .map(|e| EventKind::parse(e).ok_or_else(|| CliError::Input(format!("unknown event '{e}'"))))
            .collect::<CliResult<Vec<_>>>()?,
    };
    Ok(kinds
        .into_iter()
        .map(|kind| EventSpec {
            kind,
            alpha,
            ci_level,
        })
        .collect())
}

fn parse_convention(flag: Option<&str>, file: &FileConfig) -> CliResult<VarianceConvention> {
    match flag.or(file.convention.as_deref()) {
        None => Ok(VarianceConvention::default()),
        Some(s) => VarianceConvention::parse(s)
            .ok_or_else(|| CliError::Input(format!("unknown convention '{s}' (model or table1)"))),
    }
}

/// Parses `lo:hi:step` into grid points computed as `lo + i·step`.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("ratio grid '{spec}' is not lo:hi:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad());
    };
    if !(lo >= 0.0 && hi >= lo && step > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(CliError::Input(format!("ratio grid '{spec}' has too many points")));
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

fn load(input: &Path, allow_k_gt_2: bool, ci_level: Option<f64>) -> CliResult<Ingested> {
    let opts = IngestOptions {
        allow_k_gt_2,
        ci_level: ci_level.unwrap_or(0.95),
    };
    let ingested = ingest_csv(input, &opts)?;
    for w in &ingested.warnings {
        eprintln!("{}", serde_json::json!({ "warning": w }));
    }
    Ok(ingested)
}

fn select_pair<'c>(corpus: &'c TwinCorpus, pair_id: Option<&str>) -> CliResult<&'c StudyPair> {
    match pair_id {
        Some(id) => corpus
            .get(id)
            .ok_or_else(|| CliError::Input(format!("pair '{id}' not found in input"))),
        None if corpus.len() == 1 => Ok(&corpus.pairs[0]),
        None => Err(CliError::Input(format!(
            "input holds {} pairs; choose one with --pair-id",
            corpus.len()
        ))),
    }
}

fn analyze(a: AnalyzeArgs, file: &FileConfig, out: &mut Outputs) -> CliResult<()> {
    let (config, input_path) = match &a.replay {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let old: AnalysisReport = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("replay report: {e}")))?;
            let input = a.input.clone().unwrap_or_else(|| PathBuf::from(&old.input.path));
            (old.config, (input, Some(old.input.sha256)))
        }
        None => {
            let input = a
                .input
                .clone()
                .ok_or_else(|| CliError::Input("--input is required".into()))?;
            let methods = parse_methods(
                a.methods
                    .as_deref()
                    .or(file.methods.as_deref())
                    .unwrap_or(&["fe".into(), "re".into(), "hksj".into(), "mkh".into()]),
            )?;
            let config = AnalyzeConfig {
                pair_id: String::new(),
                methods,
                hn_scales: a.hn_scale.clone().or(file.hn_scales.clone()).unwrap_or_default(),
                level: a.level.or(file.level).unwrap_or(0.95),
                q_profile_tau_max: a.tau_max,
            };
            (config, (input, None))
        }
    };
    let (input, expected_sha) = input_path;
    let ingested = load(&input, a.allow_k_gt_2, a.input_ci_level)?;
    if let Some(sha) = expected_sha {
        if sha != ingested.sha256 {
            return Err(CliError::Input(format!(
                "input {} does not match the replayed checksum",
                input.display()
            )));
        }
    }
    let wanted = a
        .pair_id
        .as_deref()
        .or((!config.pair_id.is_empty()).then_some(config.pair_id.as_str()));
    let pair = select_pair(&ingested.corpus, wanted)?;
    let config = AnalyzeConfig {
        pair_id: pair.pair_id.clone(),
        ..config
    };
    let report = analyze_pair(
        pair,
        &config,
        InputInfo {
            path: input.display().to_string(),
            sha256: ingested.sha256.clone(),
        },
        ingested.warnings.clone(),
    )?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &a.out {
        Some(path) => {
            out.write(path, json.as_bytes())?;
            print!("{}", render_text(&report));
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn events(a: EventsArgs, file: &FileConfig, out: &mut Outputs) -> CliResult<()> {
    let alpha = a.alpha.or(file.alpha).unwrap_or(0.05);
    let ci_level = a.ci_level.or(file.ci_level).unwrap_or(0.95);
    let convention = parse_convention(a.convention.as_deref(), file)?;
    let specs = parse_events(a.events.as_deref(), alpha, ci_level)?;
    // (sigma1, sigma2, tau) per row
    let points: Vec<(f64, f64, f64)> = match (a.tau, &a.ratio_grid) {
        (Some(t), _) => vec![(a.sigma1, a.sigma2, t)],
        (None, grid) => parse_grid(grid.as_deref().unwrap_or("0:2:0.5"))?
            .into_iter()
            .map(|r| (1.0, 1.0, r))
            .collect(),
    };
    let mut rows = Vec::with_capacity(points.len());
    for &(s1, s2, tau) in &points {
        let probs = specs
            .iter()
            .map(|e| event_probability(e, s1, s2, tau, convention))
            .collect::<twinmeta::Result<Vec<_>>>()?;
        // I² is defined for equal standard errors only
        let i2 = (s1 == s2).then(|| i2_from_ratio(tau / s1)).transpose()?;
        rows.push((s1, s2, tau, i2, probs));
    }

    println!("convention: {}", convention.tag());
    let names: Vec<&str> = specs.iter().map(|e| e.kind.tag()).collect();
    println!("{:>8} {:>8} {:>8} {:>6} {}", "sigma1", "sigma2", "tau", "I2", names
        .iter()
        .map(|n| format!("{n:>16}"))
        .collect::<String>());
    for (s1, s2, tau, i2, probs) in &rows {
        let i2s = i2.map_or("-".to_string(), |v| format!("{:.0}%", 100.0 * v));
        println!(
            "{s1:>8.3} {s2:>8.3} {tau:>8.3} {i2s:>6} {}",
            probs.iter().map(|p| format!("{:>15.1}%", 100.0 * p)).collect::<String>()
        );
    }

    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["sigma1", "sigma2", "tau", "i2"];
        header.extend(names.iter().copied());
        header.push("convention");
        w.write_record(&header).map_err(csv_err)?;
        for (s1, s2, tau, i2, probs) in &rows {
            let mut rec = vec![full(*s1), full(*s2), full(*tau), i2.map(full).unwrap_or_default()];
            rec.extend(probs.iter().map(|&p| full(p)));
            rec.push(convention.tag().into());
            w.write_record(&rec).map_err(csv_err)?;
        }
        out.write(path, &w.into_inner().map_err(|e| CliError::Input(e.to_string()))?)?;
    }
    if let Some(path) = &a.svg {
        if points.iter().any(|&(s1, s2, _)| s1 != s2) {
            return Err(CliError::Input("curves need equal standard errors".into()));
        }
        let ratios: Vec<f64> = points.iter().map(|p| p.2).collect();
        let table = probability_curves(&specs, &ratios, convention)?;
        out.write(path, svg::curves_svg(&table).as_bytes())?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(format!("csv output: {e}"))
}

fn simulate(a: SimulateArgs, file: &FileConfig, out: &mut Outputs) -> CliResult<()> {
    let alpha = a.alpha.or(file.alpha).unwrap_or(0.05);
    let ci_level = a.ci_level.or(file.ci_level).unwrap_or(0.95);
    let specs = parse_events(a.event.as_deref(), alpha, ci_level)?;
    let config = SimConfig {
        mu: a.mu,
        tau: a.tau,
        sigma1: a.sigma1,
        sigma2: a.sigma2,
        reps: a.reps.or(file.reps).unwrap_or(1_000_000),
        seed: a.seed.or(file.seed).unwrap_or(1),
    };
    let estimates = mc_event_probabilities(&config, &specs)?;
    let mut table = Vec::new();
    for est in &estimates {
        let model = event_probability(&est.event, a.sigma1, a.sigma2, a.tau, VarianceConvention::Model2Tau2)?;
        let table1 = event_probability(&est.event, a.sigma1, a.sigma2, a.tau, VarianceConvention::Table1Tau2)?;
        let z = |p: f64| (est.estimate - p) / est.mc_std_err;
        table.push((est, model, z(model), table1, z(table1)));
    }
    println!(
        "reps {} seed {} tau {} sigma ({}, {})",
        config.reps, config.seed, config.tau, config.sigma1, config.sigma2
    );
    println!("{:<16} {:>10} {:>10} {:>12} {:>9} {:>12} {:>9}", "event", "estimate", "mc_se", "model-2tau2", "z", "table1-tau2", "z");
    for (est, m, zm, t, zt) in &table {
        println!(
            "{:<16} {:>10.5} {:>10.6} {:>12.5} {:>9.2} {:>12.5} {:>9.2}",
            est.event.kind.tag(),
            est.estimate,
            est.mc_std_err,
            m,
            zm,
            t,
            zt
        );
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "event", "mu", "tau", "sigma1", "sigma2", "reps", "seed", "hits", "estimate",
            "mc_std_err", "analytic_model_2tau2", "z_model_2tau2", "analytic_table1_tau2",
            "z_table1_tau2",
        ])
        .map_err(csv_err)?;
        for (est, m, zm, t, zt) in &table {
            w.write_record([
                est.event.kind.tag().to_string(),
                full(config.mu),
                full(config.tau),
                full(config.sigma1),
                full(config.sigma2),
                config.reps.to_string(),
                config.seed.to_string(),
                est.hits.to_string(),
                full(est.estimate),
                full(est.mc_std_err),
                full(*m),
                full(*zm),
                full(*t),
                full(*zt),
            ])
            .map_err(csv_err)?;
        }
        out.write(path, &w.into_inner().map_err(|e| CliError::Input(e.to_string()))?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct JointSummary {
    n_pairs: usize,
    common_tau_freq: CommonTauResult,
    common_tau_bayes_hn: HeterogeneityResult,
    common_tau_bayes_flat: Option<HeterogeneityResult>,
    bayes_factor_01: f64,
    hn_scale: f64,
    mu_prior_sd: f64,
    hyper_upper: f64,
    predictive_median: f64,
    predictive_q95: f64,
}

#[derive(Debug, Serialize)]
struct CorpusReport {
    tool: report::ToolInfo,
    input: InputInfo,
    summary: CorpusSummary,
    uniformity: UniformityDiagnostics,
    joint: Option<JointSummary>,
    warnings: Vec<String>,
}

fn corpus(a: CorpusArgs, file: &FileConfig, out: &mut Outputs) -> CliResult<()> {
    let ingested = load(&a.input.input, a.input.allow_k_gt_2, a.input.input_ci_level)?;
    let corpus = &ingested.corpus;
    let summary = summarize_corpus(corpus)?;
    let uniformity = uniformity_diagnostics(&summary.q_pvalues)?;
    let joint = if a.joint {
        let logs = corpus.log_scale_subset();
        if logs.is_empty() {
            return Err(CliError::Input("no log-scale pairs for the joint models".into()));
        }
        let level = a.level.or(file.level).unwrap_or(0.95);
        let hn_scale = a.hn_scale.unwrap_or(0.5);
        let mu_prior_sd = a.mu_prior_sd.or(file.mu_prior_sd).unwrap_or(2.82);
        let hyper_upper = a.hyper_upper.or(file.hyper_upper).unwrap_or(10.0);
        let prior = HalfNormalPrior::new(hn_scale)?;
        let flat = match common_tau_bayes(&logs, TauPrior::ImproperUniform, level) {
            Ok(p) => Some(p.result),
            Err(twinmeta::Error::Unsupported(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let hier = random_tau_predictive(&logs, hyper_upper)?;
        Some(JointSummary {
            n_pairs: logs.len(),
            common_tau_freq: common_tau_freq(&logs, level)?,
            common_tau_bayes_hn: common_tau_bayes(&logs, TauPrior::HalfNormal(prior), level)?.result,
            common_tau_bayes_flat: flat,
            bayes_factor_01: bayes_factor_homogeneity(
                &logs.pairs,
                MuPrior::Normal { mean: 0.0, sd: mu_prior_sd },
                &prior,
            )?,
            hn_scale,
            mu_prior_sd,
            hyper_upper,
            predictive_median: hier.predictive_median,
            predictive_q95: hier.predictive_q95,
        })
    } else {
        None
    };
    let n = summary.n_pairs as f64;
    println!("pairs: {}", summary.n_pairs);
    for (kind, f) in EventKind::ALL.iter().zip(summary.event_frequencies) {
        println!("  {:<16} {:>3} ({:.1}%)", kind.tag(), (f * n).round(), 100.0 * f);
    }
    println!("concordance (none/one/both significant):");
    println!("  same     {:?}", summary.concordance[0]);
    println!("  opposite {:?}", summary.concordance[1]);
    println!(
        "KS D = {:.4}, p = {:.3}; min p = {:.4} is the {} quantile of Beta(1, {})",
        uniformity.ks_d,
        uniformity.ks_p,
        uniformity.min_p,
        twinmeta::empirical::format_percent(uniformity.min_p_quantile),
        uniformity.n
    );
    if let Some(j) = &joint {
        println!(
            "joint ({} log-scale pairs): PM tau {:.4} [{:.3}, {:.3}], Q p = {:.3}; Bayes HN({}) median {:.3}; BF01 {:.2}; predictive median {:.3}, 95% {:.3}",
            j.n_pairs,
            j.common_tau_freq.tau_hat,
            j.common_tau_freq.interval.lo,
            j.common_tau_freq.interval.hi,
            j.common_tau_freq.p_value,
            j.hn_scale,
            j.common_tau_bayes_hn.tau_hat,
            j.bayes_factor_01,
            j.predictive_median,
            j.predictive_q95
        );
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pair_id", "q", "df", "p_value"]).map_err(csv_err)?;
        for pair in &corpus.pairs {
            let q = cochran_q(pair)?;
            w.write_record([pair.pair_id.clone(), full(q.q), q.df.to_string(), full(q.p_value)])
                .map_err(csv_err)?;
        }
        out.write(path, &w.into_inner().map_err(|e| CliError::Input(e.to_string()))?)?;
    }
    let report = CorpusReport {
        tool: report::ToolInfo::default(),
        input: InputInfo {
            path: a.input.input.display().to_string(),
            sha256: ingested.sha256.clone(),
        },
        summary,
        uniformity,
        joint,
        warnings: ingested.warnings.clone(),
    };
    if let Some(path) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        out.write(path, json.as_bytes())?;
    }
    Ok(())
}

fn forest(a: ForestArgs, file: &FileConfig, out: &mut Outputs) -> CliResult<()> {
    let ingested = load(&a.input.input, a.input.allow_k_gt_2, a.input.input_ci_level)?;
    let pair = select_pair(&ingested.corpus, a.pair_id.as_deref())?;
    let level = a.level.or(file.level).unwrap_or(0.95);
    let methods = parse_methods(
        a.methods
            .as_deref()
            .or(file.methods.as_deref())
            .unwrap_or(&["fe".into(), "re".into(), "hksj".into(), "mkh".into()]),
    )?;
    let scales = a.hn_scale.clone().or(file.hn_scales.clone()).unwrap_or_default();
    let mut pooled = Vec::new();
    for m in methods {
        if m == EffectMethod::Bayes {
            if scales.is_empty() {
                return Err(CliError::Input("method bayes needs at least one --hn-scale".into()));
            }
            for &s in &scales {
                let post = twinmeta::bayes::mu_posterior(pair, &HalfNormalPrior::new(s)?, level)?;
                pooled.push((bayes_label(s), post.effect));
            }
        } else {
            pooled.push((m.tag().to_string(), pooled_effect(pair, m, level)?));
        }
    }
    out.write(&a.svg, svg::forest_svg(pair, &pooled, level).as_bytes())?;
    println!("wrote {}", a.svg.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:2:0.5").unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
        assert!(parse_grid("0:2").is_err());
        assert!(parse_grid("2:0:0.5").is_err());
        assert!(parse_grid("0:2:0").is_err());
    }

    #[test]
    fn full_precision_numbers() {
        let s = full(0.1 + 0.2);
        let digits = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert!(digits.len() >= 10);
        assert_eq!(s.parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn failed_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        {
            let mut out = Outputs::default();
            out.write(&path, b"partial").unwrap();
        }
        assert!(!path.exists());
        let mut out = Outputs::default();
        out.write(&path, b"done").unwrap();
        out.commit();
        assert!(path.exists());
    }
}

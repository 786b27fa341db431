//! Analysis of one pair into a JSON-serializable report.

use serde::{Deserialize, Serialize};
use twinmeta::bayes::{mu_posterior, prior_summary, tau_posterior, HalfNormalPrior, PriorSummary};
use twinmeta::freq::{cochran_q, pooled_effect, tau_estimate_k2_with, QProfileConfig, QResult};
use twinmeta::model::{EffectMethod, HeterogeneityResult, PooledEffect, StudyPair, StudyResult};

use crate::error::{CliError, CliResult};

pub const TOOL_NAME: &str = "twinmeta";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub pair_id: String,
    pub methods: Vec<EffectMethod>,
    pub hn_scales: Vec<f64>,
    pub level: f64,
    pub q_profile_tau_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    pub pair_id: String,
    pub measure: String,
    /// `log` or `identity`: the scale every unlabelled number is on.
    pub scale: String,
    pub studies: Vec<StudyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityEntry {
    pub label: String,
    pub prior_scale: Option<f64>,
    pub result: HeterogeneityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry {
    pub label: String,
    pub prior_scale: Option<f64>,
    pub effect: PooledEffect,
    /// Exponentiated copy for log-scale measures.
    pub back_transformed: Option<PooledEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEntry {
    pub scale: f64,
    pub summary: PriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub input: InputInfo,
    pub config: AnalyzeConfig,
    pub pair: PairInfo,
    pub q_test: QResult,
    pub heterogeneity: Vec<HeterogeneityEntry>,
    pub effects: Vec<EffectEntry>,
    pub priors: Vec<PriorEntry>,
    pub warnings: Vec<String>,
}

pub fn bayes_label(scale: f64) -> String {
    format!("Bayes (HN({scale}))")
}

pub fn analyze_pair(
    pair: &StudyPair,
    config: &AnalyzeConfig,
    input: InputInfo,
    warnings: Vec<String>,
) -> CliResult<AnalysisReport> {
    let wants_bayes = config.methods.contains(&EffectMethod::Bayes);
    if wants_bayes && config.hn_scales.is_empty() {
        return Err(CliError::Input(
            "method bayes needs at least one --hn-scale".into(),
        ));
    }
    let q_test = cochran_q(pair)?;
    let mut heterogeneity = Vec::new();
    if pair.k() == 2 {
        let qp = QProfileConfig {
            tau_max: config.q_profile_tau_max,
        };
        heterogeneity.push(HeterogeneityEntry {
            label: "frequentist (DL/REML/PM)".into(),
            prior_scale: None,
            result: tau_estimate_k2_with(pair, config.level, &qp)?,
        });
    }
    let back = |e: &PooledEffect| pair.is_log_scale().then(|| e.back_transform());
    let mut effects = Vec::new();
    for &method in config.methods.iter().filter(|&&m| m != EffectMethod::Bayes) {
        let effect = pooled_effect(pair, method, config.level)?;
        effects.push(EffectEntry {
            label: method.tag().into(),
            prior_scale: None,
            back_transformed: back(&effect),
            effect,
        });
    }
    let mut priors = Vec::new();
    if wants_bayes {
        for &scale in &config.hn_scales {
            let prior = HalfNormalPrior::new(scale)?;
            priors.push(PriorEntry {
                scale,
                summary: prior_summary(&prior, config.level)?,
            });
            let tau = tau_posterior(pair, &prior, config.level)?;
            heterogeneity.push(HeterogeneityEntry {
                label: bayes_label(scale),
                prior_scale: Some(scale),
                result: tau.result,
            });
            let mu = mu_posterior(pair, &prior, config.level)?;
            effects.push(EffectEntry {
                label: bayes_label(scale),
                prior_scale: Some(scale),
                back_transformed: mu.back_transformed,
                effect: mu.effect,
            });
        }
    }
    Ok(AnalysisReport {
        tool: ToolInfo::default(),
        input,
        config: config.clone(),
        pair: PairInfo {
            pair_id: pair.pair_id.clone(),
            measure: pair.measure.tag().into(),
            scale: if pair.is_log_scale() { "log" } else { "identity" }.into(),
            studies: pair.studies.clone(),
        },
        q_test,
        heterogeneity,
        effects,
        priors,
        warnings,
    })
}

/// Human-readable rendering with table rounding.
pub fn render_text(report: &AnalysisReport) -> String {
    let log = report.pair.scale == "log";
    let mut out = format!(
        "pair {} ({}, {} scale)\nQ = {:.4}, df = {}, p = {:.4}\n\nheterogeneity (tau{}):\n",
        report.pair.pair_id,
        report.pair.measure,
        report.pair.scale,
        report.q_test.q,
        report.q_test.df,
        report.q_test.p_value,
        if log { ", log scale" } else { "" },
    );
    for h in &report.heterogeneity {
        let r = &h.result;
        out += &format!(
            "  {:<28} {:>9.3} [{:.3}, {:.3}]{}\n",
            h.label,
            r.tau_hat,
            r.interval.lo,
            r.interval.hi,
            if r.upper_unbounded { " (upper bound at search limit)" } else { "" }
        );
    }
    out += &format!("\neffects{}:\n", if log { " (back-transformed)" } else { "" });
    for e in &report.effects {
        let p = e.back_transformed.as_ref().unwrap_or(&e.effect);
        out += &format!(
            "  {:<28} {:>9.3} [{:.3}, {:.3}] width {:.3}\n",
            e.label, p.estimate, p.interval.lo, p.interval.hi, p.width
        );
    }
    for w in &report.warnings {
        out += &format!("warning: {w}\n");
    }
    out
}

//! Trial execution and persistence: runs every configuration x trial cell
//! of an experiment, derives per-trial seeds, isolates failures, and writes
//! one JSON report per trial plus a best-NSE evolution CSV.

use crate::config::{ConfigurationKind, ExperimentConfig, ModelSpec};
use crate::error::{Error, Result};
use crate::models::{self, InitialModel, WatershedTruth};
use crate::objective::evaluate_candidate;
use crate::optimizer::run_calibration;
use crate::plan::RunPlan;
use crate::space::{apply_scale, ParameterSpace, ScaleDirection};
use crate::stats::{hb_flag, nc_flag, tukey_boxplot, Boxplot};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One year of spin-up excluded from scoring.
pub const SPINUP_DAYS: usize = 365;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    /// Search-scale assignment.
    pub assignment: Vec<f64>,
    pub objectives: Vec<f64>,
}

/// Everything persisted for one configuration x trial cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: String,
    pub trial: usize,
    pub seed: u64,
    pub wall_seconds: f64,
    pub param_names: Vec<String>,
    /// 1-based group per parameter under this configuration's grouping.
    pub groups: Vec<usize>,
    /// Truth values in model units where known.
    pub truth: Vec<Option<f64>>,
    /// Cumulative run-budget boundaries of the active framework plan.
    pub checkpoints: Vec<usize>,
    /// Best-so-far NSE after each evaluation (nondecreasing).
    pub best_nse: Vec<f64>,
    pub archive: Vec<ArchiveEntry>,
    /// Per-parameter boxplot over the archive, search scale.
    pub boxplots: Vec<Boxplot>,
    /// Median of each parameter's archive values, converted to model units.
    pub medians_model: Vec<f64>,
    pub nc_flags: Vec<bool>,
    pub hb_flags: Vec<bool>,
    pub nc_count: usize,
    pub hb_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialFailure {
    pub config: String,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub reports: Vec<TrialReport>,
    pub failures: Vec<TrialFailure>,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Stable per-trial seed: base_seed XOR FNV-1a(config name, trial index).
pub fn trial_seed(base_seed: u64, config_name: &str, trial: usize) -> u64 {
    let mut h = fnv1a(config_name.as_bytes(), FNV_OFFSET);
    h = fnv1a(&(trial as u64).to_le_bytes(), h);
    base_seed ^ h
}

fn space_for(
    config: &ExperimentConfig,
    kind: ConfigurationKind,
    truth: &WatershedTruth,
) -> Result<ParameterSpace> {
    let mut params = config
        .space
        .clone()
        .ok_or_else(|| Error::Config("config not resolved: space missing".into()))?;
    let groups = models::region_grouping(&truth.regions, kind.ordering());
    if groups.len() != params.len() {
        return Err(Error::Config(format!(
            "space has {} parameters but the synthetic model defines {}",
            params.len(),
            groups.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(groups) {
        p.group = g;
    }
    ParameterSpace::new(params)
}

fn plan_for(kind: ConfigurationKind, framework: &RunPlan) -> RunPlan {
    if kind.is_framework() {
        framework.clone()
    } else {
        RunPlan::traditional(framework.group_count, framework.total_budget())
    }
}

/// Execute one configuration x trial cell.
fn run_trial(
    config: &ExperimentConfig,
    kind: ConfigurationKind,
    trial: usize,
    truth: &WatershedTruth,
) -> Result<TrialReport> {
    let started = std::time::Instant::now();
    let space = space_for(config, kind, truth)?;
    let plan = plan_for(kind, config.resolved_plan());
    let seed = trial_seed(config.base_seed, kind.name(), trial);
    let model = InitialModel {
        regions: truth.regions.clone(),
        forcing: truth.forcing.clone(),
    };
    let days = truth.forcing.len();
    let specs = space.params.clone();
    let observed = truth.observed.clone();
    let evaluator = move |assignment: &[f64]| -> Result<Vec<f64>> {
        let model_scale: Vec<f64> = assignment
            .iter()
            .zip(&specs)
            .map(|(&v, spec)| apply_scale(spec, v, ScaleDirection::ToModel))
            .collect::<Result<_>>()?;
        let record = evaluate_candidate(&model, &model_scale, &observed, SPINUP_DAYS..days)?;
        Ok(record.values)
    };

    let core = run_calibration(
        &evaluator,
        &space,
        &plan,
        config.pop_size,
        config.reinit_fraction,
        seed,
        None,
    )?;

    let original = space.original_ranges();
    let dim = space.len();
    let mut boxplots = Vec::with_capacity(dim);
    let mut medians_model = Vec::with_capacity(dim);
    let mut nc_flags = Vec::with_capacity(dim);
    let mut hb_flags = Vec::with_capacity(dim);
    for (i, spec) in space.params.iter().enumerate() {
        let values: Vec<f64> = core
            .archive
            .members
            .iter()
            .map(|c| c.assignment[i])
            .collect();
        let b = tukey_boxplot(&values)?;
        nc_flags.push(nc_flag(&b, original[i]));
        hb_flags.push(hb_flag(&b, original[i]));
        medians_model.push(apply_scale(spec, b.median, ScaleDirection::ToModel)?);
        boxplots.push(b);
    }
    let nc_count = nc_flags.iter().filter(|&&f| f).count();
    let hb_count = hb_flags.iter().filter(|&&f| f).count();

    Ok(TrialReport {
        config: kind.name().to_string(),
        trial,
        seed,
        wall_seconds: started.elapsed().as_secs_f64(),
        param_names: space.params.iter().map(|p| p.name.clone()).collect(),
        groups: space.params.iter().map(|p| p.group).collect(),
        truth: space.params.iter().map(|p| p.truth).collect(),
        checkpoints: config.resolved_plan().cumulative_budgets(),
        best_nse: core.best_series.iter().map(|m| 1.0 - m).collect(),
        archive: core
            .archive
            .members
            .iter()
            .map(|c| ArchiveEntry {
                assignment: c.assignment.clone(),
                objectives: c.objectives.clone().unwrap_or_default(),
            })
            .collect(),
        boxplots,
        medians_model,
        nc_flags,
        hb_flags,
        nc_count,
        hb_count,
    })
}

pub fn evolution_csv(report: &TrialReport) -> String {
    let mut out = String::from("evaluation,best_nse\n");
    for (i, v) in report.best_nse.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}

fn persist_report(out_dir: &Path, report: &TrialReport) -> Result<()> {
    let dir = out_dir.join(&report.config);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join(format!("trial_{}.json", report.trial)),
        serde_json::to_string_pretty(report)?,
    )?;
    std::fs::write(
        dir.join(format!("evolution_trial_{}.csv", report.trial)),
        evolution_csv(report),
    )?;
    Ok(())
}

/// Run every configuration x trial concurrently, persist reports under
/// `out_dir`, and record (rather than propagate) per-trial failures.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let truth = match &config.model {
        ModelSpec::Synthetic { cells, seed, days } => {
            models::make_truth_with_days(*cells, *days, *seed)?
        }
        ModelSpec::ExternalSeries { .. } => {
            return Err(Error::Config(
                "calibration against an external series needs a bound model; only the synthetic double-model is supported".into(),
            ));
        }
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("resolved_config.json"), config.dump()?)?;

    let cells: Vec<(ConfigurationKind, usize)> = config
        .configurations
        .iter()
        .flat_map(|&kind| (0..config.trials).map(move |t| (kind, t)))
        .collect();
    use rayon::prelude::*;
    let results: Vec<(ConfigurationKind, usize, Result<TrialReport>)> = cells
        .par_iter()
        .map(|&(kind, t)| (kind, t, run_trial(config, kind, t, &truth)))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (kind, t, result) in results {
        match result {
            Ok(report) => {
                persist_report(out_dir, &report)?;
                reports.push(report);
            }
            Err(e) => failures.push(TrialFailure {
                config: kind.name().to_string(),
                trial: t,
                message: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        let text = failures
            .iter()
            .map(|f| format!("{} trial {}: {}\n", f.config, f.trial, f.message))
            .collect::<String>();
        std::fs::write(out_dir.join("failures.txt"), text)?;
    }
    Ok(ExperimentOutcome { reports, failures })
}

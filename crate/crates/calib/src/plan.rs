//! Run plans: the strategy-phase output that tells the optimizer, for each
//! run, which groups are searched full-range, which over shrunk ranges, and
//! which over a handful of discrete points, plus the evaluation budget n(r).

use crate::error::{Error, Result};
use crate::space::{ParameterSpace, ResolutionMode};
use serde::{Deserialize, Serialize};

/// One optimization sub-task: its evaluation budget and the per-group
/// resolution modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// n(r): number of model evaluations for this run.
    pub budget: usize,
    /// Resolution mode per group, indexed by group - 1.
    pub modes: Vec<ResolutionMode>,
}

/// The full schedule: g groups, shrink multiplier w, and the ordered runs.
/// Runs beyond the g-th are fine-tuning runs where every group is Shrunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub group_count: usize,
    pub shrink_multiplier: f64,
    pub runs: Vec<RunConfig>,
}

impl RunPlan {
    /// Extra fine-tuning runs beyond one focus run per group.
    pub fn fine_tuning_runs(&self) -> usize {
        self.runs.len().saturating_sub(self.group_count)
    }

    pub fn total_budget(&self) -> usize {
        self.runs.iter().map(|r| r.budget).sum()
    }

    /// Cumulative budget after each run; report checkpoints land on these.
    pub fn cumulative_budgets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.runs
            .iter()
            .map(|r| {
                acc += r.budget;
                acc
            })
            .collect()
    }

    /// Resolution mode of `group` (1-based) in `run` (1-based).
    pub fn mode_for(&self, run: usize, group: usize) -> Result<ResolutionMode> {
        if run == 0 || run > self.runs.len() {
            return Err(Error::Argument(format!(
                "run {run} out of range 1..={}",
                self.runs.len()
            )));
        }
        if group == 0 || group > self.group_count {
            return Err(Error::Argument(format!(
                "group {group} out of range 1..={}",
                self.group_count
            )));
        }
        Ok(self.runs[run - 1].modes[group - 1])
    }

    /// A single-run plan searching every group at full resolution with the
    /// whole budget: the traditional whole-space baseline.
    pub fn traditional(group_count: usize, total_budget: usize) -> Self {
        RunPlan {
            group_count,
            shrink_multiplier: 2.0,
            runs: vec![RunConfig {
                budget: total_budget,
                modes: vec![ResolutionMode::Full; group_count],
            }],
        }
    }

    /// Scale every run budget by `factor`, rounding to nearest.
    pub fn scaled_budgets(mut self, factor: f64) -> Self {
        for run in &mut self.runs {
            run.budget = ((run.budget as f64) * factor).round().max(1.0) as usize;
        }
        self
    }
}

/// The 6-group, 7-run reference schedule: budgets
/// (200, 300, 450, 550, 700, 800, 1000), w = 2, focus group shifting 1..6
/// with one fine-tuning run, and the published discrete-count pattern
/// (groups 2-5 use 5 points before their focus run; group 6 climbs
/// 2/2/2/3/5 before going full in run 6).
pub fn default_plan() -> RunPlan {
    use ResolutionMode::{Discrete, Full, Shrunk};
    let budgets = [200usize, 300, 450, 550, 700, 800, 1000];
    // Discrete counts for group 6 ahead of its focus run.
    let g6 = [2usize, 2, 2, 3, 5];
    let runs = budgets
        .iter()
        .enumerate()
        .map(|(r_idx, &budget)| {
            let run = r_idx + 1;
            let modes = (1..=6)
                .map(|group| {
                    if run > 6 || group < run {
                        Shrunk
                    } else if group == run {
                        Full
                    } else if group == 6 {
                        Discrete(g6[r_idx])
                    } else {
                        Discrete(5)
                    }
                })
                .collect();
            RunConfig { budget, modes }
        })
        .collect();
    RunPlan {
        group_count: 6,
        shrink_multiplier: 2.0,
        runs,
    }
}

/// Outcome of validating a plan against a parameter space.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
}

/// Check all plan invariants; hard violations become errors naming the
/// offending run/group, soft issues (group-size imbalance, non-increasing
/// budgets) become warnings.
pub fn validate_plan(plan: &RunPlan, space: &ParameterSpace) -> Result<ValidationReport> {
    let g = plan.group_count;
    if g == 0 {
        return Err(Error::Argument("plan has zero groups".into()));
    }
    if plan.runs.is_empty() {
        return Err(Error::Argument("plan has no runs".into()));
    }
    if !(plan.shrink_multiplier > 0.0) {
        return Err(Error::Argument(format!(
            "shrink multiplier {} must be > 0",
            plan.shrink_multiplier
        )));
    }
    for (idx, run) in plan.runs.iter().enumerate() {
        let r = idx + 1;
        if run.budget == 0 {
            return Err(Error::Argument(format!("run {r}: budget must be >= 1")));
        }
        if run.modes.len() != g {
            return Err(Error::Argument(format!(
                "run {r}: {} modes given for {} groups",
                run.modes.len(),
                g
            )));
        }
        for (gi, mode) in run.modes.iter().enumerate() {
            let group = gi + 1;
            mode.validate().map_err(|e| {
                Error::Argument(format!("run {r}, group {group}: {e}"))
            })?;
            // Focus-schedule shape: in runs 1..=g, the focus group (group == r)
            // is Full, earlier groups Shrunk, later groups Discrete; the
            // single-run traditional plan (all Full) is exempt.
            let traditional = plan.runs.len() == 1
                && plan.runs[0].modes.iter().all(|m| *m == ResolutionMode::Full);
            if !traditional {
                let expected_kind = if r > g {
                    "shrunk"
                } else if group < r {
                    "shrunk"
                } else if group == r {
                    "full"
                } else {
                    "discrete"
                };
                let actual_kind = match mode {
                    ResolutionMode::Full => "full",
                    ResolutionMode::Shrunk => "shrunk",
                    ResolutionMode::Discrete(_) => "discrete",
                };
                if expected_kind != actual_kind {
                    return Err(Error::Argument(format!(
                        "run {r}, group {group}: expected {expected_kind} mode, found {actual_kind}"
                    )));
                }
            }
        }
    }

    let mut report = ValidationReport::default();

    // All group indices 1..=g must be populated by the space.
    let sizes = {
        let mut sizes = vec![0usize; g];
        for p in &space.params {
            if p.group == 0 || p.group > g {
                return Err(Error::Argument(format!(
                    "parameter {} references group {} outside 1..={}",
                    p.name, p.group, g
                )));
            }
            sizes[p.group - 1] += 1;
        }
        sizes
    };
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Argument(format!(
            "group {} has no parameters",
            empty + 1
        )));
    }
    let max = *sizes.iter().max().unwrap();
    let min = *sizes.iter().min().unwrap();
    if max > 2 * min {
        report.warnings.push(format!(
            "group sizes are imbalanced: largest group has {max} parameters, smallest {min} \
             (more than a factor of 2 apart)"
        ));
    }
    if plan
        .runs
        .windows(2)
        .any(|w| w[1].budget < w[0].budget)
    {
        report
            .warnings
            .push("budget schedule n(r) is not non-decreasing".into());
    }
    Ok(report)
}

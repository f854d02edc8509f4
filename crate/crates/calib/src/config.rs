//! Experiment configuration: JSON loading, validation, and resolved dumps.
//! A resolved config has every default filled in, so dumping and reloading
//! it is an identity.

use crate::error::{Error, Result};
use crate::models::{self, RegionOrdering};
use crate::plan::{default_plan, validate_plan, RunPlan};
use crate::space::{ParameterSpace, ParameterSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where the observed series and the calibration model come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    /// Double-model testbed: a drawn truth watershed with `cells` cells.
    Synthetic {
        cells: usize,
        seed: u64,
        #[serde(default = "default_days")]
        days: usize,
    },
    /// Observed series from a CSV file (one value per line). Requires an
    /// explicit parameter space.
    ExternalSeries { path: String },
}

fn default_days() -> usize {
    1095
}

/// A calibration scheme to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigurationKind {
    RankedDu,
    RankedUd,
    RankedRand,
    Traditional,
}

impl ConfigurationKind {
    pub fn name(self) -> &'static str {
        match self {
            ConfigurationKind::RankedDu => "ranked-du",
            ConfigurationKind::RankedUd => "ranked-ud",
            ConfigurationKind::RankedRand => "ranked-rand",
            ConfigurationKind::Traditional => "traditional",
        }
    }

    pub fn is_framework(self) -> bool {
        self != ConfigurationKind::Traditional
    }

    /// Region ordering behind this scheme's grouping. Traditional carries
    /// the down-up grouping purely for per-group breakdowns; its single
    /// all-full run never uses groups.
    pub fn ordering(self) -> RegionOrdering {
        match self {
            ConfigurationKind::RankedDu | ConfigurationKind::Traditional => RegionOrdering::DownUp,
            ConfigurationKind::RankedUd => RegionOrdering::UpDown,
            ConfigurationKind::RankedRand => RegionOrdering::CellId,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub configurations: Vec<ConfigurationKind>,
    pub trials: usize,
    #[serde(default = "default_pop_size")]
    pub pop_size: usize,
    #[serde(default = "default_reinit_fraction")]
    pub reinit_fraction: f64,
    pub base_seed: u64,
    /// Framework schedule. Defaults to the standard 7-run plan.
    #[serde(default)]
    pub plan: Option<RunPlan>,
    /// Explicit space; defaults to the synthetic model's space with the
    /// first configuration's grouping.
    #[serde(default)]
    pub space: Option<Vec<ParameterSpec>>,
}

fn default_pop_size() -> usize {
    50
}

fn default_reinit_fraction() -> f64 {
    0.2
}

impl ExperimentConfig {
    /// Fill every default so the config is self-contained, then validate.
    pub fn resolve(mut self) -> Result<ExperimentConfig> {
        if self.plan.is_none() {
            self.plan = Some(default_plan());
        }
        if self.space.is_none() {
            match &self.model {
                ModelSpec::Synthetic { cells, seed, days } => {
                    let truth = models::make_truth_with_days(*cells, *days, *seed)?;
                    let mut params = models::build_space(*cells, Some(&truth));
                    let first = self
                        .configurations
                        .first()
                        .copied()
                        .unwrap_or(ConfigurationKind::RankedDu);
                    let groups = models::region_grouping(&truth.regions, first.ordering());
                    for (p, g) in params.iter_mut().zip(groups) {
                        p.group = g;
                    }
                    self.space = Some(params);
                }
                ModelSpec::ExternalSeries { .. } => {
                    return Err(Error::Config(
                        "external-series model requires an explicit \"space\"".into(),
                    ));
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.configurations.is_empty() {
            return Err(Error::Config("configurations list is empty".into()));
        }
        if self.pop_size < 4 {
            return Err(Error::Config("pop_size must be >= 4".into()));
        }
        if !(0.0..=1.0).contains(&self.reinit_fraction) {
            return Err(Error::Config(format!(
                "reinit_fraction {} outside [0, 1]",
                self.reinit_fraction
            )));
        }
        if let ModelSpec::ExternalSeries { path } = &self.model {
            if !Path::new(path).exists() {
                return Err(Error::Config(format!("observed series file {path} not found")));
            }
        }
        if let (Some(plan), Some(params)) = (&self.plan, &self.space) {
            for p in params {
                if p.group == 0 || p.group > plan.group_count {
                    return Err(Error::Config(format!(
                        "parameter {} assigned to group {} but the plan has groups 1..{}",
                        p.name, p.group, plan.group_count
                    )));
                }
            }
            let space = ParameterSpace::new(params.clone())?;
            validate_plan(plan, &space)?;
        }
        Ok(())
    }

    pub fn resolved_plan(&self) -> &RunPlan {
        self.plan.as_ref().expect("resolved config has a plan")
    }

    pub fn resolved_space(&self) -> Result<ParameterSpace> {
        ParameterSpace::new(
            self.space
                .clone()
                .ok_or_else(|| Error::Config("config not resolved: space missing".into()))?,
        )
    }

    pub fn dump(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Load, resolve, and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    raw.resolve()
}

//! Error metrics. Everything downstream of the optimizer minimizes, so the
//! Nash-Sutcliffe efficiency (1 is perfect) is carried as 1 - NSE.

use crate::error::{Error, Result};

/// Simulated and observed series of equal length.
#[derive(Debug, Clone)]
pub struct SeriesPair<'a> {
    pub simulated: &'a [f64],
    pub observed: &'a [f64],
}

impl<'a> SeriesPair<'a> {
    pub fn new(simulated: &'a [f64], observed: &'a [f64]) -> Result<Self> {
        if simulated.len() != observed.len() {
            return Err(Error::Argument(format!(
                "series length mismatch: simulated {} vs observed {}",
                simulated.len(),
                observed.len()
            )));
        }
        if simulated.len() < 2 {
            return Err(Error::Argument("series must have length >= 2".into()));
        }
        Ok(Self {
            simulated,
            observed,
        })
    }
}

/// Nash-Sutcliffe efficiency: 1 - sum((S-O)^2) / sum((O - mean(O))^2).
pub fn nse(pair: &SeriesPair) -> Result<f64> {
    let n = pair.observed.len() as f64;
    let mean_obs = pair.observed.iter().sum::<f64>() / n;
    let denom: f64 = pair.observed.iter().map(|o| (o - mean_obs).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::Domain(
            "observed series has zero variance; NSE undefined".into(),
        ));
    }
    let num: f64 = pair
        .simulated
        .iter()
        .zip(pair.observed)
        .map(|(s, o)| (s - o).powi(2))
        .sum();
    Ok(1.0 - num / denom)
}

/// Adapter from NSE maximization to the minimization convention: 1 - NSE.
pub fn to_minimized(nse_value: f64) -> f64 {
    1.0 - nse_value
}

/// One evaluated candidate's metric values, minimization convention.
#[derive(Debug, Clone)]
pub struct ObjectiveRecord {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

/// A black-box model the optimizer can evaluate: a parameter assignment in
/// model units in, an output series over the simulation window out.
pub trait ModelInterface: Sync {
    fn run(&self, assignment: &[f64]) -> Result<Vec<f64>>;
    fn dimension(&self) -> usize;
}

/// Run the model once over the window and score every configured metric.
/// `scored_range` excludes spin-up steps from the metric computation.
pub fn evaluate_candidate(
    model: &dyn ModelInterface,
    assignment: &[f64],
    observed: &[f64],
    scored_range: std::ops::Range<usize>,
) -> Result<ObjectiveRecord> {
    if assignment.len() != model.dimension() {
        return Err(Error::Argument(format!(
            "assignment has {} components, model expects {}",
            assignment.len(),
            model.dimension()
        )));
    }
    let simulated = model.run(assignment).map_err(|e| Error::Evaluation {
        assignment: assignment.to_vec(),
        message: e.to_string(),
    })?;
    if simulated.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            assignment: assignment.to_vec(),
            message: "model produced non-finite output".into(),
        });
    }
    let sim = &simulated[scored_range.clone()];
    let obs = &observed[scored_range];
    let pair = SeriesPair::new(sim, obs)?;
    let value = to_minimized(nse(&pair)?);
    Ok(ObjectiveRecord {
        values: vec![value],
        labels: vec!["NSE".into()],
    })
}

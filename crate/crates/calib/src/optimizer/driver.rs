//! The generational loop for one run and the run-by-run calibration driver.
//!
//! Budget accounting is exact: every run consumes precisely n(r) evaluations,
//! and the evaluation log records each (assignment, objectives) pair in
//! canonical offspring order so seeded trials reproduce bit-for-bit.

use super::{
    allocate_queries, generate_offspring_aco_mh, generate_offspring_nsga2, initialize_population,
    nondominated_sort, crowding_distance, Archive, Candidate, MethodWeights, NsgaParams,
    Population, Provenance, ARCHIVE_CAPACITY,
};
use crate::error::{Error, Result};
use crate::plan::RunPlan;
use crate::space::{shrink_range, ParameterSpace, ResolutionMode, SearchRange};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One consumed model evaluation, in search scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub assignment: Vec<f64>,
    pub objectives: Vec<f64>,
}

/// Evaluate the candidates that still lack objectives, in canonical order,
/// consuming at most `budget_left` evaluations.
fn evaluate_pending<F>(
    members: &mut [Candidate],
    evaluator: &F,
    budget_left: usize,
    log: &mut Vec<EvalRecord>,
) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let pending: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_evaluated())
        .map(|(i, _)| i)
        .take(budget_left)
        .collect();
    use rayon::prelude::*;
    let results: Vec<Result<Vec<f64>>> = pending
        .par_iter()
        .map(|&i| evaluator(&members[i].assignment))
        .collect();
    for (&i, result) in pending.iter().zip(results) {
        let objectives = result?;
        log.push(EvalRecord {
            assignment: members[i].assignment.clone(),
            objectives: objectives.clone(),
        });
        members[i].objectives = Some(objectives);
    }
    Ok(())
}

/// Environmental selection: keep `size` members of parents + offspring by
/// (front rank, crowding distance), deterministic tie-break by index. The
/// best rank-0 parent always survives.
fn environmental_selection(pool: Vec<Candidate>, size: usize) -> Result<Vec<Candidate>> {
    let evaluated: Vec<Candidate> = pool.into_iter().filter(|c| c.is_evaluated()).collect();
    if evaluated.len() <= size {
        return Ok(evaluated);
    }
    let objectives: Vec<Vec<f64>> = evaluated
        .iter()
        .map(|c| c.objectives.clone().unwrap())
        .collect();
    let fronts = nondominated_sort(&objectives)?;
    let mut selected: Vec<usize> = Vec::with_capacity(size);
    for front in fronts {
        if selected.len() + front.len() <= size {
            selected.extend(front);
        } else {
            let vecs: Vec<Vec<f64>> = front.iter().map(|&i| objectives[i].clone()).collect();
            let crowd = crowding_distance(&vecs);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                crowd[b]
                    .partial_cmp(&crowd[a])
                    .unwrap()
                    .then(front[a].cmp(&front[b]))
            });
            for &slot in order.iter().take(size - selected.len()) {
                selected.push(front[slot]);
            }
            break;
        }
    }
    selected.sort_unstable();
    let mut keep_flags = vec![false; evaluated.len()];
    for &i in &selected {
        keep_flags[i] = true;
    }
    Ok(evaluated
        .into_iter()
        .zip(keep_flags)
        .filter(|(_, keep)| *keep)
        .map(|(c, _)| c)
        .collect())
}

/// Execute one run's generational loop until exactly `budget` evaluations
/// are consumed (the final generation may be partial). Returns the final
/// population and the ordered evaluation log.
pub fn evolve_run<F>(
    evaluator: &F,
    mut population: Population,
    budget: usize,
    modes: &[ResolutionMode],
    ranges: &[SearchRange],
    pop_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Population, Vec<EvalRecord>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let mut log = Vec::with_capacity(budget);
    evaluate_pending(&mut population.members, evaluator, budget, &mut log)?;
    let nsga_params = NsgaParams::default();
    let mut weights = MethodWeights::uniform();

    while log.len() < budget {
        let count = pop_size.min(budget - log.len());
        let n_nsga = ((count as f64) * weights.0[0]).round() as usize;
        let n_aco = count - n_nsga;

        let parents = Population {
            members: population
                .members
                .iter()
                .filter(|c| c.is_evaluated())
                .cloned()
                .collect(),
        };
        if parents.members.is_empty() {
            return Err(Error::State("no evaluated members to evolve from".into()));
        }
        let mut offspring =
            generate_offspring_nsga2(&parents, modes, ranges, n_nsga, &nsga_params, rng)?;
        offspring.extend(generate_offspring_aco_mh(
            &parents.members,
            modes,
            ranges,
            n_aco,
            rng,
        )?);
        evaluate_pending(&mut offspring, evaluator, count, &mut log)?;

        let mut pool = parents.members;
        pool.extend(offspring);
        let selected = environmental_selection(pool, pop_size)?;
        let survivors = [
            selected
                .iter()
                .filter(|c| c.provenance == Provenance::NsgaOffspring)
                .count(),
            selected
                .iter()
                .filter(|c| c.provenance == Provenance::AcoMhOffspring)
                .count(),
        ];
        weights = allocate_queries(Some(&survivors));
        population = Population { members: selected };
    }
    Ok((population, log))
}

/// Serialized between-run state: enough to resume a trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub completed_runs: usize,
    pub population: Population,
    pub archive: Archive,
    pub ranges: Vec<SearchRange>,
    pub rng: ChaCha8Rng,
    pub best_series: Vec<f64>,
}

/// Output of one calibration trial.
#[derive(Debug, Clone)]
pub struct TrialCore {
    pub final_population: Population,
    pub archive: Archive,
    /// Best-so-far primary objective after every evaluation (minimized).
    pub best_series: Vec<f64>,
}

/// Run the full calibration schedule: for each run, derive per-group modes
/// and ranges (shrinking Shrunk groups around the current population),
/// initialize with carryover, evolve, and fold every evaluation into the
/// archive and the best-so-far series.
///
/// The evaluator receives assignments in search scale.
pub fn run_calibration<F>(
    evaluator: &F,
    space: &ParameterSpace,
    plan: &RunPlan,
    pop_size: usize,
    reinit_fraction: f64,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<TrialCore>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if space.group_count() > plan.group_count {
        return Err(Error::Argument(format!(
            "space references group {} but the plan has {} groups",
            space.group_count(),
            plan.group_count
        )));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let original = space.original_ranges();
    let mut archive = Archive::new(ARCHIVE_CAPACITY);
    let mut best_series: Vec<f64> = Vec::with_capacity(plan.total_budget());
    let mut population: Option<Population> = None;

    let write_checkpoint = |run_idx: usize,
                            population: &Population,
                            archive: &Archive,
                            ranges: &[SearchRange],
                            rng: &ChaCha8Rng,
                            best_series: &[f64]|
     -> Result<()> {
        if let Some(dir) = checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            let cp = Checkpoint {
                completed_runs: run_idx,
                population: population.clone(),
                archive: archive.clone(),
                ranges: ranges.to_vec(),
                rng: rng.clone(),
                best_series: best_series.to_vec(),
            };
            let path = dir.join("checkpoint.json");
            std::fs::write(path, serde_json::to_string(&cp)?)?;
        }
        Ok(())
    };

    for (run_idx, run) in plan.runs.iter().enumerate() {
        let run_no = run_idx + 1;
        // Per-parameter modes from the group schedule.
        let modes: Vec<ResolutionMode> = space
            .params
            .iter()
            .map(|p| plan.mode_for(run_no, p.group))
            .collect::<Result<_>>()?;
        // Ranges: original for Full/Discrete groups; shrunk around the
        // current population for Shrunk groups (clipped to original bounds).
        let ranges: Vec<SearchRange> = space
            .params
            .iter()
            .enumerate()
            .map(|(i, spec)| match modes[i] {
                ResolutionMode::Shrunk => {
                    let values = population
                        .as_ref()
                        .expect("Shrunk mode cannot occur in run 1")
                        .component_values(i);
                    shrink_range(spec, &values, plan.shrink_multiplier)
                }
                _ => Ok(original[i]),
            })
            .collect::<Result<_>>()?;

        let initial = initialize_population(
            &ranges,
            &modes,
            pop_size,
            population.as_ref(),
            reinit_fraction,
            &mut rng,
        )?;
        let outcome = evolve_run(
            evaluator,
            initial,
            run.budget,
            &modes,
            &ranges,
            pop_size,
            &mut rng,
        );
        let (final_pop, log) = match outcome {
            Ok(v) => v,
            Err(e) => {
                // Abort with a resumable checkpoint of the last completed run.
                if let Some(pop) = population.as_ref() {
                    let _ = write_checkpoint(
                        run_idx,
                        pop,
                        &archive,
                        &ranges,
                        &rng,
                        &best_series,
                    );
                }
                return Err(e);
            }
        };
        for record in &log {
            let candidate = Candidate {
                assignment: record.assignment.clone(),
                objectives: Some(record.objectives.clone()),
                provenance: Provenance::RandomInit,
            };
            archive.insert(&candidate);
            let best = best_series
                .last()
                .copied()
                .unwrap_or(f64::INFINITY)
                .min(record.objectives[0]);
            best_series.push(best);
        }
        write_checkpoint(run_no, &final_pop, &archive, &ranges, &rng, &best_series)?;
        population = Some(final_pop);
    }
    Ok(TrialCore {
        final_population: population.expect("plan has at least one run"),
        archive,
        best_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::default_plan;
    use crate::space::{ParameterSpec, Scale};
    use rand::SeedableRng;

    fn sphere(assignment: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![assignment.iter().map(|x| x * x).sum()])
    }

    fn sphere_space(groups: usize, per_group: usize) -> ParameterSpace {
        let mut params = Vec::new();
        for g in 1..=groups {
            for i in 0..per_group {
                params.push(ParameterSpec::new(
                    format!("x{g}_{i}"),
                    -1.0,
                    1.0,
                    Scale::Linear,
                    g,
                ));
            }
        }
        ParameterSpace::new(params).unwrap()
    }

    #[test]
    fn budget_equals_pop_size_single_pass() {
        let space = sphere_space(1, 3);
        let modes = vec![ResolutionMode::Full; 3];
        let ranges = space.original_ranges();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = initialize_population(&ranges, &modes, 20, None, 0.0, &mut rng).unwrap();
        let (out, log) =
            evolve_run(&sphere, pop, 20, &modes, &ranges, 20, &mut rng).unwrap();
        assert_eq!(log.len(), 20);
        assert!(out.members.iter().all(|c| c.is_evaluated()));
    }

    #[test]
    fn log_length_equals_budget_exactly() {
        let space = sphere_space(1, 4);
        let modes = vec![ResolutionMode::Full; 4];
        let ranges = space.original_ranges();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for budget in [37, 50, 113] {
            let pop =
                initialize_population(&ranges, &modes, 20, None, 0.0, &mut rng).unwrap();
            let (_, log) =
                evolve_run(&sphere, pop, budget, &modes, &ranges, 20, &mut rng).unwrap();
            assert_eq!(log.len(), budget);
        }
    }

    #[test]
    fn sphere_improves_with_budget() {
        let space = sphere_space(1, 5);
        let modes = vec![ResolutionMode::Full; 5];
        let ranges = space.original_ranges();
        let best_after = |budget: usize| -> f64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let pop =
                initialize_population(&ranges, &modes, 25, None, 0.0, &mut rng).unwrap();
            let (_, log) =
                evolve_run(&sphere, pop, budget, &modes, &ranges, 25, &mut rng).unwrap();
            log.iter()
                .map(|r| r.objectives[0])
                .fold(f64::INFINITY, f64::min)
        };
        assert!(best_after(500) < best_after(50));
    }

    #[test]
    fn elitist_selection_keeps_best_parent() {
        let pool: Vec<Candidate> = (0..10)
            .map(|i| Candidate {
                assignment: vec![i as f64],
                objectives: Some(vec![i as f64]),
                provenance: Provenance::RandomInit,
            })
            .collect();
        let selected = environmental_selection(pool, 4).unwrap();
        assert!(selected.iter().any(|c| c.primary().unwrap() == 0.0));
    }

    #[test]
    fn calibration_accounting_and_monotonicity() {
        let space = sphere_space(6, 2);
        let plan = default_plan().scaled_budgets(0.25);
        let core =
            run_calibration(&sphere, &space, &plan, 20, 0.2, 42, None).unwrap();
        assert_eq!(core.best_series.len(), plan.total_budget());
        for w in core.best_series.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(core.archive.members.len() <= ARCHIVE_CAPACITY);
        // Archive sorted ascending by primary objective.
        for w in core.archive.members.windows(2) {
            assert!(w[0].primary().unwrap() <= w[1].primary().unwrap());
        }
    }

    #[test]
    fn evaluator_error_carries_assignment() {
        let space = sphere_space(1, 2);
        let plan = RunPlan::traditional(1, 40);
        let failing = |a: &[f64]| -> Result<Vec<f64>> {
            Err(Error::Evaluation {
                assignment: a.to_vec(),
                message: "synthetic failure".into(),
            })
        };
        let err = run_calibration(&failing, &space, &plan, 10, 0.2, 1, None).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
    }
}

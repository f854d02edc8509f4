//! The optimization phase: a population-based ensemble of two cooperating
//! metaheuristics (NSGA-II and an adaptive-Metropolis/ACO hybrid) over mixed
//! continuous-discrete encodings, executed run-by-run with population
//! carryover and post-run range shrinking.

mod acomh;
mod driver;
mod nsga;

pub use acomh::generate_offspring_aco_mh;
pub use driver::{run_calibration, evolve_run, EvalRecord, TrialCore};
pub use nsga::{crowding_distance, generate_offspring_nsga2, nondominated_sort, NsgaParams};

use crate::error::{Error, Result};
use crate::space::{project_into, sample_assignment, ResolutionMode, SearchRange};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const ARCHIVE_CAPACITY: usize = 20;
pub const METHOD_WEIGHT_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    RandomInit,
    Carryover,
    NsgaOffspring,
    AcoMhOffspring,
}

/// One full parameter assignment (search scale) with its objective values
/// once evaluated. Objectives follow the minimization convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub assignment: Vec<f64>,
    pub objectives: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl Candidate {
    pub fn is_evaluated(&self) -> bool {
        self.objectives.is_some()
    }

    pub fn primary(&self) -> Option<f64> {
        self.objectives.as_ref().map(|o| o[0])
    }
}

/// The evolving solution set within and across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Candidate>,
}

impl Population {
    pub fn evaluated(&self) -> Vec<&Candidate> {
        self.members.iter().filter(|c| c.is_evaluated()).collect()
    }

    /// Per-parameter value lists across all members, used for range shrinking.
    pub fn component_values(&self, param: usize) -> Vec<f64> {
        self.members.iter().map(|c| c.assignment[param]).collect()
    }
}

/// Best evaluated candidates found so far in a trial, sorted ascending by
/// primary objective, deduplicated on exact assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Archive {
    pub capacity: usize,
    pub members: Vec<Candidate>,
}

impl Archive {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            members: Vec::new(),
        }
    }

    pub fn insert(&mut self, candidate: &Candidate) {
        let Some(p) = candidate.primary() else { return };
        if self
            .members
            .iter()
            .any(|m| m.assignment == candidate.assignment)
        {
            return;
        }
        let pos = self
            .members
            .partition_point(|m| m.primary().unwrap() <= p);
        if pos >= self.capacity {
            return;
        }
        self.members.insert(pos, candidate.clone());
        self.members.truncate(self.capacity);
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.members.first()
    }
}

/// Query-allocation weights over the two low-level optimizers
/// (NSGA-II first, ACO/Metropolis hybrid second).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MethodWeights(pub [f64; 2]);

impl MethodWeights {
    pub fn uniform() -> Self {
        MethodWeights([0.5, 0.5])
    }
}

/// Survivor-proportional adaptive allocation: weight_m proportional to
/// (offspring of method m that survived selection + 1), floored at 0.1 and
/// renormalized. No history yields uniform weights.
pub fn allocate_queries(history: Option<&[usize; 2]>) -> MethodWeights {
    let Some(survivors) = history else {
        return MethodWeights::uniform();
    };
    let raw = [survivors[0] as f64 + 1.0, survivors[1] as f64 + 1.0];
    let sum = raw[0] + raw[1];
    let mut w = [raw[0] / sum, raw[1] / sum];
    for i in 0..2 {
        if w[i] < METHOD_WEIGHT_FLOOR {
            w[i] = METHOD_WEIGHT_FLOOR;
            w[1 - i] = 1.0 - METHOD_WEIGHT_FLOOR;
        }
    }
    MethodWeights(w)
}

/// Build a run's starting population: fresh uniform/discrete draws, or a mix
/// of random members and the best carryover members re-projected into the
/// current ranges.
pub fn initialize_population<R: Rng>(
    ranges: &[SearchRange],
    modes: &[ResolutionMode],
    size: usize,
    carryover: Option<&Population>,
    reinit_fraction: f64,
    rng: &mut R,
) -> Result<Population> {
    if size < 2 {
        return Err(Error::Argument(format!(
            "population size {size} must be >= 2"
        )));
    }
    if !(0.0..=1.0).contains(&reinit_fraction) {
        return Err(Error::Argument(format!(
            "reinit fraction {reinit_fraction} must lie in [0, 1]"
        )));
    }
    if ranges.len() != modes.len() {
        return Err(Error::Argument(format!(
            "{} ranges for {} modes",
            ranges.len(),
            modes.len()
        )));
    }
    let random_draw = |rng: &mut R| -> Result<Candidate> {
        let assignment = ranges
            .iter()
            .zip(modes)
            .map(|(range, mode)| sample_assignment(range, *mode, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Candidate {
            assignment,
            objectives: None,
            provenance: Provenance::RandomInit,
        })
    };

    let mut members = Vec::with_capacity(size);
    if let Some(prev) = carryover {
        if let Some(c) = prev.members.first() {
            if c.assignment.len() != ranges.len() {
                return Err(Error::Argument(format!(
                    "carryover dimensionality {} does not match {} parameters",
                    c.assignment.len(),
                    ranges.len()
                )));
            }
        }
        let fresh = ((size as f64) * reinit_fraction).round() as usize;
        let keep = size - fresh;
        // Best carryover members by primary objective; unevaluated ones last.
        let mut ordered: Vec<&Candidate> = prev.members.iter().collect();
        ordered.sort_by(|a, b| {
            let pa = a.primary().unwrap_or(f64::INFINITY);
            let pb = b.primary().unwrap_or(f64::INFINITY);
            pa.partial_cmp(&pb).unwrap()
        });
        for c in ordered.into_iter().take(keep) {
            let assignment: Vec<f64> = c
                .assignment
                .iter()
                .zip(ranges.iter().zip(modes))
                .map(|(&v, (range, mode))| project_into(range, *mode, v))
                .collect();
            // Re-projection invalidates the stored objectives.
            let objectives = if assignment == c.assignment {
                c.objectives.clone()
            } else {
                None
            };
            members.push(Candidate {
                assignment,
                objectives,
                provenance: Provenance::Carryover,
            });
        }
        while members.len() < size {
            members.push(random_draw(rng)?);
        }
    } else {
        for _ in 0..size {
            members.push(random_draw(rng)?);
        }
    }
    Ok(Population { members })
}

/// Check the range/snap invariant for one assignment.
pub fn assignment_in_bounds(
    assignment: &[f64],
    ranges: &[SearchRange],
    modes: &[ResolutionMode],
) -> bool {
    assignment
        .iter()
        .zip(ranges.iter().zip(modes))
        .all(|(&v, (range, mode))| match mode {
            ResolutionMode::Full | ResolutionMode::Shrunk => range.contains(v),
            ResolutionMode::Discrete(_) => (project_into(range, *mode, v) - v).abs() == 0.0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_setup(n: usize) -> (Vec<SearchRange>, Vec<ResolutionMode>) {
        (
            vec![SearchRange::new(0.0, 1.0).unwrap(); n],
            vec![ResolutionMode::Full; n],
        )
    }

    #[test]
    fn allocate_uniform_without_history() {
        let w = allocate_queries(None);
        assert_eq!(w.0, [0.5, 0.5]);
    }

    #[test]
    fn allocate_floors_starved_method() {
        let w = allocate_queries(Some(&[9, 0]));
        assert!((w.0[0] - 0.9).abs() < 1e-12);
        assert!((w.0[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn allocate_symmetric_zero_history() {
        let w = allocate_queries(Some(&[0, 0]));
        assert_eq!(w.0, [0.5, 0.5]);
    }

    #[test]
    fn init_without_carryover_all_random() {
        let (ranges, modes) = unit_setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = initialize_population(&ranges, &modes, 50, None, 0.2, &mut rng).unwrap();
        assert_eq!(pop.members.len(), 50);
        assert!(pop
            .members
            .iter()
            .all(|c| c.provenance == Provenance::RandomInit));
    }

    #[test]
    fn init_with_carryover_counts() {
        let (ranges, modes) = unit_setup(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev = Population {
            members: (0..50)
                .map(|i| Candidate {
                    assignment: vec![0.5, 0.5],
                    objectives: Some(vec![i as f64]),
                    provenance: Provenance::RandomInit,
                })
                .collect(),
        };
        let pop =
            initialize_population(&ranges, &modes, 50, Some(&prev), 0.2, &mut rng).unwrap();
        let fresh = pop
            .members
            .iter()
            .filter(|c| c.provenance == Provenance::RandomInit)
            .count();
        let kept = pop
            .members
            .iter()
            .filter(|c| c.provenance == Provenance::Carryover)
            .count();
        assert_eq!(fresh, 10);
        assert_eq!(kept, 40);
    }

    #[test]
    fn carryover_reprojected_into_shrunk_range() {
        let ranges = vec![SearchRange::new(0.1, 0.7).unwrap()];
        let modes = vec![ResolutionMode::Shrunk];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prev = Population {
            members: vec![
                Candidate {
                    assignment: vec![0.95],
                    objectives: Some(vec![0.1]),
                    provenance: Provenance::RandomInit,
                },
                Candidate {
                    assignment: vec![0.5],
                    objectives: Some(vec![0.2]),
                    provenance: Provenance::RandomInit,
                },
            ],
        };
        let pop =
            initialize_population(&ranges, &modes, 2, Some(&prev), 0.0, &mut rng).unwrap();
        let clamped = pop
            .members
            .iter()
            .find(|c| c.provenance == Provenance::Carryover && c.assignment[0] == 0.7)
            .expect("clamped carryover member");
        // Assignment changed, so the objective must have been invalidated.
        assert!(clamped.objectives.is_none());
    }

    #[test]
    fn init_rejects_tiny_population() {
        let (ranges, modes) = unit_setup(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(initialize_population(&ranges, &modes, 1, None, 0.2, &mut rng).is_err());
    }

    #[test]
    fn archive_sorted_deduplicated_bounded() {
        let mut archive = Archive::new(3);
        for (i, p) in [0.5, 0.2, 0.9, 0.2, 0.1, 0.3].iter().enumerate() {
            let c = Candidate {
                assignment: vec![*p, i as f64],
                objectives: Some(vec![*p]),
                provenance: Provenance::RandomInit,
            };
            archive.insert(&c);
            // Duplicate assignment must be ignored.
            archive.insert(&c);
        }
        assert_eq!(archive.members.len(), 3);
        let primaries: Vec<f64> = archive.members.iter().map(|c| c.primary().unwrap()).collect();
        assert_eq!(primaries, vec![0.1, 0.2, 0.2]);
        assert!(archive.best().unwrap().primary().unwrap() <= primaries[2]);
    }
}

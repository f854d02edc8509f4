//! NSGA-II machinery: fast nondominated sorting, crowding distance, and the
//! variation operators (SBX-style crossover, bounded polynomial mutation,
//! uniform resampling on discrete components).

use super::{Candidate, Population, Provenance};
use crate::error::{Error, Result};
use crate::space::{discrete_points, project_into, ResolutionMode, SearchRange};
use rand::Rng;

/// True when `a` Pareto-dominates `b` (minimization).
fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast nondominated sort. Returns fronts as index lists; front 0 is the
/// nondominated set of the whole input.
pub fn nondominated_sort(objectives: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    if objectives.is_empty() {
        return Ok(Vec::new());
    }
    let dim = objectives[0].len();
    if objectives.iter().any(|o| o.len() != dim) {
        return Err(Error::Argument(
            "objective vectors have mixed dimensionality".into(),
        ));
    }
    let n = objectives.len();
    let mut dominated_by: Vec<usize> = vec![0; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    Ok(fronts)
}

/// Crowding distance of each member of one front. Boundary members per
/// objective get +infinity; constant objective dimensions contribute 0.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = front[0].len();
    let mut dist = vec![0.0f64; n];
    for d in 0..dim {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a][d].partial_cmp(&front[b][d]).unwrap());
        let span = front[order[n - 1]][d] - front[order[0]][d];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if span == 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (front[order[w + 1]][d] - front[order[w - 1]][d]) / span;
            }
        }
    }
    dist
}

/// Operator settings for the NSGA-II variation step.
#[derive(Debug, Clone, Copy)]
pub struct NsgaParams {
    pub crossover_rate: f64,
    /// Per-component mutation probability; None means 1/dimension.
    pub mutation_rate: Option<f64>,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
}

impl Default for NsgaParams {
    fn default() -> Self {
        Self {
            crossover_rate: 0.9,
            mutation_rate: None,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
        }
    }
}

/// (rank, crowding distance) per member, for tournament selection.
fn rank_and_crowding(objectives: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    let fronts = nondominated_sort(objectives)?;
    let mut rank = vec![0usize; objectives.len()];
    let mut crowd = vec![0.0f64; objectives.len()];
    for (f_idx, front) in fronts.iter().enumerate() {
        let vecs: Vec<Vec<f64>> = front.iter().map(|&i| objectives[i].clone()).collect();
        let d = crowding_distance(&vecs);
        for (slot, &i) in front.iter().enumerate() {
            rank[i] = f_idx;
            crowd[i] = d[slot];
        }
    }
    Ok((rank, crowd))
}

fn tournament<R: Rng>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let n = rank.len();
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    if rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b]) {
        a
    } else {
        b
    }
}

fn sbx_blend<R: Rng>(x1: f64, x2: f64, range: &SearchRange, eta: f64, rng: &mut R) -> f64 {
    if range.width() == 0.0 || (x1 - x2).abs() < 1e-14 {
        return x1;
    }
    let u: f64 = rng.gen();
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    };
    let child = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2);
    range.clamp(child)
}

fn polynomial_mutate<R: Rng>(x: f64, range: &SearchRange, eta: f64, rng: &mut R) -> f64 {
    let width = range.width();
    if width == 0.0 {
        return x;
    }
    let u: f64 = rng.gen();
    let delta = if u < 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
    };
    range.clamp(x + delta * width)
}

/// Produce `count` offspring by binary tournament on (rank, crowding),
/// SBX-style crossover and polynomial mutation on continuous components, and
/// uniform resampling mutation on discrete components. With both operator
/// rates at zero, offspring are exact copies of selected parents.
pub fn generate_offspring_nsga2<R: Rng>(
    population: &Population,
    modes: &[ResolutionMode],
    ranges: &[SearchRange],
    count: usize,
    params: &NsgaParams,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if population.members.iter().any(|c| !c.is_evaluated()) {
        return Err(Error::State(
            "NSGA-II offspring generation requires a fully evaluated population".into(),
        ));
    }
    let objectives: Vec<Vec<f64>> = population
        .members
        .iter()
        .map(|c| c.objectives.clone().unwrap())
        .collect();
    let (rank, crowd) = rank_and_crowding(&objectives)?;
    let dim = ranges.len();
    let pm = params.mutation_rate.unwrap_or(1.0 / dim.max(1) as f64);

    let mut offspring = Vec::with_capacity(count);
    while offspring.len() < count {
        let pa = tournament(&rank, &crowd, rng);
        let pb = tournament(&rank, &crowd, rng);
        let parent_a = &population.members[pa].assignment;
        let parent_b = &population.members[pb].assignment;
        let mut child = parent_a.clone();
        if rng.gen::<f64>() < params.crossover_rate {
            for i in 0..dim {
                match modes[i] {
                    ResolutionMode::Full | ResolutionMode::Shrunk => {
                        child[i] = sbx_blend(
                            parent_a[i],
                            parent_b[i],
                            &ranges[i],
                            params.eta_crossover,
                            rng,
                        );
                    }
                    ResolutionMode::Discrete(_) => {
                        // Uniform crossover on discrete components.
                        if rng.gen::<bool>() {
                            child[i] = parent_b[i];
                        }
                    }
                }
            }
        }
        for i in 0..dim {
            if rng.gen::<f64>() < pm {
                match modes[i] {
                    ResolutionMode::Full | ResolutionMode::Shrunk => {
                        child[i] =
                            polynomial_mutate(child[i], &ranges[i], params.eta_mutation, rng);
                    }
                    ResolutionMode::Discrete(k) => {
                        let points = discrete_points(&ranges[i], k)?;
                        child[i] = points[rng.gen_range(0..points.len())];
                    }
                }
            }
            child[i] = project_into(&ranges[i], modes[i], child[i]);
        }
        offspring.push(Candidate {
            assignment: child,
            objectives: None,
            provenance: Provenance::NsgaOffspring,
        });
    }
    Ok(offspring)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sort_hand_case() {
        let objs = vec![
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![2.0, 2.0],
        ];
        let fronts = nondominated_sort(&objs).unwrap();
        assert_eq!(fronts, vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn sort_single_objective_total_order() {
        let objs = vec![vec![3.0], vec![1.0], vec![2.0]];
        let fronts = nondominated_sort(&objs).unwrap();
        assert_eq!(fronts, vec![vec![1], vec![2], vec![0]]);
    }

    #[test]
    fn sort_identical_vectors_one_front() {
        let objs = vec![vec![1.0, 2.0]; 5];
        let fronts = nondominated_sort(&objs).unwrap();
        assert_eq!(fronts.len(), 1);
        assert_eq!(fronts[0].len(), 5);
    }

    #[test]
    fn sort_rejects_mixed_dimensionality() {
        let objs = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(nondominated_sort(&objs).is_err());
    }

    /// Brute-force oracle: repeatedly peel the nondominated set.
    fn brute_force_fronts(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..objs.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    !remaining
                        .iter()
                        .any(|&j| j != i && dominates(&objs[j], &objs[i]))
                })
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn sort_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(1..=64);
            let d = rng.gen_range(1..=4);
            let objs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(0..6) as f64).collect())
                .collect();
            let fast = nondominated_sort(&objs).unwrap();
            let brute = brute_force_fronts(&objs);
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn crowding_two_members_both_infinite() {
        let front = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let d = crowding_distance(&front);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn crowding_hand_case() {
        let front = vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        let d = crowding_distance(&front);
        assert!(d[0].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
        assert!(d[2].is_infinite());
    }

    #[test]
    fn crowding_singleton() {
        let d = crowding_distance(&[vec![1.0]]);
        assert_eq!(d.len(), 1);
        assert!(d[0].is_infinite());
    }

    fn test_population(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Population {
        Population {
            members: (0..n)
                .map(|_| {
                    let assignment: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let obj = assignment.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>();
                    Candidate {
                        assignment,
                        objectives: Some(vec![obj]),
                        provenance: Provenance::RandomInit,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn offspring_zero_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = test_population(10, 3, &mut rng);
        let ranges = vec![SearchRange::new(0.0, 1.0).unwrap(); 3];
        let modes = vec![ResolutionMode::Full; 3];
        let off = generate_offspring_nsga2(&pop, &modes, &ranges, 0, &NsgaParams::default(), &mut rng)
            .unwrap();
        assert!(off.is_empty());
    }

    #[test]
    fn offspring_respect_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ranges = vec![
            SearchRange::new(0.0, 1.0).unwrap(),
            SearchRange::new(-2.0, 3.0).unwrap(),
            SearchRange::new(0.0, 1.0).unwrap(),
        ];
        let modes = vec![
            ResolutionMode::Full,
            ResolutionMode::Shrunk,
            ResolutionMode::Discrete(5),
        ];
        let mut pop = test_population(20, 3, &mut rng);
        for c in &mut pop.members {
            for i in 0..3 {
                c.assignment[i] = project_into(&ranges[i], modes[i], c.assignment[i]);
            }
        }
        for _ in 0..10 {
            let off = generate_offspring_nsga2(
                &pop,
                &modes,
                &ranges,
                100,
                &NsgaParams::default(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(off.len(), 100);
            for c in &off {
                assert!(super::super::assignment_in_bounds(
                    &c.assignment,
                    &ranges,
                    &modes
                ));
            }
        }
    }

    #[test]
    fn zero_rate_operators_copy_parents() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pop = test_population(10, 4, &mut rng);
        let ranges = vec![SearchRange::new(0.0, 1.0).unwrap(); 4];
        let modes = vec![ResolutionMode::Full; 4];
        let params = NsgaParams {
            crossover_rate: 0.0,
            mutation_rate: Some(0.0),
            ..NsgaParams::default()
        };
        let off =
            generate_offspring_nsga2(&pop, &modes, &ranges, 30, &params, &mut rng).unwrap();
        for c in &off {
            assert!(pop.members.iter().any(|m| m.assignment == c.assignment));
        }
    }

    #[test]
    fn offspring_require_evaluated_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pop = test_population(5, 2, &mut rng);
        pop.members[2].objectives = None;
        let ranges = vec![SearchRange::new(0.0, 1.0).unwrap(); 2];
        let modes = vec![ResolutionMode::Full; 2];
        assert!(generate_offspring_nsga2(
            &pop,
            &modes,
            &ranges,
            5,
            &NsgaParams::default(),
            &mut rng
        )
        .is_err());
    }
}

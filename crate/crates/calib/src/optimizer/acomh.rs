//! The adaptive-Metropolis / ant-colony hybrid: continuous components come
//! from a rank-weighted Gaussian kernel mixture around elite solutions with a
//! Metropolis filter on the kernel center, discrete components from a
//! rank-weighted, additively smoothed frequency table over the elites.

use super::{Candidate, Provenance};
use crate::error::{Error, Result};
use crate::space::{discrete_points, project_into, ResolutionMode, SearchRange};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const ELITE_COUNT: usize = 10;
const SMOOTHING_EPSILON: f64 = 0.1;

/// Interquartile range of a value list; linear interpolation on p*(n-1).
fn iqr(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    quantile(0.75) - quantile(0.25)
}

/// Generate `count` offspring around the elite members of `source`.
///
/// The adaptive temperature is the interquartile range of the source's
/// primary objectives, so acceptance stays scale-free as the population
/// tightens.
pub fn generate_offspring_aco_mh<R: Rng>(
    source: &[Candidate],
    modes: &[ResolutionMode],
    ranges: &[SearchRange],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let evaluated: Vec<&Candidate> = source.iter().filter(|c| c.is_evaluated()).collect();
    if evaluated.is_empty() {
        return Err(Error::State(
            "ACO/MH offspring generation requires an evaluated, non-empty source set".into(),
        ));
    }
    let dim = ranges.len();

    // Elites sorted ascending by primary objective, linear rank weights
    // normalized to sum 1.
    let mut elites = evaluated;
    elites.sort_by(|a, b| a.primary().unwrap().partial_cmp(&b.primary().unwrap()).unwrap());
    elites.truncate(ELITE_COUNT);
    let q = elites.len();
    let weight_sum = (q * (q + 1) / 2) as f64;
    let weights: Vec<f64> = (0..q).map(|r| (q - r) as f64 / weight_sum).collect();

    // Per-dimension kernel width: weighted mean absolute deviation among the
    // elites. Collapses to zero for a single-member source.
    let mut sigma = vec![0.0f64; dim];
    for d in 0..dim {
        let mean: f64 = elites
            .iter()
            .zip(&weights)
            .map(|(c, w)| w * c.assignment[d])
            .sum();
        sigma[d] = elites
            .iter()
            .zip(&weights)
            .map(|(c, w)| w * (c.assignment[d] - mean).abs())
            .sum();
    }

    // Discrete sampling tables: rank-weighted frequency with additive
    // smoothing over the k discrete points.
    let mut tables: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; dim];
    for d in 0..dim {
        if let ResolutionMode::Discrete(k) = modes[d] {
            let points = discrete_points(&ranges[d], k)?;
            let mut mass = vec![SMOOTHING_EPSILON; k];
            for (c, w) in elites.iter().zip(&weights) {
                let nearest = points
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        (*a - c.assignment[d])
                            .abs()
                            .partial_cmp(&(*b - c.assignment[d]).abs())
                            .unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                mass[nearest] += w;
            }
            tables[d] = Some((points, mass));
        }
    }

    // Metropolis filter over the kernel center choice.
    let best = elites[0].primary().unwrap();
    let objectives: Vec<f64> = source
        .iter()
        .filter_map(|c| c.primary())
        .collect();
    let temperature = iqr(&objectives);

    let mut offspring = Vec::with_capacity(count);
    for _ in 0..count {
        // Propose centers by rank weight, accept against the best objective.
        let mut center = 0usize;
        for attempt in 0..8 {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = q - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u <= acc {
                    pick = i;
                    break;
                }
            }
            let delta = elites[pick].primary().unwrap() - best;
            let accept = if temperature > 0.0 {
                (-delta / temperature).exp()
            } else if delta == 0.0 {
                1.0
            } else {
                0.0
            };
            if rng.gen::<f64>() < accept || attempt == 7 {
                center = pick;
                break;
            }
        }
        let center = &elites[center];

        let mut assignment = vec![0.0f64; dim];
        for d in 0..dim {
            match modes[d] {
                ResolutionMode::Full | ResolutionMode::Shrunk => {
                    let v = if sigma[d] > 0.0 {
                        Normal::new(center.assignment[d], sigma[d])
                            .unwrap()
                            .sample(rng)
                    } else {
                        center.assignment[d]
                    };
                    assignment[d] = ranges[d].clamp(v);
                }
                ResolutionMode::Discrete(_) => {
                    let (points, mass) = tables[d].as_ref().unwrap();
                    let total: f64 = mass.iter().sum();
                    let u: f64 = rng.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = points.len() - 1;
                    for (i, m) in mass.iter().enumerate() {
                        acc += m;
                        if u <= acc {
                            pick = i;
                            break;
                        }
                    }
                    assignment[d] = points[pick];
                }
            }
            assignment[d] = project_into(&ranges[d], modes[d], assignment[d]);
        }
        offspring.push(Candidate {
            assignment,
            objectives: None,
            provenance: Provenance::AcoMhOffspring,
        });
    }
    Ok(offspring)
}

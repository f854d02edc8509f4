//! Strategy-phase screening: 2-level (fractional) factorial designs, main
//! effect estimation, sensitivity ranking, and balanced assignment of the
//! surviving parameters into groups with optional region overrides.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A 2-level design: rows of +/-1 codes, one column per factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub factors: usize,
    pub rows: Vec<Vec<i8>>,
    /// Human-readable description of how extra factors were aliased onto
    /// interaction columns (empty for a full factorial).
    pub generators: Vec<String>,
}

impl FactorialDesign {
    pub fn runs(&self) -> usize {
        self.rows.len()
    }
}

/// Build a full 2^k design when it fits in `max_runs`, otherwise a regular
/// 2^(k-p) fraction: the base full factorial on log2(max_runs) factors with
/// the extra factors assigned to its highest-order interaction columns.
pub fn factorial_design(k: usize, max_runs: usize) -> Result<FactorialDesign> {
    if !max_runs.is_power_of_two() {
        return Err(Error::Argument(format!(
            "max_runs {max_runs} must be a power of two"
        )));
    }
    if max_runs < k + 1 {
        return Err(Error::Argument(format!(
            "max_runs {max_runs} cannot estimate {k} main effects (need >= k + 1)"
        )));
    }
    if k == 0 {
        return Err(Error::Argument("need at least one factor".into()));
    }

    let full_runs = 1usize.checked_shl(k as u32).unwrap_or(usize::MAX);
    let base_factors = if full_runs <= max_runs {
        k
    } else {
        max_runs.trailing_zeros() as usize
    };
    let n = 1usize << base_factors;

    // Base full factorial: column j of row i is +1 when bit j of i is set.
    let base_column = |row: usize, factor: usize| -> i8 {
        if (row >> factor) & 1 == 1 {
            1
        } else {
            -1
        }
    };

    // Extra factors go on interaction columns of the base design, largest
    // interactions first. Skip singleton subsets (those are the base columns).
    let mut generators = Vec::new();
    let mut aliases: Vec<Vec<usize>> = Vec::new();
    if k > base_factors {
        let mut subsets: Vec<Vec<usize>> = (0..(1usize << base_factors))
            .filter(|mask| mask.count_ones() >= 2)
            .map(|mask| (0..base_factors).filter(|b| (mask >> b) & 1 == 1).collect())
            .collect();
        subsets.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let needed = k - base_factors;
        if subsets.len() < needed {
            return Err(Error::Argument(format!(
                "cannot place {k} factors in {max_runs} runs without duplicating columns"
            )));
        }
        for subset in subsets.into_iter().take(needed) {
            let letters: String = subset
                .iter()
                .map(|&f| (b'A' + f as u8) as char)
                .collect();
            generators.push(format!(
                "{} = {}",
                (b'A' + (base_factors + generators.len()) as u8) as char,
                letters
            ));
            aliases.push(subset);
        }
    }

    let rows: Vec<Vec<i8>> = (0..n)
        .map(|row| {
            let mut codes: Vec<i8> = (0..base_factors).map(|f| base_column(row, f)).collect();
            for subset in &aliases {
                let prod: i8 = subset.iter().map(|&f| base_column(row, f)).product();
                codes.push(prod);
            }
            codes
        })
        .collect();

    Ok(FactorialDesign {
        factors: k,
        rows,
        generators,
    })
}

/// Standard main-effect contrasts: effect_j = (2/n) * sum_i row[i][j] * y[i].
/// Exact for responses linear in the coded factors.
pub fn main_effects(design: &FactorialDesign, responses: &[f64]) -> Result<Vec<f64>> {
    if responses.len() != design.runs() {
        return Err(Error::Argument(format!(
            "{} responses for a {}-run design",
            responses.len(),
            design.runs()
        )));
    }
    let n = design.runs() as f64;
    Ok((0..design.factors)
        .map(|j| {
            2.0 / n
                * design
                    .rows
                    .iter()
                    .zip(responses)
                    .map(|(row, y)| row[j] as f64 * y)
                    .sum::<f64>()
        })
        .collect())
}

/// Ranked screening result: (parameter index, |main effect|) descending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRanking {
    pub entries: Vec<(usize, f64)>,
}

/// How the final group placement was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentSource {
    Ranked,
    RegionDownUp,
    RegionUpDown,
    RegionRandom,
    Manual,
}

/// Parameter index -> 1-based group, plus the set of parameters fixed at
/// their defaults (screened out as insensitive).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub groups: BTreeMap<usize, usize>,
    pub source: AssignmentSource,
}

/// Screen, rank, and partition parameters into `g` contiguous groups of
/// near-equal size (descending |effect|). Parameters whose |effect| falls
/// below `insensitive_threshold * max|effect|` are fixed at defaults.
/// Override entries (parameter index -> group) win over the ranked placement.
pub fn rank_and_group(
    effects: &[f64],
    g: usize,
    insensitive_threshold: f64,
    overrides: Option<&BTreeMap<usize, usize>>,
) -> Result<(SensitivityRanking, GroupAssignment, Vec<usize>)> {
    if g == 0 {
        return Err(Error::Argument("group count must be >= 1".into()));
    }
    if let Some(map) = overrides {
        for (&idx, &grp) in map {
            if idx >= effects.len() {
                return Err(Error::Argument(format!(
                    "override references unknown parameter index {idx}"
                )));
            }
            if grp == 0 || grp > g {
                return Err(Error::Argument(format!(
                    "override places parameter {idx} in invalid group {grp}"
                )));
            }
        }
    }
    let max_effect = effects.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let cutoff = insensitive_threshold * max_effect;
    let mut fixed: Vec<usize> = Vec::new();
    let mut ranked: Vec<(usize, f64)> = Vec::new();
    for (i, e) in effects.iter().enumerate() {
        if e.abs() < cutoff {
            fixed.push(i);
        } else {
            ranked.push((i, e.abs()));
        }
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    // Contiguous partition into g groups, sizes differing by at most 1
    // (earlier groups take the extra members).
    let total = ranked.len();
    let base = total / g;
    let extra = total % g;
    let mut groups = BTreeMap::new();
    let mut cursor = 0usize;
    for grp in 1..=g {
        let size = base + if grp <= extra { 1 } else { 0 };
        for _ in 0..size {
            groups.insert(ranked[cursor].0, grp);
            cursor += 1;
        }
    }
    let mut source = AssignmentSource::Ranked;
    if let Some(map) = overrides {
        for (&idx, &grp) in map {
            if !fixed.contains(&idx) {
                groups.insert(idx, grp);
            }
        }
        source = AssignmentSource::Manual;
    }
    Ok((
        SensitivityRanking { entries: ranked },
        GroupAssignment { groups, source },
        fixed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_balanced(design: &FactorialDesign, j: usize) -> bool {
        let plus = design.rows.iter().filter(|r| r[j] == 1).count();
        plus * 2 == design.runs()
    }

    #[test]
    fn full_factorial_small() {
        let d = factorial_design(3, 8).unwrap();
        assert_eq!(d.runs(), 8);
        assert!(d.generators.is_empty());
        for j in 0..3 {
            assert!(column_balanced(&d, j));
        }
    }

    #[test]
    fn full_factorial_seven_factors() {
        let d = factorial_design(7, 128).unwrap();
        assert_eq!(d.runs(), 128);
        assert!(d.generators.is_empty());
    }

    #[test]
    fn fraction_columns_balanced_and_distinct() {
        let d = factorial_design(5, 8).unwrap();
        assert_eq!(d.runs(), 8);
        assert_eq!(d.generators.len(), 2);
        for j in 0..5 {
            assert!(column_balanced(&d, j), "column {j} unbalanced");
            for j2 in (j + 1)..5 {
                let identical = d.rows.iter().all(|r| r[j] == r[j2]);
                assert!(!identical, "columns {j} and {j2} identical");
            }
        }
    }

    #[test]
    fn design_rejects_infeasible() {
        assert!(factorial_design(8, 8).is_err());
        assert!(factorial_design(3, 6).is_err());
    }

    #[test]
    fn effects_constant_response_zero() {
        let d = factorial_design(3, 8).unwrap();
        let responses = vec![5.0; 8];
        let effects = main_effects(&d, &responses).unwrap();
        assert!(effects.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn effects_linear_recovery() {
        let d = factorial_design(3, 8).unwrap();
        // response = 3 * x1 (coded): effect (6, 0, 0).
        let responses: Vec<f64> = d.rows.iter().map(|r| 3.0 * r[0] as f64).collect();
        let effects = main_effects(&d, &responses).unwrap();
        assert!((effects[0] - 6.0).abs() < 1e-12);
        assert!(effects[1].abs() < 1e-12);
        assert!(effects[2].abs() < 1e-12);

        // response = x1 + 2 * x2: effects (2, 4, 0).
        let responses: Vec<f64> = d
            .rows
            .iter()
            .map(|r| r[0] as f64 + 2.0 * r[1] as f64)
            .collect();
        let effects = main_effects(&d, &responses).unwrap();
        assert!((effects[0] - 2.0).abs() < 1e-12);
        assert!((effects[1] - 4.0).abs() < 1e-12);
        assert!(effects[2].abs() < 1e-12);
    }

    #[test]
    fn effects_length_mismatch() {
        let d = factorial_design(3, 8).unwrap();
        assert!(main_effects(&d, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn group_balanced_partition() {
        let effects: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let (ranking, assignment, fixed) = rank_and_group(&effects, 6, 0.01, None).unwrap();
        assert!(fixed.is_empty());
        assert_eq!(ranking.entries.len(), 12);
        let mut sizes = vec![0usize; 6];
        for &g in assignment.groups.values() {
            sizes[g - 1] += 1;
        }
        assert_eq!(sizes, vec![2; 6]);
        // Most sensitive parameter (largest effect) must land in group 1.
        assert_eq!(assignment.groups[&11], 1);
    }

    #[test]
    fn insensitive_parameters_fixed() {
        let effects = [10.0, 9.0, 0.001];
        let (_, assignment, fixed) = rank_and_group(&effects, 2, 0.01, None).unwrap();
        assert_eq!(fixed, vec![2]);
        assert!(!assignment.groups.contains_key(&2));
    }

    #[test]
    fn overrides_win() {
        let effects = [10.0, 9.0, 8.0, 7.0];
        let mut overrides = BTreeMap::new();
        overrides.insert(3usize, 1usize);
        let (_, assignment, _) = rank_and_group(&effects, 2, 0.01, Some(&overrides)).unwrap();
        assert_eq!(assignment.groups[&3], 1);
        assert_eq!(assignment.source, AssignmentSource::Manual);
    }

    #[test]
    fn overrides_reject_unknown_parameter() {
        let effects = [1.0, 2.0];
        let mut overrides = BTreeMap::new();
        overrides.insert(9usize, 1usize);
        assert!(rank_and_group(&effects, 2, 0.01, Some(&overrides)).is_err());
    }

    #[test]
    fn every_parameter_fixed_or_grouped() {
        let effects = [5.0, 0.0001, 3.0, 2.0, 0.0, 4.0, 1.0];
        let (_, assignment, fixed) = rank_and_group(&effects, 3, 0.01, None).unwrap();
        for i in 0..effects.len() {
            let in_group = assignment.groups.contains_key(&i);
            let is_fixed = fixed.contains(&i);
            assert!(in_group ^ is_fixed, "parameter {i}");
        }
    }
}

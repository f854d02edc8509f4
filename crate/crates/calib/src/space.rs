//! Parameter definitions and search-range arithmetic.
//!
//! Every parameter carries its original bounds in model units plus a scale;
//! all search arithmetic (sampling, shrinking, convergence widths) happens in
//! the transformed "search scale", so log-scaled parameters shrink
//! multiplicatively.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Transform applied to a parameter before searching it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    ToSearch,
    ToModel,
}

/// One calibratable parameter: bounds in model units, scale, group membership,
/// and an optional reference "true" value for truth-comparison metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
    /// 1-based group index.
    pub group: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<f64>,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, low: f64, high: f64, scale: Scale, group: usize) -> Self {
        Self {
            name: name.into(),
            low,
            high,
            scale,
            group,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: f64) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low < self.high) {
            return Err(Error::Argument(format!(
                "parameter {}: low {} must be < high {}",
                self.name, self.low, self.high
            )));
        }
        if self.scale == Scale::Log10 && self.low <= 0.0 {
            return Err(Error::Argument(format!(
                "parameter {}: log10 scale requires low > 0, got {}",
                self.name, self.low
            )));
        }
        if self.group == 0 {
            return Err(Error::Argument(format!(
                "parameter {}: group indices are 1-based",
                self.name
            )));
        }
        Ok(())
    }

    /// Original bounds transformed into search scale.
    pub fn search_bounds(&self) -> SearchRange {
        SearchRange {
            lo: apply_scale(self, self.low, ScaleDirection::ToSearch).unwrap(),
            hi: apply_scale(self, self.high, ScaleDirection::ToSearch).unwrap(),
        }
    }
}

/// An interval in search scale, always a subset of the owning spec's
/// transformed original bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRange {
    pub lo: f64,
    pub hi: f64,
}

impl SearchRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!(
                "search range lo {lo} must be <= hi {hi}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Search resolution for one group within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionMode {
    Full,
    Shrunk,
    Discrete(usize),
}

impl ResolutionMode {
    pub fn validate(&self) -> Result<()> {
        if let ResolutionMode::Discrete(k) = self {
            if *k < 2 {
                return Err(Error::Argument(format!("discrete count {k} must be >= 2")));
            }
        }
        Ok(())
    }
}

/// The ordered collection of all calibratable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub params: Vec<ParameterSpec>,
}

impl ParameterSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Argument("parameter space is empty".into()));
        }
        for p in &params {
            p.validate()?;
        }
        Ok(Self { params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Highest group index referenced by any parameter.
    pub fn group_count(&self) -> usize {
        self.params.iter().map(|p| p.group).max().unwrap_or(0)
    }

    /// Number of parameters in each group, indexed by group - 1.
    pub fn group_sizes(&self) -> Vec<usize> {
        let g = self.group_count();
        let mut sizes = vec![0usize; g];
        for p in &self.params {
            sizes[p.group - 1] += 1;
        }
        sizes
    }

    /// Original bounds of every parameter in search scale.
    pub fn original_ranges(&self) -> Vec<SearchRange> {
        self.params.iter().map(|p| p.search_bounds()).collect()
    }
}

/// Transform a value between model units and search scale.
pub fn apply_scale(spec: &ParameterSpec, value: f64, direction: ScaleDirection) -> Result<f64> {
    match (spec.scale, direction) {
        (Scale::Linear, _) => Ok(value),
        (Scale::Log10, ScaleDirection::ToSearch) => {
            if value <= 0.0 {
                Err(Error::Domain(format!(
                    "parameter {}: log10 of non-positive value {}",
                    spec.name, value
                )))
            } else {
                Ok(value.log10())
            }
        }
        (Scale::Log10, ScaleDirection::ToModel) => Ok(10f64.powf(value)),
    }
}

/// The `k` strictly interior quantile points of a range: lo + (hi-lo)*i/(k+1)
/// for i = 1..=k, ascending.
pub fn discrete_points(range: &SearchRange, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Argument(format!("discrete count {k} must be >= 2")));
    }
    let w = range.width();
    Ok((1..=k)
        .map(|i| range.lo + w * i as f64 / (k + 1) as f64)
        .collect())
}

/// Shrink a parameter's search range around the evolved population:
/// [max(p_min, mu - w*sigma), min(p_max, mu + w*sigma)], where sigma is the
/// sample (n-1) standard deviation and p_min/p_max are the ORIGINAL bounds in
/// search scale. Samples are in search scale.
pub fn shrink_range(spec: &ParameterSpec, samples: &[f64], w: f64) -> Result<SearchRange> {
    if samples.is_empty() {
        return Err(Error::Argument(format!(
            "parameter {}: cannot shrink from an empty sample set",
            spec.name
        )));
    }
    if !(w > 0.0) {
        return Err(Error::Argument(format!("shrink multiplier {w} must be > 0")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = if samples.len() == 1 {
        0.0
    } else {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let orig = spec.search_bounds();
    let lo = (mean - w * sigma).max(orig.lo);
    let hi = (mean + w * sigma).min(orig.hi);
    // Population drifting outside the original bounds cannot happen by
    // construction, but guard the invariant anyway.
    SearchRange::new(lo.min(hi), hi.max(lo))
}

/// Draw one value (in search scale) for a parameter under the given mode.
pub fn sample_assignment<R: Rng>(
    range: &SearchRange,
    mode: ResolutionMode,
    rng: &mut R,
) -> Result<f64> {
    mode.validate()?;
    match mode {
        ResolutionMode::Full | ResolutionMode::Shrunk => {
            if range.width() == 0.0 {
                Ok(range.lo)
            } else {
                Ok(rng.gen_range(range.lo..=range.hi))
            }
        }
        ResolutionMode::Discrete(k) => {
            let points = discrete_points(range, k)?;
            Ok(points[rng.gen_range(0..points.len())])
        }
    }
}

/// Snap a value to the nearest discrete point of the range; identity for
/// continuous modes (after clamping).
pub fn project_into(range: &SearchRange, mode: ResolutionMode, value: f64) -> f64 {
    match mode {
        ResolutionMode::Full | ResolutionMode::Shrunk => range.clamp(value),
        ResolutionMode::Discrete(k) => {
            let points = discrete_points(range, k).expect("validated mode");
            *points
                .iter()
                .min_by(|a, b| {
                    (*a - value)
                        .abs()
                        .partial_cmp(&(*b - value).abs())
                        .unwrap()
                })
                .unwrap()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_spec() -> ParameterSpec {
        ParameterSpec::new("p", 0.0, 1.0, Scale::Linear, 1)
    }

    #[test]
    fn scale_linear_identity() {
        let spec = unit_spec();
        assert_eq!(
            apply_scale(&spec, 0.42, ScaleDirection::ToSearch).unwrap(),
            0.42
        );
    }

    #[test]
    fn scale_log10_round_trip() {
        let spec = ParameterSpec::new("k", 1e-8, 1e-3, Scale::Log10, 1);
        assert_eq!(
            apply_scale(&spec, 1e-5, ScaleDirection::ToSearch).unwrap(),
            -5.0
        );
        assert!(
            (apply_scale(&spec, -5.0, ScaleDirection::ToModel).unwrap() - 1e-5).abs() / 1e-5
                < 1e-12
        );
    }

    #[test]
    fn scale_log10_rejects_non_positive() {
        let spec = ParameterSpec::new("k", 1e-8, 1e-3, Scale::Log10, 1);
        assert!(apply_scale(&spec, 0.0, ScaleDirection::ToSearch).is_err());
        assert!(apply_scale(&spec, -1.0, ScaleDirection::ToSearch).is_err());
    }

    #[test]
    fn discrete_points_interior_quantiles() {
        let r = SearchRange::new(0.0, 1.0).unwrap();
        let pts = discrete_points(&r, 2).unwrap();
        assert!((pts[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((pts[1] - 2.0 / 3.0).abs() < 1e-15);

        let pts = discrete_points(&r, 5).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert!((p - (i + 1) as f64 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn discrete_points_degenerate_range() {
        let r = SearchRange::new(2.0, 2.0).unwrap();
        assert_eq!(discrete_points(&r, 3).unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn discrete_points_rejects_small_k() {
        let r = SearchRange::new(0.0, 1.0).unwrap();
        assert!(discrete_points(&r, 1).is_err());
        assert!(discrete_points(&r, 0).is_err());
    }

    #[test]
    fn shrink_range_hand_case() {
        // mu = 0.4, sigma = 0.2 (n-1 denominator) -> [0.0, 0.8]
        let spec = unit_spec();
        let r = shrink_range(&spec, &[0.2, 0.4, 0.6], 2.0).unwrap();
        assert!((r.lo - 0.0).abs() < 1e-12);
        assert!((r.hi - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shrink_range_single_sample_collapses() {
        let spec = unit_spec();
        let r = shrink_range(&spec, &[0.5], 2.0).unwrap();
        assert_eq!(r.lo, 0.5);
        assert_eq!(r.hi, 0.5);
    }

    #[test]
    fn shrink_range_rejects_empty() {
        let spec = unit_spec();
        assert!(shrink_range(&spec, &[], 2.0).is_err());
    }

    #[test]
    fn shrink_range_clips_to_original_bounds() {
        let spec = unit_spec();
        let r = shrink_range(&spec, &[0.9, 0.95, 1.0], 10.0).unwrap();
        assert!(r.lo >= 0.0);
        assert!(r.hi <= 1.0);
    }

    #[test]
    fn sample_full_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = SearchRange::new(0.3, 0.3).unwrap();
        assert_eq!(
            sample_assignment(&r, ResolutionMode::Full, &mut rng).unwrap(),
            0.3
        );
    }

    #[test]
    fn sample_discrete_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = SearchRange::new(0.0, 1.0).unwrap();
        let pts = discrete_points(&r, 2).unwrap();
        for _ in 0..100 {
            let v = sample_assignment(&r, ResolutionMode::Discrete(2), &mut rng).unwrap();
            assert!(pts.contains(&v));
        }
    }

    #[test]
    fn sample_full_uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = SearchRange::new(0.0, 1.0).unwrap();
        let mean: f64 = (0..10_000)
            .map(|_| sample_assignment(&r, ResolutionMode::Full, &mut rng).unwrap())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn project_snaps_to_nearest_point() {
        let r = SearchRange::new(0.0, 1.0).unwrap();
        let v = project_into(&r, ResolutionMode::Discrete(2), 0.4);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(project_into(&r, ResolutionMode::Shrunk, 1.7), 1.0);
    }
}

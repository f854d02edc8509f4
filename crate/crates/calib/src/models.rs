//! Desk-scale double-model setup: a seeded forcing generator, a reference
//! bucket model that manufactures synthetic "observations" with known truth
//! parameters, and a structurally different initial model that gets
//! calibrated against them. Cells carry region labels (downstream, midstream,
//! upstream) so region-ordered grouping configurations are meaningful.

use crate::error::{Error, Result};
use crate::objective::ModelInterface;
use crate::space::{ParameterSpec, Scale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const WET_DAY_PROBABILITY: f64 = 0.3;
pub const WET_DAY_MEAN_DEPTH: f64 = 8.0;
/// Infiltration exponent of the reference model, fixed (not calibrated).
pub const REFERENCE_INFILTRATION_EXPONENT: f64 = 0.4;
/// Calibratable parameters per cell in the initial model.
pub const PARAMS_PER_CELL: usize = 6;

/// Calibration bounds shared by truth generation and the parameter space.
pub const CAPACITY_BOUNDS: (f64, f64) = (50.0, 400.0);
pub const FIELD_CAPACITY_BOUNDS: (f64, f64) = (0.3, 0.8);
pub const WILTING_BOUNDS: (f64, f64) = (0.05, 0.7);
pub const CONDUCTIVITY_BOUNDS: (f64, f64) = (0.1, 20.0);
pub const PERCOLATION_EXPONENT_BOUNDS: (f64, f64) = (0.5, 3.0);
pub const RECESSION_BOUNDS: (f64, f64) = (0.01, 1.0);
pub const CHANNEL_SMOOTHING_BOUNDS: (f64, f64) = (0.05, 1.0);

/// Daily precipitation and potential evapotranspiration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub precip: Vec<f64>,
    pub pet: Vec<f64>,
}

impl Forcing {
    pub fn len(&self) -> usize {
        self.precip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precip.is_empty()
    }
}

/// Synthetic forcing: wet days with probability 0.3, exponential wet-day
/// depth with mean 8 mm, sinusoidal PET with an annual cycle. Deterministic
/// for a given seed.
pub fn generate_forcing(days: usize, seed: u64) -> Result<Forcing> {
    if days < 730 {
        return Err(Error::Argument(format!(
            "forcing length {days} must cover at least one spin-up year plus one scored year (730 days)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut precip = Vec::with_capacity(days);
    let mut pet = Vec::with_capacity(days);
    for t in 0..days {
        let p = if rng.gen::<f64>() < WET_DAY_PROBABILITY {
            // Exponential with mean 8 mm via inverse transform.
            -WET_DAY_MEAN_DEPTH * (1.0 - rng.gen::<f64>()).ln()
        } else {
            0.0
        };
        precip.push(p);
        let phase = 2.0 * std::f64::consts::PI * (t as f64) / 365.0;
        pet.push((2.0 + 1.5 * phase.sin()).max(0.0));
    }
    Ok(Forcing { precip, pet })
}

/// Flow-time division of the watershed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Down,
    Mid,
    Up,
}

impl Region {
    /// Routing delay to the outlet, in days.
    pub fn delay(self) -> usize {
        match self {
            Region::Down => 0,
            Region::Mid => 1,
            Region::Up => 2,
        }
    }
}

/// Per-cell shared parameters of the reference model (all carried as truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    /// Soil capacity, mm.
    pub capacity: f64,
    /// Field-capacity fraction.
    pub field_capacity: f64,
    /// Wilting fraction.
    pub wilting: f64,
    /// Conductivity, mm/day (searched on a log10 scale).
    pub conductivity: f64,
}

/// The full synthetic watershed: truth parameters, region labels, forcing,
/// and the reference model's outlet flow standing in for observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatershedTruth {
    pub cells: Vec<CellTruth>,
    pub regions: Vec<Region>,
    pub infiltration_exponent: f64,
    pub forcing: Forcing,
    pub observed: Vec<f64>,
}

impl WatershedTruth {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }
}

fn validate_cell(i: usize, c: &CellTruth) -> Result<()> {
    if !(c.capacity > 0.0) {
        return Err(Error::Argument(format!("cell {i}: capacity must be > 0")));
    }
    if !(0.0 < c.wilting && c.wilting < c.field_capacity && c.field_capacity < 1.0) {
        return Err(Error::Argument(format!(
            "cell {i}: need 0 < wilting < field capacity < 1"
        )));
    }
    if !(c.conductivity > 0.0) {
        return Err(Error::Argument(format!("cell {i}: conductivity must be > 0")));
    }
    Ok(())
}

/// Per-cell daily fluxes for the water-balance audit.
#[derive(Debug, Clone, Default)]
pub struct CellDayTrace {
    pub direct_runoff: f64,
    pub et: f64,
    pub baseflow_or_perc: f64,
    pub storage_after: f64,
    pub groundwater_after: f64,
    pub clamped: bool,
}

/// Reference model: infiltration-capacity power law for direct runoff,
/// linear baseflow, single soil store per cell, instantaneous routing.
/// The trace variant records per-cell fluxes for the balance audit.
pub fn simulate_reference_trace(
    truth: &WatershedTruth,
    forcing: &Forcing,
) -> Result<(Vec<f64>, Vec<Vec<CellDayTrace>>)> {
    for (i, c) in truth.cells.iter().enumerate() {
        validate_cell(i, c)?;
    }
    if !(truth.infiltration_exponent > 0.0) {
        return Err(Error::Argument("infiltration exponent must be > 0".into()));
    }
    let n = truth.cells.len();
    let days = forcing.len();
    let b = truth.infiltration_exponent;
    let mut storage: Vec<f64> = truth.cells.iter().map(|c| 0.5 * c.capacity).collect();
    let mut flow = Vec::with_capacity(days);
    let mut trace: Vec<Vec<CellDayTrace>> = vec![Vec::with_capacity(days); n];
    for t in 0..days {
        let p = forcing.precip[t];
        let pet = forcing.pet[t];
        let mut outlet = 0.0;
        for (i, cell) in truth.cells.iter().enumerate() {
            let s = storage[i];
            let saturation = s / cell.capacity;
            let qd = p * saturation.powf(b);
            let et = pet
                * ((saturation - cell.wilting) / (cell.field_capacity - cell.wilting))
                    .clamp(0.0, 1.0);
            let qb = cell.conductivity * saturation;
            let raw = s + p - qd - et - qb;
            let new_s = raw.clamp(0.0, cell.capacity);
            storage[i] = new_s;
            outlet += qd + qb;
            trace[i].push(CellDayTrace {
                direct_runoff: qd,
                et,
                baseflow_or_perc: qb,
                storage_after: new_s,
                groundwater_after: 0.0,
                clamped: new_s != raw,
            });
        }
        flow.push(outlet / n as f64);
    }
    Ok((flow, trace))
}

pub fn simulate_reference(truth: &WatershedTruth, forcing: &Forcing) -> Result<Vec<f64>> {
    simulate_reference_trace(truth, forcing).map(|(flow, _)| flow)
}

/// Per-cell parameter block of the initial model.
#[derive(Debug, Clone, Copy)]
struct InitialCellParams {
    capacity: f64,
    field_capacity: f64,
    wilting: f64,
    conductivity: f64,
    percolation_exponent: f64,
    recession: f64,
}

fn unpack_initial_params(params: &[f64], n: usize) -> Result<(Vec<InitialCellParams>, f64)> {
    let expected = PARAMS_PER_CELL * n + 1;
    if params.len() != expected {
        return Err(Error::Argument(format!(
            "initial model expects {expected} parameters for {n} cells, got {}",
            params.len()
        )));
    }
    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let base = PARAMS_PER_CELL * i;
        let c = InitialCellParams {
            capacity: params[base],
            field_capacity: params[base + 1],
            wilting: params[base + 2],
            conductivity: params[base + 3],
            percolation_exponent: params[base + 4],
            recession: params[base + 5],
        };
        if !(c.capacity > 0.0)
            || !(0.0 < c.field_capacity && c.field_capacity < 1.0)
            || !(0.0 <= c.wilting && c.wilting < 1.0)
            || !(c.conductivity > 0.0)
            || !(c.percolation_exponent > 0.0)
            || !(0.0 < c.recession && c.recession <= 1.0)
        {
            return Err(Error::Argument(format!(
                "cell {i}: initial-model parameters out of range"
            )));
        }
        cells.push(c);
    }
    let channel = params[expected - 1];
    if !(0.0 < channel && channel <= 1.0) {
        return Err(Error::Argument(format!(
            "channel smoothing {channel} must lie in (0, 1]"
        )));
    }
    Ok((cells, channel))
}

/// Initial model: saturation-excess direct runoff (threshold at field
/// capacity, structurally unlike the reference's power law), percolation to
/// a linear groundwater store, region-dependent routing delays, and a
/// first-order channel smoother at the outlet.
pub fn simulate_initial_trace(
    params: &[f64],
    regions: &[Region],
    forcing: &Forcing,
) -> Result<(Vec<f64>, Vec<Vec<CellDayTrace>>)> {
    let n = regions.len();
    let (cells, channel) = unpack_initial_params(params, n)?;
    let days = forcing.len();
    let mut storage: Vec<f64> = cells.iter().map(|c| 0.5 * c.capacity).collect();
    let mut groundwater = vec![0.0f64; n];
    // Cell outflow history; the routed contribution at time t is the
    // outflow at t - delay.
    let mut outflows: Vec<Vec<f64>> = vec![Vec::with_capacity(days); n];
    let mut outlet_prev = 0.0;
    let mut flow = Vec::with_capacity(days);
    let mut trace: Vec<Vec<CellDayTrace>> = vec![Vec::with_capacity(days); n];
    for t in 0..days {
        let p = forcing.precip[t];
        let pet = forcing.pet[t];
        let mut delayed_sum = 0.0;
        for i in 0..n {
            let cell = &cells[i];
            let s = storage[i];
            let threshold = cell.field_capacity * cell.capacity;
            let qd = p * ((s - threshold) / ((1.0 - cell.field_capacity) * cell.capacity))
                .clamp(0.0, 1.0);
            let saturation = s / cell.capacity;
            let et = if saturation > cell.wilting {
                pet * saturation
            } else {
                0.0
            };
            let perc = cell.conductivity * saturation.powf(cell.percolation_exponent);
            let raw = s + p - qd - et - perc;
            let new_s = raw.clamp(0.0, cell.capacity);
            storage[i] = new_s;
            let qb = cell.recession * groundwater[i];
            groundwater[i] += perc - qb;
            outflows[i].push(qd + qb);
            let d = regions[i].delay();
            if t >= d {
                delayed_sum += outflows[i][t - d];
            }
            trace[i].push(CellDayTrace {
                direct_runoff: qd,
                et,
                baseflow_or_perc: perc,
                storage_after: new_s,
                groundwater_after: groundwater[i],
                clamped: new_s != raw,
            });
        }
        let mean_delayed = delayed_sum / n as f64;
        let outlet = (1.0 - channel) * outlet_prev + channel * mean_delayed;
        outlet_prev = outlet;
        flow.push(outlet);
    }
    Ok((flow, trace))
}

pub fn simulate_initial(params: &[f64], regions: &[Region], forcing: &Forcing) -> Result<Vec<f64>> {
    simulate_initial_trace(params, regions, forcing).map(|(flow, _)| flow)
}

/// Assign regions by thirds: the first ceil(N/3) cells downstream, the next
/// block midstream, the rest upstream.
pub fn regions_by_thirds(n: usize) -> Vec<Region> {
    let down = n.div_ceil(3);
    let mid = (n - down).div_ceil(2);
    (0..n)
        .map(|i| {
            if i < down {
                Region::Down
            } else if i < down + mid {
                Region::Mid
            } else {
                Region::Up
            }
        })
        .collect()
}

/// Draw a synthetic watershed truth: per-cell parameters uniform within the
/// calibration bounds (conductivity log-uniform), regions by thirds, and the
/// reference model's outlet flow as observations.
pub fn make_truth_with_days(n: usize, days: usize, seed: u64) -> Result<WatershedTruth> {
    if n < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 cells (one per region), got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let field_capacity = rng.gen_range(FIELD_CAPACITY_BOUNDS.0..FIELD_CAPACITY_BOUNDS.1);
        let cell = CellTruth {
            capacity: rng.gen_range(CAPACITY_BOUNDS.0..CAPACITY_BOUNDS.1),
            field_capacity,
            wilting: rng.gen_range(0.05..(field_capacity - 0.1)),
            conductivity: 10f64.powf(
                rng.gen_range(CONDUCTIVITY_BOUNDS.0.log10()..CONDUCTIVITY_BOUNDS.1.log10()),
            ),
        };
        cells.push(cell);
    }
    let regions = regions_by_thirds(n);
    let forcing = generate_forcing(days, seed.wrapping_add(1))?;
    let mut truth = WatershedTruth {
        cells,
        regions,
        infiltration_exponent: REFERENCE_INFILTRATION_EXPONENT,
        forcing: forcing.clone(),
        observed: Vec::new(),
    };
    truth.observed = simulate_reference(&truth, &forcing)?;
    Ok(truth)
}

pub fn make_truth(n: usize, seed: u64) -> Result<WatershedTruth> {
    // 3 years: one spin-up plus two scored.
    make_truth_with_days(n, 1095, seed)
}

/// Build the calibration parameter space of the initial model for `n` cells:
/// per cell {capacity, field capacity, wilting, conductivity (log10),
/// percolation exponent, recession} plus the global channel smoothing.
/// Truth values are attached to the four shared parameters when a truth is
/// supplied. Groups default to 1 and are overwritten by a grouping pass.
pub fn build_space(n: usize, truth: Option<&WatershedTruth>) -> Vec<ParameterSpec> {
    let mut params = Vec::with_capacity(PARAMS_PER_CELL * n + 1);
    for i in 0..n {
        let t = truth.map(|w| &w.cells[i]);
        let mut push = |name: String, bounds: (f64, f64), scale: Scale, truth_value: Option<f64>| {
            let mut spec = ParameterSpec::new(name, bounds.0, bounds.1, scale, 1);
            if let Some(v) = truth_value {
                spec = spec.with_truth(v);
            }
            params.push(spec);
        };
        push(
            format!("capacity_{i}"),
            CAPACITY_BOUNDS,
            Scale::Linear,
            t.map(|c| c.capacity),
        );
        push(
            format!("field_capacity_{i}"),
            FIELD_CAPACITY_BOUNDS,
            Scale::Linear,
            t.map(|c| c.field_capacity),
        );
        push(
            format!("wilting_{i}"),
            WILTING_BOUNDS,
            Scale::Linear,
            t.map(|c| c.wilting),
        );
        push(
            format!("conductivity_{i}"),
            CONDUCTIVITY_BOUNDS,
            Scale::Log10,
            t.map(|c| c.conductivity),
        );
        push(
            format!("percolation_exp_{i}"),
            PERCOLATION_EXPONENT_BOUNDS,
            Scale::Linear,
            None,
        );
        push(format!("recession_{i}"), RECESSION_BOUNDS, Scale::Linear, None);
    }
    params.push(ParameterSpec::new(
        "channel_smoothing",
        CHANNEL_SMOOTHING_BOUNDS.0,
        CHANNEL_SMOOTHING_BOUNDS.1,
        Scale::Linear,
        1,
    ));
    params
}

/// Cell ordering used when groups follow watershed structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionOrdering {
    /// Downstream cells first (shortest delay leads).
    DownUp,
    /// Upstream cells first.
    UpDown,
    /// Ignore regions; contiguous blocks of cell IDs.
    CellId,
}

fn cell_tier(regions: &[Region], cell: usize, ordering: RegionOrdering) -> usize {
    match ordering {
        RegionOrdering::DownUp => regions[cell].delay(),
        RegionOrdering::UpDown => 2 - regions[cell].delay(),
        RegionOrdering::CellId => {
            let n = regions.len();
            let down = n.div_ceil(3);
            let mid = (n - down).div_ceil(2);
            if cell < down {
                0
            } else if cell < down + mid {
                1
            } else {
                2
            }
        }
    }
}

/// 1-based group per parameter of the `build_space` layout, six groups:
/// groups 1..3 hold {field capacity, conductivity, recession} by cell tier
/// (plus the channel smoother in group 1), groups 4..5 split {capacity,
/// wilting} between the leading and trailing halves of the cell ordering,
/// and group 6 collects every percolation exponent.
pub fn region_grouping(regions: &[Region], ordering: RegionOrdering) -> Vec<usize> {
    let n = regions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (cell_tier(regions, i, ordering), i));
    let leading_half: Vec<bool> = {
        let mut flags = vec![false; n];
        for &i in order.iter().take(n.div_ceil(2)) {
            flags[i] = true;
        }
        flags
    };
    let mut groups = Vec::with_capacity(PARAMS_PER_CELL * n + 1);
    for i in 0..n {
        let tier_group = 1 + cell_tier(regions, i, ordering);
        let half_group = if leading_half[i] { 4 } else { 5 };
        groups.push(half_group); // capacity
        groups.push(tier_group); // field capacity
        groups.push(half_group); // wilting
        groups.push(tier_group); // conductivity
        groups.push(6); // percolation exponent
        groups.push(tier_group); // recession
    }
    groups.push(1); // channel smoothing
    groups
}

/// Contiguous near-equal partition of `n_params` parameters into `g`
/// groups (earlier groups take the extras). For small spaces where region
/// structure cannot populate six groups.
pub fn balanced_grouping(n_params: usize, g: usize) -> Vec<usize> {
    let base = n_params / g;
    let extra = n_params % g;
    let mut groups = Vec::with_capacity(n_params);
    for grp in 1..=g {
        let size = base + if grp <= extra { 1 } else { 0 };
        groups.extend(std::iter::repeat(grp).take(size));
    }
    groups
}

/// Adapter exposing the initial model as an optimizer-facing black box.
pub struct InitialModel {
    pub regions: Vec<Region>,
    pub forcing: Forcing,
}

impl ModelInterface for InitialModel {
    fn run(&self, assignment: &[f64]) -> Result<Vec<f64>> {
        simulate_initial(assignment, &self.regions, &self.forcing)
    }

    fn dimension(&self) -> usize {
        PARAMS_PER_CELL * self.regions.len() + 1
    }
}

//! Discrete traffic state encoding: non-uniform lane cells with presence
//! bits, plus signal-phase context appended for the agent.
//!
//! Cells are finest at the stop line and widen geometrically upstream, so
//! queue dynamics dominate the representation. Occupancy is presence-only
//! (no counts, no speeds).

use crate::signal::{PhaseMachine, PHASES};
use crate::sim::{LaneId, TrafficSnapshot, LANE_COUNT};
use serde::{Deserialize, Serialize};

/// Parameters of the cell grid shared by every lane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub cells_per_lane: usize,
    /// Covered length upstream of the stop line, m.
    pub coverage_m: f64,
    /// Geometric width growth per cell away from the stop line.
    pub growth: f64,
    /// Width of the cell nearest the stop line before rescaling, m.
    pub first_cell_m: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            cells_per_lane: 10,
            coverage_m: 200.0,
            growth: 1.35,
            first_cell_m: 7.0,
        }
    }
}

/// Cell boundaries in meters upstream of the stop line: boundary 0 is 0,
/// the last equals the coverage length. Cell k spans [b_k, b_{k+1}).
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    boundaries: Vec<f64>,
}

impl CellGrid {
    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn coverage(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    /// Cell index for a distance upstream of the stop line, if covered.
    pub fn cell_of(&self, upstream_m: f64) -> Option<usize> {
        if upstream_m < 0.0 || upstream_m >= self.coverage() {
            return None;
        }
        // partition_point returns the first boundary > upstream.
        let idx = self.boundaries.partition_point(|b| *b <= upstream_m);
        Some(idx - 1)
    }
}

/// Builds the shared cell grid: widths grow geometrically from the stop
/// line and are rescaled so the cells tile [0, coverage] exactly.
pub fn build_grid(params: &GridParams) -> CellGrid {
    assert!(params.cells_per_lane >= 1);
    assert!(params.coverage_m > 0.0 && params.growth > 0.0 && params.first_cell_m > 0.0);
    let raw: Vec<f64> = (0..params.cells_per_lane)
        .map(|k| params.first_cell_m * params.growth.powi(k as i32))
        .collect();
    let total: f64 = raw.iter().sum();
    let scale = params.coverage_m / total;
    let mut boundaries = Vec::with_capacity(params.cells_per_lane + 1);
    boundaries.push(0.0);
    let mut acc = 0.0;
    for w in &raw {
        acc += w * scale;
        boundaries.push(acc);
    }
    // Pin the last boundary exactly to the coverage length.
    *boundaries.last_mut().unwrap() = params.coverage_m;
    CellGrid { boundaries }
}

/// Encoder options beyond the grid itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderConfig {
    /// Stop-line position on each lane (the lane length), m.
    pub stop_line_m: f64,
    /// Append phase one-hot, normalized elapsed green and the yellow bit.
    pub include_phase_context: bool,
    /// Normalizer for elapsed green, s.
    pub max_considered_green_s: f64,
}

/// The fixed-length state vector fed to the Q-network. Every element lies
/// in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedState {
    pub values: Vec<f64>,
}

impl EncodedState {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Total encoding length for a grid and options.
pub fn encoding_len(grid: &CellGrid, config: &EncoderConfig) -> usize {
    let occupancy = LANE_COUNT * grid.cells();
    if config.include_phase_context {
        occupancy + PHASES.len() + 2
    } else {
        occupancy
    }
}

/// Encodes a snapshot and signal state. Pure: identical inputs give
/// identical vectors.
pub fn encode(
    snapshot: &TrafficSnapshot,
    machine: &PhaseMachine,
    grid: &CellGrid,
    config: &EncoderConfig,
) -> EncodedState {
    let cells = grid.cells();
    let mut values = vec![0.0; encoding_len(grid, config)];
    for lane in LaneId::all() {
        let base = lane.flat_index() * cells;
        for v in snapshot.lane(lane) {
            if v.has_crossed() {
                continue;
            }
            if let Some(cell) = grid.cell_of(config.stop_line_m - v.pos) {
                values[base + cell] = 1.0;
            }
        }
    }
    if config.include_phase_context {
        let ctx = LANE_COUNT * cells;
        values[ctx + machine.active().index()] = 1.0;
        let elapsed = machine.elapsed_green() as f64 / config.max_considered_green_s;
        values[ctx + PHASES.len()] = elapsed.clamp(0.0, 1.0);
        values[ctx + PHASES.len() + 1] = if machine.in_yellow() { 1.0 } else { 0.0 };
    }
    EncodedState { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Phase, SignalTiming};
    use crate::sim::{
        Approach, DemandProfile, LightMap, Movement, MovementSplit, SimParams, Simulation,
    };
    use approx::assert_abs_diff_eq;

    fn encoder() -> EncoderConfig {
        EncoderConfig {
            stop_line_m: 500.0,
            include_phase_context: true,
            max_considered_green_s: 60.0,
        }
    }

    fn empty_sim() -> Simulation {
        let demand = DemandProfile::uniform(
            0.0,
            MovementSplit { left: 1.0, through: 0.0, right: 0.0 },
        );
        Simulation::new(SimParams::default(), demand, 1)
    }

    #[test]
    fn single_cell_grid_spans_coverage() {
        let grid = build_grid(&GridParams {
            cells_per_lane: 1,
            ..GridParams::default()
        });
        assert_eq!(grid.boundaries(), &[0.0, 200.0]);
        assert_eq!(grid.cell_of(0.0), Some(0));
        assert_eq!(grid.cell_of(199.9), Some(0));
        assert_eq!(grid.cell_of(200.0), None);
    }

    #[test]
    fn unit_growth_gives_uniform_cells() {
        let grid = build_grid(&GridParams {
            cells_per_lane: 8,
            growth: 1.0,
            ..GridParams::default()
        });
        let widths: Vec<f64> = grid.boundaries().windows(2).map(|w| w[1] - w[0]).collect();
        for w in widths {
            assert_abs_diff_eq!(w, 25.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn default_grid_matches_geometric_series() {
        let p = GridParams::default();
        let grid = build_grid(&p);
        // Oracle: rescaled geometric series computed directly.
        let raw: Vec<f64> = (0..10).map(|k| 7.0 * 1.35f64.powi(k)).collect();
        let scale = 200.0 / raw.iter().sum::<f64>();
        let mut acc = 0.0;
        for (k, w) in raw.iter().enumerate() {
            acc += w * scale;
            assert_abs_diff_eq!(grid.boundaries()[k + 1], acc, epsilon = 1e-9);
        }
        let widths: Vec<f64> = grid.boundaries().windows(2).map(|w| w[1] - w[0]).collect();
        for pair in widths.windows(2) {
            assert!(pair[1] > pair[0], "widths must grow away from the stop line");
        }
        assert_abs_diff_eq!(grid.coverage(), 200.0, epsilon = 0.0);
    }

    #[test]
    fn empty_intersection_encodes_to_phase_context_only() {
        let sim = empty_sim();
        let machine = PhaseMachine::new(Phase::Weg, SignalTiming::default());
        let grid = build_grid(&GridParams::default());
        let cfg = encoder();
        let state = encode(&sim.snapshot(), &machine, &grid, &cfg);
        assert_eq!(state.len(), 12 * 10 + 4 + 2);
        let occ = 120;
        assert!(state.values[..occ].iter().all(|&b| b == 0.0));
        assert_eq!(&state.values[occ..occ + 4], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(state.values[occ + 4], 0.0);
        assert_eq!(state.values[occ + 5], 0.0);
    }

    #[test]
    fn vehicle_near_stop_line_sets_first_cell() {
        let mut sim = empty_sim();
        let lane = LaneId::new(Approach::South, 1);
        sim.add_vehicle(lane, Movement::Through, 497.0, 0.0);
        let machine = PhaseMachine::new(Phase::Weg, SignalTiming::default());
        let grid = build_grid(&GridParams::default());
        let state = encode(&sim.snapshot(), &machine, &grid, &encoder());
        let base = lane.flat_index() * 10;
        assert_eq!(state.values[base], 1.0);
        let ones: usize = state.values[..120].iter().filter(|&&b| b == 1.0).count();
        assert_eq!(ones, 1);
    }

    #[test]
    fn presence_bit_ignores_vehicle_count() {
        let mut sim = empty_sim();
        let lane = LaneId::new(Approach::East, 2);
        sim.add_vehicle(lane, Movement::Through, 499.0, 0.0);
        sim.add_vehicle(lane, Movement::Through, 498.0, 0.0);
        let machine = PhaseMachine::new(Phase::Nsg, SignalTiming::default());
        let grid = build_grid(&GridParams::default());
        let state = encode(&sim.snapshot(), &machine, &grid, &encoder());
        let base = lane.flat_index() * 10;
        assert_eq!(state.values[base], 1.0);
        let ones: usize = state.values[..120].iter().filter(|&&b| b == 1.0).count();
        assert_eq!(ones, 1, "two vehicles in one cell still encode one bit");
    }

    #[test]
    fn vehicles_beyond_coverage_or_crossed_are_ignored() {
        let mut sim = empty_sim();
        sim.add_vehicle(LaneId::new(Approach::North, 0), Movement::Left, 250.0, 13.9);
        // A crossed vehicle in the conflict zone.
        let lane = LaneId::new(Approach::West, 2);
        sim.add_vehicle(lane, Movement::Right, 499.5, 13.9);
        let mut lights = LightMap::all_red();
        for l in Phase::Weg.served_lanes() {
            lights.set(*l, crate::sim::Light::Green);
        }
        sim.advance(&lights).unwrap();
        let snap = sim.snapshot();
        assert!(snap.lane(lane)[0].has_crossed());
        let machine = PhaseMachine::new(Phase::Weg, SignalTiming::default());
        let grid = build_grid(&GridParams::default());
        let state = encode(&snap, &machine, &grid, &encoder());
        let ones: usize = state.values[..120].iter().filter(|&&b| b == 1.0).count();
        assert_eq!(ones, 0);
    }

    #[test]
    fn moving_within_a_cell_leaves_encoding_unchanged() {
        let grid = build_grid(&GridParams::default());
        let machine = PhaseMachine::new(Phase::Nslg, SignalTiming::default());
        let lane = LaneId::new(Approach::North, 2);
        let cell3 = (grid.boundaries()[3], grid.boundaries()[4]);
        let mut states = Vec::new();
        for upstream in [cell3.0 + 0.01, (cell3.0 + cell3.1) / 2.0, cell3.1 - 0.01] {
            let mut sim = empty_sim();
            sim.add_vehicle(lane, Movement::Through, 500.0 - upstream, 5.0);
            states.push(encode(&sim.snapshot(), &machine, &grid, &encoder()));
        }
        assert_eq!(states[0], states[1]);
        assert_eq!(states[1], states[2]);
    }

    #[test]
    fn ablated_phase_context_shortens_encoding() {
        let grid = build_grid(&GridParams::default());
        let cfg = EncoderConfig {
            include_phase_context: false,
            ..encoder()
        };
        let sim = empty_sim();
        let machine = PhaseMachine::new(Phase::Weg, SignalTiming::default());
        let state = encode(&sim.snapshot(), &machine, &grid, &cfg);
        assert_eq!(state.len(), 120);
        assert_eq!(encoding_len(&grid, &cfg), 120);
    }
}

//! Core domain types for the intersection simulation.

use serde::{Deserialize, Serialize};

/// One of the four entry approaches of the intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    North,
    South,
    East,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::North,
        Approach::South,
        Approach::East,
        Approach::West,
    ];

    pub fn index(self) -> usize {
        match self {
            Approach::North => 0,
            Approach::South => 1,
            Approach::East => 2,
            Approach::West => 3,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Approach::North => "N",
            Approach::South => "S",
            Approach::East => "E",
            Approach::West => "W",
        }
    }
}

/// Turning movement a vehicle will perform at the stop line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub fn short(self) -> &'static str {
        match self {
            Movement::Left => "L",
            Movement::Through => "T",
            Movement::Right => "R",
        }
    }
}

/// Number of entry lanes per approach: 0 = leftmost (left turns only),
/// 1 = middle (through), 2 = rightmost (through or right).
pub const LANES_PER_APPROACH: usize = 3;

/// Total entry lanes of the intersection.
pub const LANE_COUNT: usize = 4 * LANES_PER_APPROACH;

/// Identifies one entry lane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaneId {
    pub approach: Approach,
    pub index: u8,
}

impl LaneId {
    pub fn new(approach: Approach, index: u8) -> Self {
        debug_assert!((index as usize) < LANES_PER_APPROACH);
        LaneId { approach, index }
    }

    /// Position in the canonical lane ordering (N0..N2, S0..S2, E0..E2, W0..W2).
    pub fn flat_index(self) -> usize {
        self.approach.index() * LANES_PER_APPROACH + self.index as usize
    }

    pub fn all() -> impl Iterator<Item = LaneId> {
        Approach::ALL
            .into_iter()
            .flat_map(|a| (0..LANES_PER_APPROACH as u8).map(move |i| LaneId::new(a, i)))
    }
}

/// Signal color shown to one lane for one second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

/// Per-lane signal colors for one simulation second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LightMap {
    lights: [Light; LANE_COUNT],
}

impl LightMap {
    pub fn all_red() -> Self {
        LightMap {
            lights: [Light::Red; LANE_COUNT],
        }
    }

    pub fn get(&self, lane: LaneId) -> Light {
        self.lights[lane.flat_index()]
    }

    pub fn set(&mut self, lane: LaneId, light: Light) {
        self.lights[lane.flat_index()] = light;
    }

    pub fn green_lanes(&self) -> impl Iterator<Item = LaneId> + '_ {
        LaneId::all().filter(|l| self.get(*l) == Light::Green)
    }
}

impl Default for LightMap {
    fn default() -> Self {
        LightMap::all_red()
    }
}

/// One vehicle on one entry lane. `pos` is the front bumper, measured in
/// meters from the lane entry; the stop line sits at the lane length.
/// Vehicles that crossed the stop line keep advancing through the conflict
/// zone (pos beyond the lane length) until their clearance time elapses.
#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub lane: LaneId,
    pub movement: Movement,
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub waiting_time: f64,
    pub spawn_time: f64,
    pub crossed_at: Option<f64>,
}

impl Vehicle {
    pub fn has_crossed(&self) -> bool {
        self.crossed_at.is_some()
    }
}

/// Fraction of arriving traffic per movement; must sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MovementSplit {
    pub left: f64,
    pub through: f64,
    pub right: f64,
}

impl MovementSplit {
    pub fn sum(&self) -> f64 {
        self.left + self.through + self.right
    }
}

impl Default for MovementSplit {
    fn default() -> Self {
        MovementSplit {
            left: 0.2,
            through: 0.6,
            right: 0.2,
        }
    }
}

/// Arrival process for one approach.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApproachDemand {
    pub rate_veh_h: f64,
    pub split: MovementSplit,
}

impl Default for ApproachDemand {
    fn default() -> Self {
        ApproachDemand {
            rate_veh_h: 400.0,
            split: MovementSplit::default(),
        }
    }
}

/// Arrival rates and movement splits for all four approaches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandProfile {
    pub north: ApproachDemand,
    pub south: ApproachDemand,
    pub east: ApproachDemand,
    pub west: ApproachDemand,
}

impl Default for DemandProfile {
    /// Asymmetric peak-hour profile: heavier W-E than N-S.
    fn default() -> Self {
        let ns = ApproachDemand {
            rate_veh_h: 400.0,
            split: MovementSplit::default(),
        };
        let we = ApproachDemand {
            rate_veh_h: 700.0,
            split: MovementSplit::default(),
        };
        DemandProfile {
            north: ns,
            south: ns,
            east: we,
            west: we,
        }
    }
}

impl DemandProfile {
    pub fn for_approach(&self, approach: Approach) -> &ApproachDemand {
        match approach {
            Approach::North => &self.north,
            Approach::South => &self.south,
            Approach::East => &self.east,
            Approach::West => &self.west,
        }
    }

    /// Uniform demand on every approach, handy in tests.
    pub fn uniform(rate_veh_h: f64, split: MovementSplit) -> Self {
        let d = ApproachDemand { rate_veh_h, split };
        DemandProfile {
            north: d,
            south: d,
            east: d,
            west: d,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |d: &ApproachDemand| ApproachDemand {
            rate_veh_h: d.rate_veh_h * factor,
            split: d.split,
        };
        DemandProfile {
            north: scale(&self.north),
            south: scale(&self.south),
            east: scale(&self.east),
            west: scale(&self.west),
        }
    }
}

/// Vehicles that ever entered vs. vehicles that cleared the intersection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub entered: u64,
    pub exited: u64,
}

/// Full simulator state after one step: the source for metrics and encoding.
#[derive(Clone, Debug)]
pub struct TrafficSnapshot {
    pub time: f64,
    /// Vehicles per lane in canonical lane order, each lane ascending by pos.
    pub lanes: Vec<Vec<Vehicle>>,
    pub signal: LightMap,
    pub counters: Counters,
    /// Waiting time banked by vehicles that already exited this episode.
    pub banked_waiting: f64,
}

impl TrafficSnapshot {
    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flatten()
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn lane(&self, lane: LaneId) -> &[Vehicle] {
        &self.lanes[lane.flat_index()]
    }
}

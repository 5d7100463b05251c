//! Time-to-collision surrogate safety measure and conflict accounting.
//!
//! Conflicts are rear-end only: adjacent same-lane leader-follower pairs
//! whose TTC falls below the threshold. Each step a pair spends in conflict
//! counts once, so the cumulative count gives the per-step signal rewards
//! difference against. Event onsets (a pair newly entering conflict) are
//! tracked separately for reporting.

use crate::sim::{TrafficSnapshot, Vehicle};
use std::collections::HashSet;

/// A pair is in conflict while TTC < 3 s (strict).
pub const TTC_CONFLICT_THRESHOLD: f64 = 3.0;

/// Time to collision for an adjacent same-lane pair: bumper-to-bumper gap
/// divided by closing speed. `None` when the follower is not closing.
pub fn ttc(follower: &Vehicle, leader: &Vehicle) -> Option<f64> {
    let gap = leader.pos - leader.length - follower.pos;
    debug_assert!(gap > 0.0, "overlapping pair is a collision fault");
    if gap <= 0.0 {
        return None;
    }
    let closing = follower.speed - leader.speed;
    if closing > 0.0 {
        Some(gap / closing)
    } else {
        None
    }
}

/// Adjacent leader-follower pairs in conflict at this step, and the ids of
/// those pairs (follower, leader) for onset tracking.
pub fn step_conflict_pairs(snapshot: &TrafficSnapshot, threshold: f64) -> Vec<(u64, u64)> {
    let mut pairs = Vec::new();
    for lane in &snapshot.lanes {
        for w in lane.windows(2) {
            let (follower, leader) = (&w[0], &w[1]);
            if ttc(follower, leader).is_some_and(|t| t < threshold) {
                pairs.push((follower.id, leader.id));
            }
        }
    }
    pairs
}

/// Number of same-lane adjacent pairs in conflict at this step.
pub fn step_conflicts(snapshot: &TrafficSnapshot, threshold: f64) -> u32 {
    step_conflict_pairs(snapshot, threshold).len() as u32
}

/// Episode-cumulative conflict counts.
#[derive(Clone, Debug, Default)]
pub struct ConflictLedger {
    ctc: u64,
    events: u64,
    history: Vec<u32>,
    active_pairs: HashSet<(u64, u64)>,
}

impl ConflictLedger {
    pub fn new() -> Self {
        ConflictLedger::default()
    }

    /// Cumulative traffic conflicts: per-step pair observations.
    pub fn ctc(&self) -> u64 {
        self.ctc
    }

    /// Cumulative conflict events: onsets of a pair entering conflict.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn history(&self) -> &[u32] {
        &self.history
    }

    /// Adds one step's conflict count to the ledger.
    pub fn accumulate(&mut self, step_count: u32) {
        self.ctc += step_count as u64;
        self.history.push(step_count);
    }

    /// Evaluates a post-step snapshot: accumulates the per-step count and
    /// tracks onsets.
    pub fn record_step(&mut self, snapshot: &TrafficSnapshot, threshold: f64) -> u32 {
        let pairs = step_conflict_pairs(snapshot, threshold);
        let count = pairs.len() as u32;
        let current: HashSet<(u64, u64)> = pairs.into_iter().collect();
        self.events += current.difference(&self.active_pairs).count() as u64;
        self.active_pairs = current;
        self.accumulate(count);
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Approach, Counters, LaneId, LightMap, Movement, LANE_COUNT};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn vehicle(id: u64, pos: f64, speed: f64, length: f64) -> Vehicle {
        Vehicle {
            id,
            lane: LaneId::new(Approach::North, 1),
            movement: Movement::Through,
            pos,
            speed,
            accel: 0.0,
            length,
            waiting_time: 0.0,
            spawn_time: 0.0,
            crossed_at: None,
        }
    }

    fn snapshot_of(lanes: Vec<Vec<Vehicle>>) -> TrafficSnapshot {
        let mut full = vec![Vec::new(); LANE_COUNT];
        for (i, lane) in lanes.into_iter().enumerate() {
            full[i] = lane;
        }
        TrafficSnapshot {
            time: 0.0,
            lanes: full,
            signal: LightMap::all_red(),
            counters: Counters::default(),
            banked_waiting: 0.0,
        }
    }

    #[test]
    fn ttc_direct_substitution() {
        // Gap 30 m at closing speed 10 m/s: exactly 3 s, not a conflict
        // under the strict threshold.
        let leader = vehicle(2, 130.0, 10.0, 0.0);
        let follower = vehicle(1, 100.0, 20.0, 5.0);
        assert_abs_diff_eq!(ttc(&follower, &leader).unwrap(), 3.0, epsilon = 1e-12);
        let snap = snapshot_of(vec![vec![follower, leader]]);
        assert_eq!(step_conflicts(&snap, TTC_CONFLICT_THRESHOLD), 0);
    }

    #[test]
    fn non_closing_pair_has_no_ttc() {
        let leader = vehicle(2, 150.0, 12.0, 5.0);
        let follower = vehicle(1, 100.0, 10.0, 5.0);
        assert_eq!(ttc(&follower, &leader), None);
    }

    #[test]
    fn closing_pair_below_threshold_is_a_conflict() {
        // Gap 14 m closing at 7 m/s: TTC = 2 s.
        let leader = vehicle(2, 119.0, 10.0, 5.0);
        let follower = vehicle(1, 100.0, 17.0, 5.0);
        assert_abs_diff_eq!(ttc(&follower, &leader).unwrap(), 2.0, epsilon = 1e-12);
        let snap = snapshot_of(vec![vec![follower, leader]]);
        assert_eq!(step_conflicts(&snap, TTC_CONFLICT_THRESHOLD), 1);
    }

    #[test]
    fn empty_snapshot_has_no_conflicts() {
        let snap = snapshot_of(vec![]);
        assert_eq!(step_conflicts(&snap, TTC_CONFLICT_THRESHOLD), 0);
    }

    #[test]
    fn platoon_counts_only_sub_threshold_pairs() {
        let a = vehicle(1, 0.0, 14.0, 5.0); // gap to b: 25 m, closing 10 -> TTC 2.5
        let b = vehicle(2, 30.0, 4.0, 5.0); // gap to c: 20 m, closing 2 -> TTC 10
        let c = vehicle(3, 55.0, 2.0, 5.0);
        let snap = snapshot_of(vec![vec![a, b, c]]);
        assert_eq!(step_conflicts(&snap, TTC_CONFLICT_THRESHOLD), 1);
    }

    #[test]
    fn randomized_snapshot_matches_brute_force() {
        // Independent oracle: recompute over every adjacent pair by hand.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let mut lanes: Vec<Vec<Vehicle>> = Vec::new();
            let mut id = 0;
            for _ in 0..LANE_COUNT {
                let n = rng.random_range(0..12);
                let mut pos = 0.0;
                let mut lane = Vec::new();
                for _ in 0..n {
                    pos += 5.0 + rng.random_range(0.0..40.0);
                    id += 1;
                    lane.push(vehicle(id, pos, rng.random_range(0.0..15.0), 5.0));
                }
                lanes.push(lane);
            }
            let snap = snapshot_of(lanes.clone());

            let mut expected = 0;
            for lane in &lanes {
                for i in 0..lane.len().saturating_sub(1) {
                    let f = &lane[i];
                    let l = &lane[i + 1];
                    let d = l.pos - l.length - f.pos;
                    if f.speed > l.speed && d / (f.speed - l.speed) < TTC_CONFLICT_THRESHOLD {
                        expected += 1;
                    }
                }
            }
            assert_eq!(step_conflicts(&snap, TTC_CONFLICT_THRESHOLD), expected);
        }
    }

    #[test]
    fn ledger_accumulates_monotonically() {
        let mut ledger = ConflictLedger::new();
        for c in [0, 0, 0] {
            ledger.accumulate(c);
        }
        assert_eq!(ledger.ctc(), 0);
        let mut ledger = ConflictLedger::new();
        ledger.accumulate(5);
        ledger.accumulate(2);
        assert_eq!(ledger.ctc(), 7);
        assert_eq!(ledger.history(), &[5, 2]);
    }

    #[test]
    fn events_count_onsets_not_persistence() {
        let leader = vehicle(2, 119.0, 10.0, 5.0);
        let follower = vehicle(1, 100.0, 17.0, 5.0);
        let snap = snapshot_of(vec![vec![follower, leader]]);
        let mut ledger = ConflictLedger::new();
        // Same pair in conflict three steps running: ctc 3, one event.
        for _ in 0..3 {
            ledger.record_step(&snap, TTC_CONFLICT_THRESHOLD);
        }
        assert_eq!(ledger.ctc(), 3);
        assert_eq!(ledger.events(), 1);
    }

    #[test]
    fn ttc_invariant_under_joint_scaling() {
        // Scaling distances and speeds by the same k leaves TTC unchanged.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let gap: f64 = rng.random_range(1.0..80.0);
            let vf: f64 = rng.random_range(0.0..20.0);
            let vl: f64 = rng.random_range(0.0..20.0);
            let k: f64 = rng.random_range(0.1..10.0);
            let base = ttc(&vehicle(1, 0.0, vf, 0.0), &vehicle(2, gap, vl, 0.0));
            let scaled = ttc(
                &vehicle(1, 0.0, k * vf, 0.0),
                &vehicle(2, k * gap, k * vl, 0.0),
            );
            match (base, scaled) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    approx::assert_relative_eq!(a, b, max_relative = 1e-9)
                }
                other => panic!("scaling changed closing status: {other:?}"),
            }
        }
    }
}

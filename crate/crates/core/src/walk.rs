//! Vertex-reinforced random walk on the integer lattice.
//!
//! The walk starts at 0. From `x` it jumps to `x + 1` with probability
//!
//! ```text
//! w(Z(x+1)) / (w(Z(x+1)) + w(Z(x-1)))
//! ```
//!
//! where `Z(y)` counts the time indices `0..=n` spent at `y` (so the start
//! site has local time 1 at time 0).
//!
//! Edges are named by their left endpoint: edge `z` is `{z, z+1}`. `N_z`
//! counts up-crossings `z -> z+1` and `D_z` down-crossings `z+1 -> z`.

use crate::error::{Error, Result};
use crate::lattice::SiteVec;
use crate::rng::{StreamRng, StreamSeed};
use crate::weights::{WeightFunction, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Step {
    Left = 0,
    Right = 1,
}

impl Step {
    #[inline]
    pub fn delta(self) -> i64 {
        match self {
            Step::Left => -1,
            Step::Right => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Step> {
        match b {
            0 => Some(Step::Left),
            1 => Some(Step::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkState {
    position: i64,
    n: u64,
    local: SiteVec<u64>,
    up: SiteVec<u64>,
    down: SiteVec<u64>,
    min: i64,
    max: i64,
    returns_to_origin: u64,
    // Sorted by site; `None` until hit.
    targets: Vec<(i64, Option<u64>)>,
    // (edge, up-crossing count) of the most up-crossed edge.
    busiest_edge: Option<(i64, u64)>,
}

impl Default for WalkState {
    fn default() -> Self {
        Self::new()
    }
}

impl WalkState {
    pub fn new() -> Self {
        Self::with_targets(&[])
    }

    /// Fresh walk that records first hitting times of `targets`.
    pub fn with_targets(targets: &[i64]) -> Self {
        let mut local = SiteVec::new(0);
        local.set(0, 1);
        let mut t: Vec<(i64, Option<u64>)> = targets.iter().map(|&y| (y, None)).collect();
        t.sort_unstable_by_key(|p| p.0);
        t.dedup_by_key(|p| p.0);
        for entry in &mut t {
            if entry.0 == 0 {
                entry.1 = Some(0);
            }
        }
        Self {
            position: 0,
            n: 0,
            local,
            up: SiteVec::new(0),
            down: SiteVec::new(0),
            min: 0,
            max: 0,
            returns_to_origin: 0,
            targets: t,
            busiest_edge: None,
        }
    }

    #[inline]
    pub fn position(&self) -> i64 {
        self.position
    }

    /// Number of steps taken.
    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    /// `Z_n(x)`.
    #[inline]
    pub fn local_time(&self, x: i64) -> u64 {
        self.local.get(x)
    }

    /// `(N_z, D_z)` for edge `{z, z+1}`.
    #[inline]
    pub fn crossing_counts(&self, z: i64) -> (u64, u64) {
        (self.up.get(z), self.down.get(z))
    }

    pub fn min(&self) -> i64 {
        self.min
    }

    pub fn max(&self) -> i64 {
        self.max
    }

    pub fn returns_to_origin(&self) -> u64 {
        self.returns_to_origin
    }

    /// First hitting time of `y`, if `y` is a configured target and was hit.
    pub fn hitting_time(&self, y: i64) -> Option<u64> {
        self.targets
            .binary_search_by_key(&y, |p| p.0)
            .ok()
            .and_then(|i| self.targets[i].1)
    }

    pub fn hitting_times(&self) -> &[(i64, Option<u64>)] {
        &self.targets
    }

    /// Most up-crossed edge `s` and its up-crossing count; ties keep the
    /// edge that reached the count first.
    pub fn busiest_edge(&self) -> Option<(i64, u64)> {
        self.busiest_edge
    }

    /// Probability that the next step goes right.
    #[inline]
    pub fn prob_right(&self, w: &WeightFunction) -> f64 {
        let (r, l) = self.neighbor_weights(w);
        r / (r + l)
    }

    /// `(w(Z(x+1)), w(Z(x-1)))` at the current position.
    #[inline]
    pub fn neighbor_weights(&self, w: &WeightFunction) -> (f64, f64) {
        let x = self.position;
        (w.eval(self.local.get(x + 1)), w.eval(self.local.get(x - 1)))
    }

    /// The move selected by uniform deviate `u`: right iff `u < prob_right`.
    #[inline]
    pub fn decide(&self, w: &WeightFunction, u: f64) -> Step {
        if u < self.prob_right(w) {
            Step::Right
        } else {
            Step::Left
        }
    }

    /// Draws the move for `u` and applies it.
    #[inline]
    pub fn step(&mut self, w: &WeightFunction, u: f64) -> Step {
        let s = self.decide(w, u);
        self.apply(s);
        s
    }

    /// Applies a move regardless of its probability (used for replay).
    pub fn apply(&mut self, s: Step) {
        let from = self.position;
        let to = from + s.delta();
        match s {
            Step::Right => {
                let c = self.up.get_mut(from);
                *c += 1;
                let c = *c;
                if self.busiest_edge.is_none_or(|(_, best)| c > best) {
                    self.busiest_edge = Some((from, c));
                }
            }
            Step::Left => *self.down.get_mut(to) += 1,
        }
        *self.local.get_mut(to) += 1;
        self.position = to;
        self.n += 1;
        if to == 0 {
            self.returns_to_origin += 1;
        }
        // A site other than the start is first reached exactly when the
        // visited range is extended.
        if to < self.min || to > self.max {
            self.min = self.min.min(to);
            self.max = self.max.max(to);
            if let Ok(i) = self.targets.binary_search_by_key(&to, |p| p.0) {
                self.targets[i].1 = Some(self.n);
            }
        }
        #[cfg(debug_assertions)]
        self.check_local(from, to);
    }

    #[cfg(debug_assertions)]
    fn check_local(&self, from: i64, to: i64) {
        let edge = from.min(to);
        let (up, down) = self.crossing_counts(edge);
        let balance = (edge < to) as i64 - (edge < 0) as i64;
        debug_assert_eq!(
            up as i64 - down as i64,
            balance,
            "crossing balance at edge {edge}"
        );
        let expected = self.up.get(to - 1) + self.down.get(to) + (to == 0) as u64;
        debug_assert_eq!(self.local.get(to), expected, "local time at {to}");
    }

    /// Full check of the bookkeeping invariants. Cost is linear in the
    /// visited range.
    pub fn check_invariants(&self) -> Result<()> {
        let total: u64 = self.local.iter().map(|(_, c)| c).sum();
        if total != self.n + 1 {
            return Err(Error::Invariant(format!(
                "sum of local times {total} != n + 1 = {}",
                self.n + 1
            )));
        }
        for z in self.min - 1..=self.max {
            let (up, down) = self.crossing_counts(z);
            let balance = (z < self.position) as i64 - (z < 0) as i64;
            if up as i64 - down as i64 != balance {
                return Err(Error::Invariant(format!(
                    "edge {z}: N - D = {} but expected {balance}",
                    up as i64 - down as i64
                )));
            }
        }
        for x in self.min - 1..=self.max + 1 {
            let expected = self.up.get(x - 1) + self.down.get(x) + (x == 0) as u64;
            if self.local.get(x) != expected {
                return Err(Error::Invariant(format!(
                    "site {x}: Z = {} but N_(x-1) + D_x + [x=0] = {expected}",
                    self.local.get(x)
                )));
            }
        }
        if let Some((edge, count)) = self.busiest_edge {
            if self.up.get(edge) != count || self.up.iter().any(|(_, c)| c > count) {
                return Err(Error::Invariant(format!("busiest edge {edge} is stale")));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            n: self.n,
            final_position: self.position,
            min: self.min,
            max: self.max,
            returns_to_origin: self.returns_to_origin,
            hitting_times: self.targets.clone(),
            busiest_edge: self.busiest_edge,
            underflows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub n: u64,
    pub final_position: i64,
    pub min: i64,
    pub max: i64,
    pub returns_to_origin: u64,
    /// `(site, first hitting time)`; `None` means not hit within the horizon.
    pub hitting_times: Vec<(i64, Option<u64>)>,
    /// Most up-crossed edge `(s, s+1)` as `(s, up-crossings)`.
    pub busiest_edge: Option<(i64, u64)>,
    /// Martingale underflow tally, when a martingale was attached.
    pub underflows: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: StreamSeed,
    pub weight: WeightSpec,
    pub moves: Vec<Step>,
    /// `prob_right` before each move, when requested.
    pub prob_right: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    /// Replays the first `n` moves.
    pub fn replay_prefix(&self, n: usize) -> WalkState {
        let mut state = WalkState::new();
        for &s in &self.moves[..n] {
            state.apply(s);
        }
        state
    }

    pub fn replay(&self) -> WalkState {
        self.replay_prefix(self.moves.len())
    }

    /// Positions `X_0..=X_n`.
    pub fn positions(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.moves.len() + 1);
        let mut x = 0;
        out.push(x);
        for s in &self.moves {
            x += s.delta();
            out.push(x);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopRule {
    pub horizon: u64,
    /// Stop as soon as any of these sites is hit.
    pub stop_on: Vec<i64>,
}

impl StopRule {
    pub fn horizon(horizon: u64) -> Self {
        Self {
            horizon,
            stop_on: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub moves: bool,
    pub prob_right: bool,
}

/// A walk paired with its random stream.
#[derive(Debug, Clone)]
pub struct Walker {
    pub state: WalkState,
    rng: StreamRng,
}

impl Walker {
    pub fn new(seed: StreamSeed, targets: &[i64]) -> Self {
        Self {
            state: WalkState::with_targets(targets),
            rng: StreamRng::new(seed),
        }
    }

    /// Draws the next move without applying it.
    #[inline]
    pub fn draw(&mut self, w: &WeightFunction) -> Step {
        let u = self.rng.uniform();
        self.state.decide(w, u)
    }

    #[inline]
    pub fn advance(&mut self, w: &WeightFunction) -> Step {
        let u = self.rng.uniform();
        self.state.step(w, u)
    }
}

/// Simulates one trajectory. Hitting times are tracked for `targets` and
/// for every stop site.
pub fn run_trajectory(
    w: &WeightFunction,
    rule: &StopRule,
    seed: StreamSeed,
    targets: &[i64],
    record: RecordOptions,
) -> Result<(TrajectorySummary, Option<TrajectoryRecord>)> {
    let mut all_targets = targets.to_vec();
    all_targets.extend_from_slice(&rule.stop_on);
    let mut walker = Walker::new(seed, &all_targets);
    let mut moves = Vec::new();
    let mut probs = Vec::new();
    let stopped = |st: &WalkState| rule.stop_on.iter().any(|&y| st.hitting_time(y).is_some());
    while walker.state.n() < rule.horizon && !stopped(&walker.state) {
        if record.prob_right {
            probs.push(walker.state.prob_right(w));
        }
        let s = walker.advance(w);
        if record.moves {
            moves.push(s);
        }
    }
    walker.state.check_invariants()?;
    let rec = record.moves.then(|| TrajectoryRecord {
        seed,
        weight: w.spec().clone(),
        moves,
        prob_right: record.prob_right.then_some(probs),
    });
    Ok((walker.state.summary(), rec))
}

/// Re-simulates `record`'s seed and weight for as many steps as the record
/// holds and reports the first index where the moves disagree.
pub fn replay_mismatch(record: &TrajectoryRecord) -> Result<Option<usize>> {
    let w = WeightFunction::new(record.weight.clone())?;
    let mut walker = Walker::new(record.seed, &[]);
    for (i, &s) in record.moves.iter().enumerate() {
        if walker.advance(&w) != s {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> WeightFunction {
        "linear".parse().unwrap()
    }

    fn walk(path: &[Step]) -> WalkState {
        let mut s = WalkState::new();
        for &m in path {
            s.apply(m);
        }
        s
    }

    use Step::{Left as L, Right as R};

    #[test]
    fn fresh_walk_is_symmetric() {
        for spec in ["constant", "linear", "power:0.3", "table:3,5"] {
            let w: WeightFunction = spec.parse().unwrap();
            assert_eq!(WalkState::new().prob_right(&w), 0.5);
        }
    }

    #[test]
    fn prob_right_linear_left_heavy() {
        // Z(-1) = 3, Z(1) = 0 at position 0.
        let s = walk(&[L, R, L, R, L, R]);
        assert_eq!(s.position(), 0);
        assert_eq!(s.local_time(-1), 3);
        assert_eq!(s.local_time(1), 0);
        assert!((s.prob_right(&lin()) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_weights_always_half() {
        let c: WeightFunction = "constant".parse().unwrap();
        let s = walk(&[R, R, L, R, R, R, L]);
        assert_eq!(s.prob_right(&c), 0.5);
    }

    #[test]
    fn step_thresholds() {
        let w = lin();
        let mut s = WalkState::new();
        assert_eq!(s.step(&w, 0.49), R);
        assert_eq!(s.local_time(1), 1);
        assert_eq!(s.crossing_counts(0), (1, 0));

        let mut s = WalkState::new();
        assert_eq!(s.step(&w, 0.51), L);
        assert_eq!(s.local_time(-1), 1);
        assert_eq!(s.crossing_counts(-1), (0, 1));

        let mut s = WalkState::new();
        assert_eq!(s.step(&w, 0.5), L);
    }

    #[test]
    fn step_after_forced_excursion() {
        let w = lin();
        let mut s = walk(&[R, L]);
        assert!((s.prob_right(&w) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.step(&w, 0.5), R);
    }

    #[test]
    fn crossing_counts_by_hand() {
        assert_eq!(WalkState::new().crossing_counts(5), (0, 0));
        assert_eq!(WalkState::new().crossing_counts(-5), (0, 0));
        let s = walk(&[R, L, R]);
        assert_eq!(s.crossing_counts(0), (2, 1));
        s.check_invariants().unwrap();
    }

    #[test]
    fn zero_horizon() {
        let (sum, rec) = run_trajectory(
            &lin(),
            &StopRule::horizon(0),
            StreamSeed::new(1, 0),
            &[],
            RecordOptions {
                moves: true,
                prob_right: false,
            },
        )
        .unwrap();
        assert_eq!((sum.n, sum.min, sum.max, sum.final_position), (0, 0, 0, 0));
        assert_eq!(rec.unwrap().replay().local_time(0), 1);
    }

    #[test]
    fn stop_on_target() {
        for spec in ["constant", "linear", "power:0.3"] {
            let w: WeightFunction = spec.parse().unwrap();
            for i in 0..20 {
                let rule = StopRule {
                    horizon: 1_000_000,
                    stop_on: vec![5],
                };
                let (sum, _) = run_trajectory(
                    &w,
                    &rule,
                    StreamSeed::new(3, i),
                    &[],
                    RecordOptions::default(),
                )
                .unwrap();
                let tau = sum.hitting_times.iter().find(|p| p.0 == 5).unwrap().1;
                if let Some(t) = tau {
                    assert_eq!(sum.final_position, 5);
                    assert_eq!(sum.n, t);
                } else {
                    assert_eq!(sum.n, 1_000_000);
                }
            }
        }
    }

    #[test]
    fn unreached_target_reports_none() {
        let (sum, _) = run_trajectory(
            &lin(),
            &StopRule::horizon(10),
            StreamSeed::new(1, 0),
            &[1000, 0],
            RecordOptions::default(),
        )
        .unwrap();
        assert_eq!(sum.hitting_times, vec![(0, Some(0)), (1000, None)]);
    }

    #[test]
    fn hitting_time_is_first_visit() {
        let mut s = WalkState::with_targets(&[2, -1]);
        for m in [R, R, L, L, L, R, R, R] {
            s.apply(m);
        }
        assert_eq!(s.hitting_time(2), Some(2));
        assert_eq!(s.hitting_time(-1), Some(5));
        assert_eq!(s.hitting_time(3), None);
    }

    #[test]
    fn deterministic_given_seed() {
        let w: WeightFunction = "power:0.3".parse().unwrap();
        let run = || {
            run_trajectory(
                &w,
                &StopRule::horizon(10_000),
                StreamSeed::new(42, 7),
                &[10, -10],
                RecordOptions {
                    moves: true,
                    prob_right: true,
                },
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn replay_matches_live() {
        let w: WeightFunction = "power:0.3".parse().unwrap();
        let (sum, rec) = run_trajectory(
            &w,
            &StopRule::horizon(5_000),
            StreamSeed::new(9, 2),
            &[],
            RecordOptions {
                moves: true,
                prob_right: true,
            },
        )
        .unwrap();
        let rec = rec.unwrap();
        let replayed = rec.replay();
        assert_eq!(replayed.summary(), sum);
        assert_eq!(replay_mismatch(&rec).unwrap(), None);

        // Recorded probabilities match a replayed walk.
        let mut s = WalkState::new();
        for (p, &m) in rec.prob_right.as_ref().unwrap().iter().zip(&rec.moves) {
            assert_eq!(*p, s.prob_right(&w));
            s.apply(m);
        }
    }

    #[test]
    fn tampered_record_is_detected() {
        let w: WeightFunction = "linear".parse().unwrap();
        let (_, rec) = run_trajectory(
            &w,
            &StopRule::horizon(1000),
            StreamSeed::new(5, 0),
            &[],
            RecordOptions {
                moves: true,
                prob_right: false,
            },
        )
        .unwrap();
        let mut rec = rec.unwrap();
        rec.moves[500] = match rec.moves[500] {
            L => R,
            R => L,
        };
        assert_eq!(replay_mismatch(&rec).unwrap(), Some(500));
    }

    #[test]
    fn busiest_edge_by_hand() {
        let s = walk(&[R, L, R, R, L, R, L, L, R]);
        // edge 0 crossed up 3 times, edge 1 twice.
        assert_eq!(s.busiest_edge(), Some((0, 3)));
    }
}

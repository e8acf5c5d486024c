//! Batch experiments over many trajectories, with deterministic CSV output.
//!
//! Trajectory `i` of a run always uses stream `(seed, i)`, and results are
//! merged by index, so output does not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, LemmaParams};
use crate::error::{Error, Result};
use crate::lemma::{scaling_scan, MinimizeOptions, ScanPoint};
use crate::martingale::{
    decompose, delta_bound_margin, delta_bound_margin_all_prefixes, stopped_lower_bound, AParams,
    MartingaleState, DEFAULT_TOL,
};
use crate::record;
use crate::rng::StreamSeed;
use crate::walk::{
    replay_mismatch, RecordOptions, StopRule, TrajectoryRecord, TrajectorySummary, WalkState,
    Walker,
};
use crate::weights::{WeightFunction, WeightSpec};

pub const CSV_VERSION: &str = "v1";

pub const DRIFT_TOL: f64 = 1e-12;
pub const DECOMPOSITION_TOL: f64 = 1e-6;
pub const CORRECTION_TOL: f64 = 1e-9;

/// First line of every CSV file.
pub fn csv_header(kind: &str) -> String {
    format!("# vrrw-csv {CSV_VERSION} {kind}\n")
}

/// Runs `f` on a pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn par_indexed<T: Send>(n: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(u64, u64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| ((x as f64).ln(), (y as f64).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

const FIRST_CHECKPOINT: u64 = 16;

/// Per-trajectory statistics shared by the simulation experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub seed: StreamSeed,
    pub summary: TrajectorySummary,
    /// `(n, max - min)` at n = 16, 32, 64, ... and at the final step.
    pub range_checkpoints: Vec<(u64, u64)>,
    pub growth_exponent: f64,
    /// Extent of the sites visited at times `t >= horizon - horizon / 2`;
    /// an interval because the walk is nearest-neighbour.
    pub final_half: Option<(i64, i64)>,
}

impl TrajectoryStats {
    pub fn final_half_size(&self) -> u64 {
        self.final_half.map_or(0, |(lo, hi)| (hi - lo + 1) as u64)
    }
}

/// Simulates one trajectory and collects its statistics. With
/// `keep_moves` the move sequence is returned as well.
pub fn simulate_stats(
    w: &WeightFunction,
    rule: &StopRule,
    seed: StreamSeed,
    targets: &[i64],
    keep_moves: bool,
) -> Result<(TrajectoryStats, Option<TrajectoryRecord>)> {
    let mut all_targets = targets.to_vec();
    all_targets.extend_from_slice(&rule.stop_on);
    let mut walker = Walker::new(seed, &all_targets);
    let mut moves = Vec::new();
    let horizon = rule.horizon;
    let half_start = horizon - horizon / 2;
    let mut window: Option<(i64, i64)> = None;
    if half_start == 0 {
        window = Some((0, 0));
    }
    let mut checkpoints = Vec::new();
    let mut next_cp = FIRST_CHECKPOINT;
    let stopped = |st: &WalkState| rule.stop_on.iter().any(|&y| st.hitting_time(y).is_some());
    while walker.state.n() < horizon && (rule.stop_on.is_empty() || !stopped(&walker.state)) {
        let s = walker.advance(w);
        if keep_moves {
            moves.push(s);
        }
        let st = &walker.state;
        let n = st.n();
        if n == next_cp {
            checkpoints.push((n, (st.max() - st.min()) as u64));
            next_cp = next_cp.saturating_mul(2);
        }
        if n >= half_start {
            let x = st.position();
            window = Some(match window {
                None => (x, x),
                Some((lo, hi)) => (lo.min(x), hi.max(x)),
            });
        }
    }
    let st = &walker.state;
    st.check_invariants()?;
    if st.n() >= FIRST_CHECKPOINT && checkpoints.last().map(|c| c.0) != Some(st.n()) {
        checkpoints.push((st.n(), (st.max() - st.min()) as u64));
    }
    let rec = keep_moves.then(|| TrajectoryRecord {
        seed,
        weight: w.spec().clone(),
        moves,
        prob_right: None,
    });
    Ok((
        TrajectoryStats {
            seed,
            summary: st.summary(),
            growth_exponent: log_log_slope(&checkpoints),
            range_checkpoints: checkpoints,
            final_half: window,
        },
        rec,
    ))
}

fn record_path(dir: &Path, seed: StreamSeed) -> PathBuf {
    dir.join(format!("traj_{:06}.vrrw", seed.index))
}

fn simulate_all(
    w: &WeightFunction,
    rule: &StopRule,
    master: u64,
    first_index: u64,
    trajectories: u64,
    targets: &[i64],
    record_dir: Option<&Path>,
) -> Result<Vec<TrajectoryStats>> {
    par_indexed(trajectories, |i| {
        let seed = StreamSeed::new(master, first_index + i);
        let (stats, rec) = simulate_stats(w, rule, seed, targets, record_dir.is_some())?;
        if let (Some(dir), Some(rec)) = (record_dir, rec) {
            record::write(&record_path(dir, seed), &rec)?;
        }
        Ok(stats)
    })
}

fn fmt_opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "nohit".to_string(), |x| x.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub weight: WeightSpec,
    pub return_threshold: u64,
    pub targets: Vec<i64>,
    pub rows: Vec<TrajectoryStats>,
}

impl RecurrenceReport {
    /// Fraction of trajectories with at least `return_threshold` returns.
    pub fn fraction_returning(&self) -> f64 {
        let hits = self
            .rows
            .iter()
            .filter(|r| r.summary.returns_to_origin >= self.return_threshold)
            .count();
        hits as f64 / self.rows.len() as f64
    }

    pub fn median_growth_exponent(&self) -> f64 {
        median(self.rows.iter().map(|r| r.growth_exponent))
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_header("recurrence");
        out.push_str("trajectory,master_seed,n,final_position,min,max,returns,busiest_edge,busiest_edge_ups,growth_exponent");
        let hit_cols: Vec<i64> = self
            .rows
            .first()
            .map(|r| r.summary.hitting_times.iter().map(|h| h.0).collect())
            .unwrap_or_default();
        for y in &hit_cols {
            write!(out, ",hit_{y}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            let s = &r.summary;
            write!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.seed.index,
                r.seed.master,
                s.n,
                s.final_position,
                s.min,
                s.max,
                s.returns_to_origin,
                fmt_opt(s.busiest_edge.map(|e| e.0)),
                s.busiest_edge.map_or(0, |e| e.1),
                r.growth_exponent
            )
            .unwrap();
            for &(_, t) in &s.hitting_times {
                write!(out, ",{}", fmt_opt(t)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "recurrence weight={} trajectories={} fraction_returns_ge_{}={} median_growth_exponent={}",
            self.weight,
            self.rows.len(),
            self.return_threshold,
            self.fraction_returning(),
            self.median_growth_exponent()
        )
    }
}

pub fn run_recurrence(
    weight: &WeightSpec,
    rule: &StopRule,
    trajectories: u64,
    master: u64,
    targets: &[i64],
    return_threshold: u64,
    record_dir: Option<&Path>,
) -> Result<RecurrenceReport> {
    let w = WeightFunction::new(weight.clone())?;
    let rows = simulate_all(&w, rule, master, 0, trajectories, targets, record_dir)?;
    let mut all_targets = targets.to_vec();
    all_targets.extend_from_slice(&rule.stop_on);
    all_targets.sort_unstable();
    all_targets.dedup();
    Ok(RecurrenceReport {
        weight: weight.clone(),
        return_threshold,
        targets: all_targets,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub weight: WeightSpec,
    pub horizon: u64,
    pub rows: Vec<TrajectoryStats>,
}

impl LocalizationReport {
    pub fn histogram(&self) -> BTreeMap<u64, u64> {
        let mut h = BTreeMap::new();
        for r in &self.rows {
            *h.entry(r.final_half_size()).or_insert(0) += 1;
        }
        h
    }

    /// Most frequent final-half set size; ties go to the smaller size.
    pub fn mode(&self) -> Option<u64> {
        let h = self.histogram();
        let best = h.values().copied().max()?;
        h.into_iter().find(|&(_, c)| c == best).map(|(s, _)| s)
    }

    pub fn fraction_with_size_in(&self, sizes: &[u64]) -> f64 {
        let hits = self
            .rows
            .iter()
            .filter(|r| sizes.contains(&r.final_half_size()))
            .count();
        hits as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_header("localization");
        out.push_str("trajectory,master_seed,n,final_half_min,final_half_max,final_half_size\n");
        for r in &self.rows {
            let (lo, hi) = r.final_half.unwrap_or((0, -1));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seed.index,
                r.seed.master,
                r.summary.n,
                lo,
                hi,
                r.final_half_size()
            )
            .unwrap();
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let hist: Vec<String> = self
            .histogram()
            .iter()
            .map(|(s, c)| format!("{s}:{c}"))
            .collect();
        format!(
            "localization weight={} trajectories={} mode={} histogram={}",
            self.weight,
            self.rows.len(),
            fmt_opt(self.mode()),
            hist.join(" ")
        )
    }
}

pub fn run_localization(
    weight: &WeightSpec,
    horizon: u64,
    trajectories: u64,
    master: u64,
    record_dir: Option<&Path>,
) -> Result<LocalizationReport> {
    let w = WeightFunction::new(weight.clone())?;
    let rows = simulate_all(
        &w,
        &StopRule::horizon(horizon),
        master,
        0,
        trajectories,
        &[],
        record_dir,
    )?;
    Ok(LocalizationReport {
        weight: weight.clone(),
        horizon,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check does not apply to this trajectory (e.g. `v` never hit).
    Skipped,
    /// The caller's parameters violate the check's precondition.
    Precondition,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skipped => "skipped",
            CheckStatus::Precondition => "precondition",
        })
    }
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Replay,
    Drift,
    Decomposition,
    Correction,
    DeltaBound,
    StoppedBound,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Replay,
        Check::Drift,
        Check::Decomposition,
        Check::Correction,
        Check::DeltaBound,
        Check::StoppedBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Replay => "replay",
            Check::Drift => "drift",
            Check::Decomposition => "decomposition",
            Check::Correction => "correction",
            Check::DeltaBound => "delta_bound",
            Check::StoppedBound => "stopped_bound",
        }
    }
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub eps: f64,
    pub v: u64,
    /// Fixed `y`; by default `|min| + 1` of each trajectory.
    pub y: Option<u64>,
    pub checks: Vec<Check>,
}

impl VerifyOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            v: 20,
            y: None,
            checks: Check::ALL.to_vec(),
        }
    }

    fn wants(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub seed: StreamSeed,
    pub n: u64,
    pub check: Check,
    /// Margin (bound checks) or discrepancy (identity checks).
    pub value: f64,
    pub status: CheckStatus,
}

/// Largest `|E[M_{n+1} - M_n | F_n]|` relative to the right-step increment
/// over every state along the first `n` moves.
pub fn max_relative_drift(rec: &TrajectoryRecord, eps: f64, w: &WeightFunction) -> Result<f64> {
    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(eps)?;
    let mut worst: f64 = 0.0;
    for &s in &rec.moves {
        worst = worst.max(mg.drift_ratio(&state, w).abs());
        mg.update(&state, s, w);
        state.apply(s);
    }
    Ok(worst.max(mg.drift_ratio(&state, w).abs()))
}

/// Runs the selected checks on one record.
pub fn verify_record(rec: &TrajectoryRecord, opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let w = WeightFunction::new(rec.weight.clone())?;
    let params = AParams::new(opts.eps, DEFAULT_TOL)?;
    let len = rec.moves.len();
    let mut rows = Vec::new();
    let mut push = |n: u64, check, value, status| {
        rows.push(CheckRow {
            seed: rec.seed,
            n,
            check,
            value,
            status,
        })
    };

    if opts.wants(Check::Replay) {
        let mismatch = replay_mismatch(rec)?;
        let matched = mismatch.unwrap_or(len);
        push(
            len as u64,
            Check::Replay,
            matched as f64,
            status(mismatch.is_none()),
        );
    }
    if opts.wants(Check::Drift) {
        let d = max_relative_drift(rec, opts.eps, &w)?;
        push(len as u64, Check::Drift, d, status(d <= DRIFT_TOL));
    }
    if opts.wants(Check::Decomposition) || opts.wants(Check::Correction) {
        let d = decompose(rec, len, opts.eps, &w)?;
        if opts.wants(Check::Decomposition) {
            let rel = (d.incremental - d.exact).abs() / d.exact.abs().max(1.0);
            let ok = rel <= DECOMPOSITION_TOL && (d.up_terms == 0 || d.min_ln_up_term.is_finite());
            push(len as u64, Check::Decomposition, rel, status(ok));
        }
        if opts.wants(Check::Correction) {
            let diff = ((d.literal - d.exact) - d.correction).abs() / d.exact.abs().max(1.0);
            push(
                len as u64,
                Check::Correction,
                diff,
                status(diff <= CORRECTION_TOL),
            );
        }
    }
    let positions = rec.positions();
    if opts.wants(Check::DeltaBound) {
        let min = positions.iter().copied().min().unwrap_or(0);
        let y = opts.y.unwrap_or(min.unsigned_abs() + 1);
        match delta_bound_margin(rec, y, len, params, &w) {
            Err(Error::Precondition { .. }) => push(
                len as u64,
                Check::DeltaBound,
                f64::NAN,
                CheckStatus::Precondition,
            ),
            Err(e) => return Err(e),
            Ok(_) => {
                let m = delta_bound_margin_all_prefixes(rec, y, params, &w)?;
                push(
                    len as u64,
                    Check::DeltaBound,
                    m.uniform.min(m.partial),
                    status(m.holds()),
                );
            }
        }
    }
    if opts.wants(Check::StoppedBound) {
        let v = opts.v as i64;
        match positions.iter().position(|&x| x == v) {
            None => push(
                len as u64,
                Check::StoppedBound,
                f64::NAN,
                CheckStatus::Skipped,
            ),
            Some(tau) => {
                let min = positions[..=tau].iter().copied().min().unwrap_or(0);
                let y = opts.y.unwrap_or(min.unsigned_abs() + 1);
                match stopped_lower_bound(rec, y, opts.v, params, &w) {
                    Err(Error::Precondition { .. }) => push(
                        tau as u64,
                        Check::StoppedBound,
                        f64::NAN,
                        CheckStatus::Precondition,
                    ),
                    Err(e) => return Err(e),
                    Ok(b) => push(b.tau_v, Check::StoppedBound, b.margin(), status(b.holds())),
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn count(&self, check: Check, st: CheckStatus) -> usize {
        self.rows
            .iter()
            .filter(|r| r.check == check && r.status == st)
            .count()
    }

    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == CheckStatus::Fail)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_header("verify");
        out.push_str("master_seed,stream,n,check,value,status\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seed.master,
                r.seed.index,
                r.n,
                r.check.name(),
                r.value,
                r.status
            )
            .unwrap();
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let mut parts = Vec::new();
        for c in Check::ALL {
            let total = self.rows.iter().filter(|r| r.check == c).count();
            if total > 0 {
                parts.push(format!(
                    "{}={}/{} (fail {}, skipped {}, precondition {})",
                    c.name(),
                    self.count(c, CheckStatus::Pass),
                    total,
                    self.count(c, CheckStatus::Fail),
                    self.count(c, CheckStatus::Skipped),
                    self.count(c, CheckStatus::Precondition),
                ));
            }
        }
        format!(
            "verify violations={} {}",
            self.violations(),
            parts.join(" ")
        )
    }
}

/// Simulates `trajectories` walks and verifies each one, then verifies the
/// stored records in `replays`.
pub fn run_verify(
    weight: &WeightSpec,
    horizon: u64,
    trajectories: u64,
    master: u64,
    replays: &[PathBuf],
    opts: &VerifyOptions,
    record_dir: Option<&Path>,
) -> Result<VerifyReport> {
    let w = WeightFunction::new(weight.clone())?;
    let rule = StopRule::horizon(horizon);
    let per: Vec<Vec<CheckRow>> = par_indexed(trajectories, |i| {
        let seed = StreamSeed::new(master, i);
        let (_, rec) = crate::walk::run_trajectory(
            &w,
            &rule,
            seed,
            &[],
            RecordOptions {
                moves: true,
                prob_right: false,
            },
        )?;
        let rec = rec.expect("moves recorded");
        if let Some(dir) = record_dir {
            record::write(&record_path(dir, seed), &rec)?;
        }
        verify_record(&rec, opts)
    })?;
    let stored = replays
        .iter()
        .map(|p| record::read(p))
        .collect::<Result<Vec<_>>>()?;
    let replayed: Vec<Vec<CheckRow>> = stored
        .par_iter()
        .map(|r| verify_record(r, opts))
        .collect::<Result<_>>()?;
    Ok(VerifyReport {
        rows: per.into_iter().chain(replayed).flatten().collect(),
    })
}

/// Weight family used for exponent `a` in a phase scan.
pub fn phase_weight(a: f64) -> Result<WeightSpec> {
    if a > 1.0 {
        Ok(WeightSpec::Superlinear(a))
    } else if a >= 0.0 {
        Ok(WeightSpec::Power(a))
    } else {
        Err(Error::InvalidWeight(format!("negative exponent {a}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub exponent: f64,
    pub weight: WeightSpec,
    pub trajectories: u64,
    pub fraction_returning: f64,
    pub median_growth_exponent: f64,
    pub median_range: f64,
    pub modal_final_half: Option<u64>,
    pub median_final_half: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub horizon: u64,
    pub return_threshold: u64,
    pub rows: Vec<PhaseRow>,
}

impl PhaseReport {
    pub fn to_csv(&self) -> String {
        let mut out = csv_header("phase");
        out.push_str(
            "exponent,weight,horizon,trajectories,return_threshold,fraction_returning,median_growth_exponent,median_range,modal_final_half,median_final_half\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.exponent,
                r.weight,
                self.horizon,
                r.trajectories,
                self.return_threshold,
                r.fraction_returning,
                r.median_growth_exponent,
                r.median_range,
                fmt_opt(r.modal_final_half),
                r.median_final_half
            )
            .unwrap();
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{}:returning={},mode={}",
                    r.exponent,
                    r.fraction_returning,
                    fmt_opt(r.modal_final_half)
                )
            })
            .collect();
        format!("phase horizon={} {}", self.horizon, parts.join(" "))
    }
}

/// Recurrence and localization statistics across weight exponents. Exponent
/// `j` uses streams `j * trajectories ..`.
pub fn run_phase(
    exponents: &[f64],
    horizon: u64,
    trajectories: u64,
    master: u64,
    return_threshold: u64,
) -> Result<PhaseReport> {
    let mut rows = Vec::with_capacity(exponents.len());
    for (j, &a) in exponents.iter().enumerate() {
        let weight = phase_weight(a)?;
        let w = WeightFunction::new(weight.clone())?;
        let stats = simulate_all(
            &w,
            &StopRule::horizon(horizon),
            master,
            j as u64 * trajectories,
            trajectories,
            &[],
            None,
        )?;
        let rec = RecurrenceReport {
            weight: weight.clone(),
            return_threshold,
            targets: Vec::new(),
            rows: stats,
        };
        let loc = LocalizationReport {
            weight: weight.clone(),
            horizon,
            rows: rec.rows.clone(),
        };
        rows.push(PhaseRow {
            exponent: a,
            weight,
            trajectories,
            fraction_returning: rec.fraction_returning(),
            median_growth_exponent: rec.median_growth_exponent(),
            median_range: median(
                rec.rows
                    .iter()
                    .map(|r| (r.summary.max - r.summary.min) as f64),
            ),
            modal_final_half: loc.mode(),
            median_final_half: median(loc.rows.iter().map(|r| r.final_half_size() as f64)),
        });
    }
    Ok(PhaseReport {
        horizon,
        return_threshold,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub points: Vec<ScanPoint>,
}

impl LemmaReport {
    pub fn to_csv(&self) -> String {
        let mut out = csv_header("lemma");
        out.push_str("k,alpha,epsilon,value,restarts,converged,max_b,argmax\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.k, p.alpha, p.eps, p.value, p.restarts, p.converged, p.max_b, p.argmax
            )
            .unwrap();
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("{}:{}", p.k, p.value))
            .collect();
        format!("lemma {}", parts.join(" "))
    }
}

pub fn run_lemma(params: &LemmaParams, seed: u64) -> Result<LemmaReport> {
    let opts = MinimizeOptions {
        restarts: params.restarts,
        max_sweeps: params.sweeps,
        seed,
        ..MinimizeOptions::default()
    };
    Ok(LemmaReport {
        points: scaling_scan(&params.ks, params.alpha, params.eps, opts)?,
    })
}

/// CSV text, a one-line summary and the number of failed checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub summary: String,
    pub violations: usize,
}

/// Runs the experiment described by `cfg` on `cfg.workers` threads.
pub fn run_config(cfg: &ExperimentConfig, record_dir: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let weight = || {
        cfg.weight
            .clone()
            .ok_or_else(|| Error::Config(format!("kind = {} requires key \"weight\"", cfg.kind)))
    };
    with_workers(cfg.workers, || -> Result<Outcome> {
        Ok(match cfg.kind {
            ExperimentKind::Recurrence => {
                let rule = StopRule {
                    horizon: cfg.horizon,
                    stop_on: cfg.stop_on.clone(),
                };
                let r = run_recurrence(
                    &weight()?,
                    &rule,
                    cfg.trajectories,
                    cfg.seed,
                    &cfg.targets,
                    cfg.return_threshold,
                    record_dir,
                )?;
                Outcome {
                    csv: r.to_csv(),
                    summary: r.summary_line(),
                    violations: 0,
                }
            }
            ExperimentKind::Localization => {
                let r = run_localization(
                    &weight()?,
                    cfg.horizon,
                    cfg.trajectories,
                    cfg.seed,
                    record_dir,
                )?;
                Outcome {
                    csv: r.to_csv(),
                    summary: r.summary_line(),
                    violations: 0,
                }
            }
            ExperimentKind::Verify => {
                let mut opts = VerifyOptions::new(cfg.eps);
                opts.v = cfg.verify_v;
                opts.y = cfg.verify_y;
                if !cfg.checks.is_empty() {
                    opts.checks = cfg.checks.clone();
                }
                let r = run_verify(
                    &weight()?,
                    cfg.horizon,
                    cfg.trajectories,
                    cfg.seed,
                    &cfg.replay_records,
                    &opts,
                    record_dir,
                )?;
                Outcome {
                    csv: r.to_csv(),
                    summary: r.summary_line(),
                    violations: r.violations(),
                }
            }
            ExperimentKind::Phase => {
                let r = run_phase(
                    &cfg.phase_exponents,
                    cfg.horizon,
                    cfg.trajectories,
                    cfg.seed,
                    cfg.return_threshold,
                )?;
                Outcome {
                    csv: r.to_csv(),
                    summary: r.summary_line(),
                    violations: 0,
                }
            }
            ExperimentKind::Lemma => {
                let params = cfg.lemma.as_ref().expect("validated lemma config");
                let r = run_lemma(params, cfg.seed)?;
                Outcome {
                    csv: r.to_csv(),
                    summary: r.summary_line(),
                    violations: 0,
                }
            }
        })
    })?
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_slope() {
        assert_eq!(median([3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median([4.0, 1.0, f64::NAN, 2.0, 3.0]), 2.5);
        assert!(median([]).is_nan());
        let pts: Vec<(u64, u64)> = (4..10)
            .map(|j| (1u64 << j, 1u64 << (j / 2 * 2 / 2)))
            .collect();
        assert!(log_log_slope(&pts) > 0.0);
        assert!((log_log_slope(&[(16, 4), (64, 8), (256, 16)]) - 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[(16, 4)]).is_nan());
    }

    #[test]
    fn final_half_window_covers_last_positions() {
        let w: WeightFunction = "linear".parse().unwrap();
        let seed = StreamSeed::new(5, 2);
        let (stats, rec) = simulate_stats(&w, &StopRule::horizon(101), seed, &[], true).unwrap();
        let pos = rec.unwrap().positions();
        let tail = &pos[51..];
        let lo = *tail.iter().min().unwrap();
        let hi = *tail.iter().max().unwrap();
        assert_eq!(stats.final_half, Some((lo, hi)));
        assert_eq!(stats.range_checkpoints.first().unwrap().0, 16);
        assert_eq!(stats.range_checkpoints.last().unwrap().0, 101);
    }

    #[test]
    fn stats_agree_with_run_trajectory() {
        let w: WeightFunction = "power:0.3".parse().unwrap();
        let seed = StreamSeed::new(11, 7);
        let rule = StopRule::horizon(5000);
        let (stats, _) = simulate_stats(&w, &rule, seed, &[3, -3], false).unwrap();
        let (summary, _) =
            crate::walk::run_trajectory(&w, &rule, seed, &[3, -3], RecordOptions::default())
                .unwrap();
        assert_eq!(stats.summary, summary);
    }

    #[test]
    fn worker_count_does_not_change_csv() {
        let cfg = ExperimentConfig::parse(
            "kind = recurrence\nweight = power:0.3\nhorizon = 2000\ntrajectories = 12\nseed = 3\ntargets = 4\n",
        )
        .unwrap();
        let one = run_config(&cfg, None).unwrap();
        let many = run_config(&ExperimentConfig { workers: 5, ..cfg }, None).unwrap();
        assert_eq!(one, many);
        assert!(one.csv.starts_with("# vrrw-csv v1 recurrence\n"));
        assert_eq!(one.csv.lines().count(), 2 + 12);
    }

    #[test]
    fn verify_passes_on_short_runs() {
        let cfg = ExperimentConfig::parse(
            "kind = verify\nweight = linear\nhorizon = 400\ntrajectories = 6\nverify_v = 3\n",
        )
        .unwrap();
        let out = run_config(&cfg, None).unwrap();
        assert_eq!(out.violations, 0, "{}", out.csv);
        assert_eq!(out.csv.lines().count(), 2 + 6 * 6);
    }

    #[test]
    fn fixed_y_below_min_is_a_precondition_not_a_violation() {
        let w: WeightFunction = "linear".parse().unwrap();
        let rec = (0..)
            .map(|i| {
                let opts = RecordOptions {
                    moves: true,
                    prob_right: false,
                };
                let (_, rec) = crate::walk::run_trajectory(
                    &w,
                    &StopRule::horizon(3000),
                    StreamSeed::new(1, i),
                    &[],
                    opts,
                )
                .unwrap();
                rec.unwrap()
            })
            .find(|r| r.positions().into_iter().min().unwrap() <= -2)
            .unwrap();
        let opts = VerifyOptions {
            y: Some(1),
            checks: vec![Check::DeltaBound],
            ..VerifyOptions::new(0.05)
        };
        let rows = verify_record(&rec, &opts).unwrap();
        assert_eq!(rows[0].status, CheckStatus::Precondition);
    }

    #[test]
    fn tampered_record_fails_replay() {
        let w: WeightFunction = "power:0.3".parse().unwrap();
        let (_, rec) = crate::walk::run_trajectory(
            &w,
            &StopRule::horizon(200),
            StreamSeed::new(2, 0),
            &[],
            RecordOptions {
                moves: true,
                prob_right: false,
            },
        )
        .unwrap();
        let mut rec = rec.unwrap();
        rec.moves[50] = match rec.moves[50] {
            crate::walk::Step::Left => crate::walk::Step::Right,
            crate::walk::Step::Right => crate::walk::Step::Left,
        };
        let opts = VerifyOptions {
            checks: vec![Check::Replay],
            ..VerifyOptions::new(0.05)
        };
        let rows = verify_record(&rec, &opts).unwrap();
        assert_eq!((rows[0].status, rows[0].value), (CheckStatus::Fail, 50.0));
    }

    #[test]
    fn phase_rows_per_exponent() {
        let r = run_phase(&[0.3, 1.0, 1.5], 500, 4, 0, 2).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[2].weight, WeightSpec::Superlinear(1.5));
        assert!(r.to_csv().starts_with("# vrrw-csv v1 phase\n"));
    }
}

//! The reinforcement martingale and its path-wise checkers.
//!
//! Site coefficients
//!
//! ```text
//! a_x = 1 - (x+2)^-(1+eps)   for x >= 0
//! a_x = 1/2                  for x < 0
//! A_k = prod_{x >= -k} a_x
//! ```
//!
//! `M_0 = 0` and `Delta_0(z) = 1` for `z < 0`. From `X_n = x`:
//!
//! * a left step adds `-a_x * Delta(x-1)`;
//! * a right step adds `a_x * Delta(x-1) * w(Z(x-1)) / w(Z(x+1))` and stores
//!   that value as `Delta(x)`.
//!
//! `Delta` values shrink like `A_y / (w * w)` and carry a factor `2^-y`
//! after an excursion to `-y`, so the ledger keeps `ln Delta`. Increments
//! whose magnitude is below the smallest normal double are added as zero
//! and counted in an underflow tally; bound checks use the exact logs.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::lattice::SiteVec;
use crate::sum::NeumaierSum;
use crate::walk::{Step, TrajectoryRecord, WalkState};
use crate::weights::WeightFunction;

/// Default reinforcement exponent slack.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default truncation tolerance for `A_k`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// `ln` of the smallest positive normal double.
const LN_MIN_NORMAL: f64 = -708.396_418_532_264_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AParams {
    pub eps: f64,
    pub tol: f64,
}

impl AParams {
    pub fn new(eps: f64, tol: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::precondition(
                "a_coeff",
                format!("epsilon must be > 0, got {eps}"),
            ));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::precondition(
                "big_a",
                format!("tolerance must be > 0, got {tol}"),
            ));
        }
        Ok(Self { eps, tol })
    }
}

/// `a_x`.
pub fn a_coeff(x: i64, eps: f64) -> f64 {
    if x < 0 {
        0.5
    } else {
        1.0 - ((x + 2) as f64).powf(-(1.0 + eps))
    }
}

/// `ln a_x`.
pub fn ln_a(x: i64, eps: f64) -> f64 {
    if x < 0 {
        -LN_2
    } else {
        (-((x + 2) as f64).powf(-(1.0 + eps))).ln_1p()
    }
}

/// `ln(1 - a_x)`, exact even when `a_x` rounds to 1.
pub fn ln_one_minus_a(x: i64, eps: f64) -> f64 {
    if x < 0 {
        -LN_2
    } else {
        -(1.0 + eps) * ((x + 2) as f64).ln()
    }
}

/// `ln A_k` with its certified absolute error, which bounds the relative
/// error of `A_k` to first order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigA {
    ln_a0: f64,
    pub error_bound: f64,
}

// Number of explicit product factors before switching to the zeta tail.
const EXPLICIT_TERMS: i64 = 1000;

impl BigA {
    pub fn new(params: AParams) -> Self {
        let s = 1.0 + params.eps;
        let mut acc = NeumaierSum::new();
        for x in 0..EXPLICIT_TERMS {
            acc += ln_a(x, params.eps);
        }
        // Remaining factors are 1 - m^-s for m >= start, and
        // sum_m ln(1 - m^-s) = -sum_{j>=1} zeta(j s, start) / j.
        let start = (EXPLICIT_TERMS + 2) as f64;
        let mut err = 0.0;
        let ratio = start.powf(-s);
        for j in 1.. {
            let sigma = j as f64 * s;
            let (z, z_err) = hurwitz_zeta_tail(sigma, start);
            acc += -z / j as f64;
            err += z_err / j as f64;
            // zeta(sigma', start) for sigma' >= sigma + s shrinks by at
            // least `ratio` per extra j; bound the rest geometrically.
            let rest = z * ratio / (1.0 - ratio);
            if rest < params.tol * 1e-6 || j >= 64 {
                err += rest;
                break;
            }
        }
        // Rounding in the explicit compensated sum.
        err += 4.0 * f64::EPSILON * acc.value().abs();
        Self {
            ln_a0: acc.value(),
            error_bound: err,
        }
    }

    /// `ln A_k`.
    pub fn ln(&self, k: u64) -> f64 {
        self.ln_a0 - k as f64 * LN_2
    }

    /// `A_k = A_0 2^-k`; the power of two keeps `A_{k+1} = A_k / 2` exact.
    pub fn value(&self, k: u64) -> f64 {
        match i32::try_from(k) {
            Ok(k) => self.ln_a0.exp() * 0.5f64.powi(k),
            Err(_) => 0.0,
        }
    }
}

/// `A_k` for the given slack and truncation tolerance.
pub fn big_a(k: u64, eps: f64, tol: f64) -> Result<f64> {
    Ok(BigA::new(AParams::new(eps, tol)?).value(k))
}

/// `sum_{m >= start} m^-sigma` for `sigma > 1` and `start >= 100` by
/// Euler-Maclaurin, with a bound on the truncation error.
fn hurwitz_zeta_tail(sigma: f64, start: f64) -> (f64, f64) {
    // B_2k / (2k)!
    const B: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30_240.0, -1.0 / 1_209_600.0];
    let mut total = start.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * start.powf(-sigma);
    // Rising factorial sigma (sigma+1) ... (sigma+2k-2).
    let mut rising = sigma;
    let mut power = start.powf(-sigma - 1.0);
    let mut last = 0.0;
    for (k, b) in B.iter().enumerate() {
        if k > 0 {
            let k = k as f64;
            rising *= (sigma + 2.0 * k - 1.0) * (sigma + 2.0 * k);
            power /= start * start;
        }
        last = b * rising * power;
        total += last;
    }
    // The remainder for this completely monotone summand is smaller than
    // the last included correction.
    (total, last.abs())
}

/// Martingale value, `ln Delta` ledger and underflow tally.
#[derive(Debug, Clone)]
pub struct MartingaleState {
    eps: f64,
    m: NeumaierSum,
    ln_delta: SiteVec<f64>,
    ln_a_cache: Vec<f64>,
    underflows: u64,
    steps: u64,
}

/// The two possible next increments, scale factored out:
/// right = `exp(ln_scale) * wl / wr`, left = `-exp(ln_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prospect {
    /// `ln(a_x * Delta(x-1))`.
    pub ln_scale: f64,
    pub w_left: f64,
    pub w_right: f64,
    pub ln_w_left: f64,
    pub ln_w_right: f64,
}

impl Prospect {
    /// `ln` of the right-step increment, i.e. the current `Delta_n`.
    #[inline]
    pub fn ln_right(&self) -> f64 {
        self.ln_scale + self.ln_w_left - self.ln_w_right
    }
}

impl MartingaleState {
    pub fn new(eps: f64) -> Result<Self> {
        AParams::new(eps, DEFAULT_TOL)?;
        Ok(Self {
            eps,
            m: NeumaierSum::new(),
            ln_delta: SiteVec::new(0.0),
            ln_a_cache: Vec::new(),
            underflows: 0,
            steps: 0,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `M_n`.
    pub fn value(&self) -> f64 {
        self.m.value()
    }

    pub fn underflows(&self) -> u64 {
        self.underflows
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `ln Delta_n(z)` for a stored edge `z < X_n`.
    #[inline]
    pub fn ln_delta(&self, z: i64) -> f64 {
        self.ln_delta.get(z)
    }

    /// `Delta_n(z)` (may underflow to zero; see [`Self::ln_delta`]).
    pub fn delta(&self, z: i64) -> f64 {
        self.ln_delta(z).exp()
    }

    #[inline]
    fn ln_a(&mut self, x: i64) -> f64 {
        if x < 0 {
            return -LN_2;
        }
        let i = x as usize;
        while self.ln_a_cache.len() <= i {
            let next = self.ln_a_cache.len() as i64;
            self.ln_a_cache.push(ln_a(next, self.eps));
        }
        self.ln_a_cache[i]
    }

    #[inline]
    fn ln_a_ref(&self, x: i64) -> f64 {
        match usize::try_from(x) {
            Ok(i) if i < self.ln_a_cache.len() => self.ln_a_cache[i],
            _ => ln_a(x, self.eps),
        }
    }

    /// The prospective increments at the current state.
    #[inline]
    pub fn prospect(&self, state: &WalkState, w: &WeightFunction) -> Prospect {
        let x = state.position();
        let zl = state.local_time(x - 1);
        let zr = state.local_time(x + 1);
        Prospect {
            ln_scale: self.ln_a_ref(x) + self.ln_delta(x - 1),
            w_left: w.eval(zl),
            w_right: w.eval(zr),
            ln_w_left: w.ln_eval(zl),
            ln_w_right: w.ln_eval(zr),
        }
    }

    /// `ln Delta_n` at the current position.
    pub fn current_ln_delta(&self, state: &WalkState, w: &WeightFunction) -> f64 {
        self.prospect(state, w).ln_right()
    }

    #[inline]
    fn flush(&mut self, ln_mag: f64) -> f64 {
        if ln_mag < LN_MIN_NORMAL {
            self.underflows += 1;
            0.0
        } else {
            ln_mag.exp()
        }
    }

    /// Applies the increment for `step` taken from `pre` (the state before
    /// the move) and returns it.
    #[inline]
    pub fn update(&mut self, pre: &WalkState, step: Step, w: &WeightFunction) -> f64 {
        debug_assert_eq!(self.steps, pre.n(), "martingale out of sync with walk");
        let x = pre.position();
        self.ln_a(x);
        let p = self.prospect(pre, w);
        let inc = match step {
            Step::Left => -self.flush(p.ln_scale),
            Step::Right => {
                let ln_inc = p.ln_right();
                self.ln_delta.set(x, ln_inc);
                self.flush(ln_inc)
            }
        };
        self.m += inc;
        self.steps += 1;
        inc
    }

    /// `E[M_{n+1} - M_n | F_n] = p_right * inc_right + p_left * inc_left`.
    pub fn expected_increment(&self, state: &WalkState, w: &WeightFunction) -> f64 {
        let p = self.prospect(state, w);
        let scale = p.ln_scale.exp();
        let s = p.w_right + p.w_left;
        let (pr, pl) = (p.w_right / s, p.w_left / s);
        pr * (scale * p.w_left / p.w_right) + pl * (-scale)
    }

    /// The expected increment divided by the right-step increment. The
    /// common factor `a_x * Delta(x-1)` cancels, so this stays meaningful
    /// when `Delta` is below the double range.
    pub fn drift_ratio(&self, state: &WalkState, w: &WeightFunction) -> f64 {
        let p = self.prospect(state, w);
        let s = p.w_right + p.w_left;
        let (pr, pl) = (p.w_right / s, p.w_left / s);
        let right = p.w_left / p.w_right;
        (pr * right - pl) / right
    }
}

/// Runs the walk and martingale through the first `n` moves of `record`.
pub fn replay_with_martingale(
    record: &TrajectoryRecord,
    n: usize,
    eps: f64,
    w: &WeightFunction,
) -> Result<(WalkState, MartingaleState)> {
    if n > record.moves.len() {
        return Err(Error::precondition(
            "replay",
            format!("n = {n} exceeds record length {}", record.moves.len()),
        ));
    }
    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(eps)?;
    for &s in &record.moves[..n] {
        mg.update(&state, s, w);
        state.apply(s);
    }
    Ok((state, mg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Incrementally maintained `M_n`.
    pub incremental: f64,
    /// Edge-grouped value: up-crossing terms minus fresh down-crossings.
    pub exact: f64,
    /// The printed closed form, with `(1/2) * min_{i<=n} X_i` in place of
    /// the fresh down-crossing sum.
    pub literal: f64,
    /// `literal - exact` predicted in closed form: `(a_0 - 1/2) [min < 0]`.
    pub correction: f64,
    pub min_position: i64,
    pub up_terms: usize,
    /// Smallest `ln` of an up-crossing term; finite iff all terms are > 0.
    pub min_ln_up_term: f64,
    pub underflows: u64,
}

/// Recomputes `M_n` by grouping increments per up-crossing.
///
/// Each up-crossing of edge `{x, x+1}` at time `i` earns `Delta_i`; the next
/// down-crossing of the same edge, if it happens by time `n`, takes back
/// `a_{x+1} Delta_i`. A negative edge down-crossed before it was ever
/// up-crossed costs `a_{z+1}`.
pub fn decompose(
    record: &TrajectoryRecord,
    n: usize,
    eps: f64,
    w: &WeightFunction,
) -> Result<Decomposition> {
    if n > record.moves.len() {
        return Err(Error::precondition(
            "decompose",
            format!("n = {n} exceeds record length {}", record.moves.len()),
        ));
    }
    AParams::new(eps, DEFAULT_TOL)?;

    struct UpCross {
        edge: i64,
        ln_delta: f64,
        returned: bool,
    }
    let mut ups: Vec<UpCross> = Vec::new();
    // Most recent unreturned up-crossing per edge, and last Delta per edge.
    let mut open: HashMap<i64, usize> = HashMap::new();
    let mut last_ln_delta: HashMap<i64, f64> = HashMap::new();
    let mut fresh_edges: Vec<i64> = Vec::new();

    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(eps)?;
    for &s in &record.moves[..n] {
        let x = state.position();
        match s {
            Step::Right => {
                let prev = last_ln_delta.get(&(x - 1)).copied().unwrap_or(0.0);
                let ln_delta = ln_a(x, eps) + prev + w.ln_eval(state.local_time(x - 1))
                    - w.ln_eval(state.local_time(x + 1));
                last_ln_delta.insert(x, ln_delta);
                open.insert(x, ups.len());
                ups.push(UpCross {
                    edge: x,
                    ln_delta,
                    returned: false,
                });
            }
            Step::Left => match open.remove(&(x - 1)) {
                Some(i) => ups[i].returned = true,
                None => {
                    debug_assert!(x - 1 < 0, "fresh down-crossing of nonnegative edge");
                    fresh_edges.push(x - 1);
                }
            },
        }
        mg.update(&state, s, w);
        state.apply(s);
    }

    let mut underflows = 0;
    let mut flush = |ln_mag: f64| {
        if ln_mag < LN_MIN_NORMAL {
            underflows += 1;
            0.0
        } else {
            ln_mag.exp()
        }
    };
    let mut up_sum = NeumaierSum::new();
    let mut min_ln_up_term = f64::INFINITY;
    for u in &ups {
        let ln_term = if u.returned {
            u.ln_delta + ln_one_minus_a(u.edge + 1, eps)
        } else {
            u.ln_delta
        };
        min_ln_up_term = min_ln_up_term.min(ln_term);
        up_sum += flush(ln_term);
    }
    let mut fresh = NeumaierSum::new();
    for &z in &fresh_edges {
        fresh += a_coeff(z + 1, eps);
    }
    let mut exact = up_sum;
    exact += -fresh.value();
    let mut literal = up_sum;
    literal += 0.5 * state.min() as f64;
    let correction = if state.min() < 0 {
        a_coeff(0, eps) - 0.5
    } else {
        0.0
    };

    Ok(Decomposition {
        incremental: mg.value(),
        exact: exact.value(),
        literal: literal.value(),
        correction,
        min_position: state.min(),
        up_terms: ups.len(),
        min_ln_up_term,
        underflows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMargins {
    /// `min_z ln Delta_n(z) - ln(A_y / (w(Z(z)) w(Z(z+1))))`.
    pub uniform: f64,
    /// Same against the partial product `prod_{i=-y}^{z} a_i`.
    pub partial: f64,
}

impl DeltaMargins {
    fn merge(self, other: DeltaMargins) -> DeltaMargins {
        DeltaMargins {
            uniform: self.uniform.min(other.uniform),
            partial: self.partial.min(other.partial),
        }
    }

    pub fn holds(&self) -> bool {
        self.uniform >= 0.0 && self.partial >= 0.0
    }
}

/// Log-domain margins of the lower bounds on `Delta_n(z)` for
/// `-y <= z <= X_n` at the current state.
pub fn scan_delta_margins(
    state: &WalkState,
    mg: &MartingaleState,
    y: u64,
    ln_a_y: f64,
    w: &WeightFunction,
) -> DeltaMargins {
    let x = state.position();
    let lo = -(y as i64);
    let mut ln_prod = 0.0;
    let mut uniform = f64::INFINITY;
    let mut partial = f64::INFINITY;
    let mut ln_w_here = w.ln_eval(state.local_time(lo));
    for z in lo..=x {
        ln_prod += mg.ln_a_ref(z);
        let ln_w_next = w.ln_eval(state.local_time(z + 1));
        let ln_d = if z == x {
            mg.current_ln_delta(state, w)
        } else {
            mg.ln_delta(z)
        };
        let ln_ww = ln_w_here + ln_w_next;
        uniform = uniform.min(ln_d - (ln_a_y - ln_ww));
        partial = partial.min(ln_d - (ln_prod - ln_ww));
        ln_w_here = ln_w_next;
    }
    DeltaMargins { uniform, partial }
}

fn check_y(y: u64) -> Result<()> {
    if y == 0 {
        return Err(Error::precondition("delta_bound", "y must be positive"));
    }
    Ok(())
}

/// Margins of the `Delta_n(z)` lower bounds at time `n`. Fails if the
/// walk reaches `-y` before time `n`.
pub fn delta_bound_margin(
    record: &TrajectoryRecord,
    y: u64,
    n: usize,
    params: AParams,
    w: &WeightFunction,
) -> Result<DeltaMargins> {
    check_y(y)?;
    if n > record.moves.len() {
        return Err(Error::precondition(
            "delta_bound",
            format!("n = {n} exceeds record length {}", record.moves.len()),
        ));
    }
    let ln_a_y = BigA::new(params).ln(y);
    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(params.eps)?;
    for &s in &record.moves[..n] {
        if state.position() == -(y as i64) {
            return Err(tau_exceeded(state.n(), y));
        }
        mg.update(&state, s, w);
        state.apply(s);
    }
    Ok(scan_delta_margins(&state, &mg, y, ln_a_y, w))
}

fn tau_exceeded(tau: u64, y: u64) -> Error {
    Error::precondition("delta_bound", format!("n exceeds tau_-{y} = {tau}"))
}

/// Minimum margins over every prefix `n <= min(len, tau_{-y})`.
pub fn delta_bound_margin_all_prefixes(
    record: &TrajectoryRecord,
    y: u64,
    params: AParams,
    w: &WeightFunction,
) -> Result<DeltaMargins> {
    check_y(y)?;
    let ln_a_y = BigA::new(params).ln(y);
    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(params.eps)?;
    let mut worst = scan_delta_margins(&state, &mg, y, ln_a_y, w);
    for &s in &record.moves {
        if state.position() == -(y as i64) {
            break;
        }
        mg.update(&state, s, w);
        state.apply(s);
        worst = worst.merge(scan_delta_margins(&state, &mg, y, ln_a_y, w));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedBound {
    pub tau_v: u64,
    pub m_at_tau: f64,
    pub bound: f64,
}

impl StoppedBound {
    pub fn margin(&self) -> f64 {
        self.m_at_tau - self.bound
    }

    pub fn holds(&self) -> bool {
        self.m_at_tau >= self.bound
    }
}

/// `M` at the hitting time of `v` against the edge-grouped lower bound
///
/// ```text
/// A_y sum_{z=-y+1}^{v-1} (1 + (N_z - 1)(1 - a_v)) / (w(Z(z)) w(Z(z+1)))
///     - (y-1)/2 - (a_0 - 1/2)[y > 1]
/// ```
///
/// with crossing counts and local times taken at `tau_v`.
pub fn stopped_lower_bound(
    record: &TrajectoryRecord,
    y: u64,
    v: u64,
    params: AParams,
    w: &WeightFunction,
) -> Result<StoppedBound> {
    check_y(y)?;
    if v == 0 {
        return Err(Error::precondition("stopped_bound", "v must be positive"));
    }
    let (v, ny) = (v as i64, -(y as i64));
    let mut state = WalkState::new();
    let mut mg = MartingaleState::new(params.eps)?;
    let mut moves = record.moves.iter();
    while state.position() != v {
        if state.position() == ny {
            return Err(Error::precondition(
                "stopped_bound",
                format!("tau_-{y} = {} hit before tau_{v}", state.n()),
            ));
        }
        let Some(&s) = moves.next() else {
            return Err(Error::precondition(
                "stopped_bound",
                format!("tau_{v} not reached within {} moves", record.moves.len()),
            ));
        };
        mg.update(&state, s, w);
        state.apply(s);
    }

    let ln_a_y = BigA::new(params).ln(y);
    let one_minus_a_v = ln_one_minus_a(v, params.eps).exp();
    let mut sum = NeumaierSum::new();
    for z in ny + 1..v {
        let (up, _) = state.crossing_counts(z);
        let weight = 1.0 + (up as f64 - 1.0) * one_minus_a_v;
        let ln_ww = w.ln_eval(state.local_time(z)) + w.ln_eval(state.local_time(z + 1));
        sum += weight * (ln_a_y - ln_ww).exp();
    }
    sum += -((y - 1) as f64) / 2.0;
    if y > 1 {
        sum += -(a_coeff(0, params.eps) - 0.5);
    }
    Ok(StoppedBound {
        tau_v: state.n(),
        m_at_tau: mg.value(),
        bound: sum.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;
    use Step::{Left as L, Right as R};

    fn lin() -> WeightFunction {
        "linear".parse().unwrap()
    }

    fn record(moves: &[Step], w: &WeightFunction) -> TrajectoryRecord {
        TrajectoryRecord {
            seed: StreamSeed::new(0, 0),
            weight: w.spec().clone(),
            moves: moves.to_vec(),
            prob_right: None,
        }
    }

    #[test]
    fn a_coeff_values() {
        assert_eq!(a_coeff(-5, 0.3), 0.5);
        assert_eq!(a_coeff(-1, 7.0), 0.5);
        assert_eq!(a_coeff(0, 1.0), 0.75);
        assert!((a_coeff(98, 1.0) - 0.9999).abs() < 1e-15);
        for x in -3..200 {
            let a = a_coeff(x, 0.05);
            assert!(a > 0.0 && a < 1.0);
            assert!((ln_a(x, 0.05) - a.ln()).abs() < 1e-14);
            assert!((ln_one_minus_a(x, 0.05).exp() - (1.0 - a)).abs() < 1e-13);
        }
    }

    #[test]
    fn big_a_telescoping() {
        // prod_{m>=2} (1 - 1/m^2) = 1/2
        let tol = 1e-12;
        let a0 = big_a(0, 1.0, tol).unwrap();
        assert!((a0 - 0.5).abs() <= 2.0 * tol * 0.5, "{a0}");
        let a2 = big_a(2, 1.0, tol).unwrap();
        assert!((a2 - 0.125).abs() <= 2.0 * tol * 0.125, "{a2}");
        let ba = BigA::new(AParams::new(1.0, tol).unwrap());
        assert!(ba.error_bound < tol);
    }

    #[test]
    fn big_a_halves_per_index() {
        let ba = BigA::new(AParams::new(0.05, 1e-12).unwrap());
        for k in 0..50 {
            let (ak, ak1) = (ba.value(k), ba.value(k + 1));
            assert!(ak > 0.0 && ak < 1.0);
            assert!(ak1 < ak);
            assert_eq!(ak1 * 2.0, ak);
        }
    }

    #[test]
    fn big_a_against_brute_force_bracket() {
        // For eps = 1/2 the partial product to 10^6 factors brackets A_0:
        // P_N * exp(-(1 + d) T) <= A_0 <= P_N with T the tail integral.
        let eps = 0.5;
        let s = 1.0 + eps;
        let n = 1_000_000i64;
        let mut ln_p = NeumaierSum::new();
        for x in 0..=n {
            ln_p += (-((x + 2) as f64).powf(-s)).ln_1p();
        }
        // sum_{m >= n+3} m^-s <= int_{n+2}^inf t^-s dt
        let tail = ((n + 2) as f64).powf(1.0 - s) / (s - 1.0);
        let lo = ln_p.value() - tail * (1.0 + 1e-6);
        let hi = ln_p.value() - ((n + 3) as f64).powf(1.0 - s) / (s - 1.0);
        let got = BigA::new(AParams::new(eps, 1e-12).unwrap()).ln(0);
        assert!(lo <= got && got <= hi, "{lo} <= {got} <= {hi}");
        assert!(hi - lo < 1e-8);
    }

    #[test]
    fn init_state() {
        let mg = MartingaleState::new(1.0).unwrap();
        assert_eq!(mg.value(), 0.0);
        assert_eq!(mg.delta(-7), 1.0);
        assert_eq!(mg.underflows(), 0);
        assert!(MartingaleState::new(0.0).is_err());
    }

    fn increments(path: &[Step], eps: f64, w: &WeightFunction) -> Vec<f64> {
        let mut st = WalkState::new();
        let mut mg = MartingaleState::new(eps).unwrap();
        path.iter()
            .map(|&s| {
                let inc = mg.update(&st, s, w);
                st.apply(s);
                inc
            })
            .collect()
    }

    #[test]
    fn first_moves() {
        for spec in ["linear", "power:0.3", "constant"] {
            let w: WeightFunction = spec.parse().unwrap();
            assert_eq!(increments(&[L], 1.0, &w), vec![-0.75]);
            assert_eq!(increments(&[R], 1.0, &w), vec![0.75]);
        }
    }

    #[test]
    fn hand_traced_excursion() {
        let inc = increments(&[L, R, L], 1.0, &lin());
        assert_eq!(inc[0], -0.75);
        assert!((inc[1] - 0.25).abs() < 1e-15);
        assert!((inc[2] + 0.1875).abs() < 1e-15);
    }

    #[test]
    fn fresh_walk_has_zero_drift() {
        let mg = MartingaleState::new(1.0).unwrap();
        let st = WalkState::new();
        assert_eq!(mg.expected_increment(&st, &lin()), 0.0);
        assert_eq!(mg.drift_ratio(&st, &lin()), 0.0);
    }

    #[test]
    fn decompose_by_hand() {
        let w = lin();
        let d0 = decompose(&record(&[], &w), 0, 1.0, &w).unwrap();
        assert_eq!((d0.incremental, d0.exact, d0.literal), (0.0, 0.0, 0.0));

        let up = decompose(&record(&[R], &w), 1, 1.0, &w).unwrap();
        assert_eq!(up.exact, 0.75);
        assert_eq!(up.incremental, 0.75);
        assert_eq!(up.correction, 0.0);

        let down = decompose(&record(&[L], &w), 1, 1.0, &w).unwrap();
        assert_eq!(down.exact, -0.75);
        assert_eq!(down.incremental, -0.75);
        assert_eq!(down.literal, -0.5);
        assert_eq!(down.literal - down.exact, 0.25);
        assert_eq!(down.correction, 0.25);

        assert!(decompose(&record(&[R], &w), 2, 1.0, &w).is_err());
    }

    #[test]
    fn decompose_prefix_and_returns() {
        let w = lin();
        // 0 -> 1 -> 0 -> -1 -> -2 -> -1 -> 0 -> 1 -> 2
        let rec = record(&[R, L, L, L, R, R, R, R], &w);
        for n in 0..=rec.moves.len() {
            let d = decompose(&rec, n, 1.0, &w).unwrap();
            assert!((d.exact - d.incremental).abs() < 1e-15, "n={n}: {d:?}");
            assert!((d.literal - d.exact - d.correction).abs() < 1e-15);
            assert!(d.min_ln_up_term.is_finite() || d.up_terms == 0);
        }
    }

    #[test]
    fn delta_margin_examples() {
        let w = lin();
        let p = AParams::new(1.0, 1e-12).unwrap();
        let m0 = delta_bound_margin(&record(&[], &w), 1, 0, p, &w).unwrap();
        assert!(m0.uniform > 0.0 && m0.partial > 0.0);

        // Delta(0) = 0.75 against (1/2)(3/4) / (w(1) w(1)).
        let rec = record(&[R], &w);
        let m1 = delta_bound_margin(&rec, 1, 1, p, &w).unwrap();
        assert!(m1.holds());
        let (st, mg) = replay_with_martingale(&rec, 1, 1.0, &w).unwrap();
        assert!((mg.delta(0) - 0.75).abs() < 1e-15);
        assert_eq!(st.position(), 1);
    }

    #[test]
    fn delta_margin_rejects_n_past_tau() {
        let w = lin();
        let p = AParams::new(1.0, 1e-12).unwrap();
        let rec = record(&[L, L, R], &w);
        assert!(delta_bound_margin(&rec, 2, 2, p, &w).is_ok());
        let err = delta_bound_margin(&rec, 2, 3, p, &w).unwrap_err();
        assert!(err.to_string().contains("exceeds tau"), "{err}");
        assert!(delta_bound_margin(&rec, 0, 0, p, &w).is_err());
    }

    #[test]
    fn stopped_bound_examples() {
        let w = lin();
        let p = AParams::new(1.0, 1e-12).unwrap();
        // v = 1 along 0 -> 1.
        let b = stopped_lower_bound(&record(&[R], &w), 1, 1, p, &w).unwrap();
        assert_eq!(b.m_at_tau, 0.75);
        assert!((b.bound - 0.25 / 4.0).abs() < 1e-13, "{b:?}");
        assert!(b.holds());

        // v = 2 along 0 -> 1 -> 0 -> 1 -> 2, never negative.
        let b = stopped_lower_bound(&record(&[R, L, R, R], &w), 1, 2, p, &w).unwrap();
        assert!(b.holds(), "{b:?}");
        assert_eq!(b.tau_v, 4);

        // Errors.
        let e = stopped_lower_bound(&record(&[R, L], &w), 1, 2, p, &w).unwrap_err();
        assert!(e.to_string().contains("not reached"));
        let e = stopped_lower_bound(&record(&[L, R, R], &w), 1, 1, p, &w).unwrap_err();
        assert!(e.to_string().contains("hit before"));
    }
}

//! Numerical study of the minimization problem
//!
//! ```text
//! inf_{b in [1, inf)^{K+1}} sum_{i=0}^{K} (1/2 + b_i / (K+2)^{1+eps})
//!                                         / ((b_{i-1} + b_i)^alpha (b_i + b_{i+1})^alpha)
//! ```
//!
//! with `b_{-1} = b_{K+1} = 0`. The infimum grows without bound in `K` for
//! `0 < alpha < 1/2` and small `eps`. Everything here produces upper bounds
//! on the infimum: exhaustive grids for `K <= 3`, and multi-start coordinate
//! descent for any `K`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{StreamRng, StreamSeed};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaInstance {
    k: usize,
    alpha: f64,
    eps: f64,
    // (K+2)^{1+eps}
    scale: f64,
}

impl LemmaInstance {
    /// Accepts `0 < alpha <= 1/2`; the boundary value is allowed so the
    /// objective can be probed at the edge of the divergent regime.
    pub fn new(k: usize, alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::Lemma(format!(
                "alpha must lie in (0, 1/2], got {alpha}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Lemma(format!("epsilon must be > 0, got {eps}")));
        }
        Ok(Self {
            k,
            alpha,
            eps,
            scale: ((k + 2) as f64).powf(1.0 + eps),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.k + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Term `i` given its neighbours (0 outside the index range).
    #[inline]
    fn term(&self, left: f64, mid: f64, right: f64) -> f64 {
        (0.5 + mid / self.scale) / ((left + mid) * (mid + right)).powf(self.alpha)
    }

    #[inline]
    fn term_at(&self, b: &[f64], i: usize) -> f64 {
        let left = if i == 0 { 0.0 } else { b[i - 1] };
        let right = b.get(i + 1).copied().unwrap_or(0.0);
        self.term(left, b[i], right)
    }

    fn objective(&self, b: &[f64]) -> f64 {
        (0..b.len())
            .map(|i| self.term_at(b, i))
            .sum::<NeumaierSum>()
            .value()
    }
}

/// A feasible point: `K + 1` finite entries, each `>= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BVector(Vec<f64>);

impl BVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Lemma("b must have at least one entry".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 1.0 && v.is_finite()))
        {
            return Err(Error::Lemma(format!(
                "b_{i} = {v} is infeasible (need finite b >= 1)"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `(max b_i, first index attaining it)`.
    pub fn peak(&self) -> (f64, usize) {
        self.0
            .iter()
            .copied()
            .enumerate()
            .fold((f64::NEG_INFINITY, 0), |(bm, im), (i, v)| {
                if v > bm {
                    (v, i)
                } else {
                    (bm, im)
                }
            })
    }
}

pub fn evaluate_sum(b: &BVector, inst: &LemmaInstance) -> Result<f64> {
    if b.0.len() != inst.len() {
        return Err(Error::Lemma(format!(
            "b has {} entries but K = {} needs {}",
            b.0.len(),
            inst.k,
            inst.len()
        )));
    }
    Ok(inst.objective(&b.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Spacing of the base grid in `log2 b`.
    pub log2_step: f64,
    /// Base grid is `b = 2^(j * log2_step)` for `j = 0..points`.
    pub points: usize,
    /// Nested refinements around the incumbent, each with spacing a quarter
    /// of the previous one.
    pub zoom_levels: usize,
    /// Refinement grids span `-half_width..=half_width` steps per coordinate.
    pub zoom_half_width: usize,
}

impl GridSpec {
    /// `{2^(j/4) : j = 0..=60}` with no refinement.
    pub fn coarse() -> Self {
        Self {
            log2_step: 0.25,
            points: 61,
            zoom_levels: 0,
            zoom_half_width: 4,
        }
    }

    /// The coarse grid followed by 14 nested refinements (final spacing
    /// about `1.5e-9` in `log2 b`).
    pub fn refined() -> Self {
        Self {
            zoom_levels: 14,
            ..Self::coarse()
        }
    }
}

pub const GRID_MAX_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub b: BVector,
    pub value: f64,
}

/// Exhaustive minimum over a product grid in `log2 b` (plus optional nested
/// zooms). The result is an upper bound on the infimum.
pub fn grid_oracle(inst: &LemmaInstance, grid: GridSpec) -> Result<Minimum> {
    if inst.k > GRID_MAX_K {
        return Err(Error::Lemma(format!(
            "grid oracle is exhaustive and limited to K <= {GRID_MAX_K}, got {}",
            inst.k
        )));
    }
    if grid.points == 0 || grid.log2_step.is_nan() || grid.log2_step <= 0.0 {
        return Err(Error::Lemma("empty grid".into()));
    }
    let dim = inst.len();
    let axis: Vec<f64> = (0..grid.points)
        .map(|j| j as f64 * grid.log2_step)
        .collect();
    let mut best_t = vec![0.0; dim];
    let mut best = f64::INFINITY;
    search_product(inst, &vec![axis; dim], &mut best_t, &mut best);

    let mut step = grid.log2_step;
    for _ in 0..grid.zoom_levels {
        step /= 4.0;
        let h = grid.zoom_half_width as i64;
        let axes: Vec<Vec<f64>> = best_t
            .iter()
            .map(|&c| {
                let mut a: Vec<f64> = (-h..=h).map(|k| (c + k as f64 * step).max(0.0)).collect();
                a.dedup();
                a
            })
            .collect();
        search_product(inst, &axes, &mut best_t, &mut best);
    }
    let b = BVector::new(best_t.iter().map(|t| t.exp2()).collect())?;
    let value = inst.objective(b.as_slice());
    Ok(Minimum { b, value })
}

fn search_product(inst: &LemmaInstance, axes: &[Vec<f64>], best_t: &mut [f64], best: &mut f64) {
    let dim = axes.len();
    let values: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| a.iter().map(|t| t.exp2()).collect())
        .collect();
    let mut idx = vec![0usize; dim];
    let mut b: Vec<f64> = values.iter().map(|v| v[0]).collect();
    loop {
        let v = inst.objective(&b);
        if v < *best {
            *best = v;
            for d in 0..dim {
                best_t[d] = axes[d][idx[d]];
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < values[d].len() {
                b[d] = values[d][idx[d]];
                break;
            }
            idx[d] = 0;
            b[d] = values[d][0];
            d += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Number of starting points (structured starts first, then random).
    pub restarts: usize,
    /// Coordinate sweeps allowed per start.
    pub max_sweeps: usize,
    /// Stop when a sweep improves the objective by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 24,
            max_sweeps: 400,
            rel_tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub b: BVector,
    /// `evaluate_sum(b)`.
    pub value: f64,
    /// Whether the winning start met the tolerance within the sweep budget.
    pub converged: bool,
    pub restarts: usize,
    pub best_start: usize,
}

/// Periodic profile: peaks of `ln b = peak` every `period` sites, falling
/// linearly to 0 halfway between peaks.
fn comb(n: usize, period: usize, peak: f64) -> Vec<f64> {
    let half = period.div_ceil(2) as f64;
    (0..n)
        .map(|i| {
            let r = i % period;
            let d = r.min(period - r) as f64;
            (peak * (1.0 - d / half)).max(0.0)
        })
        .collect()
}

/// Number of structured (non-random) starting profiles.
pub const STRUCTURED_STARTS: usize = 9;

/// Starting profile number `index` in log coordinates.
fn start_profile(inst: &LemmaInstance, index: usize, seed: u64) -> Vec<f64> {
    let n = inst.len();
    let ln_l = inst.scale.ln();
    let frac = |i: usize| {
        if n == 1 {
            0.5
        } else {
            i as f64 / (n - 1) as f64
        }
    };
    match index {
        0 => vec![0.0; n],
        1..=4 => comb(n, index + 1, ln_l + 1.0),
        5 => {
            // single peak in the middle, decaying geometrically
            let c = (n - 1) as f64 / 2.0;
            (0..n)
                .map(|i| (ln_l + 2.0 - (i as f64 - c).abs() * 0.5).max(0.0))
                .collect()
        }
        6 => (0..n).map(|i| ln_l * frac(i)).collect(),
        7 => (0..n).map(|i| ln_l * (1.0 - frac(i))).collect(),
        8 => vec![ln_l; n],
        _ => {
            let mut rng = StreamRng::new(StreamSeed::new(seed, index as u64));
            let hi = 2.0 * ln_l + 2.0;
            (0..n).map(|_| rng.uniform() * hi).collect()
        }
    }
}

/// Brent's minimization of `f` on `[lo, hi]`.
fn brent(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx)
}

/// Minimizes `f` over `t >= 0` near `t0`, widening the bracket while the
/// minimizer sits on its upper edge.
fn line_min(f: &mut impl FnMut(f64) -> f64, t0: f64, f0: f64) -> (f64, f64) {
    let mut width = 1.0;
    let (mut best_t, mut best_f) = (t0, f0);
    let mut centre = t0;
    for _ in 0..40 {
        let lo = (centre - width).max(0.0);
        let hi = centre + width;
        let (t, ft) = brent(f, lo, hi, 1e-10);
        if ft < best_f {
            best_t = t;
            best_f = ft;
        }
        let at_hi = hi - t < 1e-6 * width;
        let at_lo = lo > 0.0 && t - lo < 1e-6 * width;
        if !(at_hi || at_lo) {
            break;
        }
        centre = t;
        width *= 2.0;
    }
    (best_t, best_f)
}

struct Descent<'a> {
    inst: &'a LemmaInstance,
    t: Vec<f64>,
    b: Vec<f64>,
}

impl Descent<'_> {
    fn local_cost(&self, i: usize, bi: f64) -> f64 {
        let b = &self.b;
        let n = b.len();
        let get = |j: isize| -> f64 {
            if j < 0 || j as usize >= n {
                0.0
            } else if j as usize == i {
                bi
            } else {
                b[j as usize]
            }
        };
        let i = i as isize;
        let mut c = self.inst.term(get(i - 1), bi, get(i + 1));
        if i > 0 {
            c += self.inst.term(get(i - 2), get(i - 1), bi);
        }
        if (i as usize) + 1 < n {
            c += self.inst.term(bi, get(i + 1), get(i + 2));
        }
        c
    }

    fn coordinate_sweep(&mut self) {
        for i in 0..self.b.len() {
            let t0 = self.t[i];
            let f0 = self.local_cost(i, self.b[i]);
            let (t, ft) = line_min(&mut |t| self.local_cost(i, t.exp()), t0, f0);
            if ft < f0 {
                self.t[i] = t;
                self.b[i] = t.exp();
            }
        }
    }

    fn shifted(&self, s: f64) -> Vec<f64> {
        self.t.iter().map(|t| (t + s).max(0.0).exp()).collect()
    }

    /// Line search on a common shift of all log coordinates.
    fn scale_move(&mut self, current: f64) {
        let mut f = |s: f64| self.inst.objective(&self.shifted(s - 50.0));
        // Shift by s - 50 keeps the search variable nonnegative.
        let (s, fs) = line_min(&mut f, 50.0, current);
        if fs < current {
            let s = s - 50.0;
            for t in &mut self.t {
                *t = (*t + s).max(0.0);
            }
            self.b = self.t.iter().map(|t| t.exp()).collect();
        }
    }

    fn run(&mut self, opts: &MinimizeOptions) -> (f64, bool) {
        let mut value = self.inst.objective(&self.b);
        for _ in 0..opts.max_sweeps {
            self.coordinate_sweep();
            let after = self.inst.objective(&self.b);
            self.scale_move(after);
            let next = self.inst.objective(&self.b);
            let improved = value - next;
            value = next.min(value);
            if improved <= opts.rel_tol * value.abs() {
                return (value, true);
            }
        }
        (value, false)
    }
}

/// Multi-start coordinate descent in `ln b` with projection onto `b >= 1`.
/// Starts: all ones, periodic combs of period 2 to 5, a single peak, rising
/// and falling geometric ramps, flat at `(K+2)^{1+eps}`, then log-uniform
/// random profiles.
pub fn local_minimize(inst: &LemmaInstance, opts: MinimizeOptions) -> Result<MinimizeResult> {
    if opts.restarts == 0 {
        return Err(Error::Lemma("restarts must be >= 1".into()));
    }
    let runs: Vec<(Vec<f64>, f64, bool)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let t = start_profile(inst, r, opts.seed);
            let b = t.iter().map(|t| t.exp()).collect();
            let mut d = Descent { inst, t, b };
            let (_, converged) = d.run(&opts);
            let value = inst.objective(&d.b);
            (d.b, value, converged)
        })
        .collect();
    let (best_start, (b, _, converged)) = runs
        .into_iter()
        .enumerate()
        .reduce(|acc, cur| if cur.1 .1 < acc.1 .1 { cur } else { acc })
        .expect("at least one restart");
    let b = BVector::new(b.into_iter().map(|v| v.max(1.0)).collect())?;
    let value = inst.objective(b.as_slice());
    Ok(MinimizeResult {
        b,
        value,
        converged,
        restarts: opts.restarts,
        best_start,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub k: usize,
    pub alpha: f64,
    pub eps: f64,
    pub value: f64,
    pub restarts: usize,
    pub converged: bool,
    pub max_b: f64,
    pub argmax: usize,
}

/// Estimated infimum for each `K` in `ks`.
pub fn scaling_scan(
    ks: &[usize],
    alpha: f64,
    eps: f64,
    opts: MinimizeOptions,
) -> Result<Vec<ScanPoint>> {
    ks.iter()
        .map(|&k| {
            let inst = LemmaInstance::new(k, alpha, eps)?;
            let r = local_minimize(&inst, opts)?;
            let (max_b, argmax) = r.b.peak();
            Ok(ScanPoint {
                k,
                alpha,
                eps,
                value: r.value,
                restarts: r.restarts,
                converged: r.converged,
                max_b,
                argmax,
            })
        })
        .collect()
}

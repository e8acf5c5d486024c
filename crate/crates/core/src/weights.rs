//! Reinforcement weight sequences.
//!
//! A weight sequence `w` maps a local time `k >= 0` to a positive weight and
//! is non-decreasing in `k`. Every sequence is normalized so that
//! `w(0) = 1`; scaling `w` by a constant does not change the walk.
//!
//! Families:
//!
//! | spec string          | `w(k)` before normalization          |
//! |----------------------|--------------------------------------|
//! | `constant`           | `1`                                  |
//! | `linear`             | `k + 1`                              |
//! | `power:<a>`          | `(k + 1)^a`, `a >= 0`                |
//! | `superlinear:<b>`    | `(k + 1)^b`, `b > 1`                 |
//! | `table:<v0>,<v1>,..` | `v_k`, last entry repeated past end  |
//!
//! The power family uses `(k + 1)^a` rather than `k^a` so that `w(0) = 1`
//! without rescaling and `power:1` coincides with `linear`.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Default memoization cap: local times below this are cached.
pub const DEFAULT_MEMO_CAP: u64 = 1 << 24;

const CHUNK_BITS: u32 = 12;
const CHUNK_LEN: usize = 1 << CHUNK_BITS;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant,
    Linear,
    Power(f64),
    Superlinear(f64),
    Table(Vec<f64>),
}

impl WeightSpec {
    fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Constant | WeightSpec::Linear => Ok(()),
            WeightSpec::Power(a) => {
                if !a.is_finite() || *a < 0.0 {
                    return Err(Error::InvalidWeight(format!(
                        "power exponent must be finite and >= 0, got {a}"
                    )));
                }
                Ok(())
            }
            WeightSpec::Superlinear(b) => {
                if !b.is_finite() || *b <= 1.0 {
                    return Err(Error::InvalidWeight(format!(
                        "superlinear exponent must be finite and > 1, got {b}"
                    )));
                }
                Ok(())
            }
            WeightSpec::Table(t) => {
                if t.is_empty() {
                    return Err(Error::InvalidWeight("empty table".into()));
                }
                for (i, v) in t.iter().enumerate() {
                    if !v.is_finite() || *v <= 0.0 {
                        return Err(Error::InvalidWeight(format!(
                            "table entry {i} must be positive and finite, got {v}"
                        )));
                    }
                }
                if let Some(i) = t.windows(2).position(|p| p[1] < p[0]) {
                    return Err(Error::InvalidWeight(format!(
                        "table decreases at index {}: {} -> {}",
                        i + 1,
                        t[i],
                        t[i + 1]
                    )));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant => write!(f, "constant"),
            WeightSpec::Linear => write!(f, "linear"),
            WeightSpec::Power(a) => write!(f, "power:{a}"),
            WeightSpec::Superlinear(b) => write!(f, "superlinear:{b}"),
            WeightSpec::Table(t) => {
                write!(f, "table:")?;
                for (i, v) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, arg) = match s.split_once(':') {
            Some((f, a)) => (f.trim(), Some(a.trim())),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidWeight(format!("{family} needs a parameter")))?;
            a.parse::<f64>()
                .map_err(|_| Error::InvalidWeight(format!("bad number {a:?}")))
        };
        let spec = match family {
            "constant" => WeightSpec::Constant,
            "linear" => WeightSpec::Linear,
            "power" => WeightSpec::Power(number(arg)?),
            "superlinear" => WeightSpec::Superlinear(number(arg)?),
            "table" => {
                let a = arg.ok_or_else(|| Error::InvalidWeight("table needs values".into()))?;
                let values = a
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidWeight(format!("bad table value {v:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightSpec::Table(values)
            }
            other => return Err(Error::InvalidWeight(format!("unknown family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

type Chunk = Box<[(f64, f64)]>;

struct Inner {
    spec: WeightSpec,
    // Normalized table, for the table family.
    table: Vec<f64>,
    cap: u64,
    chunks: Box<[OnceLock<Chunk>]>,
}

/// A normalized, memoized weight sequence.
///
/// Cloning is cheap and clones share the memo cache. Cache chunks are filled
/// at most once with deterministic values, so concurrent readers always see
/// the same numbers.
#[derive(Clone)]
pub struct WeightFunction {
    inner: Arc<Inner>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("spec", &self.inner.spec)
            .field("cap", &self.inner.cap)
            .finish()
    }
}

impl WeightFunction {
    pub fn new(spec: WeightSpec) -> Result<Self> {
        Self::with_cap(spec, DEFAULT_MEMO_CAP)
    }

    pub fn with_cap(spec: WeightSpec, cap: u64) -> Result<Self> {
        spec.validate()?;
        let table = match &spec {
            WeightSpec::Table(t) => t.iter().map(|v| v / t[0]).collect(),
            _ => Vec::new(),
        };
        let n_chunks = cap.div_ceil(CHUNK_LEN as u64) as usize;
        let chunks = (0..n_chunks).map(|_| OnceLock::new()).collect();
        Ok(Self {
            inner: Arc::new(Inner {
                spec,
                table,
                cap,
                chunks,
            }),
        })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.inner.spec
    }

    fn direct(&self, k: u64) -> f64 {
        let x = k as f64 + 1.0;
        match &self.inner.spec {
            WeightSpec::Constant => 1.0,
            WeightSpec::Linear => x,
            WeightSpec::Power(a) | WeightSpec::Superlinear(a) => x.powf(*a),
            WeightSpec::Table(_) => {
                let t = &self.inner.table;
                t[(k as usize).min(t.len() - 1)]
            }
        }
    }

    #[inline]
    fn cached(&self, k: u64) -> (f64, f64) {
        let idx = (k >> CHUNK_BITS) as usize;
        let chunk = self.inner.chunks[idx].get_or_init(|| {
            let base = (idx as u64) << CHUNK_BITS;
            (0..CHUNK_LEN as u64)
                .map(|j| {
                    let v = self.direct(base + j);
                    (v, v.ln())
                })
                .collect()
        });
        chunk[(k as usize) & (CHUNK_LEN - 1)]
    }

    /// `w(k)`.
    #[inline]
    pub fn eval(&self, k: u64) -> f64 {
        if k < self.inner.cap {
            self.cached(k).0
        } else {
            self.direct(k)
        }
    }

    /// `ln w(k)`.
    #[inline]
    pub fn ln_eval(&self, k: u64) -> f64 {
        if k < self.inner.cap {
            self.cached(k).1
        } else {
            self.direct(k).ln()
        }
    }
}

impl TryFrom<WeightSpec> for WeightFunction {
    type Error = Error;

    fn try_from(spec: WeightSpec) -> Result<Self> {
        WeightFunction::new(spec)
    }
}

impl FromStr for WeightFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightFunction::new(s.parse()?)
    }
}

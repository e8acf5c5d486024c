//! Experiment configuration files.
//!
//! One `key = value` pair per line; blank lines and lines starting with `#`
//! are ignored. Lists are comma separated. Unknown or repeated keys are
//! errors.
//!
//! | key                  | kinds                         | default   |
//! |----------------------|-------------------------------|-----------|
//! | `kind`               | all (required)                |           |
//! | `weight`             | recurrence, localization, verify (required) | |
//! | `horizon`            | all but lemma (required)      |           |
//! | `trajectories`       | all but lemma (required)      |           |
//! | `seed`               | all                           | `0`       |
//! | `epsilon`            | verify                        | `0.05`    |
//! | `targets`            | recurrence, localization      | empty     |
//! | `stop_on`            | recurrence                    | empty     |
//! | `return_threshold`   | recurrence, phase             | `10`      |
//! | `verify_v`           | verify                        | `20`      |
//! | `verify_y`           | verify                        | `|min|+1` per trajectory |
//! | `replay_records`     | verify                        | empty     |
//! | `checks`             | verify                        | all       |
//! | `phase_exponents`    | phase (required)              |           |
//! | `lemma_k`            | lemma (required)              |           |
//! | `lemma_alpha`        | lemma (required)              |           |
//! | `lemma_epsilon`      | lemma (required)              |           |
//! | `lemma_restarts`     | lemma                         | `24`      |
//! | `lemma_sweeps`       | lemma                         | `400`     |
//! | `workers`            | all                           | `1`       |
//! | `output`             | all                           | stdout    |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::Check;
use crate::martingale::DEFAULT_EPSILON;
use crate::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Recurrence,
    Localization,
    Verify,
    Lemma,
    Phase,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "recurrence" => ExperimentKind::Recurrence,
            "localization" => ExperimentKind::Localization,
            "verify" => ExperimentKind::Verify,
            "lemma" => ExperimentKind::Lemma,
            "phase" => ExperimentKind::Phase,
            other => return Err(Error::Config(format!("unknown kind {other:?}"))),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Recurrence => "recurrence",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Lemma => "lemma",
            ExperimentKind::Phase => "phase",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaParams {
    pub ks: Vec<usize>,
    pub alpha: f64,
    pub eps: f64,
    pub restarts: usize,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub weight: Option<WeightSpec>,
    pub eps: f64,
    pub horizon: u64,
    pub trajectories: u64,
    pub seed: u64,
    pub targets: Vec<i64>,
    pub stop_on: Vec<i64>,
    pub return_threshold: u64,
    pub verify_v: u64,
    pub verify_y: Option<u64>,
    pub replay_records: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub phase_exponents: Vec<f64>,
    pub lemma: Option<LemmaParams>,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "kind",
    "weight",
    "epsilon",
    "horizon",
    "trajectories",
    "seed",
    "targets",
    "stop_on",
    "return_threshold",
    "verify_v",
    "verify_y",
    "replay_records",
    "checks",
    "phase_exponents",
    "lemma_k",
    "lemma_alpha",
    "lemma_epsilon",
    "lemma_restarts",
    "lemma_sweeps",
    "workers",
    "output",
];

struct Raw(BTreeMap<String, (usize, String)>);

impl Raw {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::ConfigLine {
                line: *line,
                msg: format!("bad value {v:?} for {key}"),
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str, kind: ExperimentKind) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("kind = {kind} requires key {key:?}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        match self.0.get(key) {
            None => Ok(Vec::new()),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|_| Error::ConfigLine {
                        line: *line,
                        msg: format!("bad list item {s:?} for {key}"),
                    })
                })
                .collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigLine {
                line: line_no,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::ConfigLine {
                    line: line_no,
                    msg: format!("unknown key {k:?}"),
                });
            }
            if raw
                .insert(k.to_string(), (line_no, v.trim().to_string()))
                .is_some()
            {
                return Err(Error::ConfigLine {
                    line: line_no,
                    msg: format!("duplicate key {k:?}"),
                });
            }
        }
        let raw = Raw(raw);
        let kind: ExperimentKind = raw
            .0
            .get("kind")
            .ok_or_else(|| Error::Config("missing key \"kind\"".into()))?
            .1
            .parse()?;

        let weight = match raw.0.get("weight") {
            Some((line, v)) => Some(v.parse::<WeightSpec>().map_err(|e| Error::ConfigLine {
                line: *line,
                msg: e.to_string(),
            })?),
            None => None,
        };
        let simulated = kind != ExperimentKind::Lemma;
        let needs_weight = matches!(
            kind,
            ExperimentKind::Recurrence | ExperimentKind::Localization | ExperimentKind::Verify
        );
        if needs_weight && weight.is_none() {
            return Err(Error::Config(format!(
                "kind = {kind} requires key \"weight\""
            )));
        }
        let (horizon, trajectories) = if simulated {
            (
                raw.require("horizon", kind)?,
                raw.require("trajectories", kind)?,
            )
        } else {
            (
                raw.get("horizon")?.unwrap_or(0),
                raw.get("trajectories")?.unwrap_or(0),
            )
        };
        let lemma = if kind == ExperimentKind::Lemma {
            Some(LemmaParams {
                ks: {
                    let ks = raw.list("lemma_k")?;
                    if ks.is_empty() {
                        return Err(Error::Config(
                            "kind = lemma requires key \"lemma_k\"".into(),
                        ));
                    }
                    ks
                },
                alpha: raw.require("lemma_alpha", kind)?,
                eps: raw.require("lemma_epsilon", kind)?,
                restarts: raw.get("lemma_restarts")?.unwrap_or(24),
                sweeps: raw.get("lemma_sweeps")?.unwrap_or(400),
            })
        } else {
            None
        };
        let phase_exponents = raw.list("phase_exponents")?;
        if kind == ExperimentKind::Phase && phase_exponents.is_empty() {
            return Err(Error::Config(
                "kind = phase requires key \"phase_exponents\"".into(),
            ));
        }

        let cfg = ExperimentConfig {
            kind,
            weight,
            eps: raw.get("epsilon")?.unwrap_or(DEFAULT_EPSILON),
            horizon,
            trajectories,
            seed: raw.get("seed")?.unwrap_or(0),
            targets: raw.list("targets")?,
            stop_on: raw.list("stop_on")?,
            return_threshold: raw.get("return_threshold")?.unwrap_or(10),
            verify_v: raw.get("verify_v")?.unwrap_or(20),
            verify_y: raw.get("verify_y")?,
            replay_records: raw.list("replay_records")?,
            checks: raw.list("checks")?,
            phase_exponents,
            lemma,
            workers: raw.get("workers")?.unwrap_or(1),
            output: raw.get("output")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != ExperimentKind::Lemma {
            if self.trajectories < 1 {
                return Err(Error::Config("trajectories must be >= 1".into()));
            }
            if self.horizon < 1 {
                return Err(Error::Config("horizon must be >= 1".into()));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.eps
            )));
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.kind == ExperimentKind::Verify && self.verify_v < 1 {
            return Err(Error::Config("verify_v must be >= 1".into()));
        }
        if self.verify_y == Some(0) {
            return Err(Error::Config("verify_y must be >= 1".into()));
        }
        for &a in &self.phase_exponents {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!(
                    "phase exponent must be >= 0, got {a}"
                )));
            }
        }
        if let Some(l) = &self.lemma {
            crate::lemma::LemmaInstance::new(0, l.alpha, l.eps)
                .map_err(|e| Error::Config(e.to_string()))?;
            if l.restarts < 1 {
                return Err(Error::Config("lemma_restarts must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_recurrence_config() {
        let cfg = ExperimentConfig::parse(
            "# pilot\nkind = recurrence\nweight = power:0.3\nhorizon = 1000\n\
             trajectories = 4\nseed = 9\ntargets = 5, -5\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Recurrence);
        assert_eq!(cfg.weight, Some(WeightSpec::Power(0.3)));
        assert_eq!(cfg.targets, vec![5, -5]);
        assert_eq!((cfg.seed, cfg.eps, cfg.workers), (9, 0.05, 1));
    }

    #[test]
    fn parses_lemma_config() {
        let cfg = ExperimentConfig::parse(
            "kind = lemma\nlemma_k = 16,64\nlemma_alpha = 0.4\nlemma_epsilon = 0.05\n",
        )
        .unwrap();
        let l = cfg.lemma.unwrap();
        assert_eq!(l.ks, vec![16, 64]);
        assert_eq!(l.restarts, 24);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = ExperimentConfig::parse("kind = verify\n\nhorzon = 5\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = ExperimentConfig::parse("kind = verify\nkind = lemma\n").unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
        let e = ExperimentConfig::parse("kind = verify\nweight = power:-1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = ExperimentConfig::parse("just text\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn missing_required_keys() {
        for text in [
            "weight = linear\nhorizon = 3\ntrajectories = 1\n",
            "kind = recurrence\nhorizon = 3\ntrajectories = 1\n",
            "kind = recurrence\nweight = linear\ntrajectories = 1\n",
            "kind = lemma\nlemma_alpha = 0.4\nlemma_epsilon = 0.05\n",
            "kind = phase\nhorizon = 3\ntrajectories = 1\n",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(ExperimentConfig::parse(
            "kind = recurrence\nweight = linear\nhorizon = 0\ntrajectories = 1\n"
        )
        .is_err());
        assert!(ExperimentConfig::parse(
            "kind = recurrence\nweight = linear\nhorizon = 5\ntrajectories = 0\n"
        )
        .is_err());
        assert!(ExperimentConfig::parse(
            "kind = recurrence\nweight = linear\nhorizon = 5\ntrajectories = 1\nworkers = 0\n"
        )
        .is_err());
    }
}

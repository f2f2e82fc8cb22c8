//! Flat key-value run configuration for the command-line experiments.
//!
//! The format is one `key = value` pair per line, `#` comments, and
//! comma-separated lists. Unknown keys are rejected so typos fail loudly
//! before any computation starts. The parsed file carries a stable hash
//! used in output provenance headers.
//!
//! ```
//! use hmreg::config::RunConfig;
//!
//! let cfg = RunConfig::parse_str(
//!     "experiment = phase\nks = 1,2\nns = 50,100\nc_lambdas = 0.3\nreplications = 5\nseed = 1\n",
//! )
//! .unwrap();
//! let phase = cfg.to_phase_config().unwrap();
//! assert_eq!(phase.ks, vec![1, 2]);
//! ```

use crate::error::FitError;
use crate::sim::{CurveSpec, CurvatureConfig, CvConfig, Method, PhaseConfig, RateConfig};
use std::collections::BTreeMap;

/// Which experiment a config file drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Rate,
    Phase,
    Curvature,
}

/// Parsed key-value configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pairs: BTreeMap<String, String>,
    hash: u64,
}

const COMMON_KEYS: &[&str] =
    &["experiment", "seed", "replications", "eval_grid", "folds", "rate_exponent"];
const RATE_KEYS: &[&str] = &["curves", "sigmas", "methods", "ns", "out_rows", "out_summary"];
const PHASE_KEYS: &[&str] = &["ks", "ns", "c_lambdas", "sigma", "out_rows", "out_cells"];
const CURVATURE_KEYS: &[&str] =
    &["kappas", "ns", "methods", "sigma", "out_rows", "out_summary"];

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self, FitError> {
        let mut pairs = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(FitError::InvalidInput(format!(
                    "config line {}: expected key = value",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if pairs.insert(key.clone(), value).is_some() {
                return Err(FitError::InvalidInput(format!("duplicate config key {key}")));
            }
        }
        let mut cfg = RunConfig { pairs, hash: 0 };
        cfg.hash = cfg.compute_hash();
        cfg.validate_keys()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, FitError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FitError::InvalidInput(format!("cannot read config {path}: {e}")))?;
        Self::parse_str(&text)
    }

    /// FNV-1a over the sorted normalized pairs; stable across runs.
    fn compute_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in &self.pairs {
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    fn validate_keys(&self) -> Result<(), FitError> {
        let extra: &[&str] = match self.experiment()? {
            Experiment::Rate => RATE_KEYS,
            Experiment::Phase => PHASE_KEYS,
            Experiment::Curvature => CURVATURE_KEYS,
        };
        for key in self.pairs.keys() {
            if !COMMON_KEYS.contains(&key.as_str()) && !extra.contains(&key.as_str()) {
                return Err(FitError::InvalidInput(format!("unknown config key {key}")));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<Experiment, FitError> {
        match self.pairs.get("experiment").map(String::as_str) {
            Some("rate") => Ok(Experiment::Rate),
            Some("phase") => Ok(Experiment::Phase),
            Some("curvature") => Ok(Experiment::Curvature),
            Some(other) => Err(FitError::InvalidInput(format!("unknown experiment {other}"))),
            None => Err(FitError::InvalidInput("missing experiment key".into())),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, FitError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| FitError::InvalidInput(format!("bad number for {key}: {v}")))
            }
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, FitError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| FitError::InvalidInput(format!("bad integer for {key}: {v}")))
            }
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, FitError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| FitError::InvalidInput(format!("bad integer for {key}: {v}")))
            }
        }
    }

    fn list<T, F>(&self, key: &str, parse: F) -> Result<Option<Vec<T>>, FitError>
    where
        F: Fn(&str) -> Result<T, FitError>,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| parse(s.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, FitError> {
        v.ok_or_else(|| FitError::InvalidInput(format!("missing config key {key}")))
    }

    fn parse_f64(s: &str) -> Result<f64, FitError> {
        s.parse().map_err(|_| FitError::InvalidInput(format!("bad number {s}")))
    }

    fn parse_usize(s: &str) -> Result<usize, FitError> {
        s.parse().map_err(|_| FitError::InvalidInput(format!("bad integer {s}")))
    }

    fn parse_i64(s: &str) -> Result<i64, FitError> {
        s.parse().map_err(|_| FitError::InvalidInput(format!("bad integer {s}")))
    }

    fn cv(&self) -> Result<CvConfig, FitError> {
        Ok(CvConfig {
            folds: self.usize_or("folds", 5)?,
            grid: Vec::new(), // per-method defaults
            rate_exponent: self.f64_or("rate_exponent", -2.0 / 3.0)?,
        })
    }

    pub fn to_rate_config(&self) -> Result<RateConfig, FitError> {
        if self.experiment()? != Experiment::Rate {
            return Err(FitError::InvalidInput("config is not a rate experiment".into()));
        }
        let curves =
            self.require("curves", self.list("curves", |s| CurveSpec::parse(s))?)?;
        let sigmas = self.require("sigmas", self.list("sigmas", Self::parse_f64)?)?;
        let sigmas = if sigmas.len() == 1 { vec![sigmas[0]; curves.len()] } else { sigmas };
        if sigmas.len() != curves.len() {
            return Err(FitError::InvalidInput("sigmas must match curves (or be one value)".into()));
        }
        let methods = self
            .list("methods", |s| Method::parse(s))?
            .unwrap_or_else(|| Method::ALL.to_vec());
        Ok(RateConfig {
            curves: curves.into_iter().zip(sigmas).collect(),
            ns: self.require("ns", self.list("ns", Self::parse_usize)?)?,
            methods,
            replications: self.usize_or("replications", 15)?,
            seed: self.u64_or("seed", 20230601)?,
            cv: self.cv()?,
            eval_grid_size: self.usize_or("eval_grid", 50)?,
        })
    }

    pub fn to_phase_config(&self) -> Result<PhaseConfig, FitError> {
        if self.experiment()? != Experiment::Phase {
            return Err(FitError::InvalidInput("config is not a phase experiment".into()));
        }
        Ok(PhaseConfig {
            ks: self.require("ks", self.list("ks", Self::parse_i64)?)?,
            ns: self.require("ns", self.list("ns", Self::parse_usize)?)?,
            c_lambdas: self.list("c_lambdas", Self::parse_f64)?.unwrap_or_else(|| vec![0.3]),
            rate_exponent: self.f64_or("rate_exponent", -2.0 / 3.0)?,
            sigma: self.f64_or("sigma", 0.3)?,
            replications: self.usize_or("replications", 30)?,
            seed: self.u64_or("seed", 20230601)?,
        })
    }

    pub fn to_curvature_config(&self) -> Result<CurvatureConfig, FitError> {
        if self.experiment()? != Experiment::Curvature {
            return Err(FitError::InvalidInput("config is not a curvature experiment".into()));
        }
        let methods = self
            .list("methods", |s| Method::parse(s))?
            .unwrap_or_else(|| vec![Method::Proposed]);
        Ok(CurvatureConfig {
            kappas: self.require("kappas", self.list("kappas", Self::parse_f64)?)?,
            ns: self.require("ns", self.list("ns", Self::parse_usize)?)?,
            methods,
            sigma: self.f64_or("sigma", 0.25)?,
            replications: self.usize_or("replications", 15)?,
            seed: self.u64_or("seed", 20230601)?,
            cv: self.cv()?,
            eval_grid_size: self.usize_or("eval_grid", 50)?,
        })
    }
}

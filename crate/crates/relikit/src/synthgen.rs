//! Synthetic fleet-lifecycle data from a known Cox-Weibull process.
//!
//! The generator is deliberately the inverse of the model family: each
//! unit draws features once, then cycles through the fleet; cycle `j`
//! spans `[t1, t2 = t1 + tslrt]` and fails with probability
//! `1 - exp((t1^c - t2^c) * lambda'^c * e^{s(x)})`, where
//! `lambda' = beta_af^(prior failures) * lambda` is the accelerated-failure
//! rate. After a failure the unit is repaired and keeps cycling, each cycle
//! conditionally independent given its features. Because every record's
//! Bernoulli parameter is recorded in a [`GroundTruth`] sidecar, recovery
//! of `(lambda, c)` and of the score function can be tested exactly.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, EncodingManifest, FeatureKind, Record};
use crate::error::{Error, Result};
use crate::exec;
use crate::seeding;
use crate::weibull::{self, WeibullParams};

/// True score function applied to the encoded feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreFn {
    /// `s(x) = w . x`
    Linear,
    /// `s(x) = w . x + 0.5 x0 x1 - 0.5 x2^2` on the first three
    /// continuous features; gives the networks something a linear
    /// baseline cannot capture.
    NonlinearFixed,
}

/// Distribution of the per-cycle fleet interval `tslrt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CycleTimeDist {
    /// LogNormal on the log scale, truncated by resampling to `[min, max]`.
    LogNormalTrunc {
        mu_ln: f64,
        sigma_ln: f64,
        min: f64,
        max: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Default for CycleTimeDist {
    fn default() -> Self {
        CycleTimeDist::LogNormalTrunc {
            mu_ln: 12.0f64.ln(),
            sigma_ln: 0.4,
            min: 1.0,
            max: 60.0,
        }
    }
}

impl CycleTimeDist {
    fn validate(&self) -> Result<()> {
        match *self {
            CycleTimeDist::LogNormalTrunc {
                sigma_ln, min, max, ..
            } => {
                if sigma_ln <= 0.0 || min <= 0.0 || max <= min {
                    return Err(Error::Config(format!("invalid cycle time dist: {self:?}")));
                }
            }
            CycleTimeDist::Uniform { lo, hi } => {
                if lo <= 0.0 || hi <= lo {
                    return Err(Error::Config(format!("invalid cycle time dist: {self:?}")));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            CycleTimeDist::LogNormalTrunc {
                mu_ln,
                sigma_ln,
                min,
                max,
            } => {
                let normal = Normal::new(mu_ln, sigma_ln).expect("validated");
                loop {
                    let t = normal.sample(rng).exp();
                    if (min..=max).contains(&t) {
                        return t;
                    }
                }
            }
            CycleTimeDist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Full specification of a synthetic fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_units: usize,
    pub lambda_true: f64,
    pub c_true: f64,
    /// Continuous features, drawn i.i.d. standard normal per unit.
    pub d_cont: usize,
    /// Level count per categorical feature (one-hot encoded).
    pub cat_levels: Vec<usize>,
    /// Linear coefficients over the encoded feature vector; shorter
    /// vectors are zero-padded on the right.
    pub w_true: Vec<f64>,
    pub score_fn: ScoreFn,
    /// Per-prior-failure multiplier on the rate; 1.0 disables.
    pub beta_af: f64,
    pub cycle_time_dist: CycleTimeDist,
    pub max_cycles: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_units: 500,
            lambda_true: 0.02,
            c_true: 1.3,
            d_cont: 6,
            cat_levels: vec![3],
            w_true: vec![0.8, -0.8, 0.5],
            score_fn: ScoreFn::Linear,
            beta_af: 1.0,
            cycle_time_dist: CycleTimeDist::default(),
            max_cycles: 4,
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Encoded feature dimensionality.
    pub fn encoded_d(&self) -> usize {
        self.d_cont + self.cat_levels.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.max_cycles == 0 {
            return Err(Error::Config("n_units and max_cycles must be >= 1".into()));
        }
        if !(self.lambda_true > 0.0 && self.lambda_true.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_true must be > 0, got {}",
                self.lambda_true
            )));
        }
        if !(self.c_true > 0.0 && self.c_true.is_finite()) {
            return Err(Error::Config(format!(
                "c_true must be > 0, got {}",
                self.c_true
            )));
        }
        if !(self.beta_af > 0.0 && self.beta_af.is_finite()) {
            return Err(Error::Config(format!(
                "beta_af must be > 0, got {}",
                self.beta_af
            )));
        }
        if self.score_fn == ScoreFn::NonlinearFixed && self.d_cont < 3 {
            return Err(Error::Config(
                "nonlinear-fixed score needs at least 3 continuous features".into(),
            ));
        }
        if self.cat_levels.iter().any(|&k| k < 2) {
            return Err(Error::Config(
                "categorical features need at least 2 levels".into(),
            ));
        }
        if self.w_true.len() > self.encoded_d() {
            return Err(Error::Config(format!(
                "w_true has {} entries for {} encoded features",
                self.w_true.len(),
                self.encoded_d()
            )));
        }
        self.cycle_time_dist.validate()
    }

    fn score(&self, x: &[f64]) -> f64 {
        let mut s: f64 = self.w_true.iter().zip(x).map(|(w, v)| w * v).sum();
        if self.score_fn == ScoreFn::NonlinearFixed {
            s += 0.5 * x[0] * x[1] - 0.5 * x[2] * x[2];
        }
        s
    }
}

/// Per-record generation truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub id: String,
    pub cycle: u32,
    pub true_score: f64,
    pub true_prob: f64,
}

/// The exact process a fleet was generated from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: WeibullParams,
    pub beta_af: f64,
    pub entries: Vec<TruthEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl GroundTruth {
    fn new(params: WeibullParams, beta_af: f64, entries: Vec<TruthEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        Self {
            params,
            beta_af,
            entries,
            index,
        }
    }

    pub fn entry(&self, id: &str) -> Result<&TruthEntry> {
        self.index
            .get(id)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }
}

/// Rate after `n_prior_failures` repairs: `beta_af^n * lambda`.
pub fn effective_rate(lambda: f64, beta_af: f64, n_prior_failures: u32) -> f64 {
    beta_af.powi(n_prior_failures as i32) * lambda
}

/// Exact Bernoulli parameter used when a record was generated.
pub fn true_failure_prob(rec: &Record, gt: &GroundTruth) -> Result<f64> {
    Ok(gt.entry(&rec.id)?.true_prob)
}

struct UnitHistory {
    records: Vec<Record>,
    truths: Vec<TruthEntry>,
}

fn simulate_unit(cfg: &GenConfig, unit: usize) -> UnitHistory {
    let mut rng = seeding::rng(cfg.seed, "unit", unit as u64);
    let d = cfg.encoded_d();

    let mut x = Vec::with_capacity(d);
    for _ in 0..cfg.d_cont {
        let v: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
        x.push(v);
    }
    for &levels in &cfg.cat_levels {
        let hot = rng.random_range(0..levels);
        for k in 0..levels {
            x.push(if k == hot { 1.0 } else { 0.0 });
        }
    }
    let score = cfg.score(&x);

    let mut records = Vec::with_capacity(cfg.max_cycles);
    let mut truths = Vec::with_capacity(cfg.max_cycles);
    let mut t = 0.0f64;
    let mut prior_failures = 0u32;
    for cycle in 0..cfg.max_cycles {
        let tslrt = cfg.cycle_time_dist.sample(&mut rng);
        let (t1, t2) = (t, t + tslrt);
        let lambda_eff = effective_rate(cfg.lambda_true, cfg.beta_af, prior_failures);
        let params = WeibullParams::new(lambda_eff, cfg.c_true).expect("validated config");
        let p = weibull::failure_prob(params, score, t1, t2).expect("t2 > t1 by construction");
        let y = u8::from(rng.random::<f64>() < p);

        let id = format!("u{unit:05}c{cycle:02}");
        records.push(Record::new(id.clone(), x.clone(), y, t1, t2).expect("valid by construction"));
        truths.push(TruthEntry {
            id,
            cycle: cycle as u32,
            true_score: score,
            true_prob: p,
        });

        if y == 1 {
            prior_failures += 1;
        }
        t = t2;
    }
    UnitHistory { records, truths }
}

/// Simulate the whole fleet. Deterministic given `cfg.seed`; units are
/// independent streams, so generation parallelizes without changing output.
pub fn generate_fleet(cfg: &GenConfig) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;

    let units = exec::map_indexed(cfg.n_units, |u| simulate_unit(cfg, u));

    let mut records = Vec::with_capacity(cfg.n_units * cfg.max_cycles);
    let mut entries = Vec::with_capacity(cfg.n_units * cfg.max_cycles);
    for unit in units {
        records.extend(unit.records);
        entries.extend(unit.truths);
    }

    let mut feature_names = Vec::new();
    let mut feature_kinds = Vec::new();
    let mut manifest = EncodingManifest::default();
    for j in 0..cfg.d_cont {
        feature_names.push(format!("x{j:02}"));
        feature_kinds.push(FeatureKind::Continuous);
        manifest
            .columns
            .push((format!("x{j:02}"), ColumnKind::Continuous));
    }
    for (f, &levels) in cfg.cat_levels.iter().enumerate() {
        let name = format!("cat{f:02}");
        let level_names: Vec<String> = (0..levels).map(|k| format!("l{k:02}")).collect();
        for level in &level_names {
            feature_names.push(format!("{name}={level}"));
            feature_kinds.push(FeatureKind::OneHot);
        }
        manifest.columns.push((
            name,
            ColumnKind::Categorical {
                levels: level_names,
            },
        ));
    }

    let params = WeibullParams::new(cfg.lambda_true, cfg.c_true)?;
    let ds = Dataset::new(records, feature_names, feature_kinds, manifest)?;
    Ok((ds, GroundTruth::new(params, cfg.beta_af, entries)))
}

/// Write the dataset in its raw (pre-encoding) CSV form: categorical
/// one-hot groups collapse back to their level strings, ordinals back to
/// level names. Reloading with `ds.manifest` reproduces `ds` exactly.
pub fn write_raw_csv(ds: &Dataset, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;

    let mut header = vec![
        "id".to_string(),
        "y".to_string(),
        "t1".to_string(),
        "t2".to_string(),
    ];
    header.extend(ds.manifest.columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)
        .map_err(|e| Error::csv(display.clone(), e))?;

    for r in &ds.records {
        let mut row = vec![
            r.id.clone(),
            r.y.to_string(),
            r.t1.to_string(),
            r.t2.to_string(),
        ];
        let mut j = 0usize;
        for (name, kind) in &ds.manifest.columns {
            match kind {
                ColumnKind::Continuous => {
                    row.push(r.x[j].to_string());
                    j += 1;
                }
                ColumnKind::Ordinal { levels } => {
                    let idx = r.x[j] as usize;
                    let level = levels.get(idx).ok_or_else(|| {
                        Error::Validation(format!(
                            "record {}: ordinal index {idx} out of range for {name}",
                            r.id
                        ))
                    })?;
                    row.push(level.clone());
                    j += 1;
                }
                ColumnKind::Categorical { levels } => {
                    let hot = (0..levels.len())
                        .find(|k| r.x[j + k] == 1.0)
                        .ok_or_else(|| {
                            Error::Validation(format!(
                                "record {}: no active level in one-hot group {name}",
                                r.id
                            ))
                        })?;
                    row.push(levels[hot].clone());
                    j += levels.len();
                }
            }
        }
        w.write_record(&row)
            .map_err(|e| Error::csv(display.clone(), e))?;
    }
    w.flush().map_err(|e| Error::io(display, e))
}

/// Write the ground-truth sidecar (`id, cycle, true_score, true_prob`).
pub fn write_ground_truth_csv(gt: &GroundTruth, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;
    w.write_record(["id", "cycle", "true_score", "true_prob"])
        .map_err(|e| Error::csv(display.clone(), e))?;
    for e in &gt.entries {
        w.write_record([
            e.id.clone(),
            e.cycle.to_string(),
            e.true_score.to_string(),
            e.true_prob.to_string(),
        ])
        .map_err(|e| Error::csv(display.clone(), e))?;
    }
    w.flush().map_err(|e| Error::io(display, e))
}

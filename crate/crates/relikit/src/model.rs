//! Model variants, training, and Bayesian-model-averaged inference.
//!
//! Four variants share one prediction contract:
//!
//! - `mcmc_cox`: network score, population `(lambda, c)` sampled by MCMC;
//!   BMA averages over posterior draws with a deterministic score pass.
//! - `mcdropout_cox`: multi-task network predicts the score and per-record
//!   `(lambda_i, c_i)`; training pools the task outputs into batch means;
//!   BMA averages over fresh dropout masks.
//! - `mcmc_mcdropout_cox`: posterior draw plus fresh mask per sample.
//! - `baseline_conditional_weibull`: no covariates at all — posterior-mean
//!   `(lambda, c)` with score fixed at 0.
//!
//! Training minimizes mean BCE of the interval failure probability plus
//! an L2 weight penalty, one `(mask, draw)` sample per step, Adam updates,
//! and a 5-epoch running-window early stop on validation ROC-AUC: the run
//! goes to `max_epochs` and restores the checkpoint at the best window
//! mean. Probabilities are always averaged — never scores.

use serde::{Deserialize, Serialize};

use crate::dataset::{batch_indices, Dataset, Record, ScalerParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::mcmc::{self, PosteriorDraws, PriorSpec, SamplerConfig};
use crate::metrics;
use crate::net::{self, AdamHyper, AdamState, Arch, DropoutMask, Params};
use crate::seeding;
use crate::weibull::{self, WeibullParams};

/// Model family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    McmcCox,
    McdropoutCox,
    McmcMcdropoutCox,
    BaselineConditionalWeibull,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::McmcCox => "mcmc_cox",
            Variant::McdropoutCox => "mcdropout_cox",
            Variant::McmcMcdropoutCox => "mcmc_mcdropout_cox",
            Variant::BaselineConditionalWeibull => "baseline_conditional_weibull",
        }
    }

    pub fn needs_draws(self) -> bool {
        matches!(self, Variant::McmcCox | Variant::McmcMcdropoutCox)
    }

    /// Default architecture for this variant at input width `d`.
    pub fn default_arch(self, d: usize) -> Option<Arch> {
        match self {
            Variant::McmcCox | Variant::McmcMcdropoutCox => Some(Arch::mcmc_cox(d)),
            Variant::McdropoutCox => Some(Arch::mcdropout_cox(d)),
            Variant::BaselineConditionalWeibull => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcmc_cox" => Ok(Variant::McmcCox),
            "mcdropout_cox" => Ok(Variant::McdropoutCox),
            "mcmc_mcdropout_cox" => Ok(Variant::McmcMcdropoutCox),
            "baseline_conditional_weibull" | "baseline" => Ok(Variant::BaselineConditionalWeibull),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Training protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// L2 weight-decay strength.
    pub alpha: f64,
    pub max_epochs: usize,
    /// Running-window width for the validation ROC-AUC early stop.
    pub early_stop_window: usize,
    /// BMA samples at final prediction time.
    pub u_bma: usize,
    /// BMA samples per validation evaluation during training.
    pub u_val: usize,
    pub lr: f64,
    pub seed: u64,
    /// Replaces the variant's default architecture when set.
    pub arch_override: Option<Arch>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: crate::dataset::DEFAULT_BATCH_SIZE,
            alpha: 1e-4,
            max_epochs: 200,
            early_stop_window: 5,
            u_bma: 100,
            u_val: 20,
            lr: 1e-3,
            seed: 0,
            arch_override: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be >= 1".into(),
            ));
        }
        if self.early_stop_window == 0 {
            return Err(Error::Config("early_stop_window must be >= 1".into()));
        }
        if self.u_bma == 0 || self.u_val == 0 {
            return Err(Error::Config("BMA sample counts must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_roc_auc: f64,
    /// Mean val ROC-AUC over the trailing early-stop window.
    pub running_mean: f64,
}

/// A trained model plus everything needed to reproduce its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub variant: Variant,
    pub arch: Option<Arch>,
    pub params: Option<Params>,
    /// Posterior-mean population parameters (baseline variant).
    pub baseline: Option<WeibullParams>,
    pub scaler: ScalerParams,
    pub draws: Option<PosteriorDraws>,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose checkpoint was restored.
    pub stopping_epoch: usize,
    pub config: TrainConfig,
}

impl PartialEq for PosteriorDraws {
    fn eq(&self, other: &Self) -> bool {
        self.draws == other.draws
            && self.n_chains == other.n_chains
            && self.acceptance == other.acceptance
    }
}

impl TrainedModel {
    pub fn name(&self) -> &'static str {
        self.variant.name()
    }
}

/// Which `(lambda, c)` a training step uses.
#[derive(Debug, Clone, Copy)]
pub enum LamcSource {
    /// A posterior draw (MCMC variants).
    Fixed(WeibullParams),
    /// Batch means of the network's own task head.
    TaskHead,
}

/// Eq.-6/7 pooling: arithmetic means of the per-record Weibull outputs.
pub fn batch_weibull_params(lambdas: &[f64], cs: &[f64]) -> Result<WeibullParams> {
    if lambdas.is_empty() || lambdas.len() != cs.len() {
        return Err(Error::Validation(
            "batch Weibull pooling needs matching nonempty outputs".into(),
        ));
    }
    let n = lambdas.len() as f64;
    WeibullParams::new(
        lambdas.iter().sum::<f64>() / n,
        cs.iter().sum::<f64>() / n,
    )
}

const CHUNK: usize = 64;

fn clamped_out(p: f64) -> bool {
    !(weibull::BCE_EPS..=1.0 - weibull::BCE_EPS).contains(&p)
}

/// `t^c ln t` with the `t -> 0` limit.
fn pow_ln(t: f64, c: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(c) * t.ln()
    }
}

/// Mean-BCE-plus-L2 training loss of one batch under a fixed `(mask,
/// lambda-c source)` sample.
pub fn batch_loss(
    params: &Params,
    arch: &Arch,
    batch: &[&Record],
    lamc: LamcSource,
    mask: Option<&DropoutMask>,
    alpha: f64,
) -> Result<f64> {
    let (loss, _) = batch_eval(params, arch, batch, lamc, mask, alpha, false)?;
    Ok(loss)
}

/// [`batch_loss`] plus exact gradients (score pathway always; the
/// `(lambda, c)` pathway through the pooled task head when `lamc` is
/// `TaskHead`).
pub fn batch_loss_grads(
    params: &Params,
    arch: &Arch,
    batch: &[&Record],
    lamc: LamcSource,
    mask: Option<&DropoutMask>,
    alpha: f64,
) -> Result<(f64, Params)> {
    let (loss, grads) = batch_eval(params, arch, batch, lamc, mask, alpha, true)?;
    Ok((loss, grads.expect("requested gradients")))
}

fn batch_eval(
    params: &Params,
    arch: &Arch,
    batch: &[&Record],
    lamc: LamcSource,
    mask: Option<&DropoutMask>,
    alpha: f64,
    want_grads: bool,
) -> Result<(f64, Option<Params>)> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    if matches!(lamc, LamcSource::TaskHead) && !arch.has_task_head() {
        return Err(Error::Config(
            "task-head pooling requires a task head".into(),
        ));
    }

    // Phase 1: forward everything.
    let passes: Vec<Result<(net::Output, net::Cache)>> =
        exec::map_indexed(batch.len(), |i| net::forward_cached(params, arch, &batch[i].x, mask));
    let mut outputs = Vec::with_capacity(batch.len());
    let mut caches = Vec::with_capacity(batch.len());
    for pass in passes {
        let (out, cache) = pass?;
        outputs.push(out);
        caches.push(cache);
    }

    let wp = match lamc {
        LamcSource::Fixed(p) => p,
        LamcSource::TaskHead => {
            let lambdas: Vec<f64> = outputs.iter().map(|o| o.task.expect("task head").0).collect();
            let cs: Vec<f64> = outputs.iter().map(|o| o.task.expect("task head").1).collect();
            batch_weibull_params(&lambdas, &cs)?
        }
    };

    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut hazards = Vec::with_capacity(batch.len());
    for (rec, out) in batch.iter().zip(&outputs) {
        let a = weibull::interval_hazard(wp, out.score, rec.t1, rec.t2)?;
        let p = -(-a).exp_m1();
        loss += weibull::bce_loss_hazard(a, rec.y);
        hazards.push((a, p));
    }
    loss = loss / b + net::l2_penalty(params, alpha);

    if !want_grads {
        return Ok((loss, None));
    }

    // dL/dA_i for the mean-BCE term; zero where the clamp is active.
    let dl_da: Vec<f64> = batch
        .iter()
        .zip(&hazards)
        .map(|(rec, &(a, p))| {
            if clamped_out(p) {
                return 0.0;
            }
            let d_bce = if rec.y == 1 { -1.0 / a.exp_m1() } else { 1.0 };
            d_bce / b
        })
        .collect();

    // Pooled-parameter pathway: dA_i/d(lambda_bar), dA_i/d(c_bar) summed
    // over the batch, then split evenly back onto each record's head.
    let task_upstream: Option<(f64, f64)> = match lamc {
        LamcSource::Fixed(_) => None,
        LamcSource::TaskHead => {
            let (lambda, c) = (wp.lambda(), wp.c());
            let lam_c = (c * lambda.ln()).exp();
            let mut g_lambda = 0.0;
            let mut g_c = 0.0;
            for ((rec, out), (&(a, _), &dlda)) in batch
                .iter()
                .zip(&outputs)
                .zip(hazards.iter().zip(&dl_da))
            {
                if dlda == 0.0 {
                    continue;
                }
                let da_dlambda = a * c / lambda;
                let da_dc =
                    a * lambda.ln() + out.score.exp() * lam_c * (pow_ln(rec.t2, c) - pow_ln(rec.t1, c));
                g_lambda += dlda * da_dlambda;
                g_c += dlda * da_dc;
            }
            Some((g_lambda / b, g_c / b))
        }
    };

    // Phase 2: backprop per record, chunked for deterministic reduction.
    let partials = exec::map_chunks(batch.len(), CHUNK, |start, len| {
        let mut part = params.zeros_like();
        for i in start..start + len {
            let (a, _) = hazards[i];
            let d_score = if dl_da[i] == 0.0 { 0.0 } else { dl_da[i] * a };
            let d_task = task_upstream;
            if d_score == 0.0 && d_task.is_none() {
                continue;
            }
            net::backward(
                params,
                arch,
                &caches[i],
                mask,
                d_score,
                d_task,
                &mut part,
            );
        }
        part
    });
    let mut grads = params.zeros_like();
    for part in &partials {
        grads.add_assign(part);
    }
    net::add_l2_gradient(params, alpha, &mut grads);

    Ok((loss, Some(grads)))
}

fn bma_sample_prob(
    variant: Variant,
    arch: Option<&Arch>,
    params: Option<&Params>,
    draws: Option<&PosteriorDraws>,
    baseline: Option<WeibullParams>,
    det_score: Option<f64>,
    x: &[f64],
    t1: f64,
    t2: f64,
    rng: &mut rand_chacha::ChaCha12Rng,
    sample_index: u64,
    mask_seed: u64,
) -> Result<f64> {
    use rand::Rng;
    match variant {
        Variant::BaselineConditionalWeibull => {
            let p = baseline.ok_or_else(|| Error::Config("baseline params missing".into()))?;
            weibull::failure_prob(p, 0.0, t1, t2)
        }
        Variant::McmcCox => {
            let pd = draws.ok_or_else(|| Error::Config("posterior draws missing".into()))?;
            let wp = pd.draws[rng.random_range(0..pd.draws.len())];
            let score = det_score.expect("precomputed deterministic score");
            weibull::failure_prob(wp, score, t1, t2)
        }
        Variant::McmcMcdropoutCox => {
            let pd = draws.ok_or_else(|| Error::Config("posterior draws missing".into()))?;
            let wp = pd.draws[rng.random_range(0..pd.draws.len())];
            let (arch, params) = (arch.unwrap(), params.unwrap());
            let mask = net::sample_mask(arch, mask_seed, sample_index);
            let out = net::forward(params, arch, x, Some(&mask))?;
            weibull::failure_prob(wp, out.score, t1, t2)
        }
        Variant::McdropoutCox => {
            let (arch, params) = (arch.unwrap(), params.unwrap());
            let mask = net::sample_mask(arch, mask_seed, sample_index);
            let out = net::forward(params, arch, x, Some(&mask))?;
            let (lambda, c) = out.task.expect("task head");
            let wp = WeibullParams::new(lambda, c)?;
            weibull::failure_prob(wp, out.score, t1, t2)
        }
    }
}

fn bma_probs_for_records(
    variant: Variant,
    arch: Option<&Arch>,
    params: Option<&Params>,
    draws: Option<&PosteriorDraws>,
    baseline: Option<WeibullParams>,
    records: &[Record],
    u: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let per_record: Vec<Result<Vec<f64>>> = exec::map_indexed(records.len(), |i| {
        let rec = &records[i];
        let det_score = if variant == Variant::McmcCox {
            Some(net::forward(params.unwrap(), arch.unwrap(), &rec.x, None)?.score)
        } else {
            None
        };
        (0..u)
            .map(|uu| {
                let stream = (i * u + uu) as u64;
                let mut rng = seeding::rng(seed, "bma-draw", stream);
                bma_sample_prob(
                    variant,
                    arch,
                    params,
                    draws,
                    baseline,
                    det_score,
                    &rec.x,
                    rec.t1,
                    rec.t2,
                    &mut rng,
                    stream,
                    seeding::derive(seed, "bma-mask", 0),
                )
            })
            .collect()
    });
    per_record.into_iter().collect()
}

/// Per-record BMA prediction: probability mean over U samples, central
/// 95% interval of those samples, and the thresholded label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_fail: f64,
    pub lo: f64,
    pub hi: f64,
    pub label: u8,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn summarize_samples(samples: &mut Vec<f64>) -> Prediction {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // clamp into the sample hull: summation rounding must not push the
    // mean past the extremes when samples coincide
    let mean = (samples.iter().sum::<f64>() / samples.len() as f64)
        .clamp(samples[0], samples[samples.len() - 1]);
    Prediction {
        p_fail: mean,
        lo: quantile(samples, 0.025),
        hi: quantile(samples, 0.975),
        label: weibull::classify(mean, 0.5),
    }
}

/// BMA prediction for one record (already standardized with the model's
/// scaler).
pub fn predict_bma(model: &TrainedModel, record: &Record, u: usize, seed: u64) -> Result<Prediction> {
    Ok(predict_set(model, std::slice::from_ref(record), u, seed)?[0])
}

/// BMA predictions for a set of records.
pub fn predict_set(
    model: &TrainedModel,
    records: &[Record],
    u: usize,
    seed: u64,
) -> Result<Vec<Prediction>> {
    if u == 0 {
        return Err(Error::Config("need at least one BMA sample".into()));
    }
    let probs = bma_probs_for_records(
        model.variant,
        model.arch.as_ref(),
        model.params.as_ref(),
        model.draws.as_ref(),
        model.baseline,
        records,
        u,
        seed,
    )?;
    Ok(probs
        .into_iter()
        .map(|mut samples| summarize_samples(&mut samples))
        .collect())
}

/// One point of a BMA survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub s_mean: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

/// BMA survival curve `p[T > t | x]` from age 0 for a (standardized)
/// record template. Each BMA sample fixes its parameters once and sweeps
/// the whole grid, so every sampled curve (and the mean) is monotone.
pub fn survival_curve(
    model: &TrainedModel,
    template: &[f64],
    grid: &[f64],
    u: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::Validation("empty time grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::Validation(
            "time grid must be ascending and nonnegative".into(),
        ));
    }
    if u == 0 {
        return Err(Error::Config("need at least one BMA sample".into()));
    }

    use rand::Rng;
    let det_score = if model.variant == Variant::McmcCox {
        Some(
            net::forward(
                model.params.as_ref().unwrap(),
                model.arch.as_ref().unwrap(),
                template,
                None,
            )?
            .score,
        )
    } else {
        None
    };

    let sampled: Vec<Result<Vec<f64>>> = exec::map_indexed(u, |uu| {
        let mut rng = seeding::rng(seed, "curve-draw", uu as u64);
        let (wp, score) = match model.variant {
            Variant::BaselineConditionalWeibull => (
                model
                    .baseline
                    .ok_or_else(|| Error::Config("baseline params missing".into()))?,
                0.0,
            ),
            Variant::McmcCox => {
                let pd = model.draws.as_ref().unwrap();
                (
                    pd.draws[rng.random_range(0..pd.draws.len())],
                    det_score.unwrap(),
                )
            }
            Variant::McmcMcdropoutCox => {
                let pd = model.draws.as_ref().unwrap();
                let wp = pd.draws[rng.random_range(0..pd.draws.len())];
                let arch = model.arch.as_ref().unwrap();
                let mask =
                    net::sample_mask(arch, seeding::derive(seed, "curve-mask", 0), uu as u64);
                let out = net::forward(model.params.as_ref().unwrap(), arch, template, Some(&mask))?;
                (wp, out.score)
            }
            Variant::McdropoutCox => {
                let arch = model.arch.as_ref().unwrap();
                let mask =
                    net::sample_mask(arch, seeding::derive(seed, "curve-mask", 0), uu as u64);
                let out = net::forward(model.params.as_ref().unwrap(), arch, template, Some(&mask))?;
                let (lambda, c) = out.task.expect("task head");
                (WeibullParams::new(lambda, c)?, out.score)
            }
        };
        grid.iter()
            .map(|&t| weibull::cox_survival(wp, score, t))
            .collect()
    });
    let curves: Vec<Vec<f64>> = sampled.into_iter().collect::<Result<_>>()?;

    let uf = u as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut column: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean =
                (column.iter().sum::<f64>() / uf).clamp(column[0], column[column.len() - 1]);
            CurvePoint {
                t,
                s_mean: mean,
                s_lo: quantile(&column, 0.025),
                s_hi: quantile(&column, 0.975),
            }
        })
        .collect())
}

/// Precomputed per-record BMA parameter samples for horizon queries
/// (the concordance index evaluates every record at many horizons).
pub struct HorizonModel {
    samples: Vec<Vec<(WeibullParams, f64)>>,
    t1s: Vec<f64>,
}

impl HorizonModel {
    /// Mean failure probability of record `i` over `[t1_i, t1_i + delta]`.
    pub fn prob(&self, i: usize, delta: f64) -> f64 {
        let t1 = self.t1s[i];
        let entries = &self.samples[i];
        let total: f64 = entries
            .iter()
            .map(|&(wp, score)| {
                weibull::failure_prob(wp, score, t1, t1 + delta).expect("valid horizon")
            })
            .sum();
        total / entries.len() as f64
    }
}

/// Draw the per-record `(params, score)` BMA samples once so horizon
/// probabilities become closed-form sweeps.
pub fn horizon_model(
    model: &TrainedModel,
    records: &[Record],
    u: usize,
    seed: u64,
) -> Result<HorizonModel> {
    use rand::Rng;
    if u == 0 {
        return Err(Error::Config("need at least one BMA sample".into()));
    }
    let u_eff = if model.variant == Variant::BaselineConditionalWeibull {
        1
    } else {
        u
    };
    let per_record: Vec<Result<Vec<(WeibullParams, f64)>>> =
        exec::map_indexed(records.len(), |i| {
            let rec = &records[i];
            let det_score = if model.variant == Variant::McmcCox {
                Some(
                    net::forward(
                        model.params.as_ref().unwrap(),
                        model.arch.as_ref().unwrap(),
                        &rec.x,
                        None,
                    )?
                    .score,
                )
            } else {
                None
            };
            (0..u_eff)
                .map(|uu| {
                    let stream = (i * u_eff + uu) as u64;
                    let mut rng = seeding::rng(seed, "horizon-draw", stream);
                    match model.variant {
                        Variant::BaselineConditionalWeibull => {
                            Ok((model.baseline.expect("baseline params"), 0.0))
                        }
                        Variant::McmcCox => {
                            let pd = model.draws.as_ref().unwrap();
                            Ok((
                                pd.draws[rng.random_range(0..pd.draws.len())],
                                det_score.unwrap(),
                            ))
                        }
                        Variant::McmcMcdropoutCox => {
                            let pd = model.draws.as_ref().unwrap();
                            let wp = pd.draws[rng.random_range(0..pd.draws.len())];
                            let arch = model.arch.as_ref().unwrap();
                            let mask = net::sample_mask(
                                arch,
                                seeding::derive(seed, "horizon-mask", 0),
                                stream,
                            );
                            let out = net::forward(
                                model.params.as_ref().unwrap(),
                                arch,
                                &rec.x,
                                Some(&mask),
                            )?;
                            Ok((wp, out.score))
                        }
                        Variant::McdropoutCox => {
                            let arch = model.arch.as_ref().unwrap();
                            let mask = net::sample_mask(
                                arch,
                                seeding::derive(seed, "horizon-mask", 0),
                                stream,
                            );
                            let out = net::forward(
                                model.params.as_ref().unwrap(),
                                arch,
                                &rec.x,
                                Some(&mask),
                            )?;
                            let (lambda, c) = out.task.expect("task head");
                            Ok((WeibullParams::new(lambda, c)?, out.score))
                        }
                    }
                })
                .collect()
        });
    let samples: Vec<Vec<(WeibullParams, f64)>> = per_record.into_iter().collect::<Result<_>>()?;
    Ok(HorizonModel {
        samples,
        t1s: records.iter().map(|r| r.t1).collect(),
    })
}

/// Train a network variant. `draws` must be provided for the MCMC
/// variants; the baseline trains via [`fit_baseline`] instead.
pub fn train(
    variant: Variant,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    draws: Option<PosteriorDraws>,
    scaler: ScalerParams,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if variant == Variant::BaselineConditionalWeibull {
        return Err(Error::Config(
            "the baseline variant is fitted with fit_baseline, not train".into(),
        ));
    }
    if variant.needs_draws() && draws.is_none() {
        return Err(Error::Config(format!(
            "variant {} requires posterior draws",
            variant.name()
        )));
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("train and validation splits must be nonempty".into()));
    }
    let val_fail = val_set.n_failures();
    if val_fail == 0 || val_fail == val_set.len() {
        return Err(Error::Config(
            "validation split needs both classes for ROC-AUC early stopping".into(),
        ));
    }

    let arch = match &cfg.arch_override {
        Some(a) => a.clone(),
        None => variant
            .default_arch(train_set.d())
            .expect("network variants have a default architecture"),
    };
    arch.validate()?;
    if variant == Variant::McdropoutCox && !arch.has_task_head() {
        return Err(Error::Config(
            "mcdropout_cox requires an architecture with a task head".into(),
        ));
    }

    let mut params = net::init(&arch, seeding::derive(cfg.seed, "init", 0))?;
    let mut adam = AdamState::new(&params);
    let hyper = AdamHyper {
        lr: cfg.lr,
        ..AdamHyper::default()
    };

    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let mut batch_rng = seeding::rng(cfg.seed, "batches", 0);
    let mask_seed = seeding::derive(cfg.seed, "train-mask", 0);

    let mut history: Vec<EpochStats> = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, Params, usize)> = None;

    for epoch in 0..cfg.max_epochs {
        let mut loss_sum = 0.0;
        for s in 0..steps_per_epoch {
            let step = epoch * steps_per_epoch + s;
            let idx = batch_indices(n, cfg.batch_size, &mut batch_rng);
            let batch: Vec<&Record> = idx.iter().map(|&i| &train_set.records[i]).collect();
            let lamc = match variant {
                Variant::McdropoutCox => LamcSource::TaskHead,
                _ => LamcSource::Fixed(mcmc::draw_for_step(draws.as_ref().unwrap(), step)),
            };
            let mask = net::sample_mask(&arch, mask_seed, step as u64);
            let (loss, grads) =
                batch_loss_grads(&params, &arch, &batch, lamc, Some(&mask), cfg.alpha)?;
            net::adam_step(&mut params, &grads, &mut adam, &hyper);
            loss_sum += loss;
        }

        let val_auc = validation_roc_auc(
            variant,
            &arch,
            &params,
            draws.as_ref(),
            val_set,
            cfg.u_val,
            seeding::derive(cfg.seed, "val", epoch as u64),
        )?;
        let window_start = (history.len() + 1).saturating_sub(cfg.early_stop_window);
        let window_sum: f64 = history[window_start..]
            .iter()
            .map(|h| h.val_roc_auc)
            .sum::<f64>()
            + val_auc;
        let window_len = history.len() - window_start + 1;
        let running_mean = window_sum / window_len as f64;
        history.push(EpochStats {
            train_loss: loss_sum / steps_per_epoch as f64,
            val_roc_auc: val_auc,
            running_mean,
        });

        if best.as_ref().is_none_or(|(b, _, _)| running_mean > *b) {
            best = Some((running_mean, params.clone(), epoch + 1));
        }
    }

    let (_, best_params, stopping_epoch) = best.expect("at least one epoch ran");
    Ok(TrainedModel {
        variant,
        arch: Some(arch),
        params: Some(best_params),
        baseline: None,
        scaler,
        draws,
        history,
        stopping_epoch,
        config: cfg.clone(),
    })
}

fn validation_roc_auc(
    variant: Variant,
    arch: &Arch,
    params: &Params,
    draws: Option<&PosteriorDraws>,
    val: &Dataset,
    u: usize,
    seed: u64,
) -> Result<f64> {
    let probs = bma_probs_for_records(
        variant,
        Some(arch),
        Some(params),
        draws,
        None,
        &val.records,
        u,
        seed,
    )?;
    let means: Vec<f64> = probs
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let truth: Vec<u8> = val.records.iter().map(|r| r.y).collect();
    metrics::roc_auc(&means, &truth)
}

/// Fit the no-covariate conditional-Weibull baseline: posterior-mean
/// `(lambda, c)` over the training intervals, score fixed at zero.
pub fn fit_baseline(
    train_set: &Dataset,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let data = mcmc::intervals(train_set);
    let draws = mcmc::sample_posterior(&data, prior, sampler, seed)?;
    Ok(baseline_from_draws(draws, train_set.d()))
}

/// Build the baseline model from an existing posterior (shared with the
/// Cox variants when they were fitted on the same training split).
pub fn baseline_from_draws(draws: PosteriorDraws, d: usize) -> TrainedModel {
    let baseline = draws.posterior_mean();
    TrainedModel {
        variant: Variant::BaselineConditionalWeibull,
        arch: None,
        params: None,
        baseline: Some(baseline),
        scaler: ScalerParams::passthrough(d),
        draws: Some(draws),
        history: Vec::new(),
        stopping_epoch: 0,
        config: TrainConfig::default(),
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: TrainedModel,
}

/// Serialize the model (versioned JSON). Floats print in shortest
/// round-trip form, so save/load/save is byte-stable.
pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&Checkpoint {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: impl AsRef<std::path::Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "checkpoint version {} unsupported (want {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    Ok(ckpt.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{standardize, stratified_split, SplitSpec};
    use crate::synthgen::{self, GenConfig, ScoreFn};

    fn quick_sampler() -> SamplerConfig {
        SamplerConfig {
            n_chains: 2,
            burn_in: 400,
            draws_per_chain: 200,
            target_accept: 0.375,
        }
    }

    fn small_fleet(seed: u64, w: Vec<f64>) -> Dataset {
        let cfg = GenConfig {
            n_units: 250,
            lambda_true: 0.03,
            c_true: 1.3,
            d_cont: 4,
            cat_levels: vec![],
            w_true: w,
            score_fn: ScoreFn::Linear,
            seed,
            ..GenConfig::default()
        };
        synthgen::generate_fleet(&cfg).unwrap().0
    }

    fn tiny_train_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            max_epochs: 3,
            u_val: 4,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn batch_weibull_params_means() {
        let p = batch_weibull_params(&[0.1, 0.3], &[1.0, 2.0]).unwrap();
        assert!((p.lambda() - 0.2).abs() < 1e-15);
        assert!((p.c() - 1.5).abs() < 1e-15);
        let same = batch_weibull_params(&[0.4; 5], &[1.1; 5]).unwrap();
        assert!((same.lambda() - 0.4).abs() < 1e-15);
        assert!(batch_weibull_params(&[], &[]).is_err());
    }

    // Acceptance-style gradient gate on the full training loss, both
    // lambda-c pathways, is in tests/acceptance.rs; here a smoke version.
    #[test]
    fn full_loss_gradient_matches_fd_smoke() {
        let ds = small_fleet(3, vec![0.5, -0.5, 0.0, 0.0]);
        let batch: Vec<&Record> = ds.records.iter().take(8).collect();
        let arch = Arch {
            input_dim: 4,
            base: vec![net::LayerSpec::new(
                5,
                net::Activation::LeakyRelu,
                0.2,
            )],
            score: vec![
                net::LayerSpec::new(3, net::Activation::LeakyRelu, 0.2),
                net::LayerSpec::new(1, net::Activation::Identity, 0.2),
            ],
            task: Some(vec![net::LayerSpec::new(
                2,
                net::Activation::Softplus,
                0.2,
            )]),
        };
        let params = net::init(&arch, 11).unwrap();
        let mask = net::sample_mask(&arch, 5, 0);
        let alpha = 1e-3;

        for lamc in [
            LamcSource::Fixed(WeibullParams::new(0.05, 1.2).unwrap()),
            LamcSource::TaskHead,
        ] {
            let (_, grads) =
                batch_loss_grads(&params, &arch, &batch, lamc, Some(&mask), alpha).unwrap();
            // 5-point central stencil: the loss exponentiates the
            // cumulative hazard, so the plain 2-point quotient has no h
            // that beats both truncation and cancellation at 1e-5
            let h = 1e-5;
            let eval = |p: &Params| batch_loss(p, &arch, &batch, lamc, Some(&mask), alpha).unwrap();
            for k in 0..params.n_scalars() {
                let at = |offset: f64| {
                    let mut p = params.clone();
                    *p.scalar_mut(k) += offset;
                    eval(&p)
                };
                let fd =
                    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
                let an = grads.scalar(k);
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-4);
                assert!(rel < 1e-5, "scalar {k}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn fixed_batch_loss_decreases() {
        // deterministic overfit: no dropout, fixed draw, fixed tiny batch
        let ds = small_fleet(5, vec![1.0, -1.0, 0.5, 0.0]);
        let batch: Vec<&Record> = ds.records.iter().take(8).collect();
        let mut arch = Arch::mcmc_cox(4);
        for l in arch.base.iter_mut().chain(arch.score.iter_mut()) {
            l.dropout = 0.0;
        }
        let mut params = net::init(&arch, 7).unwrap();
        let mut adam = AdamState::new(&params);
        let hyper = AdamHyper::default();
        let lamc = LamcSource::Fixed(WeibullParams::new(0.03, 1.3).unwrap());

        let mut last = f64::INFINITY;
        for step in 0..50 {
            let (loss, grads) =
                batch_loss_grads(&params, &arch, &batch, lamc, None, 1e-4).unwrap();
            assert!(
                loss < last + 1e-12,
                "loss rose at step {step}: {loss} > {last}"
            );
            last = loss;
            net::adam_step(&mut params, &grads, &mut adam, &hyper);
        }
    }

    #[test]
    fn train_rejects_incompatible_setups() {
        let ds = small_fleet(1, vec![]);
        let split = stratified_split(&ds, &SplitSpec::default(), 0).unwrap();
        let cfg = tiny_train_cfg(0);
        // mcmc variant without draws
        assert!(matches!(
            train(Variant::McmcCox, &split.train, &split.val, &cfg, None, ScalerParams::passthrough(4)),
            Err(Error::Config(_))
        ));
        // single-class validation split
        let mut single = split.val.clone();
        for r in &mut single.records {
            r.y = 0;
        }
        assert!(matches!(
            train(Variant::McdropoutCox, &split.train, &single, &cfg, None, ScalerParams::passthrough(4)),
            Err(Error::Config(_))
        ));
        // baseline must go through fit_baseline
        assert!(train(
            Variant::BaselineConditionalWeibull,
            &split.train,
            &split.val,
            &cfg,
            None,
            ScalerParams::passthrough(4)
        )
        .is_err());
    }

    #[test]
    fn training_is_deterministic_to_the_byte() {
        let ds = small_fleet(9, vec![0.8, -0.6, 0.0, 0.0]);
        let split = stratified_split(&ds, &SplitSpec::default(), 1).unwrap();
        let (train_std, scaler) = standardize(&split.train).unwrap();
        let val_std = crate::dataset::apply_scaler(&split.val, &scaler).unwrap();
        let data = mcmc::intervals(&train_std);
        let draws =
            mcmc::sample_posterior(&data, &PriorSpec::default(), &quick_sampler(), 2).unwrap();

        let run = || {
            train(
                Variant::McmcCox,
                &train_std,
                &val_std,
                &tiny_train_cfg(33),
                Some(draws.clone()),
                scaler.clone(),
            )
            .unwrap()
        };
        let m1 = run();
        let m2 = run();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save_checkpoint(&m1, &p1).unwrap();
        save_checkpoint(&m2, &p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "checkpoint bytes must be identical"
        );
        assert_eq!(m1.history.len(), tiny_train_cfg(33).max_epochs);
        assert!(m1.stopping_epoch >= 1 && m1.stopping_epoch <= m1.history.len());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let ds = small_fleet(13, vec![0.5, 0.0, 0.0, 0.0]);
        let split = stratified_split(&ds, &SplitSpec::default(), 4).unwrap();
        let (train_std, scaler) = standardize(&split.train).unwrap();
        let val_std = crate::dataset::apply_scaler(&split.val, &scaler).unwrap();
        let model = train(
            Variant::McdropoutCox,
            &train_std,
            &val_std,
            &tiny_train_cfg(5),
            None,
            scaler,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(model, loaded);

        // byte-exact fixed point under re-save
        let path2 = dir.path().join("m2.json");
        save_checkpoint(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    fn toy_baseline(lambda: f64, c: f64, d: usize) -> TrainedModel {
        TrainedModel {
            variant: Variant::BaselineConditionalWeibull,
            arch: None,
            params: None,
            baseline: Some(WeibullParams::new(lambda, c).unwrap()),
            scaler: ScalerParams::passthrough(d),
            draws: None,
            history: Vec::new(),
            stopping_epoch: 0,
            config: TrainConfig::default(),
        }
    }

    #[test]
    fn baseline_recovers_truth_and_ignores_features() {
        let cfg = GenConfig {
            n_units: 600,
            lambda_true: 0.05,
            c_true: 1.4,
            d_cont: 3,
            cat_levels: vec![],
            w_true: vec![],
            score_fn: ScoreFn::Linear,
            seed: 8,
            ..GenConfig::default()
        };
        let (ds, _) = synthgen::generate_fleet(&cfg).unwrap();
        let model = fit_baseline(&ds, &PriorSpec::default(), &quick_sampler(), 3).unwrap();
        let fitted = model.baseline.unwrap();
        assert!(
            (fitted.lambda() - 0.05).abs() / 0.05 < 0.1,
            "lambda {}",
            fitted.lambda()
        );
        assert!((fitted.c() - 1.4).abs() / 1.4 < 0.1, "c {}", fitted.c());

        // permuting features changes nothing
        let mut rec = ds.records[0].clone();
        let p1 = predict_bma(&model, &rec, 16, 9).unwrap();
        rec.x.reverse();
        let p2 = predict_bma(&model, &rec, 16, 9).unwrap();
        assert_eq!(p1, p2);

        // degenerate interval predicts 0
        let mut degen = ds.records[0].clone();
        degen.t1 = degen.t2;
        let p = predict_bma(&model, &degen, 16, 9).unwrap();
        assert_eq!(p.p_fail, 0.0);
        assert_eq!(p.label, 0);
    }

    #[test]
    fn predict_collapses_to_closed_form_when_deterministic() {
        let model = toy_baseline(0.1, 1.5, 2);
        let rec = Record::new("r".into(), vec![0.0, 0.0], 0, 4.0, 9.0).unwrap();
        let got = predict_bma(&model, &rec, 1, 0).unwrap();
        let expect = weibull::failure_prob(model.baseline.unwrap(), 0.0, 4.0, 9.0).unwrap();
        assert_eq!(got.p_fail, expect);
        assert_eq!(got.lo, expect);
        assert_eq!(got.hi, expect);
    }

    #[test]
    fn bma_mean_stays_in_sample_hull_and_is_order_free() {
        let ds = small_fleet(21, vec![0.7, -0.7, 0.0, 0.0]);
        let split = stratified_split(&ds, &SplitSpec::default(), 2).unwrap();
        let (train_std, scaler) = standardize(&split.train).unwrap();
        let val_std = crate::dataset::apply_scaler(&split.val, &scaler).unwrap();
        let model = train(
            Variant::McdropoutCox,
            &train_std,
            &val_std,
            &tiny_train_cfg(17),
            None,
            scaler,
        )
        .unwrap();

        let rec = &val_std.records[0];
        let probs = bma_probs_for_records(
            model.variant,
            model.arch.as_ref(),
            model.params.as_ref(),
            None,
            None,
            std::slice::from_ref(rec),
            40,
            77,
        )
        .unwrap();
        let samples = &probs[0];
        let pred = predict_bma(&model, rec, 40, 77).unwrap();
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(pred.p_fail >= lo && pred.p_fail <= hi);
        assert!(pred.lo <= pred.p_fail && pred.p_fail <= pred.hi);

        // the mean is a sum of the same numbers whatever the order
        let mut reversed = samples.clone();
        reversed.reverse();
        let mean_a = samples.iter().sum::<f64>() / samples.len() as f64;
        let mean_b = reversed.iter().sum::<f64>() / reversed.len() as f64;
        assert!((mean_a - mean_b).abs() < 1e-15);
    }

    #[test]
    fn failure_prob_nondecreasing_in_t2_for_fixed_sample() {
        let model = toy_baseline(0.08, 1.6, 1);
        let mut last = -1.0;
        for k in 1..40 {
            let t2 = 2.0 + k as f64;
            let rec = Record::new(format!("r{k}"), vec![0.0], 0, 2.0, t2).unwrap();
            let p = predict_bma(&model, &rec, 1, 0).unwrap().p_fail;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn survival_curve_shapes() {
        let model = toy_baseline(0.05, 1.5, 1);
        let grid: Vec<f64> = (0..60).map(|k| k as f64).collect();
        let curve = survival_curve(&model, &[0.0], &grid, 16, 4).unwrap();
        assert_eq!(curve[0].s_mean, 1.0);
        for w in curve.windows(2) {
            assert!(w[1].s_mean <= w[0].s_mean + 1e-12);
        }
        // descending grid rejected
        assert!(survival_curve(&model, &[0.0], &[3.0, 1.0], 4, 0).is_err());
    }

    #[test]
    fn horizon_model_matches_direct_closed_form() {
        let model = toy_baseline(0.07, 1.2, 1);
        let records: Vec<Record> = (0..5)
            .map(|i| Record::new(format!("r{i}"), vec![0.0], 0, i as f64 * 3.0, i as f64 * 3.0 + 5.0).unwrap())
            .collect();
        let hm = horizon_model(&model, &records, 8, 3).unwrap();
        for (i, rec) in records.iter().enumerate() {
            for delta in [1.0, 4.0, 9.5] {
                let direct = weibull::failure_prob(
                    model.baseline.unwrap(),
                    0.0,
                    rec.t1,
                    rec.t1 + delta,
                )
                .unwrap();
                assert!((hm.prob(i, delta) - direct).abs() < 1e-15);
            }
        }
    }
}

//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::Args;

use relikit::dataset::{
    apply_scaler, load_csv, standardize, Dataset, EncodingManifest, Record, SplitOutcome,
    SplitSpec,
};
use relikit::error::{Error, Result};
use relikit::explain::{global_importance, shapley_mc, write_attributions_csv, write_ranking_json};
use relikit::mcmc::{self, PriorSpec, SamplerConfig};
use relikit::metrics::{self, EvalInput, MetricRow, MetricsReport};
use relikit::model::{
    self, fit_baseline, load_checkpoint, save_checkpoint, survival_curve, TrainConfig,
    TrainedModel, Variant,
};
use relikit::seeding;
use relikit::synthgen::{self, CycleTimeDist, GenConfig, ScoreFn};

use crate::config::{
    fmt_f64_list, fmt_usize_list, parse_f64_list, parse_usize_list, resolve, Kv, Resolved,
};

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

/// Report names for a set of checkpoint paths: file stems, prefixed with
/// parent directory components until unique.
fn unique_names(paths: &[PathBuf]) -> Vec<String> {
    let mut names: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let mut depth = 1;
    while depth < 6 {
        let mut seen = std::collections::BTreeMap::new();
        for name in &names {
            *seen.entry(name.clone()).or_insert(0usize) += 1;
        }
        if seen.values().all(|&n| n == 1) {
            break;
        }
        for (name, path) in names.iter_mut().zip(paths) {
            if seen[name] > 1 {
                let components: Vec<String> = path
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                let from = components.len().saturating_sub(depth + 1);
                let mut parts = components[from..].to_vec();
                if let Some(last) = parts.last_mut() {
                    *last = stem(path);
                }
                *name = parts.join("_");
            }
        }
        depth += 1;
    }
    names
}

// unreadable inputs are configuration mistakes (exit 2), unlike
// failures writing outputs (exit 3)
fn input_err(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config(format!("cannot read input {path}: {source}")),
        other => other,
    }
}

fn load_dataset(data: &Path, schema: &Path) -> Result<Dataset> {
    let manifest = EncodingManifest::load(schema).map_err(input_err)?;
    load_csv(data, &manifest).map_err(input_err)
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    load_checkpoint(path).map_err(input_err)
}

// ---------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct GenerateArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_units: Option<usize>,
    #[arg(long)]
    lambda_true: Option<f64>,
    #[arg(long)]
    c_true: Option<f64>,
    #[arg(long)]
    d_cont: Option<usize>,
    /// Comma-separated level counts, one per categorical feature.
    #[arg(long)]
    cat_levels: Option<String>,
    /// Comma-separated linear score coefficients (zero-padded).
    #[arg(long)]
    w_true: Option<String>,
    /// `linear` or `nonlinear-fixed`.
    #[arg(long)]
    score_fn: Option<String>,
    #[arg(long)]
    beta_af: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
    /// `lognormal:<mu_ln>,<sigma_ln>,<min>,<max>` or `uniform:<lo>,<hi>`.
    #[arg(long)]
    cycle: Option<String>,
}

fn parse_score_fn(s: &str) -> Result<ScoreFn> {
    match s {
        "linear" => Ok(ScoreFn::Linear),
        "nonlinear-fixed" => Ok(ScoreFn::NonlinearFixed),
        other => Err(Error::Config(format!("unknown score_fn {other:?}"))),
    }
}

fn fmt_score_fn(s: ScoreFn) -> &'static str {
    match s {
        ScoreFn::Linear => "linear",
        ScoreFn::NonlinearFixed => "nonlinear-fixed",
    }
}

fn parse_cycle(s: &str) -> Result<CycleTimeDist> {
    if let Some(rest) = s.strip_prefix("lognormal:") {
        let v = parse_f64_list(rest)?;
        if v.len() != 4 {
            return Err(Error::Config(
                "lognormal cycle wants mu_ln,sigma_ln,min,max".into(),
            ));
        }
        return Ok(CycleTimeDist::LogNormalTrunc {
            mu_ln: v[0],
            sigma_ln: v[1],
            min: v[2],
            max: v[3],
        });
    }
    if let Some(rest) = s.strip_prefix("uniform:") {
        let v = parse_f64_list(rest)?;
        if v.len() != 2 {
            return Err(Error::Config("uniform cycle wants lo,hi".into()));
        }
        return Ok(CycleTimeDist::Uniform { lo: v[0], hi: v[1] });
    }
    Err(Error::Config(format!("unknown cycle distribution {s:?}")))
}

fn fmt_cycle(c: CycleTimeDist) -> String {
    match c {
        CycleTimeDist::LogNormalTrunc {
            mu_ln,
            sigma_ln,
            min,
            max,
        } => format!("lognormal:{mu_ln},{sigma_ln},{min},{max}"),
        CycleTimeDist::Uniform { lo, hi } => format!("uniform:{lo},{hi}"),
    }
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let defaults = GenConfig::default();

    let cat_levels = match args.cat_levels.as_deref().or(kv.get("cat_levels")) {
        Some(s) => parse_usize_list(s)?,
        None => defaults.cat_levels.clone(),
    };
    let w_true = match args.w_true.as_deref().or(kv.get("w_true")) {
        Some(s) => parse_f64_list(s)?,
        None => defaults.w_true.clone(),
    };
    let score_fn = match args.score_fn.as_deref().or(kv.get("score_fn")) {
        Some(s) => parse_score_fn(s)?,
        None => defaults.score_fn,
    };
    let cycle_time_dist = match args.cycle.as_deref().or(kv.get("cycle")) {
        Some(s) => parse_cycle(s)?,
        None => defaults.cycle_time_dist,
    };

    let cfg = GenConfig {
        n_units: resolve(args.n_units, kv.usize("n_units")?, defaults.n_units),
        lambda_true: resolve(args.lambda_true, kv.f64("lambda_true")?, defaults.lambda_true),
        c_true: resolve(args.c_true, kv.f64("c_true")?, defaults.c_true),
        d_cont: resolve(args.d_cont, kv.usize("d_cont")?, defaults.d_cont),
        cat_levels,
        w_true,
        score_fn,
        beta_af: resolve(args.beta_af, kv.f64("beta_af")?, defaults.beta_af),
        cycle_time_dist,
        max_cycles: resolve(args.max_cycles, kv.usize("max_cycles")?, defaults.max_cycles),
        seed: resolve(args.seed, kv.u64("seed")?, defaults.seed),
    };
    cfg.validate()?;

    let (ds, gt) = synthgen::generate_fleet(&cfg)?;
    ensure_out_dir(&args.out)?;
    synthgen::write_raw_csv(&ds, args.out.join("fleet.csv"))?;
    ds.manifest.save(args.out.join("schema.kv"))?;
    synthgen::write_ground_truth_csv(&gt, args.out.join("truth.csv"))?;

    let mut resolved = Resolved::default();
    resolved.push("command", "generate");
    resolved.push("seed", cfg.seed);
    resolved.push("n_units", cfg.n_units);
    resolved.push("lambda_true", cfg.lambda_true);
    resolved.push("c_true", cfg.c_true);
    resolved.push("d_cont", cfg.d_cont);
    resolved.push("cat_levels", fmt_usize_list(&cfg.cat_levels));
    resolved.push("w_true", fmt_f64_list(&cfg.w_true));
    resolved.push("score_fn", fmt_score_fn(cfg.score_fn));
    resolved.push("beta_af", cfg.beta_af);
    resolved.push("cycle", fmt_cycle(cfg.cycle_time_dist));
    resolved.push("max_cycles", cfg.max_cycles);
    resolved.write(args.out.join("generate.resolved.kv"))?;

    let failure_rate = ds.n_failures() as f64 / ds.len() as f64;
    println!(
        "generated {} records ({} units x {} cycles), d = {}, failure rate {:.3}",
        ds.len(),
        cfg.n_units,
        cfg.max_cycles,
        ds.d(),
        failure_rate
    );
    Ok(())
}

// ---------------------------------------------------------------------
// shared split plumbing
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct SplitArgs {
    /// Test fraction of the whole dataset.
    #[arg(long)]
    test_frac: Option<f64>,
    /// Validation fraction of the training partition.
    #[arg(long)]
    val_frac: Option<f64>,
    /// Quantile age bins used for stratification.
    #[arg(long)]
    n_age_bins: Option<usize>,
}

fn split_spec(args: &SplitArgs, kv: &Kv) -> Result<SplitSpec> {
    let d = SplitSpec::default();
    Ok(SplitSpec {
        test_frac: resolve(args.test_frac, kv.f64("test_frac")?, d.test_frac),
        val_frac_of_train: resolve(args.val_frac, kv.f64("val_frac")?, d.val_frac_of_train),
        n_age_bins: resolve(args.n_age_bins, kv.usize("n_age_bins")?, d.n_age_bins),
    })
}

fn push_split(resolved: &mut Resolved, spec: &SplitSpec) {
    resolved.push("test_frac", spec.test_frac);
    resolved.push("val_frac", spec.val_frac_of_train);
    resolved.push("n_age_bins", spec.n_age_bins);
}

fn split_dataset(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<SplitOutcome> {
    let out = relikit::dataset::stratified_split(ds, spec, seed)?;
    if out.y_only_fallback {
        eprintln!("warning: sparse strata, fell back to stratifying on y alone");
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Encoding manifest for the dataset.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// One of mcmc_cox, mcdropout_cox, mcmc_mcdropout_cox, baseline_conditional_weibull.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    u_val: Option<usize>,
    #[arg(long)]
    u_bma: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[command(flatten)]
    split: SplitArgs,
    // posterior sampler settings (MCMC variants and the baseline)
    #[arg(long)]
    n_chains: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    draws_per_chain: Option<usize>,
    #[arg(long)]
    prior_c_shape: Option<f64>,
    #[arg(long)]
    prior_c_rate: Option<f64>,
    #[arg(long)]
    prior_lambda_shape: Option<f64>,
    #[arg(long)]
    prior_lambda_rate: Option<f64>,
}

struct SamplerSettings {
    prior: PriorSpec,
    sampler: SamplerConfig,
}

fn sampler_settings(args: &TrainArgs, kv: &Kv) -> Result<SamplerSettings> {
    let dp = PriorSpec::default();
    let dsmp = SamplerConfig::default();
    Ok(SamplerSettings {
        prior: PriorSpec {
            c_shape: resolve(args.prior_c_shape, kv.f64("prior_c_shape")?, dp.c_shape),
            c_rate: resolve(args.prior_c_rate, kv.f64("prior_c_rate")?, dp.c_rate),
            lambda_shape: resolve(
                args.prior_lambda_shape,
                kv.f64("prior_lambda_shape")?,
                dp.lambda_shape,
            ),
            lambda_rate: resolve(
                args.prior_lambda_rate,
                kv.f64("prior_lambda_rate")?,
                dp.lambda_rate,
            ),
        },
        sampler: SamplerConfig {
            n_chains: resolve(args.n_chains, kv.usize("n_chains")?, dsmp.n_chains),
            burn_in: resolve(args.burn_in, kv.usize("burn_in")?, dsmp.burn_in),
            draws_per_chain: resolve(
                args.draws_per_chain,
                kv.usize("draws_per_chain")?,
                dsmp.draws_per_chain,
            ),
            target_accept: dsmp.target_accept,
        },
    })
}

fn write_history_csv(model: &TrainedModel, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;
    w.write_record(["epoch", "train_loss", "val_roc_auc", "running_mean"])
        .map_err(|e| Error::csv(display.clone(), e))?;
    for (i, row) in model
        .history
        .iter()
        .take(model.stopping_epoch)
        .enumerate()
    {
        w.write_record([
            (i + 1).to_string(),
            row.train_loss.to_string(),
            row.val_roc_auc.to_string(),
            row.running_mean.to_string(),
        ])
        .map_err(|e| Error::csv(display.clone(), e))?;
    }
    w.flush().map_err(|e| Error::io(display, e))
}

pub fn train(args: TrainArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let variant_name = args
        .variant
        .clone()
        .or_else(|| kv.get("variant").map(str::to_string))
        .ok_or_else(|| Error::Config("a model variant is required".into()))?;
    let variant: Variant = variant_name.parse()?;
    let seed = resolve(args.seed, kv.u64("seed")?, 0);

    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        batch_size: resolve(args.batch_size, kv.usize("batch_size")?, defaults.batch_size),
        alpha: resolve(args.alpha, kv.f64("alpha")?, defaults.alpha),
        max_epochs: resolve(args.max_epochs, kv.usize("max_epochs")?, defaults.max_epochs),
        early_stop_window: defaults.early_stop_window,
        u_bma: resolve(args.u_bma, kv.usize("u_bma")?, defaults.u_bma),
        u_val: resolve(args.u_val, kv.usize("u_val")?, defaults.u_val),
        lr: resolve(args.lr, kv.f64("lr")?, defaults.lr),
        seed,
        arch_override: None,
    };
    let spec = split_spec(&args.split, &kv)?;
    let settings = sampler_settings(&args, &kv)?;

    let ds = load_dataset(&args.data, &args.schema)?;
    let split = split_dataset(&ds, &spec, seed)?;
    let (train_std, scaler) = standardize(&split.train)?;
    let val_std = apply_scaler(&split.val, &scaler)?;

    let model = match variant {
        Variant::BaselineConditionalWeibull => fit_baseline(
            &split.train,
            &settings.prior,
            &settings.sampler,
            seeding::derive(seed, "posterior", 0),
        )?,
        Variant::McdropoutCox => {
            model::train(variant, &train_std, &val_std, &cfg, None, scaler)?
        }
        Variant::McmcCox | Variant::McmcMcdropoutCox => {
            let data = mcmc::intervals(&split.train);
            let draws = mcmc::sample_posterior(
                &data,
                &settings.prior,
                &settings.sampler,
                seeding::derive(seed, "posterior", 0),
            )?;
            if draws.degenerate_data {
                eprintln!("warning: training data has a single outcome class");
            }
            model::train(variant, &train_std, &val_std, &cfg, Some(draws), scaler)?
        }
    };

    ensure_out_dir(&args.out)?;
    save_checkpoint(&model, args.out.join("checkpoint.json"))?;
    write_history_csv(&model, &args.out.join("history.csv"))?;
    if let Some(draws) = &model.draws {
        mcmc::write_draws_csv(draws, args.out.join("draws.csv"))?;
        let diag = mcmc::diagnostics(draws);
        let text = serde_json::to_string_pretty(&diag)?;
        std::fs::write(args.out.join("diagnostics.json"), text)
            .map_err(|e| Error::io("diagnostics.json", e))?;
    }

    let mut resolved = Resolved::default();
    resolved.push("command", "train");
    resolved.push("data", args.data.display());
    resolved.push("schema", args.schema.display());
    resolved.push("variant", variant.name());
    resolved.push("seed", seed);
    resolved.push("batch_size", cfg.batch_size);
    resolved.push("alpha", cfg.alpha);
    resolved.push("max_epochs", cfg.max_epochs);
    resolved.push("early_stop_window", cfg.early_stop_window);
    resolved.push("u_val", cfg.u_val);
    resolved.push("u_bma", cfg.u_bma);
    resolved.push("lr", cfg.lr);
    push_split(&mut resolved, &spec);
    resolved.push("prior_c_shape", settings.prior.c_shape);
    resolved.push("prior_c_rate", settings.prior.c_rate);
    resolved.push("prior_lambda_shape", settings.prior.lambda_shape);
    resolved.push("prior_lambda_rate", settings.prior.lambda_rate);
    resolved.push("n_chains", settings.sampler.n_chains);
    resolved.push("burn_in", settings.sampler.burn_in);
    resolved.push("draws_per_chain", settings.sampler.draws_per_chain);
    resolved.write(args.out.join("train.resolved.kv"))?;

    match variant {
        Variant::BaselineConditionalWeibull => {
            let p = model.baseline.expect("baseline params");
            println!(
                "fitted {} on {} records: lambda = {:.5}, c = {:.4}",
                variant.name(),
                split.train.len(),
                p.lambda(),
                p.c()
            );
        }
        _ => {
            let best = &model.history[model.stopping_epoch - 1];
            println!(
                "trained {} for {} epochs, restored epoch {} (val ROC-AUC window mean {:.4})",
                variant.name(),
                model.history.len(),
                model.stopping_epoch,
                best.running_mean
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint path; repeat for several models.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Baseline checkpoint; enables the percent-change report.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// BMA samples per prediction.
    #[arg(long)]
    u: Option<usize>,
    #[command(flatten)]
    split: SplitArgs,
}

fn write_predictions_csv(
    records: &[Record],
    preds: &[model::Prediction],
    path: &Path,
) -> Result<()> {
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;
    w.write_record(["id", "p_fail_mean", "p_lo", "p_hi", "label"])
        .map_err(|e| Error::csv(display.clone(), e))?;
    for (rec, p) in records.iter().zip(preds) {
        w.write_record([
            rec.id.clone(),
            p.p_fail.to_string(),
            p.lo.to_string(),
            p.hi.to_string(),
            p.label.to_string(),
        ])
        .map_err(|e| Error::csv(display.clone(), e))?;
    }
    w.flush().map_err(|e| Error::io(display, e))
}

fn metric_row(
    name: &str,
    test: &Dataset,
    model: &TrainedModel,
    u: usize,
    seed: u64,
) -> Result<(MetricRow, Vec<model::Prediction>, Dataset)> {
    let test_std = apply_scaler(test, &model.scaler)?;
    let preds = predict_set(&test_std, model, u, seeding::derive(seed, "predict", 0))?;

    let truth: Vec<u8> = test_std.records.iter().map(|r| r.y).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let probs: Vec<f64> = preds.iter().map(|p| p.p_fail).collect();

    let prf1 = metrics::prf(&labels, &truth, 1)?;
    let prf0 = metrics::prf(&labels, &truth, 0)?;

    let single_class = truth.iter().all(|&y| y == 0) || truth.iter().all(|&y| y == 1);
    let (roc, pr, ctd) = if single_class {
        eprintln!("warning: test split has a single class; rank metrics undefined");
        (None, None, None)
    } else {
        let roc = metrics::roc_auc(&probs, &truth)?;
        let pr = metrics::pr_auc(&probs, &truth)?;
        let horizon = model::horizon_model(
            model,
            &test_std.records,
            u,
            seeding::derive(seed, "horizon", 0),
        )?;
        let inputs: Vec<EvalInput> = test_std
            .records
            .iter()
            .zip(&preds)
            .map(|(r, p)| EvalInput {
                p_fail: p.p_fail,
                label: p.label,
                y: r.y,
                t1: r.t1,
                t2: r.t2,
                tslrt: r.tslrt(),
            })
            .collect();
        let ctd = match metrics::ctd(&inputs, |i, delta| horizon.prob(i, delta)) {
            Ok(v) => Some(v),
            Err(Error::Undefined(msg)) => {
                eprintln!("warning: {msg}");
                None
            }
            Err(e) => return Err(e),
        };
        (Some(roc), Some(pr), ctd)
    };

    Ok((
        MetricRow {
            model: name.to_string(),
            p1: prf1.precision,
            r1: prf1.recall,
            f1: prf1.f1,
            p0: prf0.precision,
            r0: prf0.recall,
            f0: prf0.f1,
            roc_auc: roc,
            pr_auc: pr,
            ctd,
        },
        preds,
        test_std,
    ))
}

// Thin wrapper so predict keeps (records, model) argument order readable.
fn predict_set(
    test: &Dataset,
    model: &TrainedModel,
    u: usize,
    seed: u64,
) -> Result<Vec<model::Prediction>> {
    model::predict_set(model, &test.records, u, seed)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let seed = resolve(args.seed, kv.u64("seed")?, 0);
    let u = resolve(args.u, kv.usize("u")?, 100);
    let spec = split_spec(&args.split, &kv)?;

    let ds = load_dataset(&args.data, &args.schema)?;
    let split = split_dataset(&ds, &spec, seed)?;

    // baseline first (when given), then the listed models
    let mut paths: Vec<PathBuf> = Vec::new();
    if let Some(b) = &args.baseline {
        paths.push(b.clone());
    }
    for m in &args.models {
        if Some(m) != args.baseline.as_ref() {
            paths.push(m.clone());
        }
    }

    ensure_out_dir(&args.out)?;
    let names = unique_names(&paths);
    let mut rows = Vec::new();
    for (path, name) in paths.iter().zip(&names) {
        let model = load_model(path)?;
        let (row, preds, test_std) = metric_row(name, &split.test, &model, u, seed)?;
        write_predictions_csv(
            &test_std.records,
            &preds,
            &args.out.join(format!("predictions_{name}.csv")),
        )?;
        rows.push(row);
    }

    let baseline_name = args.baseline.as_ref().map(|_| names[0].clone());
    let report = MetricsReport::new(rows, baseline_name.as_deref());
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(args.out.join("metrics.json"), text)
        .map_err(|e| Error::io("metrics.json", e))?;

    let mut resolved = Resolved::default();
    resolved.push("command", "evaluate");
    resolved.push("data", args.data.display());
    resolved.push("schema", args.schema.display());
    resolved.push("seed", seed);
    resolved.push("u", u);
    push_split(&mut resolved, &spec);
    for path in &paths {
        resolved.push("model", path.display());
    }
    resolved.write(args.out.join("evaluate.resolved.kv"))?;

    for row in &report.absolute {
        println!(
            "{}: ROC-AUC {} PR-AUC {} Ctd {}",
            row.model,
            row.roc_auc.map_or("n/a".into(), |v| format!("{v:.4}")),
            row.pr_auc.map_or("n/a".into(), |v| format!("{v:.4}")),
            row.ctd.map_or("n/a".into(), |v| format!("{v:.4}")),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------
// curves
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct CurvesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Dataset CSV (only needed with --record-id).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Record whose features become the curve template; defaults to the
    /// all-zero (population mean) template in standardized space.
    #[arg(long)]
    record_id: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    u: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

pub fn curves(args: CurvesArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let seed = resolve(args.seed, kv.u64("seed")?, 0);
    let u = resolve(args.u, kv.usize("u")?, 100);
    let t_max = resolve(args.t_max, kv.f64("t_max")?, 60.0);
    let points = resolve(args.points, kv.usize("points")?, 100);
    if points < 2 || !(t_max > 0.0) {
        return Err(Error::Config("curves need points >= 2 and t_max > 0".into()));
    }

    let record_id = args
        .record_id
        .clone()
        .or_else(|| kv.get("record_id").map(str::to_string));
    let raw_template: Option<Record> = match &record_id {
        None => None,
        Some(id) => {
            let (data, schema) = match (&args.data, &args.schema) {
                (Some(d), Some(s)) => (d, s),
                _ => {
                    return Err(Error::Config(
                        "--record-id requires --data and --schema".into(),
                    ))
                }
            };
            let ds = load_dataset(data, schema)?;
            Some(
                ds.records
                    .iter()
                    .find(|r| &r.id == id)
                    .ok_or_else(|| Error::UnknownId(id.clone()))?
                    .clone(),
            )
        }
    };

    let grid: Vec<f64> = (0..points)
        .map(|k| t_max * k as f64 / (points - 1) as f64)
        .collect();

    ensure_out_dir(&args.out)?;
    let path = args.out.join("curves.csv");
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(display.clone(), e))?;
    w.write_record(["t", "s_mean", "s_lo", "s_hi", "model_name"])
        .map_err(|e| Error::csv(display.clone(), e))?;

    let names = unique_names(&args.models);
    for (mp, name) in args.models.iter().zip(&names) {
        let model = load_model(mp)?;
        let d = model.scaler.columns.len();
        let template: Vec<f64> = match &raw_template {
            Some(rec) => model.scaler.transform_vec(&rec.x),
            None => vec![0.0; d],
        };
        let curve = survival_curve(
            &model,
            &template,
            &grid,
            u,
            seeding::derive(seed, "curve", 0),
        )?;
        for point in curve {
            w.write_record([
                point.t.to_string(),
                point.s_mean.to_string(),
                point.s_lo.to_string(),
                point.s_hi.to_string(),
                name.to_string(),
            ])
            .map_err(|e| Error::csv(display.clone(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(display, e))?;

    let mut resolved = Resolved::default();
    resolved.push("command", "curves");
    resolved.push("seed", seed);
    resolved.push("u", u);
    resolved.push("t_max", t_max);
    resolved.push("points", points);
    if let Some(id) = &record_id {
        resolved.push("record_id", id);
    }
    for mp in &args.models {
        resolved.push("model", mp.display());
    }
    resolved.write(args.out.join("curves.resolved.kv"))?;

    println!(
        "wrote {} curve rows for {} model(s)",
        points * args.models.len(),
        args.models.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampled permutations per record.
    #[arg(long)]
    k: Option<usize>,
    /// Records from the test split to explain.
    #[arg(long)]
    n_records: Option<usize>,
    /// Background sample size from the training split.
    #[arg(long)]
    background: Option<usize>,
    /// BMA samples inside the (seed-frozen) explained function.
    #[arg(long)]
    u_explain: Option<usize>,
    #[command(flatten)]
    split: SplitArgs,
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    let kv = Kv::load(args.config.as_deref())?;
    let seed = resolve(args.seed, kv.u64("seed")?, 0);
    let k = resolve(args.k, kv.usize("k")?, relikit::explain::DEFAULT_PERMUTATIONS);
    let n_records = resolve(args.n_records, kv.usize("n_records")?, 10);
    let n_background = resolve(
        args.background,
        kv.usize("background")?,
        relikit::explain::DEFAULT_BACKGROUND,
    );
    let u_explain = resolve(args.u_explain, kv.usize("u_explain")?, 25);
    let spec = split_spec(&args.split, &kv)?;

    let ds = load_dataset(&args.data, &args.schema)?;
    let split = split_dataset(&ds, &spec, seed)?;
    let model = load_model(&args.model)?;

    let train_std = apply_scaler(&split.train, &model.scaler)?;
    let test_std = apply_scaler(&split.test, &model.scaler)?;

    let mut bg_rng = seeding::rng(seed, "background", 0);
    let mut background: Vec<Vec<f64>> =
        train_std.records.iter().map(|r| r.x.clone()).collect();
    seeding::shuffle(&mut background, &mut bg_rng);
    background.truncate(n_background.max(1));

    let mut pick_rng = seeding::rng(seed, "explain-pick", 0);
    let mut picked: Vec<&Record> = test_std.records.iter().collect();
    seeding::shuffle(&mut picked, &mut pick_rng);
    picked.truncate(n_records.max(1));

    let mut rows = Vec::new();
    let mut attribs = Vec::new();
    for (i, rec) in picked.iter().enumerate() {
        // frozen seed: the explained function must be deterministic
        let g_seed = seeding::derive(seed, "explain-g", i as u64);
        let (t1, t2) = (rec.t1, rec.t2);
        let g = |x: &[f64]| {
            let probe = Record::new("probe".into(), x.to_vec(), 0, t1, t2).expect("valid probe");
            model::predict_bma(&model, &probe, u_explain, g_seed)
                .expect("prediction over valid probe")
                .p_fail
        };
        let attribution = shapley_mc(
            g,
            &rec.x,
            &background,
            k,
            seeding::derive(seed, "shapley", i as u64),
        )?;
        rows.push((rec.id.clone(), rec.x.clone(), attribution.clone()));
        attribs.push(attribution);
    }

    ensure_out_dir(&args.out)?;
    write_attributions_csv(&rows, &test_std.feature_names, args.out.join("attributions.csv"))?;
    let ranking = global_importance(&attribs)?;
    write_ranking_json(
        &ranking,
        &test_std.feature_names,
        args.out.join("ranking.json"),
    )?;

    let mut resolved = Resolved::default();
    resolved.push("command", "explain");
    resolved.push("data", args.data.display());
    resolved.push("schema", args.schema.display());
    resolved.push("model", args.model.display());
    resolved.push("seed", seed);
    resolved.push("k", k);
    resolved.push("n_records", n_records);
    resolved.push("background", background.len());
    resolved.push("u_explain", u_explain);
    push_split(&mut resolved, &spec);
    resolved.write(args.out.join("explain.resolved.kv"))?;

    let top: Vec<&str> = ranking
        .iter()
        .take(4)
        .map(|&(j, _)| test_std.feature_names[j].as_str())
        .collect();
    println!(
        "explained {} records with K = {k}; top features: {}",
        rows.len(),
        top.join(", ")
    );
    Ok(())
}

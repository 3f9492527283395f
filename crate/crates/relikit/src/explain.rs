//! Monte-Carlo Shapley feature attributions.
//!
//! Classic permutation sampling: each of K permutations draws one
//! background record, then walks the features in permutation order,
//! switching them from the background value to the explained record's
//! value and crediting each feature with the prediction delta it causes.
//! The per-permutation deltas telescope, so the attribution sum equals
//! `prediction - base` by construction, where the base value is the mean
//! prediction over the K sampled background records.
//!
//! The explained function must be deterministic — explain a BMA
//! probability with a frozen seed, otherwise Monte-Carlo noise shows up
//! as attribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::seeding;

/// Default number of sampled permutations.
pub const DEFAULT_PERMUTATIONS: usize = 500;

/// Default background sample size drawn from training data.
pub const DEFAULT_BACKGROUND: usize = 256;

/// Signed per-feature contributions to one record's prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Per-feature Shapley estimate.
    pub values: Vec<f64>,
    /// Per-feature Monte-Carlo standard error of that estimate.
    pub mcse: Vec<f64>,
    /// Mean prediction over the sampled background records.
    pub base: f64,
    /// Prediction for the explained record.
    pub prediction: f64,
}

/// Permutation-sampling Shapley estimate of `g` at `x` against a
/// background sample. Deterministic given `seed`; permutations are
/// independent derived streams, so the loop parallelizes without
/// changing the estimate.
pub fn shapley_mc<G>(
    g: G,
    x: &[f64],
    background: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Attribution>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    if background.is_empty() {
        return Err(Error::Validation("background sample is empty".into()));
    }
    if k == 0 {
        return Err(Error::Validation("need at least one permutation".into()));
    }
    let d = x.len();
    if background.iter().any(|z| z.len() != d) {
        return Err(Error::Validation(
            "background records must match the explained record's width".into(),
        ));
    }

    // One pass per permutation: (per-feature deltas, background prediction).
    let passes: Vec<(Vec<f64>, f64)> = exec::map_indexed(k, |kk| {
        let mut rng = seeding::rng(seed, "perm", kk as u64);
        let z = &background[rng.random_range(0..background.len())];

        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }

        let mut current = z.clone();
        let mut prev = g(&current);
        let z_pred = prev;
        let mut deltas = vec![0.0; d];
        for &feat in &perm {
            current[feat] = x[feat];
            let val = g(&current);
            deltas[feat] = val - prev;
            prev = val;
        }
        (deltas, z_pred)
    });

    let kf = k as f64;
    let mut values = vec![0.0; d];
    let mut base = 0.0;
    for (deltas, z_pred) in &passes {
        for (v, dl) in values.iter_mut().zip(deltas) {
            *v += dl;
        }
        base += z_pred;
    }
    for v in &mut values {
        *v /= kf;
    }
    base /= kf;

    let mut mcse = vec![0.0; d];
    if k > 1 {
        for (deltas, _) in &passes {
            for ((m, dl), v) in mcse.iter_mut().zip(deltas).zip(&values) {
                *m += (dl - v) * (dl - v);
            }
        }
        for m in &mut mcse {
            *m = (*m / (kf - 1.0) / kf).sqrt();
        }
    }

    Ok(Attribution {
        values,
        mcse,
        base,
        prediction: g(x),
    })
}

/// Features ranked by mean absolute attribution (descending), ties broken
/// by feature index.
pub fn global_importance(attribs: &[Attribution]) -> Result<Vec<(usize, f64)>> {
    let first = attribs
        .first()
        .ok_or_else(|| Error::Validation("no attributions to rank".into()))?;
    let d = first.values.len();
    if attribs.iter().any(|a| a.values.len() != d) {
        return Err(Error::Validation("ragged attribution widths".into()));
    }
    let n = attribs.len() as f64;
    let mut ranked: Vec<(usize, f64)> = (0..d)
        .map(|j| {
            let mean_abs = attribs.iter().map(|a| a.values[j].abs()).sum::<f64>() / n;
            (j, mean_abs)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Export per-record attributions (`id, feature, value, attribution`).
pub fn write_attributions_csv(
    rows: &[(String, Vec<f64>, Attribution)],
    feature_names: &[String],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;
    w.write_record(["id", "feature", "value", "attribution"])
        .map_err(|e| Error::csv(display.clone(), e))?;
    for (id, x, attrib) in rows {
        for (j, name) in feature_names.iter().enumerate() {
            w.write_record([
                id.clone(),
                name.clone(),
                x[j].to_string(),
                attrib.values[j].to_string(),
            ])
            .map_err(|e| Error::csv(display.clone(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(display, e))
}

/// Global ranking as JSON (`[{feature, mean_abs_attribution}]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_abs_attribution: f64,
}

pub fn write_ranking_json(
    ranked: &[(usize, f64)],
    feature_names: &[String],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let rows: Vec<RankedFeature> = ranked
        .iter()
        .map(|&(j, v)| RankedFeature {
            feature: feature_names[j].clone(),
            mean_abs_attribution: v,
        })
        .collect();
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

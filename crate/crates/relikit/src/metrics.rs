//! Classification and survival metrics.
//!
//! The rank metrics accumulate integer pair credits (2 per win, 1 per
//! tie) before a single final division, so the fast implementations are
//! bit-identical to their O(n^2) brute-force counterparts — the
//! acceptance suite relies on that exactness.
//!
//! The time-dependent concordance follows the Somers'-d reading: the
//! horizon of record i is its own fleet interval, halved when its event
//! is a failure; a pair (i, j) is comparable when `delta_i > delta_j`
//! strictly (ties in time incomparable) and j failed; both model
//! probabilities are evaluated over the comparator's horizon `delta_j`;
//! probability ties earn half credit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// Everything the metric suite needs about one evaluated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalInput {
    /// Model failure probability over the record's own interval.
    pub p_fail: f64,
    /// Hard label thresholded from `p_fail`.
    pub label: u8,
    /// Observed outcome.
    pub y: u8,
    pub t1: f64,
    pub t2: f64,
    pub tslrt: f64,
}

/// Precision/recall/F for one class; zero-denominator cases report 0.0
/// with the matching flag cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

pub fn prf(preds: &[u8], truth: &[u8], positive: u8) -> Result<Prf> {
    if preds.is_empty() || preds.len() != truth.len() {
        return Err(Error::Validation(
            "prf needs equal-length nonempty labels".into(),
        ));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fneg = 0u64;
    for (&p, &t) in preds.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision_defined = tp + fp > 0;
    let recall_defined = tp + fneg > 0;
    let precision = if precision_defined {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if recall_defined {
        tp as f64 / (tp + fneg) as f64
    } else {
        0.0
    };
    let f1_defined = precision_defined && recall_defined && precision + recall > 0.0;
    let f1 = if f1_defined {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Prf {
        precision,
        recall,
        f1,
        precision_defined,
        recall_defined,
        f1_defined,
    })
}

/// ROC-AUC as the normalized Mann-Whitney U statistic; ties get half
/// credit. Errors when only one class is present.
pub fn roc_auc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(Error::Validation(
            "roc_auc needs equal-length nonempty inputs".into(),
        ));
    }
    let n_pos = truth.iter().filter(|&&y| y == 1).count() as u64;
    let n_neg = truth.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(
            "roc_auc undefined with a single class".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // sweep tied groups in ascending score order; credit2 counts
    // 2 per (pos above neg) pair and 1 per tied pair
    let mut credit2: u64 = 0;
    let mut cum_neg: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut pos_in_group = 0u64;
        let mut neg_in_group = 0u64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if truth[order[j]] == 1 {
                pos_in_group += 1;
            } else {
                neg_in_group += 1;
            }
            j += 1;
        }
        credit2 += 2 * pos_in_group * cum_neg + pos_in_group * neg_in_group;
        cum_neg += neg_in_group;
        i = j;
    }
    Ok(credit2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Area under the precision-recall step curve (no interpolation):
/// `sum (R_k - R_{k-1}) * P_k` over thresholds at each distinct score,
/// descending. Errors when no positives are present.
pub fn pr_auc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(Error::Validation(
            "pr_auc needs equal-length nonempty inputs".into(),
        ));
    }
    let n_pos = truth.iter().filter(|&&y| y == 1).count() as u64;
    if n_pos == 0 {
        return Err(Error::Undefined("pr_auc undefined without positives".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut auc = 0.0;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut recall_prev = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if truth[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    Ok(auc)
}

/// Time-dependent concordance index.
///
/// `f(i, delta)` must return the model's failure probability for record i
/// over horizon `delta` from its own conditioning age. Returns an error
/// naming the pair count when no pair is comparable.
pub fn ctd<F>(inputs: &[EvalInput], f: F) -> Result<f64>
where
    F: Fn(usize, f64) -> f64 + Sync + Send,
{
    if inputs.len() < 2 {
        return Err(Error::Validation("ctd needs at least 2 records".into()));
    }
    // Delta is the record's own interval, halved for failure events.
    let deltas: Vec<f64> = inputs
        .iter()
        .map(|e| if e.y == 1 { 0.5 * e.tslrt } else { e.tslrt })
        .collect();

    let partials = exec::map_indexed(inputs.len(), |i| {
        let mut credit2 = 0u64;
        let mut pairs = 0u64;
        for j in 0..inputs.len() {
            if i == j || inputs[j].y != 1 || deltas[i] <= deltas[j] {
                continue;
            }
            pairs += 1;
            let fi = f(i, deltas[j]);
            let fj = f(j, deltas[j]);
            if fi < fj {
                credit2 += 2;
            } else if fi == fj {
                credit2 += 1;
            }
        }
        (credit2, pairs)
    });
    let credit2: u64 = partials.iter().map(|p| p.0).sum();
    let pairs: u64 = partials.iter().map(|p| p.1).sum();

    if pairs == 0 {
        return Err(Error::Undefined(format!(
            "ctd undefined: 0 comparable pairs among {} records",
            inputs.len()
        )));
    }
    Ok(credit2 as f64 / (2 * pairs) as f64)
}

/// Signed percent change `(v2 - v1) / |v1| * 100`; `None` when the
/// baseline value is zero.
pub fn percent_change(v1: f64, v2: f64) -> Option<f64> {
    if v1 == 0.0 {
        None
    } else {
        Some((v2 - v1) / v1.abs() * 100.0)
    }
}

/// One model's absolute metrics in the report table layout
/// (`P1 R1 F1 P0 R0 F0 ROC-AUC PR-AUC Ctd`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub p1: f64,
    pub r1: f64,
    pub f1: f64,
    pub p0: f64,
    pub r0: f64,
    pub f0: f64,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub ctd: Option<f64>,
}

impl MetricRow {
    fn fields(&self) -> [Option<f64>; 9] {
        [
            Some(self.p1),
            Some(self.r1),
            Some(self.f1),
            Some(self.p0),
            Some(self.r0),
            Some(self.f0),
            self.roc_auc,
            self.pr_auc,
            self.ctd,
        ]
    }
}

/// Percent change of each metric against the baseline row; `None` where
/// either side is undefined or the baseline is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentChangeRow {
    pub model: String,
    pub p1: Option<f64>,
    pub r1: Option<f64>,
    pub f1: Option<f64>,
    pub p0: Option<f64>,
    pub r0: Option<f64>,
    pub f0: Option<f64>,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub ctd: Option<f64>,
}

/// Metric report: absolute values per model plus percent change against
/// a designated baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub absolute: Vec<MetricRow>,
    pub baseline: Option<String>,
    pub percent_change_vs_baseline: Vec<PercentChangeRow>,
}

impl MetricsReport {
    pub fn new(absolute: Vec<MetricRow>, baseline: Option<&str>) -> Self {
        let pct = match baseline.and_then(|b| absolute.iter().find(|r| r.model == b)) {
            None => Vec::new(),
            Some(base) => {
                let base_fields = base.fields();
                absolute
                    .iter()
                    .map(|row| {
                        let delta: Vec<Option<f64>> = row
                            .fields()
                            .iter()
                            .zip(&base_fields)
                            .map(|(v2, v1)| match (v1, v2) {
                                (Some(v1), Some(v2)) => percent_change(*v1, *v2),
                                _ => None,
                            })
                            .collect();
                        PercentChangeRow {
                            model: row.model.clone(),
                            p1: delta[0],
                            r1: delta[1],
                            f1: delta[2],
                            p0: delta[3],
                            r0: delta[4],
                            f0: delta[5],
                            roc_auc: delta[6],
                            pr_auc: delta[7],
                            ctd: delta[8],
                        }
                    })
                    .collect()
            }
        };
        Self {
            absolute,
            baseline: baseline.map(str::to_string),
            percent_change_vs_baseline: pct,
        }
    }
}

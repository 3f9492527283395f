//! Interval-censored reliability records: ingestion, encoding,
//! standardization, stratified splitting, and batch sampling.
//!
//! The on-disk form is a plain CSV with required columns `id, y, t1, t2`
//! followed by feature columns. An encoding manifest (key-value text, one
//! `column = kind` line each) declares how each feature column is encoded:
//! `continuous`, `ordinal:<level,list>`, or `categorical` (levels
//! discovered from the data, sorted; or pinned with
//! `categorical:<level,list>`). Categorical columns expand to one-hot
//! features named `col=level`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Batch size the training protocol defaults to.
pub const DEFAULT_BATCH_SIZE: usize = 512;

/// One weapon-system test event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Opaque unit identifier.
    pub id: String,
    /// Encoded feature vector.
    pub x: Vec<f64>,
    /// Test outcome: 1 = failure, 0 = pass.
    pub y: u8,
    /// Age at the previous recertification pass.
    pub t1: f64,
    /// Age at the current test.
    pub t2: f64,
}

impl Record {
    pub fn new(id: String, x: Vec<f64>, y: u8, t1: f64, t2: f64) -> Result<Self> {
        if y > 1 {
            return Err(Error::Validation(format!("record {id}: y must be 0 or 1")));
        }
        if !t1.is_finite() || !t2.is_finite() || t1 < 0.0 {
            return Err(Error::Validation(format!(
                "record {id}: times must be finite with t1 >= 0 (t1={t1}, t2={t2})"
            )));
        }
        if t2 < t1 {
            return Err(Error::Validation(format!(
                "record {id}: t2 < t1 ({t2} < {t1})"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "record {id}: non-finite feature value"
            )));
        }
        Ok(Self { id, x, y, t1, t2 })
    }

    /// Time since the last recertification test (the fleet-exposure interval).
    pub fn tslrt(&self) -> f64 {
        self.t2 - self.t1
    }
}

/// Declared encoding of a raw input column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    /// Levels in rank order; encoded as their index.
    Ordinal { levels: Vec<String> },
    /// One-hot encoded. Empty `levels` means "discover from data, sorted".
    Categorical { levels: Vec<String> },
}

/// Maps raw column names to their [`ColumnKind`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingManifest {
    pub columns: Vec<(String, ColumnKind)>,
}

impl EncodingManifest {
    pub fn get(&self, name: &str) -> Option<&ColumnKind> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| k)
    }

    /// Manifest that passes every listed column through as continuous.
    pub fn identity(names: &[String]) -> Self {
        Self {
            columns: names
                .iter()
                .map(|n| (n.clone(), ColumnKind::Continuous))
                .collect(),
        }
    }

    /// Parse the key-value text form (`column = kind` per line, `#` comments).
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (name, value) in parse_kv_lines(text)? {
            let kind = if value == "continuous" {
                ColumnKind::Continuous
            } else if value == "categorical" {
                ColumnKind::Categorical { levels: Vec::new() }
            } else if let Some(rest) = value.strip_prefix("categorical:") {
                ColumnKind::Categorical {
                    levels: split_levels(rest),
                }
            } else if let Some(rest) = value.strip_prefix("ordinal:") {
                let levels = split_levels(rest);
                if levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "ordinal column {name} needs a level list"
                    )));
                }
                ColumnKind::Ordinal { levels }
            } else {
                return Err(Error::Schema(format!(
                    "column {name}: unknown kind {value:?} (want continuous | ordinal:<levels> | categorical[:<levels>])"
                )));
            };
            columns.push((name, kind));
        }
        Ok(Self { columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.columns {
            let value = match kind {
                ColumnKind::Continuous => "continuous".to_string(),
                ColumnKind::Ordinal { levels } => format!("ordinal:{}", levels.join(",")),
                ColumnKind::Categorical { levels } if levels.is_empty() => {
                    "categorical".to_string()
                }
                ColumnKind::Categorical { levels } => format!("categorical:{}", levels.join(",")),
            };
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_kv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn split_levels(s: &str) -> Vec<String> {
    s.split(',')
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Shared parser for the plain `key = value` config format.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                row: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Kind of an encoded feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    OneHot,
}

/// An encoded dataset: records plus the feature-column metadata needed to
/// interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    /// Input schema with discovered categorical levels filled in.
    pub manifest: EncodingManifest,
}

impl Dataset {
    pub fn new(
        records: Vec<Record>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        manifest: EncodingManifest,
    ) -> Result<Self> {
        let d = feature_names.len();
        if feature_kinds.len() != d {
            return Err(Error::Schema(format!(
                "feature_kinds has {} entries for {d} columns",
                feature_kinds.len()
            )));
        }
        let unique: BTreeSet<&String> = feature_names.iter().collect();
        if unique.len() != d {
            return Err(Error::Schema("duplicate feature names".into()));
        }
        if let Some(r) = records.iter().find(|r| r.x.len() != d) {
            return Err(Error::Schema(format!(
                "record {} has {} features, dataset has {d}",
                r.id,
                r.x.len()
            )));
        }
        Ok(Self {
            records,
            feature_names,
            feature_kinds,
            manifest,
        })
    }

    /// Feature dimensionality after encoding.
    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// New dataset holding clones of the records at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            manifest: self.manifest.clone(),
        }
    }

    pub fn n_failures(&self) -> usize {
        self.records.iter().filter(|r| r.y == 1).count()
    }
}

const REQUIRED_COLUMNS: [&str; 4] = ["id", "y", "t1", "t2"];

/// Load a CSV file and encode it per the manifest.
pub fn load_csv(path: impl AsRef<Path>, manifest: &EncodingManifest) -> Result<Dataset> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_csv_str(&text, manifest).map_err(|e| match e {
        Error::Parse { row, msg } => Error::Parse {
            row,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

/// [`load_csv`] over an in-memory string.
pub fn load_csv_str(text: &str, manifest: &EncodingManifest) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    for required in REQUIRED_COLUMNS {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema(format!("missing required column {required}")));
        }
    }
    let col_idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (id_col, y_col, t1_col, t2_col) =
        (col_idx("id"), col_idx("y"), col_idx("t1"), col_idx("t2"));

    // Feature columns in header order; all must be declared.
    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !REQUIRED_COLUMNS.contains(&h.as_str()))
        .map(|(i, h)| (i, h.clone()))
        .collect();
    for (_, name) in &feature_cols {
        if manifest.get(name).is_none() {
            return Err(Error::Schema(format!(
                "column {name} present in data but not in manifest"
            )));
        }
    }
    for (name, _) in &manifest.columns {
        if !feature_cols.iter().any(|(_, n)| n == name) {
            return Err(Error::Schema(format!(
                "manifest column {name} missing from data"
            )));
        }
    }

    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Schema(format!("unreadable csv: {e}")))?;

    // Resolve categorical levels: pinned by the manifest or discovered sorted.
    let mut resolved = EncodingManifest::default();
    for (raw_idx, name) in &feature_cols {
        let kind = manifest.get(name).unwrap();
        let resolved_kind = match kind {
            ColumnKind::Categorical { levels } if levels.is_empty() => {
                let found: BTreeSet<String> = rows
                    .iter()
                    .filter_map(|row| row.get(*raw_idx))
                    .map(|v| v.trim().to_string())
                    .collect();
                ColumnKind::Categorical {
                    levels: found.into_iter().collect(),
                }
            }
            other => other.clone(),
        };
        resolved.columns.push((name.clone(), resolved_kind));
    }

    // Encoded feature layout.
    let mut feature_names = Vec::new();
    let mut feature_kinds = Vec::new();
    for (name, kind) in &resolved.columns {
        match kind {
            ColumnKind::Continuous => {
                feature_names.push(name.clone());
                feature_kinds.push(FeatureKind::Continuous);
            }
            ColumnKind::Ordinal { .. } => {
                feature_names.push(name.clone());
                feature_kinds.push(FeatureKind::Ordinal);
            }
            ColumnKind::Categorical { levels } => {
                for level in levels {
                    feature_names.push(format!("{name}={level}"));
                    feature_kinds.push(FeatureKind::OneHot);
                }
            }
        }
    }

    let parse_num = |row: usize, field: &str, what: &str| -> Result<f64> {
        let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
            row,
            msg: format!("non-numeric value {field:?} in column {what}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                msg: format!("non-finite value {field:?} in column {what}"),
            });
        }
        Ok(v)
    };

    let mut records = Vec::with_capacity(rows.len());
    let mut interval_violations: Vec<String> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let rownum = i + 1;
        let get = |col: usize, what: &str| -> Result<&str> {
            row.get(col)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| Error::Parse {
                    row: rownum,
                    msg: format!("missing value in column {what}"),
                })
        };
        let id = get(id_col, "id")?.trim().to_string();
        let y_raw = parse_num(rownum, get(y_col, "y")?, "y")?;
        if y_raw != 0.0 && y_raw != 1.0 {
            return Err(Error::Parse {
                row: rownum,
                msg: format!("y must be 0 or 1, got {y_raw}"),
            });
        }
        let t1 = parse_num(rownum, get(t1_col, "t1")?, "t1")?;
        let t2 = parse_num(rownum, get(t2_col, "t2")?, "t2")?;
        if t1 < 0.0 {
            return Err(Error::Parse {
                row: rownum,
                msg: format!("t1 must be >= 0, got {t1}"),
            });
        }
        if t2 < t1 {
            interval_violations.push(id.clone());
            continue;
        }

        let mut x = Vec::with_capacity(feature_names.len());
        for ((raw_idx, name), (_, kind)) in feature_cols.iter().zip(&resolved.columns) {
            let field = get(*raw_idx, name)?;
            match kind {
                ColumnKind::Continuous => x.push(parse_num(rownum, field, name)?),
                ColumnKind::Ordinal { levels } => {
                    let value = field.trim();
                    let pos =
                        levels
                            .iter()
                            .position(|l| l == value)
                            .ok_or_else(|| Error::Parse {
                                row: rownum,
                                msg: format!(
                                    "value {value:?} not in ordinal levels of {name} ({levels:?})"
                                ),
                            })?;
                    x.push(pos as f64);
                }
                ColumnKind::Categorical { levels } => {
                    let value = field.trim();
                    let pos =
                        levels
                            .iter()
                            .position(|l| l == value)
                            .ok_or_else(|| Error::Parse {
                                row: rownum,
                                msg: format!(
                                    "value {value:?} not in categorical levels of {name} ({levels:?})"
                                ),
                            })?;
                    for k in 0..levels.len() {
                        x.push(if k == pos { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        records.push(Record::new(id, x, y_raw as u8, t1, t2)?);
    }

    if !interval_violations.is_empty() {
        return Err(Error::Validation(format!(
            "t2 < t1 for ids: {}",
            interval_violations.join(", ")
        )));
    }

    Dataset::new(records, feature_names, feature_kinds, resolved)
}

/// Write the encoded dataset back out as CSV (`id, y, t1, t2, <features>`).
///
/// Floats print in shortest round-trip form, so reloading with
/// [`EncodingManifest::identity`] reproduces the values bit for bit.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(display.clone(), e))?;
    let mut header: Vec<String> = REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header)
        .map_err(|e| Error::csv(display.clone(), e))?;
    for r in &ds.records {
        let mut row = vec![
            r.id.clone(),
            r.y.to_string(),
            r.t1.to_string(),
            r.t2.to_string(),
        ];
        row.extend(r.x.iter().map(|v| v.to_string()));
        w.write_record(&row)
            .map_err(|e| Error::csv(display.clone(), e))?;
    }
    w.flush().map_err(|e| Error::io(display, e))
}

/// How a feature column was (or was not) rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnScale {
    Standardized { mean: f64, std: f64 },
    /// Non-continuous column, left alone.
    Passthrough,
    /// Continuous column with zero variance, left alone and flagged.
    ZeroVariance,
}

/// Per-column scaling fitted by [`standardize`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScale>,
}

impl ScalerParams {
    /// Identity scaler for `d` columns.
    pub fn passthrough(d: usize) -> Self {
        Self {
            columns: vec![ColumnScale::Passthrough; d],
        }
    }

    pub fn transform_vec(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.columns)
            .map(|(&v, s)| match s {
                ColumnScale::Standardized { mean, std } => (v - mean) / std,
                _ => v,
            })
            .collect()
    }

    pub fn invert_vec(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.columns)
            .map(|(&v, s)| match s {
                ColumnScale::Standardized { mean, std } => v * std + mean,
                _ => v,
            })
            .collect()
    }
}

/// Z-score the continuous columns (sample std, n-1 denominator).
///
/// One-hot and ordinal columns pass through; zero-variance continuous
/// columns pass through flagged.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, ScalerParams)> {
    if ds.is_empty() {
        return Err(Error::Validation(
            "cannot standardize an empty dataset".into(),
        ));
    }
    let n = ds.len() as f64;
    let mut columns = Vec::with_capacity(ds.d());
    for j in 0..ds.d() {
        if ds.feature_kinds[j] != FeatureKind::Continuous {
            columns.push(ColumnScale::Passthrough);
            continue;
        }
        let mean = ds.records.iter().map(|r| r.x[j]).sum::<f64>() / n;
        if ds.len() < 2 {
            columns.push(ColumnScale::ZeroVariance);
            continue;
        }
        let ss = ds
            .records
            .iter()
            .map(|r| (r.x[j] - mean).powi(2))
            .sum::<f64>();
        let std = (ss / (n - 1.0)).sqrt();
        if std > 0.0 && std.is_finite() {
            columns.push(ColumnScale::Standardized { mean, std });
        } else {
            columns.push(ColumnScale::ZeroVariance);
        }
    }
    let scaler = ScalerParams { columns };
    Ok((apply_scaler(ds, &scaler)?, scaler))
}

/// Apply a fitted scaler to another dataset with the same layout.
pub fn apply_scaler(ds: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    if scaler.columns.len() != ds.d() {
        return Err(Error::Schema(format!(
            "scaler has {} columns, dataset has {}",
            scaler.columns.len(),
            ds.d()
        )));
    }
    let mut out = ds.clone();
    for r in &mut out.records {
        r.x = scaler.transform_vec(&r.x);
    }
    Ok(out)
}

/// Undo a fitted scaler (inverse of [`apply_scaler`]).
pub fn invert_scaler(ds: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    if scaler.columns.len() != ds.d() {
        return Err(Error::Schema(format!(
            "scaler has {} columns, dataset has {}",
            scaler.columns.len(),
            ds.d()
        )));
    }
    let mut out = ds.clone();
    for r in &mut out.records {
        r.x = scaler.invert_vec(&r.x);
    }
    Ok(out)
}

/// Split fractions and age binning for [`stratified_split`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the whole dataset held out as test.
    pub test_frac: f64,
    /// Fraction of the remaining train partition held out as validation.
    pub val_frac_of_train: f64,
    /// Quantile bins on t2 used for age stratification.
    pub n_age_bins: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_frac: 0.2,
            val_frac_of_train: 0.2,
            n_age_bins: 5,
        }
    }
}

/// Result of [`stratified_split`].
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// True when some (age-bin, y) stratum was too small and the split
    /// fell back to stratifying on y alone.
    pub y_only_fallback: bool,
}

/// Deterministic stratified train/val/test split on joint
/// (t2-quantile-bin, y) strata.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<SplitOutcome> {
    if spec.n_age_bins == 0 {
        return Err(Error::Config("n_age_bins must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&spec.test_frac) || !(0.0..1.0).contains(&spec.val_frac_of_train) {
        return Err(Error::Config("split fractions must lie in [0, 1)".into()));
    }
    if ds.len() < spec.n_age_bins * 2 {
        return Err(Error::Validation(format!(
            "need at least {} records for {} age bins, have {}",
            spec.n_age_bins * 2,
            spec.n_age_bins,
            ds.len()
        )));
    }

    let edges = quantile_edges(ds, spec.n_age_bins);
    let bin_of = |t2: f64| edges.iter().filter(|&&e| t2 > e).count();

    let build_strata = |use_age: bool| -> Vec<Vec<usize>> {
        let mut strata: std::collections::BTreeMap<(usize, u8), Vec<usize>> = Default::default();
        for (i, r) in ds.records.iter().enumerate() {
            let key = if use_age { (bin_of(r.t2), r.y) } else { (0, r.y) };
            strata.entry(key).or_default().push(i);
        }
        strata.into_values().collect()
    };

    const N_SPLITS: usize = 3;
    let mut strata = build_strata(spec.n_age_bins > 1);
    let mut y_only_fallback = false;
    if spec.n_age_bins > 1 && strata.iter().any(|s| s.len() < N_SPLITS) {
        strata = build_strata(false);
        y_only_fallback = true;
    }

    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (k, stratum) in strata.iter().enumerate() {
        let mut idx = stratum.clone();
        seeding::shuffle(&mut idx, &mut seeding::rng(seed, "split", k as u64));
        let m = idx.len();
        let n_test = ((m as f64) * spec.test_frac).round() as usize;
        let n_trainval = m - n_test;
        let n_val = ((n_trainval as f64) * spec.val_frac_of_train).round() as usize;
        test_idx.extend_from_slice(&idx[..n_test]);
        val_idx.extend_from_slice(&idx[n_test..n_test + n_val]);
        train_idx.extend_from_slice(&idx[n_test + n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok(SplitOutcome {
        train: ds.subset(&train_idx),
        val: ds.subset(&val_idx),
        test: ds.subset(&test_idx),
        y_only_fallback,
    })
}

fn quantile_edges(ds: &Dataset, n_bins: usize) -> Vec<f64> {
    let mut t2s: Vec<f64> = ds.records.iter().map(|r| r.t2).collect();
    t2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (1..n_bins)
        .map(|k| {
            let pos = (t2s.len() * k) / n_bins;
            t2s[pos.min(t2s.len() - 1)]
        })
        .collect()
}

/// A training batch sampled with replacement.
#[derive(Debug, Clone)]
pub struct Batch {
    pub records: Vec<Record>,
}

/// Indices of one batch drawn i.i.d. with replacement.
pub fn batch_indices(n: usize, b: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..n)).collect()
}

/// Infinite deterministic stream of batches sampled with replacement.
pub fn batch_iter(ds: &Dataset, b: usize, seed: u64) -> Result<impl Iterator<Item = Batch> + '_> {
    if ds.is_empty() {
        return Err(Error::Validation("cannot batch an empty dataset".into()));
    }
    if b == 0 {
        return Err(Error::Validation("batch size must be >= 1".into()));
    }
    let mut rng = seeding::rng(seed, "batch", 0);
    let n = ds.len();
    Ok(std::iter::from_fn(move || {
        let records = batch_indices(n, b, &mut rng)
            .into_iter()
            .map(|i| ds.records[i].clone())
            .collect();
        Some(Batch { records })
    }))
}

//! Tabular ingestion: label encoding, missing-value handling, standardization,
//! equal-frequency discretization and stratified splitting.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens treated as a missing cell (after trimming whitespace).
const MISSING_TOKENS: &[&str] = &["", "?", "NA", "N/A", "NaN", "nan", "null", "NULL"];

pub const DEFAULT_N_BINS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Target,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRows,
    ImputeMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    /// Original labels of a categorical column, indexed by code.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Fully encoded table. Feature order follows the file and fixes the atom
/// (qubit) index of every feature downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub features: Vec<ColumnSpec>,
    pub target: ColumnSpec,
    /// Row-major values, `n_samples x n_features`.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub target: String,
    pub missing_policy: MissingPolicy,
    pub delimiter: u8,
    /// Columns dropped before encoding (identifiers and the like).
    pub exclude: Vec<String>,
}

impl LoadOptions {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            missing_policy: MissingPolicy::default(),
            delimiter: b',',
            exclude: Vec::new(),
        }
    }
}

impl FeatureTable {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn subset_rows(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            features: self.features.clone(),
            target: self.target.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            warnings: Vec::new(),
        }
    }
}

pub fn load_table(path: &Path, opts: &LoadOptions) -> Result<FeatureTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, opts)
}

/// Same as [`load_table`] over any reader.
pub fn read_table<R: Read>(reader: R, opts: &LoadOptions) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = header
        .iter()
        .position(|h| *h == opts.target)
        .ok_or_else(|| Error::TargetMissing(opts.target.clone()))?;
    let keep: Vec<usize> = (0..header.len())
        .filter(|&j| j == target_idx || !opts.exclude.iter().any(|e| *e == header[j]))
        .collect();

    // Raw cells, `None` when missing.
    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        raw.push(
            keep.iter()
                .map(|&j| {
                    let cell = rec.get(j).unwrap_or("").trim();
                    (!MISSING_TOKENS.contains(&cell)).then(|| cell.to_string())
                })
                .collect(),
        );
    }
    let target_pos = keep.iter().position(|&j| j == target_idx).unwrap();
    let names: Vec<&str> = keep.iter().map(|&j| header[j].as_str()).collect();

    // The target is never imputed.
    raw.retain(|r| r[target_pos].is_some());
    match opts.missing_policy {
        MissingPolicy::DropRows => raw.retain(|r| r.iter().all(Option::is_some)),
        MissingPolicy::ImputeMode => impute_mode(&mut raw),
    }
    if raw.is_empty() {
        return Err(Error::EmptyTable);
    }

    let mut features = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    let mut target = None;
    for (c, name) in names.iter().enumerate() {
        let cells: Vec<&str> = raw.iter().map(|r| r[c].as_deref().unwrap()).collect();
        if c == target_pos {
            target = Some(encode_target(name, &cells)?);
            continue;
        }
        let parsed: Option<Vec<f64>> = cells.iter().map(|s| s.parse::<f64>().ok()).collect();
        match parsed {
            Some(mut values) => {
                if !standardize(&mut values) {
                    let msg = format!("numerical column `{name}` has zero variance; kept as zeros");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                features.push(ColumnSpec {
                    name: name.to_string(),
                    kind: ColumnKind::Numerical,
                    role: ColumnRole::Feature,
                    categories: Vec::new(),
                });
                columns.push(values);
            }
            None => {
                let (codes, categories) = label_encode(&cells);
                features.push(ColumnSpec {
                    name: name.to_string(),
                    kind: ColumnKind::Categorical,
                    role: ColumnRole::Feature,
                    categories,
                });
                columns.push(codes.into_iter().map(f64::from).collect());
            }
        }
    }
    let (target, labels) = target.unwrap();
    let rows = (0..raw.len())
        .map(|i| columns.iter().map(|col| col[i]).collect())
        .collect();
    Ok(FeatureTable {
        features,
        target,
        rows,
        labels,
        warnings,
    })
}

fn impute_mode(raw: &mut [Vec<Option<String>>]) {
    let n_cols = raw.first().map_or(0, Vec::len);
    for c in 0..n_cols {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (i, r) in raw.iter().enumerate() {
            if let Some(v) = r[c].as_deref() {
                counts.entry(v).or_insert((0, i)).0 += 1;
            }
        }
        // Most frequent, ties to first occurrence.
        let mode = counts
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(v, _)| v.to_string());
        if let Some(mode) = mode {
            for r in raw.iter_mut() {
                if r[c].is_none() {
                    r[c] = Some(mode.clone());
                }
            }
        }
    }
}

/// Codes assigned in order of first occurrence.
fn label_encode(cells: &[&str]) -> (Vec<u32>, Vec<String>) {
    let mut lookup: HashMap<&str, u32> = HashMap::new();
    let mut categories = Vec::new();
    let codes = cells
        .iter()
        .map(|&s| {
            *lookup.entry(s).or_insert_with(|| {
                categories.push(s.to_string());
                (categories.len() - 1) as u32
            })
        })
        .collect();
    (codes, categories)
}

fn encode_target(name: &str, cells: &[&str]) -> Result<(ColumnSpec, Vec<u8>)> {
    let numeric_01: Option<Vec<u8>> = cells
        .iter()
        .map(|s| match s.parse::<f64>() {
            Ok(0.0) => Some(0),
            Ok(1.0) => Some(1),
            _ => None,
        })
        .collect();
    let (labels, categories) = match numeric_01 {
        Some(labels) => (labels, vec!["0".to_string(), "1".to_string()]),
        None => {
            let (codes, categories) = label_encode(cells);
            if categories.len() != 2 {
                return Err(Error::TargetNotBinary {
                    name: name.to_string(),
                    classes: categories.len(),
                });
            }
            (codes.into_iter().map(|c| c as u8).collect(), categories)
        }
    };
    let classes = labels.iter().fold([false; 2], |mut seen, &l| {
        seen[l as usize] = true;
        seen
    });
    if !classes.iter().all(|&s| s) {
        return Err(Error::TargetNotBinary {
            name: name.to_string(),
            classes: 1,
        });
    }
    Ok((
        ColumnSpec {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            role: ColumnRole::Target,
            categories,
        },
        labels,
    ))
}

/// Standardizes in place with the population variance. Returns `false` (and
/// writes zeros) for a zero-variance column.
fn standardize(values: &mut [f64]) -> bool {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        values.iter_mut().for_each(|v| *v = 0.0);
        return false;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    true
}

/// Per-column bin indices used for histogram entropy estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedView {
    /// Column-major: `bins[j][i]` is the bin of sample `i` in column `j`.
    pub bins: Vec<Vec<u32>>,
    pub n_bins: Vec<usize>,
}

impl DiscretizedView {
    pub fn n_features(&self) -> usize {
        self.bins.len()
    }
}

pub fn discretize(table: &FeatureTable, n_bins: usize) -> Result<DiscretizedView> {
    if n_bins < 2 {
        return Err(Error::invalid(format!("n_bins must be at least 2, got {n_bins}")));
    }
    let (bins, counts) = table
        .features
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let col = table.column(j);
            match spec.kind {
                ColumnKind::Categorical => {
                    let codes: Vec<u32> = col.iter().map(|&v| v as u32).collect();
                    let n = spec.categories.len().max(1);
                    (codes, n)
                }
                ColumnKind::Numerical => equal_frequency_bins(&col, n_bins),
            }
        })
        .unzip();
    Ok(DiscretizedView { bins, n_bins: counts })
}

/// Equal-frequency binning. A value whose first rank among the sorted
/// samples is `r` goes to bin `floor(r * n_bins / n)`, so tied values always
/// share a bin. Empty bins are then squeezed out, leaving indices `0..m`.
pub fn equal_frequency_bins(values: &[f64], n_bins: usize) -> (Vec<u32>, usize) {
    let n = values.len();
    if n == 0 {
        return (Vec::new(), 1);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut raw_bin = vec![0usize; n];
    let mut first_rank = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && values[i] != values[order[rank - 1]] {
            first_rank = rank;
        }
        raw_bin[i] = first_rank * n_bins / n;
    }
    let mut remap = vec![u32::MAX; n_bins];
    let mut next = 0u32;
    for &i in &order {
        let b = raw_bin[i];
        if remap[b] == u32::MAX {
            remap[b] = next;
            next += 1;
        }
    }
    (raw_bin.iter().map(|&b| remap[b]).collect(), next as usize)
}

/// Stratified, seeded train/test partition. Row order inside each part
/// follows the source table.
pub fn split(table: &FeatureTable, test_fraction: f64, seed: u64) -> Result<(FeatureTable, FeatureTable)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx = Vec::new();
    let mut train_idx = Vec::new();
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..table.n_samples()).filter(|&i| table.labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall { class, count: idx.len() });
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((table.subset_rows(&train_idx), table.subset_rows(&test_idx)))
}

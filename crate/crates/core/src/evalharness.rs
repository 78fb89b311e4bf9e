//! Benchmarking of selected subsets with a regularized logistic classifier.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{split, FeatureTable};
use crate::error::{Error, Result};

pub const DEFAULT_EVAL_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qfs,
    MiRanking,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qfs => "qfs",
            Method::MiRanking => "mi_ranking",
        }
    }
}

/// Indices of the `k` most relevant features, ties to the lower index.
pub fn mi_ranking_topk(relevance: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > relevance.len() {
        return Err(Error::invalid(format!("k = {k} outside [1, {}]", relevance.len())));
    }
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub l2: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            steps: 500,
            step_size: 0.1,
        }
    }
}

/// Logistic regression on internally standardized inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub subset: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    fn design_row(&self, row: &[f64], out: &mut [f64]) {
        for (k, &f) in self.subset.iter().enumerate() {
            out[k] = (row[f] - self.means[k]) / self.scales[k];
        }
    }

    pub fn scores(&self, table: &FeatureTable) -> Vec<f64> {
        let mut x = vec![0.0; self.subset.len()];
        table
            .rows
            .iter()
            .map(|row| {
                self.design_row(row, &mut x);
                sigmoid(self.bias + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
            })
            .collect()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Full-batch gradient descent on mean log-loss + (l2/2)|w|², starting from
/// zero. Deterministic; `_seed` is accepted so call sites can thread one
/// through uniformly.
pub fn train_classifier(train: &FeatureTable, subset: &[usize], opts: &TrainOptions, _seed: u64) -> Result<LogisticModel> {
    if subset.is_empty() {
        return Err(Error::Empty("feature subset"));
    }
    if train.n_samples() == 0 {
        return Err(Error::Empty("training table"));
    }
    if let Some(&bad) = subset.iter().find(|&&f| f >= train.n_features()) {
        return Err(Error::invalid(format!("feature index {bad} out of range")));
    }
    let n = train.n_samples() as f64;
    let d = subset.len();
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for (k, &f) in subset.iter().enumerate() {
        let col = train.column(f);
        let m = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        means[k] = m;
        scales[k] = if sd > 0.0 { sd } else { 1.0 };
    }
    let mut model = LogisticModel {
        subset: subset.to_vec(),
        means,
        scales,
        weights: vec![0.0; d],
        bias: 0.0,
    };
    let design: Vec<Vec<f64>> = train
        .rows
        .iter()
        .map(|row| {
            let mut x = vec![0.0; d];
            model.design_row(row, &mut x);
            x
        })
        .collect();
    let labels: Vec<f64> = train.labels.iter().map(|&l| f64::from(l)).collect();

    let mut grad = vec![0.0; d];
    for step in 0..opts.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (x, &y) in design.iter().zip(&labels) {
            let z = model.bias + x.iter().zip(&model.weights).map(|(a, w)| a * w).sum::<f64>();
            let p = sigmoid(z);
            // Stable log(1 + e^z) - y z.
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
            let r = p - y;
            grad_b += r;
            for (g, a) in grad.iter_mut().zip(x) {
                *g += r * a;
            }
        }
        loss = loss / n + 0.5 * opts.l2 * model.weight_norm().powi(2);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !loss.is_finite() || !grad_norm.is_finite() || model.weight_norm() > 1e8 {
            return Err(Error::Diverged { step, loss });
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= opts.step_size * (g / n + opts.l2 * *w);
        }
        model.bias -= opts.step_size * grad_b / n;
    }
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// Absent when the test partition holds a single class.
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub subset: Vec<usize>,
    pub seed: u64,
    pub method: Method,
}

/// Tie-adjusted Mann-Whitney AUC; `None` unless both classes occur.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks (1-based) over tied groups.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum_pos += midrank * order[start..end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Precision and recall of `score >= threshold`. Precision is 0 when
/// nothing is predicted positive, recall 0 when there are no positives.
pub fn precision_recall(scores: &[f64], labels: &[u8], threshold: f64) -> (f64, f64) {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, tp + fp), ratio(tp, tp + fneg))
}

pub fn evaluate(test: &FeatureTable, model: &LogisticModel, method: Method, seed: u64) -> MetricRecord {
    let scores = model.scores(test);
    let (precision, recall) = precision_recall(&scores, &test.labels, DECISION_THRESHOLD);
    MetricRecord {
        auc: auc(&scores, &test.labels),
        precision,
        recall,
        subset: model.subset.clone(),
        seed,
        method,
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// |a ∩ b| / max(|a|, |b|).
pub fn overlap(a: &[usize], b: &[usize]) -> f64 {
    let k = a.len().max(b.len());
    if k == 0 {
        return 1.0;
    }
    let shared = a.iter().filter(|f| b.contains(f)).count();
    shared as f64 / k as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub features: usize,
    pub method: Method,
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub n_seeds: usize,
    pub subset: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub features: usize,
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub dataset: String,
    pub rows: Vec<ComparisonRow>,
    pub overlap: Vec<OverlapRow>,
    pub records: Vec<MetricRecord>,
}

impl ComparisonTable {
    pub fn row(&self, method: Method, features: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method && r.features == features)
    }

    /// Median metrics per (method, size), one line each.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,features,method,auc,precision,recall\n");
        for r in &self.rows {
            let auc = r.auc.map_or(String::new(), |a| format!("{a:.6}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                r.dataset,
                r.features,
                r.method.as_str(),
                auc,
                r.precision,
                r.recall
            );
        }
        out
    }

    pub fn overlap_csv(&self) -> String {
        let mut out = String::from("features,overlap\n");
        for o in &self.overlap {
            let _ = writeln!(out, "{},{:.6}", o.features, o.overlap);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub train: TrainOptions,
    pub test_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            train: TrainOptions::default(),
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

/// Trains and scores QFS and MI-ranking subsets for every size in `k_range`
/// on one stratified split per seed, then takes medians over seeds. Sizes
/// with no QFS subset are evaluated for MI ranking only.
pub fn compare(
    dataset: &str,
    table: &FeatureTable,
    qfs_subsets: &BTreeMap<usize, Vec<usize>>,
    relevance: &[f64],
    k_range: &[usize],
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<ComparisonTable> {
    if seeds.is_empty() {
        return Err(Error::Empty("evaluation seeds"));
    }
    let n = table.n_features();
    if let Some(&k) = k_range.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::invalid(format!("subset size {k} outside [1, {n}]")));
    }
    let mut subsets: Vec<(Method, usize, Vec<usize>)> = Vec::new();
    let mut overlap_rows = Vec::new();
    for &k in k_range {
        let mi = mi_ranking_topk(relevance, k)?;
        if let Some(q) = qfs_subsets.get(&k) {
            overlap_rows.push(OverlapRow {
                features: k,
                overlap: overlap(q, &mi),
            });
            subsets.push((Method::Qfs, k, q.clone()));
        }
        subsets.push((Method::MiRanking, k, mi));
    }

    let mut records = Vec::new();
    for &seed in seeds {
        let (train, test) = split(table, opts.test_fraction, seed)?;
        for (method, _, subset) in &subsets {
            let model = train_classifier(&train, subset, &opts.train, seed)?;
            records.push(evaluate(&test, &model, *method, seed));
        }
    }

    let rows = subsets
        .iter()
        .map(|(method, k, subset)| {
            let mine: Vec<&MetricRecord> = records.iter().filter(|r| r.method == *method && r.subset == *subset).collect();
            let aucs: Vec<f64> = mine.iter().filter_map(|r| r.auc).collect();
            let precision: Vec<f64> = mine.iter().map(|r| r.precision).collect();
            let recall: Vec<f64> = mine.iter().map(|r| r.recall).collect();
            ComparisonRow {
                dataset: dataset.to_string(),
                features: *k,
                method: *method,
                auc: median(&aucs),
                precision: median(&precision).unwrap_or(0.0),
                recall: median(&recall).unwrap_or(0.0),
                n_seeds: seeds.len(),
                subset: subset.clone(),
            }
        })
        .collect();
    Ok(ComparisonTable {
        dataset: dataset.to_string(),
        rows,
        overlap: overlap_rows,
        records,
    })
}

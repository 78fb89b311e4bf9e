//! Plug-in (maximum-likelihood) histogram estimates of entropy and mutual
//! information, in nats.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DiscretizedView;
use crate::error::{Error, Result};
use crate::pairs::PairMatrix;

pub const ESTIMATOR_NAME: &str = "plug-in histogram (nats)";

/// Lower bound applied to relevance weights so that every site keeps a
/// strictly positive local detuning.
pub const DEFAULT_MIN_WEIGHT: f64 = 1e-3;

/// Relevance and redundancy statistics for one table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoProfile {
    pub feature_names: Vec<String>,
    /// I(x_i; y).
    pub relevance: Vec<f64>,
    /// I(x_i; x_j), zero diagonal.
    pub redundancy: PairMatrix,
    /// Redundancy divided by the smaller marginal entropy.
    pub normalized_redundancy: PairMatrix,
    pub entropies: Vec<f64>,
    /// Relevance over its maximum, floored at `min_weight`.
    pub p_weights: Vec<f64>,
    pub n_bins: usize,
    pub estimator: String,
}

fn check_lengths(a: &[u32], b: &[u32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("series"));
    }
    Ok(())
}

fn histogram(a: &[u32]) -> Vec<u64> {
    let size = a.iter().max().map_or(0, |&m| m as usize + 1);
    let mut counts = vec![0u64; size];
    for &u in a {
        counts[u as usize] += 1;
    }
    counts
}

pub fn entropy(a: &[u32]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Empty("series"));
    }
    let n = a.len() as f64;
    Ok(histogram(a)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// I(a; b) = sum p(u,v) ln[p(u,v) / (p(u) p(v))], clamped at zero.
pub fn mutual_information(a: &[u32], b: &[u32]) -> Result<f64> {
    check_lengths(a, b)?;
    let ca = histogram(a);
    let cb = histogram(b);
    let width = cb.len();
    let mut joint = vec![0u64; ca.len() * width];
    for (&u, &v) in a.iter().zip(b) {
        joint[u as usize * width + v as usize] += 1;
    }
    let n = a.len() as f64;
    let mut mi = 0.0;
    for (k, &c) in joint.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (u, v) = (k / width, k % width);
        let c = c as f64;
        mi += c / n * (c * n / (ca[u] as f64 * cb[v] as f64)).ln();
    }
    Ok(mi.max(0.0))
}

pub fn relevance_vector(view: &DiscretizedView, target: &[u32]) -> Result<Vec<f64>> {
    view.bins
        .par_iter()
        .map(|col| mutual_information(col, target))
        .collect()
}

pub fn redundancy_matrix(view: &DiscretizedView) -> Result<PairMatrix> {
    let n = view.n_features();
    if n < 2 {
        return Err(Error::invalid("redundancy needs at least two features"));
    }
    let pairs: Vec<(usize, usize)> = (1..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| mutual_information(&view.bins[i], &view.bins[j]))
        .collect::<Result<Vec<_>>>()?;
    PairMatrix::from_lower(n, values)
}

/// N_ij = R_ij / min(H_i, H_j); pairs touching a zero-entropy feature get 0.
pub fn normalize_redundancy(redundancy: &PairMatrix, entropies: &[f64]) -> Result<PairMatrix> {
    if entropies.len() != redundancy.len() {
        return Err(Error::LengthMismatch {
            left: entropies.len(),
            right: redundancy.len(),
        });
    }
    Ok(PairMatrix::from_fn(redundancy.len(), |i, j| {
        let h = entropies[i].min(entropies[j]);
        if h <= 0.0 {
            0.0
        } else {
            (redundancy.get(i, j) / h).clamp(0.0, 1.0)
        }
    }))
}

/// Relevance normalized by its maximum, floored at `min_weight`.
pub fn site_weights(relevance: &[f64], min_weight: f64) -> Result<Vec<f64>> {
    let max = relevance.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::invalid("all features have zero relevance"));
    }
    Ok(relevance.iter().map(|&r| (r / max).max(min_weight)).collect())
}

pub fn profile(
    view: &DiscretizedView,
    target: &[u32],
    feature_names: Vec<String>,
    n_bins: usize,
    min_weight: f64,
) -> Result<InfoProfile> {
    if feature_names.len() != view.n_features() {
        return Err(Error::LengthMismatch {
            left: feature_names.len(),
            right: view.n_features(),
        });
    }
    let relevance = relevance_vector(view, target)?;
    let redundancy = redundancy_matrix(view)?;
    let entropies = view.bins.iter().map(|c| entropy(c)).collect::<Result<Vec<_>>>()?;
    let normalized_redundancy = normalize_redundancy(&redundancy, &entropies)?;
    let p_weights = site_weights(&relevance, min_weight)?;
    Ok(InfoProfile {
        feature_names,
        relevance,
        redundancy,
        normalized_redundancy,
        entropies,
        p_weights,
        n_bins,
        estimator: ESTIMATOR_NAME.to_string(),
    })
}

//! QUBO scoring of measured bitstrings and redundancy-aware subset
//! extraction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::pairs::PairMatrix;
use crate::quantum_sim::SampleEnsemble;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_FILTER_FRACTION: f64 = 0.10;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.7;
pub const MAX_BRUTE_FORCE_FEATURES: usize = 20;

/// Q(x; α) = −α Σ I_i x_i + (1 − α) Σ_{i<j} R_ij x_i x_j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuboInstance {
    pub relevance: Vec<f64>,
    pub redundancy: PairMatrix,
    pub alpha: f64,
}

impl QuboInstance {
    pub fn new(relevance: Vec<f64>, redundancy: PairMatrix, alpha: f64) -> Result<Self> {
        if relevance.len() != redundancy.len() {
            return Err(Error::LengthMismatch {
                left: relevance.len(),
                right: redundancy.len(),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1], got {alpha}")));
        }
        Ok(Self {
            relevance,
            redundancy,
            alpha,
        })
    }

    pub fn n_features(&self) -> usize {
        self.relevance.len()
    }

    /// Energy of a basis index (bit i = feature i).
    pub fn energy_of_index(&self, x: u64) -> f64 {
        let n = self.n_features();
        let mut linear = 0.0;
        let mut quadratic = 0.0;
        for i in 0..n {
            if bits::is_set(x, i) {
                linear += self.relevance[i];
                for j in 0..i {
                    if bits::is_set(x, j) {
                        quadratic += self.redundancy.get(i, j);
                    }
                }
            }
        }
        -self.alpha * linear + (1.0 - self.alpha) * quadratic
    }
}

pub fn qubo_energy(x: &[bool], instance: &QuboInstance) -> Result<f64> {
    if x.len() != instance.n_features() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: instance.n_features(),
        });
    }
    let idx = x.iter().enumerate().fold(0u64, |acc, (i, &b)| if b { acc | 1 << i } else { acc });
    Ok(instance.energy_of_index(idx))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub index: u64,
    pub energy: f64,
}

/// Exhaustive minimum over all bitstrings, or over those with exactly
/// `cardinality` ones. Ties go to the smallest basis index.
pub fn brute_force_optimum(instance: &QuboInstance, cardinality: Option<usize>) -> Result<Optimum> {
    let n = instance.n_features();
    if n > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::TooManyAtoms {
            n,
            max: MAX_BRUTE_FORCE_FEATURES,
        });
    }
    if let Some(k) = cardinality {
        if k > n {
            return Err(Error::invalid(format!("cardinality {k} exceeds {n} features")));
        }
    }
    (0..1usize << n)
        .into_par_iter()
        .with_min_len(1 << 10)
        .map(|x| x as u64)
        .filter(|&x| cardinality.is_none_or(|k| x.count_ones() as usize == k))
        .map(|x| Optimum {
            index: x,
            energy: instance.energy_of_index(x),
        })
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.index.cmp(&b.index)))
        .ok_or(Error::Empty("candidate bitstrings"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Rank individual shots.
    #[default]
    PerShot,
    /// Rank distinct bitstrings; kept ones retain all their shots.
    UniqueBitstring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeptBitstring {
    pub bitstring: String,
    pub index: u64,
    pub count: u64,
    pub energy: f64,
}

/// The retained low-energy shots, ascending by (energy, index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeptSet {
    pub n_atoms: usize,
    pub entries: Vec<KeptBitstring>,
}

impl KeptSet {
    pub fn total_shots(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn max_energy(&self) -> Option<f64> {
        self.entries.last().map(|e| e.energy)
    }

    /// Shot-level expansion, one index per shot.
    pub fn expand(&self) -> Vec<u64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.index, e.count as usize))
            .collect()
    }
}

pub fn low_energy_filter(
    ensemble: &SampleEnsemble,
    instance: &QuboInstance,
    fraction: f64,
    mode: FilterMode,
) -> Result<KeptSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("filter fraction must be in (0, 1], got {fraction}")));
    }
    if ensemble.shots == 0 || ensemble.counts.is_empty() {
        return Err(Error::Empty("sample ensemble"));
    }
    if ensemble.n_atoms != instance.n_features() {
        return Err(Error::LengthMismatch {
            left: ensemble.n_atoms,
            right: instance.n_features(),
        });
    }
    let mut scored: Vec<KeptBitstring> = ensemble
        .indexed_counts()?
        .into_iter()
        .map(|(index, count)| KeptBitstring {
            bitstring: bits::to_text(index, ensemble.n_atoms),
            index,
            count,
            energy: instance.energy_of_index(index),
        })
        .collect();
    scored.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.index.cmp(&b.index)));

    let entries = match mode {
        FilterMode::PerShot => {
            let mut budget = (fraction * ensemble.shots as f64).ceil() as u64;
            let mut kept = Vec::new();
            for mut e in scored {
                if budget == 0 {
                    break;
                }
                e.count = e.count.min(budget);
                budget -= e.count;
                kept.push(e);
            }
            kept
        }
        FilterMode::UniqueBitstring => {
            let keep = (fraction * scored.len() as f64).ceil() as usize;
            scored.truncate(keep.max(1));
            scored
        }
    };
    Ok(KeptSet {
        n_atoms: ensemble.n_atoms,
        entries,
    })
}

/// ⟨n_i⟩ over the kept shots.
pub fn rydberg_densities(kept: &KeptSet) -> Result<Vec<f64>> {
    let total = kept.total_shots();
    if total == 0 {
        return Err(Error::Empty("kept shots"));
    }
    let mut dens = vec![0.0; kept.n_atoms];
    for e in &kept.entries {
        for (i, d) in dens.iter_mut().enumerate() {
            if bits::is_set(e.index, i) {
                *d += e.count as f64;
            }
        }
    }
    Ok(dens.into_iter().map(|d| d / total as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedSubset {
    pub features: Vec<usize>,
    /// Set when too few admissible features existed and the remainder was
    /// filled by density alone.
    pub relaxed: bool,
}

/// Features by descending density, ties to the lower index.
fn density_order(densities: &[f64], candidates: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut order: Vec<usize> = candidates.collect();
    order.sort_by(|&a, &b| densities[b].total_cmp(&densities[a]).then(a.cmp(&b)));
    order
}

fn prune_among(densities: &[f64], normalized: &PairMatrix, threshold: f64, k: usize, order: &[usize]) -> PrunedSubset {
    let mut accepted: Vec<usize> = Vec::with_capacity(k);
    for &f in order {
        if accepted.len() == k {
            break;
        }
        if accepted.iter().all(|&a| normalized.get(a, f) <= threshold) {
            accepted.push(f);
        }
    }
    let relaxed = accepted.len() < k;
    if relaxed {
        for &f in order {
            if accepted.len() == k {
                break;
            }
            if !accepted.contains(&f) {
                accepted.push(f);
            }
        }
    }
    debug_assert!(accepted.iter().all(|&f| f < densities.len()));
    PrunedSubset {
        features: accepted,
        relaxed,
    }
}

/// Greedy pass in descending density: admit a feature iff its normalized
/// redundancy with every admitted one is at most `threshold`.
pub fn redundancy_prune(densities: &[f64], normalized: &PairMatrix, threshold: f64, k: usize) -> Result<PrunedSubset> {
    check_prune_args(densities, normalized, threshold)?;
    if k == 0 || k > densities.len() {
        return Err(Error::invalid(format!("k = {k} outside [1, {}]", densities.len())));
    }
    let order = density_order(densities, 0..densities.len());
    Ok(prune_among(densities, normalized, threshold, k, &order))
}

fn check_prune_args(densities: &[f64], normalized: &PairMatrix, threshold: f64) -> Result<()> {
    if densities.len() != normalized.len() {
        return Err(Error::LengthMismatch {
            left: densities.len(),
            right: normalized.len(),
        });
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("threshold must be in (0, 1], got {threshold}")));
    }
    Ok(())
}

/// Disjoint subsets of size `k`: each round prunes among features not used
/// by earlier rounds. Stops after `n_sets` or when fewer than `k` remain.
pub fn alternatives(
    densities: &[f64],
    normalized: &PairMatrix,
    threshold: f64,
    k: usize,
    n_sets: usize,
) -> Result<Vec<PrunedSubset>> {
    check_prune_args(densities, normalized, threshold)?;
    if n_sets == 0 || k == 0 {
        return Err(Error::invalid("n_sets and k must be at least 1"));
    }
    let mut used = vec![false; densities.len()];
    let mut sets = Vec::new();
    while sets.len() < n_sets {
        let order = density_order(densities, (0..densities.len()).filter(|&f| !used[f]));
        if order.len() < k {
            break;
        }
        let subset = prune_among(densities, normalized, threshold, k, &order);
        for &f in &subset.features {
            used[f] = true;
        }
        sets.push(subset);
    }
    Ok(sets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSubset {
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub relaxed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub densities: Vec<f64>,
    pub kept_fraction: f64,
    pub kept_shots: u64,
    pub filter_mode: FilterMode,
    pub threshold: f64,
    pub alpha: f64,
    pub subsets_by_cardinality: BTreeMap<usize, NamedSubset>,
    pub alternatives: Vec<NamedSubset>,
    /// Kept bitstrings with their counts and Q energies.
    pub energies: Vec<KeptBitstring>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionOptions {
    pub alpha: f64,
    pub filter_fraction: f64,
    pub filter_mode: FilterMode,
    pub threshold: f64,
    pub cardinalities: Vec<usize>,
    /// Size of each alternative subset.
    pub alternative_size: usize,
    pub n_alternatives: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            filter_fraction: DEFAULT_FILTER_FRACTION,
            filter_mode: FilterMode::PerShot,
            threshold: DEFAULT_PRUNE_THRESHOLD,
            cardinalities: (1..=6).collect(),
            alternative_size: 3,
            n_alternatives: 3,
        }
    }
}

fn named(subset: PrunedSubset, names: &[String]) -> NamedSubset {
    NamedSubset {
        names: subset.features.iter().map(|&f| names[f].clone()).collect(),
        features: subset.features,
        relaxed: subset.relaxed,
    }
}

/// Full post-processing: filter, densities, best subset per cardinality and
/// the alternative family. Cardinalities above the feature count are skipped.
pub fn select(
    ensemble: &SampleEnsemble,
    instance: &QuboInstance,
    normalized: &PairMatrix,
    names: &[String],
    opts: &SelectionOptions,
) -> Result<SelectionReport> {
    if names.len() != instance.n_features() {
        return Err(Error::LengthMismatch {
            left: names.len(),
            right: instance.n_features(),
        });
    }
    let kept = low_energy_filter(ensemble, instance, opts.filter_fraction, opts.filter_mode)?;
    let densities = rydberg_densities(&kept)?;
    let mut subsets_by_cardinality = BTreeMap::new();
    for &k in opts.cardinalities.iter().filter(|&&k| k >= 1 && k <= names.len()) {
        let s = redundancy_prune(&densities, normalized, opts.threshold, k)?;
        subsets_by_cardinality.insert(k, named(s, names));
    }
    let alternatives = if opts.alternative_size >= 1 && opts.n_alternatives >= 1 {
        alternatives(&densities, normalized, opts.threshold, opts.alternative_size, opts.n_alternatives)?
            .into_iter()
            .map(|s| named(s, names))
            .collect()
    } else {
        Vec::new()
    };
    Ok(SelectionReport {
        densities,
        kept_fraction: opts.filter_fraction,
        kept_shots: kept.total_shots(),
        filter_mode: opts.filter_mode,
        threshold: opts.threshold,
        alpha: opts.alpha,
        subsets_by_cardinality,
        alternatives,
        energies: kept.entries,
    })
}

//! Symmetric matrices with a zero diagonal, stored once per unordered pair.
//!
//! Every pairwise quantity in the pipeline (feature redundancy, target and
//! embedded distances, embedding errors) is of this shape, so storing only
//! the strict lower triangle makes symmetry hold by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    n: usize,
    /// Strict lower triangle in row order: (1,0), (2,0), (2,1), (3,0), ...
    lower: Vec<f64>,
}

#[inline]
fn slot(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl PairMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            lower: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    /// Builds the matrix by evaluating `f(i, j)` once for every `i > j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut lower = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 1..n {
            for j in 0..i {
                lower.push(f(i, j));
            }
        }
        Self { n, lower }
    }

    pub fn from_lower(n: usize, lower: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if lower.len() != expected {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: expected,
            });
        }
        Ok(Self { n, lower })
    }

    /// Reads the strict lower triangle of a dense square matrix. The upper
    /// triangle and diagonal are ignored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n,
            });
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Greater => self.lower[slot(i, j)],
            Less => self.lower[slot(j, i)],
        }
    }

    /// Panics on the diagonal, which is fixed at zero.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "diagonal of a PairMatrix is fixed at zero");
        let k = if i > j { slot(i, j) } else { slot(j, i) };
        self.lower[k] = value;
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Iterates `(i, j, value)` with `i > j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..self.n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .zip(self.lower.iter().copied())
            .map(|((i, j), v)| (i, j, v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            lower: self.lower.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Mean over unordered pairs; zero for fewer than two rows.
    pub fn mean(&self) -> f64 {
        if self.lower.is_empty() {
            0.0
        } else {
            self.lower.iter().sum::<f64>() / self.lower.len() as f64
        }
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = self.lower.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

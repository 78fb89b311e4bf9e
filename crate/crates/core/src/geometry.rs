//! Atom placement: redundancy to target distances, blockade radius, and a
//! multi-restart stress-majorization (SMACOF) embedding in the plane.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::PairMatrix;

pub type Point = [f64; 2];

/// Hardware constants, in SI units with energies as angular frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Van der Waals coefficient, rad m^6 / s.
    pub c6: f64,
    /// Peak Rabi frequency, rad/s.
    pub omega_max: f64,
    /// Peak local detuning, rad/s.
    pub delta_l_max: f64,
    /// Global detuning at t = 0, rad/s. Negative.
    pub delta_g_initial: f64,
    /// Protocol duration, s.
    pub total_time: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c6: 5.42e-24,
            omega_max: 1.58e7,
            delta_l_max: 3.0e7,
            delta_g_initial: -3.0e7,
            total_time: 4e-6,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.c6, self.omega_max, self.delta_l_max, self.delta_g_initial, self.total_time]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("physical constants".into()));
        }
        if self.c6 <= 0.0 || self.omega_max <= 0.0 || self.delta_l_max <= 0.0 || self.total_time <= 0.0 {
            return Err(Error::invalid("c6, omega_max, delta_l_max and total_time must be positive"));
        }
        if self.delta_g_initial >= 0.0 {
            return Err(Error::invalid("delta_g_initial must be negative"));
        }
        Ok(())
    }
}

/// R_b = (C6 / delta_l_max)^(1/6): the blockade radius set by the final
/// local detuning once the drive has switched off.
pub fn blockade_radius(constants: &PhysicalConstants) -> f64 {
    (constants.c6 / constants.delta_l_max).powf(1.0 / 6.0)
}

/// Which lower end the rescaled distances are pinned to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// [R_b / sqrt(2), 4 R_b].
    #[default]
    BlockadeFloor,
    /// [R_b, 4 R_b].
    BlockadeRadius,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceInterval {
    pub min: f64,
    pub max: f64,
}

impl DistanceInterval {
    pub fn for_blockade(r_b: f64, mode: IntervalMode) -> Self {
        let min = match mode {
            IntervalMode::BlockadeFloor => r_b / 2f64.sqrt(),
            IntervalMode::BlockadeRadius => r_b,
        };
        Self { min, max: 4.0 * r_b }
    }
}

/// Minimum spacing every emitted layout must respect.
pub fn spacing_floor(r_b: f64) -> f64 {
    r_b / 2f64.sqrt()
}

/// d_ij = max(R_ij, floor)^(-1/6). Larger redundancy means closer atoms.
pub fn raw_distance_matrix(redundancy: &PairMatrix, floor: f64) -> PairMatrix {
    redundancy.map(|r| r.max(floor).powf(-1.0 / 6.0))
}

/// The default floor, 1e-6 of the largest redundancy.
pub fn default_floor(redundancy: &PairMatrix) -> f64 {
    let max = redundancy.min_max().map_or(0.0, |(_, hi)| hi);
    if max > 0.0 {
        1e-6 * max
    } else {
        1e-6
    }
}

/// Affine map of the off-diagonal entries onto `interval`. Degenerate input
/// (all entries equal) maps to the interval midpoint.
pub fn rescale_distances(distances: &PairMatrix, interval: DistanceInterval) -> Result<PairMatrix> {
    let (lo, hi) = distances
        .min_max()
        .ok_or_else(|| Error::invalid("rescaling needs at least two atoms"))?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("distance matrix".into()));
    }
    let span = hi - lo;
    if span <= 0.0 {
        let mid = 0.5 * (interval.min + interval.max);
        return Ok(distances.map(|_| mid));
    }
    let scale = (interval.max - interval.min) / span;
    Ok(distances.map(|d| interval.min + (d - lo) * scale))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomLayout {
    /// Metres.
    pub positions: Vec<Point>,
    pub blockade_radius: f64,
    pub target_distances: PairMatrix,
    pub error_matrix: PairMatrix,
    pub mean_error: f64,
    pub seed_used: u64,
    /// Uniform scale applied by the spacing repair (1 when none was needed).
    pub dilation: f64,
}

impl AtomLayout {
    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdsOptions {
    pub n_restarts: usize,
    pub base_seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Std of the Gaussian jitter added to the spectral start, as a fraction
    /// of the mean target distance.
    pub jitter: f64,
    pub repair: SpacingRepair,
}

/// How the spacing repair interacts with the error report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingRepair {
    /// Dilate the layout; errors are measured against the original targets,
    /// so the dilation shows up in ε.
    #[default]
    Dilate,
    /// Dilate the layout and widen the target interval by the same factor;
    /// ε then measures the shape of the fit only.
    AdaptiveInterval,
}

impl Default for MdsOptions {
    fn default() -> Self {
        Self {
            n_restarts: 20,
            base_seed: 0,
            max_iter: 500,
            tol: 1e-9,
            jitter: 0.1,
            repair: SpacingRepair::Dilate,
        }
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn pairwise_distances(positions: &[Point]) -> PairMatrix {
    PairMatrix::from_fn(positions.len(), |i, j| distance(&positions[i], &positions[j]))
}

pub fn min_spacing(positions: &[Point]) -> f64 {
    pairwise_distances(positions)
        .min_max()
        .map_or(f64::INFINITY, |(lo, _)| lo)
}

/// eps_ij = |D_ij - |x_i - x_j|| / D_ij, with its mean over pairs.
pub fn reconstruction_error(targets: &PairMatrix, positions: &[Point]) -> Result<(PairMatrix, f64)> {
    if targets.len() != positions.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: positions.len(),
        });
    }
    if targets.lower().iter().any(|&d| d <= 0.0) {
        return Err(Error::invalid("target distances must be positive off the diagonal"));
    }
    let eps = PairMatrix::from_fn(targets.len(), |i, j| {
        let d = targets.get(i, j);
        ((d - distance(&positions[i], &positions[j])) / d).abs()
    });
    let mean = eps.mean();
    Ok((eps, mean))
}

/// Raw stress sum_{i<j} (|x_i - x_j| - D_ij)^2.
pub fn stress(targets: &PairMatrix, positions: &[Point]) -> f64 {
    targets
        .pairs()
        .map(|(i, j, d)| (distance(&positions[i], &positions[j]) - d).powi(2))
        .sum()
}

/// Classical (Torgerson) MDS: top two eigenvectors of the double-centred
/// squared-distance matrix.
pub fn classical_mds(targets: &PairMatrix) -> Vec<Point> {
    let n = targets.len();
    let sq = DMatrix::from_fn(n, n, |i, j| targets.get(i, j).powi(2));
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + total));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let mut coords = vec![[0.0; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = eig.eigenvectors[(i, k)] * scale;
        }
    }
    coords
}

/// Guttman-transform iterations from `start` until the relative stress
/// decrease falls below `tol`. Returns the final configuration and stress.
pub fn smacof(targets: &PairMatrix, start: Vec<Point>, max_iter: usize, tol: f64) -> (Vec<Point>, f64) {
    let n = start.len();
    let mut x = start;
    let mut current = stress(targets, &x);
    for _ in 0..max_iter {
        let mut next = vec![[0.0; 2]; n];
        for i in 0..n {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = distance(&x[i], &x[j]);
                let ratio = if d > 0.0 { targets.get(i, j) / d } else { 0.0 };
                sx += (x[i][0] - x[j][0]) * ratio;
                sy += (x[i][1] - x[j][1]) * ratio;
            }
            next[i] = [sx / n as f64, sy / n as f64];
        }
        let s = stress(targets, &next);
        let decrease = current - s;
        x = next;
        let previous = current;
        current = s;
        if previous <= 0.0 || decrease.abs() / previous < tol {
            break;
        }
    }
    (x, current)
}

/// Uniform dilation about the centroid so that the closest pair sits at
/// least `floor` apart. Returns the positions unchanged when already valid.
pub fn enforce_min_spacing(positions: Vec<Point>, floor: f64) -> Vec<Point> {
    dilate_to_floor(positions, floor).0
}

/// [`enforce_min_spacing`] that also reports the overall scale factor.
pub fn dilate_to_floor(mut positions: Vec<Point>, floor: f64) -> (Vec<Point>, f64) {
    let n = positions.len();
    let mut factor = 1.0;
    if n < 2 {
        return (positions, factor);
    }
    let centroid = positions.iter().fold([0.0; 2], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let centroid = [centroid[0] / n as f64, centroid[1] / n as f64];
    for _ in 0..8 {
        let min = min_spacing(&positions);
        if min >= floor {
            break;
        }
        // Coincident atoms cannot be separated by dilation; nudge apart first.
        let scale = if min > 0.0 { floor / min * (1.0 + 1e-12) } else { 1.0 };
        factor *= scale;
        for (k, p) in positions.iter_mut().enumerate() {
            p[0] = centroid[0] + (p[0] - centroid[0]) * scale;
            p[1] = centroid[1] + (p[1] - centroid[1]) * scale;
            if min == 0.0 {
                let angle = k as f64 * std::f64::consts::TAU / n as f64;
                p[0] += floor * angle.cos();
                p[1] += floor * angle.sin();
            }
        }
    }
    (positions, factor)
}

struct Candidate {
    positions: Vec<Point>,
    targets: PairMatrix,
    dilation: f64,
    error_matrix: PairMatrix,
    mean_error: f64,
    restart: usize,
    seed: u64,
}

/// Multi-restart stress majorization. Each restart jitters the spectral
/// solution with seeded Gaussian noise, runs SMACOF, dilates to the spacing
/// floor, and the restart with the smallest mean relative error wins (ties
/// to the earlier restart). Under [`SpacingRepair::AdaptiveInterval`] the
/// emitted `target_distances` are the widened ones the errors refer to.
pub fn mds_embed(targets: &PairMatrix, r_b: f64, opts: &MdsOptions) -> Result<AtomLayout> {
    let n = targets.len();
    if n < 2 {
        return Err(Error::invalid("embedding needs at least two atoms"));
    }
    if opts.n_restarts == 0 {
        return Err(Error::invalid("n_restarts must be at least 1"));
    }
    if targets.lower().iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("target distances".into()));
    }
    let floor = spacing_floor(r_b);
    let spectral = classical_mds(targets);
    let sigma = opts.jitter * targets.mean();

    let best = (0..opts.n_restarts)
        .into_par_iter()
        .map(|restart| -> Result<Candidate> {
            let seed = opts.base_seed.wrapping_add(restart as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::invalid(e.to_string()))?;
            let start = spectral
                .iter()
                .map(|p| [p[0] + noise.sample(&mut rng), p[1] + noise.sample(&mut rng)])
                .collect();
            let (x, _) = smacof(targets, start, opts.max_iter, opts.tol);
            let (positions, dilation) = dilate_to_floor(x, floor);
            let targets = match opts.repair {
                SpacingRepair::Dilate => targets.clone(),
                SpacingRepair::AdaptiveInterval => targets.map(|d| d * dilation),
            };
            let (error_matrix, mean_error) = reconstruction_error(&targets, &positions)?;
            Ok(Candidate {
                positions,
                targets,
                dilation,
                error_matrix,
                mean_error,
                restart,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.mean_error.total_cmp(&b.mean_error).then(a.restart.cmp(&b.restart)))
        .unwrap();

    Ok(AtomLayout {
        positions: best.positions,
        blockade_radius: r_b,
        target_distances: best.targets,
        error_matrix: best.error_matrix,
        mean_error: best.mean_error,
        seed_used: best.seed,
        dilation: best.dilation,
    })
}

/// Mean ε for each restart, in restart order. Exposed for diagnostics.
pub fn restart_errors(targets: &PairMatrix, r_b: f64, opts: &MdsOptions) -> Result<Vec<f64>> {
    (0..opts.n_restarts)
        .map(|r| {
            let single = MdsOptions {
                n_restarts: 1,
                base_seed: opts.base_seed.wrapping_add(r as u64),
                ..*opts
            };
            mds_embed(targets, r_b, &single).map(|l| l.mean_error)
        })
        .collect()
}

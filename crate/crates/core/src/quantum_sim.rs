//! State-vector simulation of the driven Rydberg array.
//!
//! H(t) = Ω/2 Σ_i (e^{iφ}|g_i⟩⟨r_i| + h.c.) − Δ_g Σ_i n_i − Δ_l Σ_i p_i n_i + Σ_{i<j} V_ij n_i n_j
//!
//! Time stepping is second-order Strang splitting: a half step of the
//! diagonal part, the transverse drive as a product of exact single-site
//! rotations, and another diagonal half step. Every factor is unitary.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::geometry::{distance, Point};
use crate::pairs::PairMatrix;
use crate::pulses::{DriveProgram, DriveSample};

pub const DEFAULT_MAX_ATOMS: usize = 20;
pub const DEFAULT_SUBSTEP_FACTOR: usize = 16;
pub const DEFAULT_SHOTS: u64 = 10_000;

/// Chunks below this size are not worth handing to another thread.
const PAR_MIN_LEN: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_atoms: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// All atoms in the ground state.
    pub fn ground(n_atoms: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_atoms];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { n_atoms, amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("{len} amplitudes is not a power of two")));
        }
        Ok(Self {
            n_atoms: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn basis(n_atoms: usize, index: u64) -> Self {
        let mut s = Self::ground(n_atoms);
        s.amplitudes[0] = Complex64::new(0.0, 0.0);
        s.amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn probability(&self, index: u64) -> f64 {
        self.amplitudes[index as usize].norm_sqr()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Little-endian (re, im) f64 pairs in basis order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|source| Error::Io {
            path: "<amplitudes>".into(),
            source,
        })?;
        if bytes.len() % 16 != 0 {
            return Err(Error::invalid("amplitude dump is not a whole number of complex values"));
        }
        let amplitudes = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(amplitudes)
    }
}

/// Pointwise drive values, abstracting over how they are produced.
pub trait Drive: Sync {
    fn duration(&self) -> f64;
    fn at(&self, t: f64) -> DriveSample;
}

/// Linear interpolation of a program's `n_steps` grid samples, which is what
/// the integrator actually sees.
#[derive(Clone, Debug)]
pub struct SampledDrive {
    samples: Vec<DriveSample>,
}

impl SampledDrive {
    pub fn new(program: &DriveProgram) -> Self {
        Self {
            samples: program.sample_grid(),
        }
    }

    pub fn samples(&self) -> &[DriveSample] {
        &self.samples
    }
}

impl Drive for SampledDrive {
    fn duration(&self) -> f64 {
        self.samples.last().unwrap().t
    }

    fn at(&self, t: f64) -> DriveSample {
        let s = &self.samples;
        let i = s.partition_point(|x| x.t <= t).clamp(1, s.len() - 1);
        let (a, b) = (&s[i - 1], &s[i]);
        let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let lerp = |x: f64, y: f64| x + (y - x) * w;
        DriveSample {
            t,
            omega: lerp(a.omega, b.omega),
            phase: lerp(a.phase, b.phase),
            delta_global: lerp(a.delta_global, b.delta_global),
            delta_local: lerp(a.delta_local, b.delta_local),
        }
    }
}

/// Time-independent drive, mostly for checks against closed forms.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDrive {
    pub omega: f64,
    pub phase: f64,
    pub delta_global: f64,
    pub delta_local: f64,
    pub duration: f64,
}

impl Drive for ConstantDrive {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn at(&self, t: f64) -> DriveSample {
        DriveSample {
            t,
            omega: self.omega,
            phase: self.phase,
            delta_global: self.delta_global,
            delta_local: self.delta_local,
        }
    }
}

/// Atoms, their pair interactions and the drive applied to them.
#[derive(Clone, Debug)]
pub struct RydbergSystem {
    positions: Vec<Point>,
    c6: f64,
    vdw: PairMatrix,
    program: DriveProgram,
}

impl RydbergSystem {
    pub fn new(positions: Vec<Point>, c6: f64, program: DriveProgram, max_atoms: usize) -> Result<Self> {
        let n = positions.len();
        if n > max_atoms {
            return Err(Error::TooManyAtoms { n, max: max_atoms });
        }
        if n == 0 {
            return Err(Error::Empty("atom positions"));
        }
        if program.n_sites() != n {
            return Err(Error::LengthMismatch {
                left: program.n_sites(),
                right: n,
            });
        }
        if !(c6 > 0.0) {
            return Err(Error::invalid("c6 must be positive"));
        }
        let vdw = PairMatrix::from_fn(n, |i, j| c6 / distance(&positions[i], &positions[j]).powi(6));
        if vdw.lower().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interaction energy (coincident atoms?)".into()));
        }
        Ok(Self {
            positions,
            c6,
            vdw,
            program,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn c6(&self) -> f64 {
        self.c6
    }

    pub fn vdw(&self) -> &PairMatrix {
        &self.vdw
    }

    pub fn program(&self) -> &DriveProgram {
        &self.program
    }

    pub fn diagonal_terms(&self) -> DiagonalTerms {
        DiagonalTerms::new(&self.vdw, &self.program.site_weights)
    }
}

/// Per-basis-state ingredients of the diagonal Hamiltonian.
#[derive(Clone, Debug)]
pub struct DiagonalTerms {
    n_atoms: usize,
    excitations: Vec<f64>,
    weighted: Vec<f64>,
    interaction: Vec<f64>,
}

impl DiagonalTerms {
    pub fn new(vdw: &PairMatrix, weights: &[f64]) -> Self {
        let n = weights.len();
        let dim = 1usize << n;
        let mut excitations = vec![0.0; dim];
        let mut weighted = vec![0.0; dim];
        let mut interaction = vec![0.0; dim];
        // Each entry extends the state with its highest set bit removed.
        for idx in 1..dim {
            let top = usize::BITS as usize - 1 - idx.leading_zeros() as usize;
            let rest = idx & !(1 << top);
            excitations[idx] = excitations[rest] + 1.0;
            weighted[idx] = weighted[rest] + weights[top];
            let mut v = interaction[rest];
            for j in 0..top {
                if rest >> j & 1 == 1 {
                    v += vdw.get(top, j);
                }
            }
            interaction[idx] = v;
        }
        Self {
            n_atoms: n,
            excitations,
            weighted,
            interaction,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    #[inline]
    pub fn energy(&self, idx: usize, delta_global: f64, delta_local: f64) -> f64 {
        -delta_global * self.excitations[idx] - delta_local * self.weighted[idx] + self.interaction[idx]
    }
}

/// H(t)|ψ⟩ with drive values taken from `sample`.
pub fn apply_hamiltonian(terms: &DiagonalTerms, sample: &DriveSample, psi: &StateVector) -> StateVector {
    let n = terms.n_atoms;
    let amps = &psi.amplitudes;
    let half = 0.5 * sample.omega;
    // |g⟩⟨r| carries e^{iφ}, its conjugate e^{-iφ}.
    let lower = Complex64::from_polar(half, sample.phase);
    let raise = lower.conj();
    let out = (0..amps.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|idx| {
            let mut acc = amps[idx] * terms.energy(idx, sample.delta_global, sample.delta_local);
            if half != 0.0 {
                for i in 0..n {
                    let partner = amps[idx ^ (1 << i)];
                    acc += if idx >> i & 1 == 1 { raise * partner } else { lower * partner };
                }
            }
            acc
        })
        .collect();
    StateVector {
        n_atoms: n,
        amplitudes: out,
    }
}

/// H(t)|ψ⟩ for the system's own program evaluated at `t`.
pub fn hamiltonian_apply(system: &RydbergSystem, t: f64, psi: &StateVector) -> Result<StateVector> {
    if psi.n_atoms != system.n_atoms() {
        return Err(Error::LengthMismatch {
            left: psi.n_atoms,
            right: system.n_atoms(),
        });
    }
    let sample = system.program.sample_at(t)?;
    Ok(apply_hamiltonian(&system.diagonal_terms(), &sample, psi))
}

fn apply_diagonal_phase(terms: &DiagonalTerms, sample: &DriveSample, dt: f64, amps: &mut [Complex64]) {
    amps.par_iter_mut()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .for_each(|(idx, a)| {
            let e = terms.energy(idx, sample.delta_global, sample.delta_local);
            *a *= Complex64::from_polar(1.0, -e * dt);
        });
}

/// exp(−iθ M) with M = e^{iφ}|0⟩⟨1| + h.c. on every site, θ = Ω dt / 2.
fn apply_drive_rotations(n: usize, omega: f64, phase: f64, dt: f64, amps: &mut [Complex64]) {
    let theta = 0.5 * omega * dt;
    if theta == 0.0 {
        return;
    }
    let c = Complex64::new(theta.cos(), 0.0);
    let s = theta.sin();
    // −i sinθ e^{iφ} acts from |1⟩ into |0⟩, −i sinθ e^{−iφ} the other way.
    let to_ground = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, phase);
    let to_rydberg = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -phase);
    for i in 0..n {
        let stride = 1usize << i;
        let block_min = (PAR_MIN_LEN / (2 * stride)).max(1);
        amps.par_chunks_mut(2 * stride)
            .with_min_len(block_min)
            .for_each(|block| {
                let (lo, hi) = block.split_at_mut(stride);
                for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (g, r) = (*a0, *a1);
                    *a0 = c * g + to_ground * r;
                    *a1 = c * r + to_rydberg * g;
                }
            });
    }
}

/// Propagates `initial` through `drive` with `n_substeps` Strang steps,
/// sampling the drive at each substep midpoint.
pub fn evolve_drive(terms: &DiagonalTerms, drive: &dyn Drive, n_substeps: usize, initial: StateVector) -> Result<StateVector> {
    if n_substeps == 0 {
        return Err(Error::invalid("n_substeps must be positive"));
    }
    if initial.n_atoms != terms.n_atoms {
        return Err(Error::LengthMismatch {
            left: initial.n_atoms,
            right: terms.n_atoms,
        });
    }
    let dt = drive.duration() / n_substeps as f64;
    let mut amps = initial.amplitudes;
    for k in 0..n_substeps {
        let mid = drive.at((k as f64 + 0.5) * dt);
        apply_diagonal_phase(terms, &mid, 0.5 * dt, &mut amps);
        apply_drive_rotations(terms.n_atoms, mid.omega, mid.phase, dt, &mut amps);
        apply_diagonal_phase(terms, &mid, 0.5 * dt, &mut amps);
    }
    if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFinite("state amplitudes".into()));
    }
    Ok(StateVector {
        n_atoms: terms.n_atoms,
        amplitudes: amps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    /// Integrator substeps per interpolation step.
    pub substep_factor: usize,
    pub max_atoms: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            substep_factor: DEFAULT_SUBSTEP_FACTOR,
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

/// Evolves |00…0⟩ under the system's program, resampled on its
/// interpolation grid.
pub fn evolve(system: &RydbergSystem, opts: &EvolveOptions) -> Result<StateVector> {
    let n = system.n_atoms();
    if n > opts.max_atoms {
        return Err(Error::TooManyAtoms { n, max: opts.max_atoms });
    }
    let drive = SampledDrive::new(&system.program);
    let n_substeps = opts.substep_factor.max(1) * system.program.n_steps;
    evolve_drive(&system.diagonal_terms(), &drive, n_substeps, StateVector::ground(n))
}

/// Measurement record: text bitstring to number of shots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEnsemble {
    pub n_atoms: usize,
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl SampleEnsemble {
    /// Builds an ensemble from (basis index, count) pairs.
    pub fn from_counts(n_atoms: usize, counts: impl IntoIterator<Item = (u64, u64)>, seed: u64) -> Self {
        let mut map = BTreeMap::new();
        for (idx, c) in counts {
            if c > 0 {
                *map.entry(bits::to_text(idx, n_atoms)).or_insert(0) += c;
            }
        }
        let shots = map.values().sum();
        Self {
            n_atoms,
            counts: map,
            shots,
            seed,
        }
    }

    /// (basis index, count), ascending by index.
    pub fn indexed_counts(&self) -> Result<Vec<(u64, u64)>> {
        let mut v = self
            .counts
            .iter()
            .map(|(k, &c)| bits::parse(k).map(|i| (i, c)))
            .collect::<Result<Vec<_>>>()?;
        v.sort_unstable();
        Ok(v)
    }

    /// Most frequent outcome, ties to the smallest index.
    pub fn mode(&self) -> Result<Option<u64>> {
        Ok(self
            .indexed_counts()?
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i))
    }
}

/// Seeded multinomial draw over |amplitude|².
pub fn sample(psi: &StateVector, shots: u64, seed: u64) -> Result<SampleEnsemble> {
    if shots == 0 {
        return Err(Error::invalid("shots must be positive"));
    }
    let mut cdf = Vec::with_capacity(psi.amplitudes.len());
    let mut total = 0.0;
    for a in &psi.amplitudes {
        total += a.norm_sqr();
        cdf.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonFinite("state norm".into()));
    }
    let last_nonzero = psi.amplitudes.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(last_nonzero);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    Ok(SampleEnsemble::from_counts(psi.n_atoms, counts, seed))
}

/// Diagonal energies of H(T) for every basis state.
pub fn final_diagonal_spectrum(system: &RydbergSystem) -> Result<Vec<f64>> {
    let n = system.n_atoms();
    if n > DEFAULT_MAX_ATOMS {
        return Err(Error::TooManyAtoms {
            n,
            max: DEFAULT_MAX_ATOMS,
        });
    }
    let terms = system.diagonal_terms();
    let end = system.program.sample_at(system.program.total_time)?;
    Ok((0..1usize << n)
        .map(|idx| terms.energy(idx, end.delta_global, end.delta_local))
        .collect())
}

/// Basis index of the lowest energy, ties to the smallest index.
pub fn argmin(energies: &[f64]) -> Option<u64> {
    energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i as u64)
}

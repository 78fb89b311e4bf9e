//! Acceptance suite. Prints one PASS/FAIL line per criterion. Failures are
//! reported, not fatal, unless `QFS_ACCEPTANCE_STRICT=1` is set.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`. Criteria that
//! need the public benchmark tables look for them in `$QFS_DATA_DIR`, or in
//! `data/` at the workspace root (see `scripts/fetch_datasets.py`).

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qfs_core::geometry::{self, DistanceInterval, IntervalMode, Point};
use qfs_core::infometrics::{self, mutual_information};
use qfs_core::pulses::{self, DetuningChannel, DriveProgram, Schedule};
use qfs_core::quantum_sim::{self, ConstantDrive, DiagonalTerms, EvolveOptions};
use qfs_core::selection::{self, FilterMode, KeptBitstring};
use qfs_core::{
    bits, ComparisonTable, MdsOptions, Method, PairMatrix, PhysicalConstants, QuboInstance, RydbergSystem,
    SampleEnsemble, ScheduleShape, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }
}

struct Ctx {
    work: tempfile::TempDir,
    data_dir: PathBuf,
    /// Run directory of the Telco pipeline, once criterion 8 has produced it.
    telco_run: std::cell::RefCell<Option<PathBuf>>,
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

// ---------------------------------------------------------------------------
// 1. MI oracle equivalence

fn oracle_mi(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut ma: BTreeMap<u32, usize> = BTreeMap::new();
    let mut mb: BTreeMap<u32, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ma[&x] as f64 / n;
            let py = mb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum()
}

fn criterion_1(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for _ in 0..200 {
        let cols = rng.random_range(1..=5);
        let rows = rng.random_range(1..=200);
        let table: Vec<Vec<u32>> = (0..cols)
            .map(|_| {
                let levels = rng.random_range(1..=5u32);
                (0..rows).map(|_| rng.random_range(0..levels)).collect()
            })
            .collect();
        for a in &table {
            for b in &table {
                let got = mutual_information(a, b).unwrap();
                worst = worst.max((got - oracle_mi(a, b)).abs());
                pairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst <= 1e-12 && within(elapsed, 10.0),
        format!("200 tables, {pairs} column pairs, max |MI - oracle| = {worst:.2e} (tol 1e-12), budget 10 s"),
    )
}

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSpec {
    name: &'static str,
    files: &'static [&'static str],
    targets: &'static [&'static str],
    delimiter: char,
    exclude: &'static [&'static str],
}

const ADULT: DatasetSpec = DatasetSpec {
    name: "adult",
    files: &["adult.csv"],
    targets: &["income", "income-per-year"],
    delimiter: ',',
    exclude: &[],
};
const BANK: DatasetSpec = DatasetSpec {
    name: "bank",
    files: &["bank-full.csv"],
    targets: &["y"],
    delimiter: ';',
    exclude: &[],
};
const TELCO: DatasetSpec = DatasetSpec {
    name: "telco",
    files: &["Telco-Customer-Churn.csv", "WA_Fn-UseC_-Telco-Customer-Churn.csv"],
    targets: &["Churn"],
    delimiter: ',',
    exclude: &["customerID"],
};

/// Writes a default config for `spec` into `dir`, or explains why it cannot.
fn dataset_config(ctx: &Ctx, spec: &DatasetSpec, dir: &Path, extra: &str) -> Result<PathBuf, String> {
    let path = spec
        .files
        .iter()
        .map(|f| ctx.data_dir.join(f))
        .find(|p| p.exists())
        .ok_or_else(|| format!("{} not found in {}", spec.files[0], ctx.data_dir.display()))?;
    let header = std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    let columns: Vec<String> = header
        .split(spec.delimiter)
        .map(|c| c.trim().trim_matches('"').to_string())
        .collect();
    let target = spec
        .targets
        .iter()
        .find(|t| columns.iter().any(|c| c == *t))
        .ok_or_else(|| format!("no target column {:?} in {}", spec.targets, path.display()))?;
    std::fs::create_dir_all(dir).unwrap();
    let exclude: Vec<String> = spec.exclude.iter().map(|e| format!("\"{e}\"")).collect();
    let text = format!(
        "dataset = \"{}\"\ntarget = \"{target}\"\ndataset_name = \"{}\"\ndelimiter = \"{}\"\nexclude = [{}]\n{extra}\n",
        path.display(),
        spec.name,
        spec.delimiter,
        exclude.join(", ")
    );
    let cfg = dir.join(format!("{}.toml", spec.name));
    std::fs::write(&cfg, text).unwrap();
    Ok(cfg)
}

fn run_stages(cfg: &Path, out: &Path, stages: &[&str]) -> Result<(), String> {
    for s in stages {
        let o = common::stage(s, cfg, out);
        if !o.status.success() {
            return Err(format!("`{s}` exited {:?}: {}", o.status.code(), common::stderr(&o).trim()));
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// ---------------------------------------------------------------------------
// 2. Embedding fidelity

fn criterion_2(ctx: &Ctx) -> Verdict {
    let mut all_pass = true;
    let mut details = Vec::new();
    let mut found = 0;
    for spec in [&ADULT, &BANK, &TELCO] {
        let dir = ctx.work.path().join(format!("embed-{}", spec.name));
        let cfg = match dataset_config(ctx, spec, &dir, "") {
            Ok(c) => c,
            Err(why) => {
                all_pass = false;
                details.push(format!("{:<6} FAIL  unavailable: {why}", spec.name));
                continue;
            }
        };
        found += 1;
        let out = dir.join("run");
        let start = Instant::now();
        if let Err(e) = run_stages(&cfg, &out, &["ingest", "info", "embed"]) {
            all_pass = false;
            details.push(format!("{:<6} FAIL  {e}", spec.name));
            continue;
        }
        let elapsed = start.elapsed();
        let layout: qfs_core::AtomLayout = read_json(&out.join("layout.json"));
        let ok = layout.mean_error <= 0.35 && within(elapsed, 300.0);
        all_pass &= ok;
        // Same redundancy, interval widened with the dilation instead.
        let adaptive = dir.join("adaptive");
        std::fs::create_dir_all(&adaptive).unwrap();
        std::fs::copy(out.join("info.json"), adaptive.join("info.json")).unwrap();
        let acfg = dataset_config(ctx, spec, &dir, "[mds]\nrepair = \"adaptive_interval\"").unwrap();
        let adaptive_eps = run_stages(&acfg, &adaptive, &["embed"])
            .map(|_| read_json::<qfs_core::AtomLayout>(&adaptive.join("layout.json")).mean_error);
        details.push(format!(
            "{:<6} {}  {} atoms, mean eps = {:.4} (band <= 0.35), dilation x{:.2}, {:.1} s; \
             adaptive-interval repair: mean eps = {}",
            spec.name,
            if ok { "PASS" } else { "FAIL" },
            layout.n_atoms(),
            layout.mean_error,
            layout.dilation,
            elapsed.as_secs_f64(),
            adaptive_eps.map_or_else(|e| e, |v| format!("{v:.4}"))
        ));
    }
    Verdict {
        pass: all_pass,
        summary: format!("{found}/3 datasets available, mean eps <= 0.35 on each, budget 5 min per dataset"),
        details,
    }
}

// ---------------------------------------------------------------------------
// Simulator helpers

fn random_layout(rng: &mut ChaCha8Rng, n: usize, r_b: f64, min_gap: f64) -> Vec<Point> {
    let side = r_b * (1.5 + 1.5 * (n as f64).sqrt());
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = [rng.random::<f64>() * side, rng.random::<f64>() * side];
        if pts.iter().all(|q| geometry::distance(&p, q) >= min_gap * r_b) {
            pts.push(p);
        }
    }
    pts
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let max = w.iter().copied().fold(0.0, f64::max);
    w.iter_mut().for_each(|x| *x /= max);
    w
}

fn random_schedule(rng: &mut ChaCha8Rng, t: f64, lo: f64, hi: f64) -> Schedule {
    let knots = rng.random_range(2..=8);
    let pairs: Vec<(f64, f64)> = (0..knots)
        .map(|k| (t * k as f64 / (knots - 1) as f64, rng.random_range(lo..hi)))
        .collect();
    Schedule::from_pairs(&pairs).unwrap()
}

/// Dense H(t) written from scratch: basis bit i is atom i,
/// H = Σ Ω/2 (e^{iφ}|0⟩⟨1| + e^{-iφ}|1⟩⟨0|) − Σ (Δg + p_i Δl) n_i + Σ V_ij n_i n_j.
fn dense_hamiltonian(
    positions: &[Point],
    c6: f64,
    weights: &[f64],
    omega: f64,
    phase: f64,
    dg: f64,
    dl: f64,
) -> Vec<Vec<Complex64>> {
    let n = positions.len();
    let dim = 1usize << n;
    let mut h = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (s, row) in h.iter_mut().enumerate() {
        let mut e = 0.0;
        for i in 0..n {
            if s >> i & 1 == 1 {
                e -= dg + weights[i] * dl;
                for j in 0..i {
                    if s >> j & 1 == 1 {
                        e += c6 / geometry::distance(&positions[i], &positions[j]).powi(6);
                    }
                }
            }
        }
        row[s] = Complex64::new(e, 0.0);
    }
    for s in 0..dim {
        for i in 0..n {
            if s >> i & 1 == 0 {
                let r = s | 1 << i;
                h[s][r] += Complex64::from_polar(omega / 2.0, phase);
                h[r][s] += Complex64::from_polar(omega / 2.0, -phase);
            }
        }
    }
    h
}

fn matvec(h: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    h.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Classical RK4 on i dψ/dt = H(t) ψ, with H from the exact schedule.
fn rk4_oracle(positions: &[Point], c6: f64, program: &DriveProgram, steps: usize) -> Vec<Complex64> {
    let dim = 1usize << positions.len();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    let h_at = |t: f64| {
        let s = program.sample_at(t.min(program.total_time)).unwrap();
        dense_hamiltonian(positions, c6, &program.site_weights, s.omega, s.phase, s.delta_global, s.delta_local)
    };
    let minus_i = Complex64::new(0.0, -1.0);
    let dt = program.total_time / steps as f64;
    let axpy = |x: &[Complex64], k: &[Complex64], a: f64| -> Vec<Complex64> {
        x.iter().zip(k).map(|(x, k)| x + k * a).collect()
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        let (h0, h1, h2) = (h_at(t), h_at(t + 0.5 * dt), h_at(t + dt));
        let f = |h: &[Vec<Complex64>], v: &[Complex64]| -> Vec<Complex64> {
            matvec(h, v).into_iter().map(|x| x * minus_i).collect()
        };
        let k1 = f(&h0, &psi);
        let k2 = f(&h1, &axpy(&psi, &k1, 0.5 * dt));
        let k3 = f(&h1, &axpy(&psi, &k2, 0.5 * dt));
        let k4 = f(&h2, &axpy(&psi, &k3, dt));
        for i in 0..dim {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    psi
}

fn default_program(p: &[f64], constants: &PhysicalConstants) -> DriveProgram {
    pulses::build_default_program(constants, p, pulses::DEFAULT_N_STEPS, &ScheduleShape::default()).unwrap()
}

// ---------------------------------------------------------------------------
// 3. Simulator physics suite

fn criterion_3(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let c = PhysicalConstants::default();
    let r_b = geometry::blockade_radius(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = EvolveOptions::default();

    // (a) norm conservation on random programs.
    let mut norm_dev = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let t = rng.random_range(1e-6..6e-6);
        let program = DriveProgram {
            omega: random_schedule(&mut rng, t, 0.0, 2.0 * c.omega_max),
            phase: random_schedule(&mut rng, t, -std::f64::consts::PI, std::f64::consts::PI),
            delta_global: random_schedule(&mut rng, t, -3e7, 3e7),
            delta_local_envelope: random_schedule(&mut rng, t, 0.0, 3e7),
            site_weights: random_weights(&mut rng, n),
            n_steps: rng.random_range(10..=60),
            total_time: t,
        };
        let positions = random_layout(&mut rng, n, r_b, 0.6);
        let system = RydbergSystem::new(positions, c.c6, program, 20).unwrap();
        let psi = quantum_sim::evolve(&system, &opts).unwrap();
        norm_dev = norm_dev.max((psi.norm() - 1.0).abs());
    }
    let a = norm_dev <= 1e-6;

    // (b) single-atom Rabi oscillation against sin²(Ωt/2).
    let mut rabi_dev = 0.0f64;
    let terms = DiagonalTerms::new(&PairMatrix::zeros(1), &[1.0]);
    for k in 1..=20 {
        let t = k as f64 * 0.37e-6;
        let drive = ConstantDrive {
            omega: c.omega_max,
            phase: 0.0,
            delta_global: 0.0,
            delta_local: 0.0,
            duration: t,
        };
        let psi = quantum_sim::evolve_drive(&terms, &drive, 64, StateVector::ground(1)).unwrap();
        let expected = (c.omega_max * t / 2.0).sin().powi(2);
        rabi_dev = rabi_dev.max((psi.probability(1) - expected).abs());
    }
    let b = rabi_dev <= 1e-6;

    // (c) halving the integrator step at the default program.
    let mut worst_change = 0.0f64;
    for n in [4, 6, 8] {
        let p = random_weights(&mut rng, n);
        let system = RydbergSystem::new(random_layout(&mut rng, n, r_b, 0.7), c.c6, default_program(&p, &c), 20).unwrap();
        let coarse = quantum_sim::evolve(&system, &opts).unwrap();
        let fine = quantum_sim::evolve(
            &system,
            &EvolveOptions {
                substep_factor: 2 * opts.substep_factor,
                ..opts
            },
        )
        .unwrap();
        worst_change = worst_change.max(1.0 - coarse.fidelity(&fine));
    }
    let cc = worst_change <= 1e-4;

    // (d) H|ψ⟩ against the dense 8×8 matrix, relative to the operator scale.
    let mut apply_dev = 0.0f64;
    for _ in 0..20 {
        let p = random_weights(&mut rng, 3);
        let mut program = default_program(&p, &c);
        program.phase = Schedule::constant(rng.random_range(-3.0..3.0), c.total_time).unwrap();
        let positions = random_layout(&mut rng, 3, r_b, 0.6);
        let system = RydbergSystem::new(positions.clone(), c.c6, program.clone(), 20).unwrap();
        let amps: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let psi = StateVector::from_amplitudes(amps.clone()).unwrap();
        let t = rng.random_range(0.0..c.total_time);
        let s = program.sample_at(t).unwrap();
        let h = dense_hamiltonian(&positions, c.c6, &p, s.omega, s.phase, s.delta_global, s.delta_local);
        let scale = h.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);
        let expected = matvec(&h, psi.amplitudes());
        let got = quantum_sim::hamiltonian_apply(&system, t, &psi).unwrap();
        for (x, y) in got.amplitudes().iter().zip(&expected) {
            apply_dev = apply_dev.max((x - y).norm() / scale);
        }
    }
    let d = apply_dev <= 1e-12;

    let elapsed = start.elapsed();
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    Verdict {
        pass: a && b && cc && d && within(elapsed, 120.0),
        summary: "norm, Rabi, step halving and dense-operator checks, budget 2 min".into(),
        details: vec![
            format!("(a) {}  50 random programs N <= 8: max |norm - 1| = {norm_dev:.2e} (tol 1e-6)", mark(a)),
            format!("(b) {}  single-atom Rabi: max |P1 - sin^2(Wt/2)| = {rabi_dev:.2e} (tol 1e-6)", mark(b)),
            format!("(c) {}  dt halving at defaults: max 1 - F = {worst_change:.2e} (tol 1e-4)", mark(cc)),
            format!("(d) {}  H|psi> vs dense 8x8: max rel. deviation = {apply_dev:.2e} (tol 1e-12)", mark(d)),
        ],
    }
}

// ---------------------------------------------------------------------------
// 4. Blockade

fn criterion_4(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let c = PhysicalConstants::default();
    let r_b = geometry::blockade_radius(&c);
    let program = default_program(&[1.0, 1.0], &c);
    let end = program.sample_at(c.total_time).unwrap();
    let final_detuning = end.delta_global + end.delta_local;
    let mut details = Vec::new();
    let mut pass = final_detuning > 0.0;
    for (sep, check) in [(0.8, "<= 0.05"), (3.0, ">= 0.8")] {
        let positions = vec![[0.0, 0.0], [sep * r_b, 0.0]];
        let system = RydbergSystem::new(positions.clone(), c.c6, program.clone(), 20).unwrap();
        let p11 = quantum_sim::evolve(&system, &EvolveOptions::default()).unwrap().probability(3);
        let oracle = rk4_oracle(&positions, c.c6, &program, 40_000)[3].norm_sqr();
        let bound_ok = if sep < 1.0 { p11 <= 0.05 } else { p11 >= 0.8 };
        let agree = (p11 - oracle).abs() <= 0.01;
        pass &= bound_ok && agree;
        details.push(format!(
            "{} d = {sep} R_b: P(11) = {p11:.4} (want {check}), RK4 oracle {oracle:.4}, |diff| = {:.1e} (tol 0.01)",
            if bound_ok && agree { "PASS" } else { "FAIL" },
            (p11 - oracle).abs()
        ));
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: pass && within(elapsed, 30.0),
        summary: format!("two atoms, default program, final detuning {final_detuning:.2e} rad/s, budget 30 s"),
        details,
    }
}

// ---------------------------------------------------------------------------
// 5. Adiabatic recovery

/// Random redundancy/relevance instance pushed through the embedding and the
/// default program, as the pipeline would.
fn random_instance(rng: &mut ChaCha8Rng, n: usize, c: &PhysicalConstants) -> RydbergSystem {
    let r_b = geometry::blockade_radius(c);
    let relevance: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
    let redundancy = PairMatrix::from_fn(n, |_, _| {
        if rng.random_bool(0.25) {
            rng.random_range(0.3..1.0)
        } else {
            rng.random_range(0.0..0.1)
        }
    });
    let raw = geometry::raw_distance_matrix(&redundancy, geometry::default_floor(&redundancy));
    let targets = geometry::rescale_distances(&raw, DistanceInterval::for_blockade(r_b, IntervalMode::BlockadeFloor)).unwrap();
    let opts = MdsOptions {
        n_restarts: 4,
        ..Default::default()
    };
    let layout = geometry::mds_embed(&targets, r_b, &opts).unwrap();
    let p = infometrics::site_weights(&relevance, infometrics::DEFAULT_MIN_WEIGHT).unwrap();
    RydbergSystem::new(layout.positions, c.c6, default_program(&p, c), 20).unwrap()
}

fn criterion_5(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let defaults = PhysicalConstants::default();
    let r_b = geometry::blockade_radius(&defaults);

    // Curated: atoms 0 and 1 blockade each other, atom 2 is far from both;
    // the lowest final energy excites atoms 0 and 2.
    let slow = PhysicalConstants {
        total_time: 2.0 * defaults.total_time,
        ..defaults
    };
    let program = default_program(&[1.0, 0.6, 0.8], &slow);
    let slew = pulses::validate_slew(&program, 0.25).unwrap();
    let positions = vec![[0.0, 0.0], [0.8 * r_b, 0.0], [0.4 * r_b, 3.0 * r_b]];
    let system = RydbergSystem::new(positions, slow.c6, program, 20).unwrap();
    let ground = quantum_sim::argmin(&quantum_sim::final_diagonal_spectrum(&system).unwrap()).unwrap();
    let population = quantum_sim::evolve(&system, &EvolveOptions::default()).unwrap().probability(ground);
    let curated = slew.pass && population >= 0.9;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = 0;
    let mut sizes = Vec::new();
    for i in 0..20 {
        let n = rng.random_range(3..=8);
        let system = random_instance(&mut rng, n, &defaults);
        let target = quantum_sim::argmin(&quantum_sim::final_diagonal_spectrum(&system).unwrap()).unwrap();
        let psi = quantum_sim::evolve(&system, &EvolveOptions::default()).unwrap();
        let mode = quantum_sim::sample(&psi, 10_000, i).unwrap().mode().unwrap().unwrap();
        hits += usize::from(mode == target);
        sizes.push(n);
    }
    let random_ok = hits * 2 >= 20;
    let elapsed = start.elapsed();
    Verdict {
        pass: curated && random_ok && within(elapsed, 600.0),
        summary: "curated slow instance and 20 random instances, budget 10 min".into(),
        details: vec![
            format!(
                "{}  curated 3 atoms, T = 2x default, max |s| = {:.3} (<= 0.25): P({}) = {population:.4} (want >= 0.9)",
                if curated { "PASS" } else { "FAIL" },
                slew.max_abs_slew,
                bits::to_text(ground, 3)
            ),
            format!(
                "{}  random N in {:?}: argmin is the modal outcome in {hits}/20 (want >= 10)",
                if random_ok { "PASS" } else { "FAIL" },
                (sizes.iter().min().unwrap(), sizes.iter().max().unwrap())
            ),
        ],
    }
}

// ---------------------------------------------------------------------------
// 6. Selection oracles

fn oracle_filter(ens: &SampleEnsemble, inst: &QuboInstance, frac: f64, mode: FilterMode) -> Vec<KeptBitstring> {
    let mut distinct: Vec<(f64, u64, u64)> = ens
        .counts
        .iter()
        .map(|(s, &c)| {
            let idx = bits::parse(s).unwrap();
            (inst.energy_of_index(idx), idx, c)
        })
        .collect();
    distinct.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let grouped: Vec<(f64, u64, u64)> = match mode {
        FilterMode::PerShot => {
            // Expand to individual shots, sort, truncate, regroup.
            let shots: Vec<(f64, u64)> = distinct
                .iter()
                .flat_map(|&(e, i, c)| std::iter::repeat_n((e, i), c as usize))
                .collect();
            let keep = (frac * ens.shots as f64).ceil() as usize;
            let mut out: Vec<(f64, u64, u64)> = Vec::new();
            for (e, i) in shots.into_iter().take(keep) {
                match out.last_mut() {
                    Some(last) if last.1 == i => last.2 += 1,
                    _ => out.push((e, i, 1)),
                }
            }
            out
        }
        FilterMode::UniqueBitstring => {
            let keep = ((frac * distinct.len() as f64).ceil() as usize).max(1);
            distinct.into_iter().take(keep).collect()
        }
    };
    grouped
        .into_iter()
        .map(|(energy, index, count)| KeptBitstring {
            bitstring: bits::to_text(index, ens.n_atoms),
            index,
            count,
            energy,
        })
        .collect()
}

fn criterion_6(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut filter_mismatch = 0;
    for e in 0..100 {
        let n = rng.random_range(2..=10);
        let outcomes = rng.random_range(1..=200);
        let counts: Vec<(u64, u64)> = (0..outcomes)
            .map(|_| (rng.random_range(0..1u64 << n), rng.random_range(1..=50)))
            .collect();
        let ens = SampleEnsemble::from_counts(n, counts, e);
        let relevance = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        // Coarse values provoke energy ties.
        let redundancy = PairMatrix::from_fn(n, |_, _| f64::from(rng.random_range(0..4u8)) * 0.1);
        let inst = QuboInstance::new(relevance, redundancy, 0.5).unwrap();
        let frac = [0.1, 0.05, 0.25, 1.0][e as usize % 4];
        for mode in [FilterMode::PerShot, FilterMode::UniqueBitstring] {
            let got = selection::low_energy_filter(&ens, &inst, frac, mode).unwrap();
            if got.entries != oracle_filter(&ens, &inst, frac, mode) {
                filter_mismatch += 1;
            }
        }
    }

    let threshold = 0.7;
    let mut subsets = 0;
    let mut violations = 0;
    let mut unjustified_relaxations = 0;
    let mut greedy_misses = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let dens: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let norm = PairMatrix::from_fn(n, |_, _| rng.random::<f64>());
        let admissible = |s: &[usize]| s.iter().all(|&a| s.iter().all(|&b| a == b || norm.get(a, b) <= threshold));
        // (k, subset, features the pass could draw from)
        let mut emitted = Vec::new();
        for k in 1..=n {
            emitted.push((k, selection::redundancy_prune(&dens, &norm, threshold, k).unwrap(), (0..n).collect::<Vec<_>>()));
        }
        let mut used: Vec<usize> = Vec::new();
        for s in selection::alternatives(&dens, &norm, threshold, 2, 3).unwrap() {
            let pool = (0..n).filter(|f| !used.contains(f)).collect();
            used.extend(&s.features);
            emitted.push((2, s, pool));
        }
        for (k, s, pool) in emitted {
            subsets += 1;
            if !s.relaxed {
                violations += usize::from(!admissible(&s.features) || s.features.len() != k);
                continue;
            }
            // A relaxed subset must start with a maximal admissible set.
            let prefix: Vec<usize> = s
                .features
                .iter()
                .copied()
                .scan(Vec::new(), |acc: &mut Vec<usize>, f| {
                    acc.push(f);
                    Some((f, admissible(acc)))
                })
                .take_while(|&(_, ok)| ok)
                .map(|(f, _)| f)
                .collect();
            let extendable = pool.iter().any(|&f| {
                !prefix.contains(&f) && {
                    let mut t = prefix.clone();
                    t.push(f);
                    admissible(&t)
                }
            });
            unjustified_relaxations += usize::from(extendable);
            // Exhaustive search: did an admissible k-subset of the pool exist?
            let exists = (0u32..1 << pool.len()).any(|m| {
                m.count_ones() as usize == k && {
                    let set: Vec<usize> = (0..pool.len()).filter(|&i| m >> i & 1 == 1).map(|i| pool[i]).collect();
                    admissible(&set)
                }
            });
            greedy_misses += usize::from(exists);
        }
    }
    let elapsed = start.elapsed();
    let pass = filter_mismatch == 0 && violations == 0 && unjustified_relaxations == 0 && within(elapsed, 60.0);
    Verdict {
        pass,
        summary: "filter vs sort-and-truncate, exhaustive pairwise bound, budget 1 min".into(),
        details: vec![
            format!("low_energy_filter: {filter_mismatch} mismatches over 100 ensembles x 2 modes"),
            format!(
                "redundancy_prune: {subsets} subsets, {violations} unflagged bound violations, \
                 {unjustified_relaxations} unjustified relaxations; {greedy_misses} relaxed cases where \
                 exhaustive search finds an admissible subset the greedy pass misses (reported, not a failure)"
            ),
        ],
    }
}

// ---------------------------------------------------------------------------
// 7. Slew validation

fn criterion_7(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let c = PhysicalConstants::default();
    let p = [1.0, 0.5, 0.25];
    let default = pulses::validate_slew(&default_program(&p, &c), 0.5).unwrap();
    let harsh = PhysicalConstants {
        delta_g_initial: 2.0 * c.delta_g_initial,
        total_time: 0.5 * c.total_time,
        ..c
    };
    let report = pulses::validate_slew(&default_program(&p, &harsh), 0.5).unwrap();
    let global: Vec<_> = report.violations.iter().filter(|v| v.channel == DetuningChannel::Global).collect();
    let pass = default.pass && !report.pass && !global.is_empty() && within(start.elapsed(), 1.0);
    let mut details = vec![format!("default program: max |s| = {:.4} (bound 0.5)", default.max_abs_slew)];
    for v in &report.violations {
        details.push(format!(
            "2x detuning, T/2: violating {:?} segment [{:.2e}, {:.2e}] s, s = {:.4}",
            v.channel, v.t_start, v.t_end, v.slew
        ));
    }
    Verdict {
        pass,
        summary: "default passes, scaled protocol fails with the segment reported, budget 1 s".into(),
        details,
    }
}

// ---------------------------------------------------------------------------
// 8. End-to-end relative benchmark

fn criterion_8(ctx: &Ctx) -> Verdict {
    let dir = ctx.work.path().join("telco-a");
    let cfg = match dataset_config(ctx, &TELCO, &dir, "") {
        Ok(c) => c,
        Err(why) => return Verdict::new(false, format!("Telco Churn unavailable: {why}")),
    };
    let out = dir.join("run");
    let start = Instant::now();
    if let Err(e) = run_stages(&cfg, &out, &["all"]) {
        return Verdict::new(false, e);
    }
    let elapsed = start.elapsed();
    *ctx.telco_run.borrow_mut() = Some(out.clone());
    let table: ComparisonTable = read_json(&out.join("comparison.json"));
    let qfs = table.row(Method::Qfs, 3).and_then(|r| r.auc);
    let mi = table.row(Method::MiRanking, 3).and_then(|r| r.auc);
    let layout: qfs_core::AtomLayout = read_json(&out.join("layout.json"));
    match (qfs, mi) {
        (Some(q), Some(m)) => Verdict::new(
            q >= m - 0.05 && within(elapsed, 1800.0),
            format!(
                "Telco, 2^{} amplitudes: QFS k=3 median AUC {q:.4} vs MI ranking {m:.4} (need >= {:.4}), {:.0} s (budget 30 min)",
                layout.n_atoms(),
                m - 0.05,
                elapsed.as_secs_f64()
            ),
        ),
        _ => Verdict::new(false, "size-3 rows missing from comparison.json"),
    }
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn criterion_9(ctx: &Ctx) -> Verdict {
    let dir = ctx.work.path().join("determinism");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("wide.csv"), common::wide_csv(600, 8, 9)).unwrap();
    let cfg = dir.join("wide.toml");
    std::fs::write(&cfg, "dataset = \"wide.csv\"\ntarget = \"target\"\n").unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        if let Err(e) = run_stages(&cfg, out, &["all"]) {
            return Verdict::new(false, e);
        }
    }
    let same = common::read_all(&a) == common::read_all(&b);
    pass &= same;
    details.push(format!("synthetic 8 features: {}", if same { "byte-identical" } else { "artifacts differ" }));

    if let Some(first) = ctx.telco_run.borrow().clone() {
        let dir = ctx.work.path().join("telco-b");
        let cfg = dataset_config(ctx, &TELCO, &dir, "").unwrap();
        let second = dir.join("run");
        match run_stages(&cfg, &second, &["all"]) {
            Ok(()) => {
                let same = common::read_all(&first) == common::read_all(&second);
                pass &= same;
                details.push(format!("Telco Churn: {}", if same { "byte-identical" } else { "artifacts differ" }));
            }
            Err(e) => {
                pass = false;
                details.push(e);
            }
        }
    } else {
        details.push("Telco Churn: skipped (no run from criterion 8)".into());
    }
    Verdict {
        pass,
        summary: "two `all` runs on a fixed config compare byte-for-byte".into(),
        details,
    }
}

// ---------------------------------------------------------------------------

type Criterion = fn(&Ctx) -> Verdict;

fn main() {
    let criteria: [(u8, &str, Criterion); 9] = [
        (1, "MI oracle equivalence", criterion_1),
        (2, "embedding fidelity on public datasets", criterion_2),
        (3, "simulator physics suite", criterion_3),
        (4, "blockade property", criterion_4),
        (5, "adiabatic recovery", criterion_5),
        (6, "selection oracle equivalence", criterion_6),
        (7, "slew validation", criterion_7),
        (8, "end-to-end relative benchmark", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let data_dir = std::env::var_os("QFS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let data_dir = data_dir.canonicalize().unwrap_or(data_dir);
    let ctx = Ctx {
        work: tempfile::tempdir().unwrap(),
        data_dir,
        telco_run: Default::default(),
    };

    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(|| run(&ctx))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{id}] {name}: {} ({:.1} s)",
            verdict.summary,
            start.elapsed().as_secs_f64()
        );
        for d in &verdict.details {
            println!("       {d}");
        }
        if !verdict.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        if std::env::var_os("QFS_ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
            std::process::exit(1);
        }
    }
}

//! One function per pipeline stage. Every stage reads its inputs from the
//! run directory and writes exactly one JSON checkpoint, so `all` is the
//! literal sequential composition of the stages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qfs_core::dataset::{self, LoadOptions};
use qfs_core::evalharness::{self, EvalOptions};
use qfs_core::geometry::{self, DistanceInterval};
use qfs_core::pulses::{self, DriveProgram, SlewReport};
use qfs_core::quantum_sim::{self, EvolveOptions};
use qfs_core::selection::{self, SelectionOptions};
use qfs_core::{
    bits, AtomLayout, ComparisonTable, FeatureTable, InfoProfile, QuboInstance, RydbergSystem, SampleEnsemble,
    SelectionReport,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const TABLE: &str = "table.json";
pub const INFO: &str = "info.json";
pub const LAYOUT: &str = "layout.json";
pub const PROGRAM: &str = "program.json";
pub const SAMPLES: &str = "samples.json";
pub const SELECTION: &str = "selection.json";
pub const COMPARISON: &str = "comparison.json";
pub const AMPLITUDES: &str = "amplitudes.bin";

/// Checkpoints written by `all`, in stage order.
pub const ARTIFACTS: [&str; 7] = [TABLE, INFO, LAYOUT, PROGRAM, SAMPLES, SELECTION, COMPARISON];

pub const PLOT_FILES: [&str; 6] = [
    "schedules.csv",
    "positions.csv",
    "error_matrix.csv",
    "overlap.csv",
    "metrics.csv",
    "comparison.csv",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Info,
    Embed,
    Program,
    Simulate,
    Select,
    Evaluate,
    All,
}

impl Stage {
    pub const SEQUENCE: [Stage; 7] = [
        Stage::Ingest,
        Stage::Info,
        Stage::Embed,
        Stage::Program,
        Stage::Simulate,
        Stage::Select,
        Stage::Evaluate,
    ];
}

/// Contents of `program.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramArtifact {
    pub program: DriveProgram,
    pub slew: SlewReport,
}

pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.clone(),
        source,
    })?;
    match stage {
        Stage::Ingest => ingest(cfg, dir),
        Stage::Info => info(cfg, dir),
        Stage::Embed => embed(cfg, dir),
        Stage::Program => program(cfg, dir),
        Stage::Simulate => simulate(cfg, dir),
        Stage::Select => select(cfg, dir),
        Stage::Evaluate => evaluate(cfg, dir),
        Stage::All => Stage::SEQUENCE.iter().try_for_each(|&s| run_stage(s, cfg)),
    }
}

fn read_artifact<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, CliError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CliError::MissingArtifact(path)),
        Err(e) => {
            return Err(CliError::CorruptArtifact {
                path,
                reason: e.to_string(),
            })
        }
    };
    serde_json::from_str(&text).map_err(|e| CliError::CorruptArtifact {
        path,
        reason: e.to_string(),
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Output {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn write_artifact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write_file(dir, name, &text)
}

fn ingest(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let opts = LoadOptions {
        target: cfg.target.clone(),
        missing_policy: cfg.missing_policy,
        delimiter: cfg.delimiter as u8,
        exclude: cfg.exclude.clone(),
    };
    let table = dataset::load_table(&cfg.dataset, &opts)?;
    let positives = table.labels.iter().filter(|&&l| l == 1).count();
    write_artifact(dir, TABLE, &table)?;
    eprintln!(
        "ingest: {} rows, {} features, {} positive ({})",
        table.n_samples(),
        table.n_features(),
        positives,
        cfg.dataset_label()
    );
    for w in &table.warnings {
        eprintln!("ingest: warning: {w}");
    }
    Ok(())
}

fn info(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table: FeatureTable = read_artifact(dir, TABLE)?;
    let view = dataset::discretize(&table, cfg.n_bins)?;
    let target: Vec<u32> = table.labels.iter().map(|&l| u32::from(l)).collect();
    let profile = qfs_core::infometrics::profile(&view, &target, table.feature_names(), cfg.n_bins, cfg.min_weight)?;
    write_artifact(dir, INFO, &profile)?;
    let top = evalharness::mi_ranking_topk(&profile.relevance, profile.relevance.len().min(3))?;
    let names: Vec<&str> = top.iter().map(|&i| profile.feature_names[i].as_str()).collect();
    eprintln!(
        "info: {} features, mean redundancy {:.4} nats, most relevant: {}",
        profile.relevance.len(),
        profile.redundancy.mean(),
        names.join(", ")
    );
    Ok(())
}

fn embed(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let profile: InfoProfile = read_artifact(dir, INFO)?;
    if profile.feature_names.len() < 2 {
        return Err(CliError::Validation("embedding needs at least two features".into()));
    }
    let r_b = geometry::blockade_radius(&cfg.constants);
    let raw = geometry::raw_distance_matrix(&profile.redundancy, geometry::default_floor(&profile.redundancy));
    let targets = geometry::rescale_distances(&raw, DistanceInterval::for_blockade(r_b, cfg.interval_mode))?;
    let layout = geometry::mds_embed(&targets, r_b, &cfg.mds_options())?;
    write_artifact(dir, LAYOUT, &layout)?;
    eprintln!(
        "embed: {} atoms, R_b = {:.3} um, mean error {:.4}, dilation x{:.3} (restart seed {})",
        layout.n_atoms(),
        r_b * 1e6,
        layout.mean_error,
        layout.dilation,
        layout.seed_used
    );
    Ok(())
}

fn program(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let profile: InfoProfile = read_artifact(dir, INFO)?;
    let program = pulses::build_default_program(&cfg.constants, &profile.p_weights, cfg.n_steps, &cfg.shape)?;
    program.validate()?;
    let slew = pulses::validate_slew(&program, cfg.slew_bound)?;
    if !slew.pass {
        for v in &slew.violations {
            eprintln!(
                "program: slew violation on {:?} [{:.4e}, {:.4e}] s: |s| = {:.4} > {}",
                v.channel,
                v.t_start,
                v.t_end,
                v.slew.abs(),
                slew.bound
            );
        }
        return Err(CliError::Validation(format!(
            "{} segment(s) exceed the slew bound {} (max |s| = {:.4})",
            slew.violations.len(),
            slew.bound,
            slew.max_abs_slew
        )));
    }
    eprintln!(
        "program: T = {:.3} us, {} steps, max |s| = {:.4} <= {}",
        program.total_time * 1e6,
        program.n_steps,
        slew.max_abs_slew,
        slew.bound
    );
    write_artifact(dir, PROGRAM, &ProgramArtifact { program, slew })?;
    Ok(())
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let artifact: ProgramArtifact = read_artifact(dir, PROGRAM)?;
    let layout: AtomLayout = read_artifact(dir, LAYOUT)?;
    if layout.n_atoms() != artifact.program.n_sites() {
        return Err(CliError::Validation(format!(
            "layout has {} atoms but the program drives {} sites",
            layout.n_atoms(),
            artifact.program.n_sites()
        )));
    }
    let system = RydbergSystem::new(layout.positions, cfg.constants.c6, artifact.program, cfg.max_atoms)?;
    let opts = EvolveOptions {
        substep_factor: cfg.substep_factor,
        max_atoms: cfg.max_atoms,
    };
    let psi = quantum_sim::evolve(&system, &opts)?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(CliError::Numerical(format!("final state norm {norm} drifted from 1")));
    }
    if cfg.write_amplitudes {
        let path = dir.join(AMPLITUDES);
        let file = fs::File::create(&path).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        psi.write_binary(BufWriter::new(file))
            .map_err(|source| CliError::Output { path, source })?;
    }
    let ensemble = quantum_sim::sample(&psi, cfg.shots, cfg.seeds.base_seed)?;
    write_artifact(dir, SAMPLES, &ensemble)?;
    let mode = ensemble.mode()?.map(|m| bits::to_text(m, ensemble.n_atoms));
    eprintln!(
        "simulate: 2^{} amplitudes, {} shots, {} distinct outcomes, mode {}",
        system.n_atoms(),
        ensemble.shots,
        ensemble.counts.len(),
        mode.unwrap_or_default()
    );
    Ok(())
}

fn select(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let profile: InfoProfile = read_artifact(dir, INFO)?;
    let ensemble: SampleEnsemble = read_artifact(dir, SAMPLES)?;
    let instance = QuboInstance::new(profile.relevance.clone(), profile.redundancy.clone(), cfg.alpha)?;
    let opts = SelectionOptions {
        alpha: cfg.alpha,
        filter_fraction: cfg.filter_fraction,
        filter_mode: cfg.filter_mode,
        threshold: cfg.prune_threshold,
        cardinalities: cfg.k_range.clone(),
        alternative_size: cfg.alternative_size,
        n_alternatives: cfg.n_alternatives,
    };
    let report = selection::select(&ensemble, &instance, &profile.normalized_redundancy, &profile.feature_names, &opts)?;
    write_artifact(dir, SELECTION, &report)?;
    eprintln!("select: kept {} of {} shots", report.kept_shots, ensemble.shots);
    for (k, s) in &report.subsets_by_cardinality {
        let note = if s.relaxed { " (threshold relaxed)" } else { "" };
        eprintln!("select: k = {k}: {}{note}", s.names.join(", "));
    }
    Ok(())
}

fn evaluate(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table: FeatureTable = read_artifact(dir, TABLE)?;
    let profile: InfoProfile = read_artifact(dir, INFO)?;
    let report: SelectionReport = read_artifact(dir, SELECTION)?;
    let n = table.n_features();
    let k_range: Vec<usize> = cfg.k_range.iter().copied().filter(|&k| k <= n).collect();
    if k_range.len() < cfg.k_range.len() {
        log::warn!("subset sizes above {n} features skipped");
    }
    if k_range.is_empty() {
        return Err(CliError::Validation(format!("no subset size in k_range fits {n} features")));
    }
    let qfs: BTreeMap<usize, Vec<usize>> = report
        .subsets_by_cardinality
        .iter()
        .map(|(&k, s)| (k, s.features.clone()))
        .collect();
    let opts = EvalOptions {
        train: cfg.train,
        test_fraction: cfg.test_fraction,
    };
    let table = evalharness::compare(
        &cfg.dataset_label(),
        &table,
        &qfs,
        &profile.relevance,
        &k_range,
        &cfg.seeds.eval_seeds,
        &opts,
    )?;
    write_artifact(dir, COMPARISON, &table)?;
    eprintln!("evaluate: median over {} seeds", cfg.seeds.eval_seeds.len());
    eprintln!("{:>3}  {:<11} {:>7} {:>9} {:>7}", "k", "method", "auc", "precision", "recall");
    for r in &table.rows {
        let auc = r.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        eprintln!(
            "{:>3}  {:<11} {:>7} {:>9.4} {:>7.4}",
            r.features,
            r.method.as_str(),
            auc,
            r.precision,
            r.recall
        );
    }
    Ok(())
}

/// Writes the series behind every figure as CSV into `dir`.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let artifact: ProgramArtifact = read_artifact(dir, PROGRAM)?;
    let layout: AtomLayout = read_artifact(dir, LAYOUT)?;
    let profile: InfoProfile = read_artifact(dir, INFO)?;
    let comparison: ComparisonTable = read_artifact(dir, COMPARISON)?;
    if layout.n_atoms() != profile.feature_names.len() {
        return Err(CliError::Validation("layout and info artifacts disagree on the feature count".into()));
    }
    let names = &profile.feature_names;

    let mut schedules = String::from("t,omega,phase,delta_global,delta_local\n");
    for s in artifact.program.sample_grid() {
        let _ = writeln!(schedules, "{},{},{},{},{}", s.t, s.omega, s.phase, s.delta_global, s.delta_local);
    }

    let mut positions = String::from("name,x,y\n");
    for (name, p) in names.iter().zip(&layout.positions) {
        let _ = writeln!(positions, "{},{},{}", csv_field(name), p[0], p[1]);
    }

    let embedded = geometry::pairwise_distances(&layout.positions);
    let mut errors = String::from("i,j,name_i,name_j,target,embedded,error\n");
    for (i, j, eps) in layout.error_matrix.pairs() {
        let _ = writeln!(
            errors,
            "{i},{j},{},{},{},{},{eps}",
            csv_field(&names[i]),
            csv_field(&names[j]),
            layout.target_distances.get(i, j),
            embedded.get(i, j)
        );
    }

    let mut metrics = String::from("dataset,features,method,metric,value\n");
    for r in &comparison.rows {
        let values = [
            ("auc", r.auc.map_or(String::new(), |a| a.to_string())),
            ("precision", r.precision.to_string()),
            ("recall", r.recall.to_string()),
        ];
        for (metric, value) in values {
            let _ = writeln!(
                metrics,
                "{},{},{},{metric},{value}",
                csv_field(&r.dataset),
                r.features,
                r.method.as_str()
            );
        }
    }

    let contents = [
        schedules,
        positions,
        errors,
        comparison.overlap_csv(),
        metrics,
        comparison.to_csv(),
    ];
    PLOT_FILES
        .iter()
        .zip(contents)
        .map(|(name, text)| write_file(dir, name, &text))
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

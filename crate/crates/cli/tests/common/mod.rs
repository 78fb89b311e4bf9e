#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const ARTIFACTS: [&str; 7] = [
    "table.json",
    "info.json",
    "layout.json",
    "program.json",
    "samples.json",
    "selection.json",
    "comparison.json",
];

/// Four features: a noisy copy of the label, a near-duplicate of it, a weak
/// signal and a categorical distractor.
pub fn synthetic_csv(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = String::from("signal,echo,weak,colour,label\n");
    for _ in 0..rows {
        let y = rng.random_bool(0.4) as u8;
        let signal = f64::from(y) * 1.5 + noise.sample(&mut rng);
        let echo = signal + 0.3 * noise.sample(&mut rng);
        let weak = f64::from(y) * 0.5 + noise.sample(&mut rng);
        let colour = ["red", "green", "blue"][rng.random_range(0..3)];
        let label = if y == 1 { "yes" } else { "no" };
        let _ = writeln!(out, "{signal:.5},{echo:.5},{weak:.5},{colour},{label}");
    }
    out
}

/// Writes the synthetic dataset and a config into `dir`; returns the config path.
pub fn write_run(dir: &Path, extra: &str) -> PathBuf {
    std::fs::write(dir.join("synthetic.csv"), synthetic_csv(400, 11)).unwrap();
    let cfg = format!(
        "dataset = \"synthetic.csv\"\ntarget = \"label\"\noutput_dir = \"run\"\nshots = 2000\n\
k_range = [1, 2, 3]\nalternative_size = 2\n{extra}\n[seeds]\nn_restarts = 4\n"
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

pub fn qfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfs"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stage(name: &str, config: &Path, out: &Path) -> Output {
    qfs(&[name, "--config", config.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ARTIFACTS
        .iter()
        .map(|a| (a.to_string(), std::fs::read(dir.join(a)).unwrap()))
        .collect()
}

/// `n_features` numeric columns in correlated pairs plus a binary label;
/// every other column carries some label signal.
pub fn wide_csv(rows: usize, n_features: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out: String = (0..n_features).map(|j| format!("f{j},")).collect();
    out.push_str("target\n");
    for _ in 0..rows {
        let y = rng.random_bool(0.5);
        let mut prev = 0.0;
        for j in 0..n_features {
            let v = if j % 2 == 1 {
                prev + 0.5 * noise.sample(&mut rng)
            } else {
                let signal = if y { 1.0 / (1.0 + j as f64) } else { 0.0 };
                signal + noise.sample(&mut rng)
            };
            prev = v;
            let _ = write!(out, "{v:.5},");
        }
        out.push_str(if y { "1\n" } else { "0\n" });
    }
    out
}

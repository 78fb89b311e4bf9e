mod common;

use common::*;

#[test]
fn all_writes_seven_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "");
    let out = qfs(&["all", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = tmp.path().join("run");
    let mut files: Vec<String> = std::fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let mut expected: Vec<String> = ARTIFACTS.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(files, expected);
    assert!(stderr(&out).contains("evaluate:"));
    assert!(out.stdout.is_empty(), "artifacts go to files only");
}

#[test]
fn simulate_without_program_is_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "");
    let run = tmp.path().join("run");
    for s in ["ingest", "info", "embed"] {
        assert!(stage(s, &cfg, &run).status.success());
    }
    let out = stage("simulate", &cfg, &run);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("program.json"));
    assert!(!run.join("samples.json").exists());
}

#[test]
fn short_protocol_fails_slew_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let mut t = 4e-6;
    let mut failed_at = None;
    for _ in 0..10 {
        let cfg = write_run(tmp.path(), &format!("[constants]\ntotal_time = {t:e}"));
        for s in ["ingest", "info"] {
            assert!(stage(s, &cfg, &run).status.success());
        }
        let out = stage("program", &cfg, &run);
        match out.status.code() {
            Some(0) => t *= 0.8,
            Some(4) => {
                let err = stderr(&out);
                assert!(err.contains("slew violation"), "{err}");
                failed_at = Some(t);
                break;
            }
            other => panic!("unexpected exit {other:?}: {}", stderr(&out)),
        }
    }
    let t = failed_at.expect("some shorter protocol violates the bound");
    assert!(t < 4e-6, "the default protocol passes");
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "n_bin = 4");
    assert_eq!(qfs(&["ingest", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_run(tmp.path(), "");
    std::fs::remove_file(tmp.path().join("synthetic.csv")).unwrap();
    assert_eq!(qfs(&["ingest", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(qfs(&["ingest"]).status.code(), Some(2));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(qfs(&["all", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn binary_target_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "");
    // `colour` has three levels.
    let text = std::fs::read_to_string(&cfg).unwrap().replace("target = \"label\"", "target = \"colour\"");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(qfs(&["ingest", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn all_equals_stage_sequence_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(stage("all", &cfg, &a).status.success());
    for s in ["ingest", "info", "embed", "program", "simulate", "select", "evaluate"] {
        let out = stage(s, &cfg, &b);
        assert!(out.status.success(), "{s}: {}", stderr(&out));
    }
    assert!(stage("all", &cfg, &c).status.success());
    assert_eq!(read_all(&a), read_all(&b));
    assert_eq!(read_all(&a), read_all(&c));
}

#[test]
fn seed_override_changes_samples_only_downstream() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(stage("all", &cfg, &a).status.success());
    let out = qfs(&["all", "--config", cfg.to_str().unwrap(), "--output-dir", b.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success());
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "table.json"), read(&b, "table.json"));
    assert_eq!(read(&a, "info.json"), read(&b, "info.json"));
    assert_ne!(read(&a, "samples.json"), read(&b, "samples.json"));
}

#[test]
fn plots_emit_figure_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "n_steps = 25\nwrite_amplitudes = true");
    let run = tmp.path().join("run");
    assert!(stage("all", &cfg, &run).status.success());
    assert_eq!(std::fs::metadata(run.join("amplitudes.bin")).unwrap().len(), 16 * 16);
    let out = qfs(&["plots", "--output-dir", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let lines = |f: &str| -> Vec<String> {
        std::fs::read_to_string(run.join(f)).unwrap().lines().map(String::from).collect()
    };
    let schedules = lines("schedules.csv");
    assert_eq!(schedules[0].split(',').count(), 5, "time plus four channels");
    assert_eq!(schedules.len() - 1, 25);
    let positions = lines("positions.csv");
    assert_eq!(positions[0], "name,x,y");
    assert_eq!(positions.len() - 1, 4);
    assert_eq!(lines("error_matrix.csv").len() - 1, 6);
    assert_eq!(lines("metrics.csv").len() - 1, 3 * 2 * 3);
    assert_eq!(lines("overlap.csv").len() - 1, 3);
    assert_eq!(lines("comparison.csv").len() - 1, 3 * 2);

    let empty = tempfile::tempdir().unwrap();
    let out = qfs(&["plots", "--output-dir", empty.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn show_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_run(tmp.path(), "alpha = 0.25");
    let out = qfs(&["show-config", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("alpha = 0.25"));
    let again = tmp.path().join("again.toml");
    std::fs::write(&again, &text).unwrap();
    let out2 = qfs(&["show-config", "--config", again.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out2.stdout).unwrap(), text);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffevo::config::ExperimentConfig;
use diffevo::harness::RunManifest;

fn evolve(args: &[&str], env_out: Option<&Path>, cwd: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evolve"));
    cmd.args(args).current_dir(cwd).env_remove("DIFFEVO_OUT");
    if let Some(dir) = env_out {
        cmd.env("DIFFEVO_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn himmelblau_batch_writes_one_row_per_repeat() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = evolve(
        &["benchmark", "--benchmark", "himmelblau", "--repeats", "5", "--out", out.to_str().unwrap()],
        None,
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.contains(",himmelblau,") && r.ends_with(",ok")));
    assert!(String::from_utf8_lossy(&o.stdout).to_lowercase().contains("himmelblau"));

    // nothing written next to the output directory
    let top: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(top, vec!["out"]);
    for f in files_under(&out) {
        assert!(f.starts_with(&out));
    }
    assert_eq!(files_under(&out.join("traces")).len(), 5);
}

#[test]
fn reruns_are_identical_and_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = tmp.path().join(name);
        let o = evolve(
            &[
                "benchmark",
                "--repeats",
                "3",
                "--seed",
                "77",
                "--workers",
                workers,
                "--set",
                "evolve.population=128",
                "--out",
                out.to_str().unwrap(),
            ],
            None,
            tmp.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a.lines().count(), 16);
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "4"));
}

#[test]
fn manifest_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tp");
    let o = evolve(
        &["two-peaks", "--repeats", "2", "--set", "evolve.population=64", "--out", out.to_str().unwrap()],
        None,
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.runs.len(), 2);
    let reloaded = ExperimentConfig::from_text(&manifest.config_text).unwrap();
    assert_eq!(reloaded, manifest.config);
    assert_eq!(ExperimentConfig::load(&out.join("config.txt")).unwrap(), manifest.config);

    // the saved config reproduces the run
    let again = tmp.path().join("again");
    let o = evolve(
        &["two-peaks", "--config", out.join("config.txt").to_str().unwrap(), "--out", again.to_str().unwrap()],
        None,
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(out.join("summary.csv")).unwrap(),
        fs::read_to_string(again.join("summary.csv")).unwrap()
    );
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let o = evolve(
        &["cartpole", "--repeats", "1", "--set", "evolve.population=64", "--set", "schedule.T=3"],
        Some(&env_dir),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "summary.csv", "curves.csv", "genotypes/run000.bin"] {
        assert!(env_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn configuration_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let out = out.to_str().unwrap();
    for args in [
        vec!["benchmark", "--set", "no.such.key=1", "--out", out],
        vec!["benchmark", "--set", "schedule.T=1", "--out", out],
        vec!["benchmark", "--benchmark", "sphere", "--out", out],
        vec!["cartpole", "--preset", "huge", "--out", out],
        vec!["benchmark", "--bogus-flag"],
        vec!["benchmark", "--config", "/nonexistent/config.txt", "--out", out],
    ] {
        let o = evolve(&args, None, tmp.path());
        assert_eq!(o.status.code(), Some(64), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!Path::new(out).exists());
    assert_eq!(evolve(&["--help"], None, tmp.path()).status.code(), Some(0));
}

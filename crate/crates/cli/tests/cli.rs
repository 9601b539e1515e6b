use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "
[data]
source = synth
n_majority = 12
n_minority = 4
test_majority = 3
test_minority = 1
length = 64
noise_sigma = 0.1

[s2i]
width = 32
height = 32
margin = 2

[crd]
k = 2

[model]
channels = 4

[train]
lr = 0.01
epochs = 2
batch_size = 4
";

fn gtda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtda"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&gtda(&["--help"])), 0);
    assert_eq!(code(&gtda(&["--version"])), 0);
    assert_eq!(code(&gtda(&[])), 1);
    assert_eq!(code(&gtda(&["train", "--bogus"])), 1);
}

#[test]
fn config_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{TINY}\n[train]\nwarmup = 3\n"));
    let o = gtda(&["rasterize", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warmup"));

    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("o").display().to_string();
    assert_eq!(code(&gtda(&["rasterize", "--config", &cfg, "--out", &out, "--override", "lr=0.1"])), 1);
    assert_eq!(code(&gtda(&["rasterize", "--config", &cfg, "--out", &out, "--override", "train.lr=-1"])), 1);
    assert_eq!(code(&gtda(&["rasterize", "--config", "/nonexistent/run.ini"])), 1);
}

#[test]
fn data_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o").display().to_string();
    let cfg = write_config(dir.path(), TINY);
    assert_eq!(code(&gtda(&["evaluate", "--config", &cfg, "--out", &out])), 2);

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "1\t0.5\t0.7\n0\t0.1\tnot-a-number\n").unwrap();
    let ucr = format!(
        "[data]\nsource = ucr\ntrain = {}\ntest = {}\n[s2i]\nwidth = 32\nheight = 32\nmargin = 2\n",
        bad.display(),
        bad.display()
    );
    let cfg = write_config(dir.path(), &ucr);
    let o = gtda(&["rasterize", "--config", &cfg, "--out", &out]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn stages_run_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out_s = out.display().to_string();
    let cfg = write_config(dir.path(), TINY);
    for stage in ["rasterize", "resample", "train", "evaluate"] {
        let o = gtda(&[stage, "--config", &cfg, "--out", &out_s, "--seed", "7"]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["resolved_config.ini", "images/manifest.csv", "resample/manifest.csv", "train/model.gtda", "evaluate/metrics.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let snapshot = fs::read_to_string(out.join("resolved_config.ini")).unwrap();
    assert!(snapshot.lines().any(|l| l.replace(' ', "") == "seed=7"));
}

#[test]
fn experiment_reports_every_cell_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), TINY);
    let o = gtda(&["experiment", "--config", &cfg, "--out", &out.display().to_string(), "--override", "run.seeds=1,2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("experiment/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    let stdout = String::from_utf8_lossy(&o.stdout);
    for cell in ["baseline", "CRD", "VBL", "CRD+VBL"] {
        assert!(stdout.lines().any(|l| l.starts_with(cell)), "{cell}");
    }
}

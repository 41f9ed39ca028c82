use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"seed = 7

[experiment]
kind = "simulate"
samples = 40
chains = 2

[sampler]
n = 2
grid = { left = -1.0, right = 1.0, steps = 20 }
tilts = { kind = "geometric", a = 1.0, lambda = 2.0 }
boundary = { kind = "zero" }
burnin = 50

[[observables]]
kind = "value"
line = 1
time = 0.0

[[observables]]
kind = "min_gap"
lines = 2
gamma = 0.5
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn tilted(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilted"))
        .arg("--config")
        .arg(config)
        .arg("-q")
        .args(args)
        .env_remove("TILTED_SET")
        .output()
        .unwrap()
}

fn run_ok(config: &Path, args: &[&str]) {
    let out = tilted(config, args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn frozen_tiny_run_matches_golden_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("run");
    run_ok(&cfg, &["--out", path_arg(&out)]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in ["samples.csv", "estimates.csv"] {
        let got = std::fs::read_to_string(out.join(name)).unwrap();
        if std::env::var_os("TILTED_BLESS").is_some() {
            std::fs::create_dir_all(&golden).unwrap();
            std::fs::write(golden.join(name), &got).unwrap();
        }
        let want = std::fs::read_to_string(golden.join(name)).unwrap();
        assert_eq!(got, want, "{name} drifted; rerun with TILTED_BLESS=1 if intended");
    }
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &["--out", path_arg(&a)]);
    run_ok(&cfg, &["--out", path_arg(&b), "--workers", "2"]);
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert!(ca.len() >= 3);
    assert_eq!(ca, cb);

    let c = tmp.path().join("c");
    run_ok(&cfg, &["--out", path_arg(&c), "--seed", "8"]);
    assert_ne!(csvs(&c)[2], ca[2]);
}

#[test]
fn unknown_key_is_a_config_error_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &TINY.replace("burnin = 50", "burnin = 50\nburn_in = 50"));
    let out = tmp.path().join("run");
    let r = tilted(&cfg, &["--out", path_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("burn_in"));
    assert!(!out.exists());

    let r = tilted(&write(tmp.path(), "ok.toml", TINY), &["--out", path_arg(&out), "--set", "sampler.grid.stepz=3"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn comparing_a_run_with_itself_gives_zero_distances() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    run_ok(&write(tmp.path(), "tiny.toml", TINY), &["--out", path_arg(&run)]);
    let cmp = write(
        tmp.path(),
        "cmp.toml",
        &format!(
            "[experiment]\nkind = \"compare\"\nsampler_run = {0:?}\noracle_run = {0:?}\n",
            path_arg(&run)
        ),
    );
    let out = tmp.path().join("cmp");
    run_ok(&cmp, &["--out", path_arg(&out)]);
    let text = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let col = r.headers().unwrap().iter().position(|h| h == "distance").unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert!(!rows.is_empty());
    for row in rows {
        assert_eq!(row[col].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn compare_refuses_mismatched_grids_and_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&cfg, &["--out", path_arg(&a)]);
    run_ok(&cfg, &["--out", path_arg(&b), "--set", "sampler.grid.steps=40"]);
    let cmp = write(
        tmp.path(),
        "cmp.toml",
        &format!(
            "[experiment]\nkind = \"compare\"\nsampler_run = {:?}\noracle_run = {:?}\n",
            path_arg(&a),
            path_arg(&b)
        ),
    );
    let out = tmp.path().join("cmp");
    let r = tilted(&cmp, &["--out", path_arg(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("grid.steps"), "{err}");
    assert!(!out.exists());
}

#[test]
fn resumed_run_equals_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let (half, resumed, straight) = (tmp.path().join("half"), tmp.path().join("resumed"), tmp.path().join("straight"));
    run_ok(&cfg, &["--out", path_arg(&half), "--set", "experiment.samples=20", "--set", "checkpoint_every=10"]);
    assert!(half.join("checkpoints/chain-1.json").exists());
    let ck = half.join("checkpoints");
    run_ok(&cfg, &["--out", path_arg(&resumed), "--resume", path_arg(&ck)]);
    run_ok(&cfg, &["--out", path_arg(&straight)]);
    assert_eq!(csvs(&resumed), csvs(&straight));
}

#[test]
fn checkpoint_of_another_model_is_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let half = tmp.path().join("half");
    run_ok(&cfg, &["--out", path_arg(&half), "--set", "checkpoint_every=20"]);
    let ck = half.join("checkpoints");
    let out = tmp.path().join("other");
    let r = tilted(&cfg, &["--out", path_arg(&out), "--resume", path_arg(&ck), "--seed", "9"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn oversized_oracle_is_refused_by_the_cost_guard() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "oracle.toml",
        "[experiment]\nkind = \"oracle\"\n\n[sampler]\nn = 2\ngrid = { left = -1.0, right = 1.0, steps = 400 }\n\
         tilts = { kind = \"geometric\", a = 1.0, lambda = 2.0 }\nboundary = { kind = \"zero\" }\n",
    );
    let out = tmp.path().join("run");
    let r = tilted(&cfg, &["--out", path_arg(&out)]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
}

#[test]
fn small_oracle_run_passes_its_mass_check() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "oracle.toml",
        "[experiment]\nkind = \"oracle\"\n\n[sampler]\nn = 1\ngrid = { left = -1.0, right = 1.0, steps = 10 }\n\
         tilts = { kind = \"geometric\", a = 1.0, lambda = 2.0 }\nboundary = { kind = \"zero\" }\n",
    );
    let out = tmp.path().join("run");
    run_ok(&cfg, &["--out", path_arg(&out)]);
    for f in ["marginals.csv", "cdf.csv", "moments.csv", "plot.svg", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let hash = std::fs::read_to_string(out.join("marginals.csv")).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert!(hash.starts_with(&format!("# schema=1 kind=oracle config_hash={}", manifest["config_hash"].as_str().unwrap())));
}

#[test]
fn environment_mirrors_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_tilted"))
        .env("TILTED_CONFIG", &cfg)
        .env("TILTED_OUT", &out)
        .env("TILTED_SET", "experiment.samples=5;experiment.chains=1")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 5);
}

#[test]
fn bundled_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let config = tilted_cli::ExperimentConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 10);
}

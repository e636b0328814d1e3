use std::path::Path;
use std::process::Command;

use billiard_cli::cache::{BasisCache, BasisKey, CacheStatus};
use billiard_cli::commands::{run_otoc, run_solve, run_sweep};
use billiard_cli::config::ExperimentConfig;
use billiard_cli::output::{RunManifest, MANIFEST};
use billiard_cli::pipeline::solve_stage;
use billiard_cli::presets;
use sha2::{Digest, Sha256};

/// Unit square at a coarse resolution; a few seconds end to end.
fn small() -> ExperimentConfig {
    let mut c = presets::get("square-box-validation").unwrap();
    c.spectral.h = Some(0.03);
    c.spectral.states = Some(80);
    c.time.steps = 41;
    c.time.log_stride = 10;
    c.classical.samples = 500;
    c
}

fn read_manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST)).unwrap()).unwrap()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_billiard"));
    c.env_remove("BILLIARD_CACHE_DIR");
    c
}

#[test]
fn otoc_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small();
    let a = run_otoc(&cfg, &tmp.path().join("a"), &BasisCache::disabled()).unwrap();
    let b = run_otoc(&cfg, &tmp.path().join("b"), &BasisCache::disabled()).unwrap();
    assert_eq!(a.quantum[0].series.c, b.quantum[0].series.c);
    assert_eq!(a.quantum[0].l, b.quantum[0].l);
    assert_eq!(a.classical[0].as_ref().unwrap().series, b.classical[0].as_ref().unwrap().series);
    for name in ["C.csv", "L.csv", "C_cl.csv", "spectrum.csv", "fits.json"] {
        let x = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn cached_basis_reproduces_the_fresh_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = BasisCache::at(tmp.path().join("cache"));
    let cfg = small();
    let hbar = cfg.hbar[0];
    let fresh = solve_stage(&cfg, hbar, &cache).unwrap();
    assert_eq!(fresh.cache, CacheStatus::Miss);
    let hit = solve_stage(&cfg, hbar, &cache).unwrap();
    assert_eq!(hit.cache, CacheStatus::Hit);
    assert_eq!(fresh.basis.lambdas, hit.basis.lambdas);

    let a = run_otoc(&cfg, &tmp.path().join("a"), &BasisCache::disabled()).unwrap();
    let b = run_otoc(&cfg, &tmp.path().join("b"), &cache).unwrap();
    for (x, y) in a.quantum[0].series.c.iter().zip(&b.quantum[0].series.c) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{x} vs {y}");
    }

    let path = cache.path(&BasisKey::new(&fresh.domain, fresh.key.h, fresh.key.states, fresh.key.quarter)).unwrap();
    std::fs::write(&path, b"not a basis").unwrap();
    let rebuilt = solve_stage(&cfg, hbar, &cache).unwrap();
    assert_eq!(rebuilt.cache, CacheStatus::Rebuilt);
    assert_eq!(rebuilt.basis.lambdas, fresh.basis.lambdas);
}

#[test]
fn manifest_lists_every_file_with_its_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let r = run_otoc(&small(), &dir, &BasisCache::disabled()).unwrap();
    let m = read_manifest(&dir);
    assert_eq!(m.files, r.manifest.files);
    assert_eq!(m.checks, r.manifest.checks);
    assert_eq!(m.command, "otoc");
    assert_eq!(m.config_hash, small().hash());
    assert!(m.checks.iter().any(|c| c.name.contains("reference")));

    let mut on_disk: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST)
        .collect();
    on_disk.sort();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, on_disk);
    for f in &m.files {
        let bytes = std::fs::read(dir.join(&f.path)).unwrap();
        assert_eq!(f.bytes, bytes.len() as u64);
        assert_eq!(f.sha256, hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn solve_writes_the_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_solve(&small(), tmp.path(), &BasisCache::disabled()).unwrap();
    assert!(m.files.iter().any(|f| f.path == "spectrum.csv"));
    let mut rdr = csv::Reader::from_path(tmp.path().join("spectrum.csv")).unwrap();
    let first: Vec<f64> = rdr.records().next().unwrap().unwrap().iter().take(2).map(|v| v.parse().unwrap()).collect();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((first[1] / exact - 1.0).abs() < 0.01, "{first:?}");
}

#[test]
fn sweep_needs_two_hbar_values() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run_sweep(&small(), tmp.path(), &BasisCache::disabled()).err().unwrap();
    assert!(err.to_string().contains("at least two"), "{err}");

    let out = bin().args(["sweep", "--preset", "butterfly", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least two"));
}

#[test]
fn unknown_preset_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["otoc", "--preset", "stadium", "--out"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown preset") && err.contains("butterfly"), "{err}");
}

#[test]
fn presets_command_lists_every_preset() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in presets::NAMES {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn config_file_and_overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.toml");
    std::fs::write(&cfg_path, small().to_toml()).unwrap();
    let dir = tmp.path().join("run");
    let out = bin()
        .args(["classical", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "11", "--theta", "0.5", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let used = ExperimentConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(used.classical.seed, 11);
    assert_eq!(used.packet.theta, 0.5);
    assert_eq!(read_manifest(&dir).command, "classical");
}

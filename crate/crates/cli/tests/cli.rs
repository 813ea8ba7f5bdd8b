use std::path::{Path, PathBuf};
use std::process::Command;

struct Run {
    code: i32,
    out: PathBuf,
    stdout: String,
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("frgrav-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn frgrav(name: &str, command: &str, config: &str) -> Run {
    let dir = scratch(name);
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_frgrav"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--threads")
        .arg("1")
        .output()
        .unwrap();
    Run { code: output.status.code().unwrap(), out, stdout: String::from_utf8_lossy(&output.stdout).into_owned() }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Data rows of a CSV file, skipping the manifest and the column header.
fn rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    read(dir, name)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SMALL: &str = "[grid]\nn = 128\n[evolve]\nt_end = 0.25\nstride = 4\n";

#[test]
fn identities_pass_by_default() {
    let r = frgrav("id-ok", "identities", "");
    assert_eq!(r.code, 0, "{}", r.stdout);
    let table = rows(&r.out, "identities.csv");
    assert_eq!(table.len(), 5);
    assert!(table.iter().all(|row| row[5] == "true"));
}

#[test]
fn corrupted_christoffel_sign_fails_identities() {
    let r = frgrav("id-bad", "identities", "[debug]\ncorrupt_christoffel = true\n");
    assert_eq!(r.code, 2);
}

#[test]
fn vacuum_evolution_is_flat_and_carries_manifests() {
    let r = frgrav("vacuum", "evolve", &format!("{SMALL}[data]\nfamily = vacuum\n"));
    assert_eq!(r.code, 0);
    for name in ["residuals.csv", "norms.csv", "manifest.txt"] {
        let text = read(&r.out, name);
        for key in ["config_sha256 = ", "grid = dims=1 n=128", "kappa = 1e-1", "stencil_order = 4", "frgrav 0.1.0"] {
            assert!(text.contains(key), "{name} lacks {key}");
        }
    }
    let res = rows(&r.out, "residuals.csv");
    assert!(res.len() >= 2);
    assert!(res.iter().all(|row| row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0)));
}

#[test]
fn rerunning_reproduces_outputs_bitwise() {
    let cfg = "[grid]\nn = 128\n[data]\nfamily = closed_bump\n[evolve]\nt_end = 0.25\nstride = 4\nsnapshots = true\n";
    let a = frgrav("repro-a", "evolve", cfg);
    let b = frgrav("repro-b", "evolve", cfg);
    assert_eq!((a.code, b.code), (0, 0));
    for name in ["residuals.csv", "norms.csv", "snapshots/state_000000.bin", "snapshots/state_000002.bin"] {
        assert_eq!(std::fs::read(a.out.join(name)).unwrap(), std::fs::read(b.out.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn stiff_time_step_is_a_config_error() {
    let r = frgrav("stiff", "evolve", "[grid]\nn = 64\n[model]\nkappa = 1e-4\n[evolve]\ndt = 0.05\n");
    assert_eq!(r.code, 1);
    assert!(!r.out.join("residuals.csv").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    assert_eq!(frgrav("unknown", "evolve", "[grid]\nresolution = 3\n").code, 1);
    assert_eq!(frgrav("unknown-section", "evolve", "[mesh]\nn = 64\n").code, 1);
}

#[test]
fn single_kappa_sweep_reports_no_slope() {
    let r = frgrav("sweep1", "sweep-kappa", &format!("{SMALL}[model]\nkappas = 0.1\n"));
    assert_eq!(r.code, 0);
    assert_eq!(rows(&r.out, "sweep_fit.csv")[0][0], "undefined");
    assert_eq!(rows(&r.out, "sweep.csv").len(), 1);
    assert!(rows(&r.out, "member_kappa_1e-1.csv").len() >= 2);
}

#[test]
fn ablated_sweep_has_zero_distance() {
    let r = frgrav(
        "ablate",
        "sweep-kappa",
        &format!("{SMALL}[model]\nkappas = 0.1, 0.01\n[debug]\nablate_kappa_terms = true\n"),
    );
    assert_eq!(r.code, 0);
    for row in rows(&r.out, "sweep.csv") {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_with_conformal_data_is_rejected() {
    let r = frgrav("sweep-rho", "sweep-kappa", &format!("{SMALL}[data]\nfamily = rho_wave\namplitude = 1e-6\n"));
    assert_eq!(r.code, 1);
}

#[test]
fn picard_on_zero_data_takes_one_iteration() {
    let r = frgrav("picard0", "picard", &format!("{SMALL}[data]\nfamily = scalar_bump\namplitude = 0\n"));
    assert_eq!(r.code, 0);
    let summary = rows(&r.out, "picard_summary.csv");
    assert_eq!(summary[0][0], "1");
    assert_eq!(summary[0][1], "true");
}

#[test]
fn picard_contracts_for_small_data() {
    let r = frgrav("picard", "picard", &format!("{SMALL}[data]\nfamily = scalar_bump\n"));
    assert_eq!(r.code, 0);
    let summary = rows(&r.out, "picard_summary.csv");
    assert!(summary[0][2].parse::<f64>().unwrap() <= 0.6);
}

#[test]
fn picard_with_large_data_fails() {
    let r = frgrav("picard-big", "picard", &format!("{SMALL}[data]\nfamily = scalar_bump\namplitude = 10\n"));
    assert_ne!(r.code, 0);
}

#[test]
fn norms_of_initial_data() {
    let r = frgrav("norms", "norms", "[data]\nfamily = scalar_bump\n");
    assert_eq!(r.code, 0);
    let fields = rows(&r.out, "field_norms.csv");
    assert_eq!(fields.len(), 24);
    let phi = fields.iter().find(|row| row[0] == "phi").unwrap();
    assert!(phi[3].parse::<f64>().unwrap() > 0.0);
}

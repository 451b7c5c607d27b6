//! End-to-end tests of the `kslab` binary: run/audit/compare round trips,
//! manifest hashing, and config validation behavior.

use std::path::Path;
use std::process::Command;

fn kslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
}

const MODEL: &str = r#"
[model]
chi = 0.2
lambda = 1.0
mu = 1.0
dim = 1
box = 10.0
grid = 64

[model.a]
kind = "constant"
params = { value = 1.0 }

[model.b]
kind = "constant"
params = { value = 1.0 }
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn manifest_hash(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["content_hash"].as_str().unwrap().to_string()
}

fn csv_value(path: &Path, name: &str) -> Option<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.get(1) == Some(&name) {
            return cells[2].parse().ok();
        }
    }
    None
}

#[test]
fn audit_emits_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "audit.toml",
        &format!("kind = \"oracle-audit\"\n{MODEL}"),
    );
    let out = tmp.path().join("audit");
    let status = kslab()
        .args(["audit", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let audit = out.join("audit.csv");
    assert!((csv_value(&audit, "m_lower").unwrap() - 1.0).abs() < 1e-15);
    assert!((csv_value(&audit, "m_upper").unwrap() - 1.0).abs() < 1e-15);
    assert!((csv_value(&audit, "c_plus_star").unwrap() - 2.125).abs() < 1e-15);
    assert!((csv_value(&audit, "rho").unwrap() - 0.25).abs() < 1e-15);
    assert!((csv_value(&audit, "sup_bound").unwrap() - 1.25).abs() < 1e-15);
}

#[test]
fn zero_horizon_simulate_keeps_initial_checkpoint_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.toml",
        &format!(
            "kind = \"simulate\"\n{MODEL}\n[init]\nkind = \"constant\"\nvalue = 0.5\n\n[run]\nhorizon = 0.0\n"
        ),
    );
    let out = tmp.path().join("run");
    let status = kslab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("trajectory/state_00000.bin").exists());
    assert!(!out.join("trajectory/state_00001.bin").exists());
}

#[test]
fn duplicate_runs_reproduce_the_content_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.toml",
        &format!(
            "kind = \"simulate\"\n{MODEL}\n[init]\nkind = \"random-band\"\nlo = 0.1\nhi = 1.5\nseed = 11\n\n[run]\nhorizon = 1.0\nstore_interval = 0.25\n"
        ),
    );
    for out in ["a", "b"] {
        let status = kslab()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        manifest_hash(&tmp.path().join("a")),
        manifest_hash(&tmp.path().join("b"))
    );

    // a directory compared with itself is an empty diff
    let output = kslab()
        .arg("compare")
        .arg(tmp.path().join("a"))
        .arg(tmp.path().join("a"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("no differences"));
}

#[test]
fn compare_rejects_mismatched_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let audit_cfg = write_config(
        tmp.path(),
        "audit.toml",
        &format!("kind = \"oracle-audit\"\n{MODEL}"),
    );
    let sim_cfg = write_config(
        tmp.path(),
        "sim.toml",
        &format!(
            "kind = \"simulate\"\n{MODEL}\n[init]\nkind = \"constant\"\nvalue = 0.5\n\n[run]\nhorizon = 0.0\n"
        ),
    );
    for (cfg, out) in [(&audit_cfg, "a"), (&sim_cfg, "s")] {
        let status = kslab()
            .args(["run", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(tmp.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let output = kslab()
        .arg("compare")
        .arg(tmp.path().join("a"))
        .arg(tmp.path().join("s"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("incompatible"));
}

#[test]
fn validation_reports_all_problems_at_once() {
    let tmp = tempfile::tempdir().unwrap();
    // missing horizon AND random-band without a seed
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        &format!(
            "kind = \"simulate\"\n{MODEL}\n[init]\nkind = \"random-band\"\nlo = 0.1\nhi = 1.0\n"
        ),
    );
    let output = kslab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("seed"), "{err}");
    assert!(err.contains("horizon"), "{err}");
}

#[test]
fn resolution_ladder_produces_comparable_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ladder.toml",
        &format!(
            "kind = \"simulate\"\n{MODEL}\n[init]\nkind = \"constant\"\nvalue = 0.5\n\n[run]\nhorizon = 1.0\nstore_interval = 0.5\nresolution_ladder = [32, 64]\n"
        ),
    );
    let out = tmp.path().join("ladder");
    let status = kslab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("res_00032/manifest.json").exists());
    assert!(out.join("res_00064/manifest.json").exists());
    // homogeneous data: the two resolutions agree to roundoff on diagnostics
    let a = std::fs::read_to_string(out.join("res_00032/summary.txt")).unwrap();
    let b = std::fs::read_to_string(out.join("res_00064/summary.txt")).unwrap();
    let get = |text: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with("final sup u"))
            .unwrap()
            .rsplit(' ')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get(&a) - get(&b)).abs() < 1e-9);

    // `compare` across the ladder: field files subsample onto the shared
    // nodes, so the whole diff sits inside the convergence estimate
    let output = kslab()
        .arg("compare")
        .arg(out.join("res_00032"))
        .arg(out.join("res_00064"))
        .args(["--tol", "1e-9"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stdout)
    );
}

#[test]
fn shipped_configs_all_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        // full kind-specific validation without running
        let status = kslab()
            .args(["run", "--dry-run", "--config"])
            .arg(&path)
            .args(["--out", "/nonexistent-unused"])
            .status()
            .unwrap();
        assert!(status.success(), "config {} failed", path.display());
        // the model section also supports a cheap closed-form audit
        let tmp = tempfile::tempdir().unwrap();
        let status = kslab()
            .args(["audit", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(tmp.path().join("out"))
            .status()
            .unwrap();
        assert!(status.success(), "audit of {} failed", path.display());
        seen += 1;
    }
    assert!(seen >= 8, "expected the shipped configs, found {seen}");
}

#[test]
fn stability_run_fans_out_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "stab.toml",
        &format!(
            "kind = \"stability\"\n{MODEL}\n[init]\nkind = \"random-band\"\nlo = 0.3\nhi = 1.8\nseed = 1\n\n[run]\nhorizon = 8.0\nstore_interval = 0.25\nseeds = [1, 2]\nn_max = 2\n"
        ),
    );
    let out = tmp.path().join("stab");
    let status = kslab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--workers")
        .arg("2")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("stability_seed1.csv").exists());
    assert!(out.join("stability_seed2.csv").exists());
    assert!(out.join("entire/entire.json").exists());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("seed1: alpha_hat"), "{summary}");
    let csv = std::fs::read_to_string(out.join("stability_seed1.csv")).unwrap();
    assert!(csv.contains("rho"));
    assert!(csv.contains("staircase_n2"));
}

#[test]
fn entire_and_perturbation_runs_produce_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let entire_cfg = write_config(
        tmp.path(),
        "entire.toml",
        &format!("kind = \"entire\"\n{MODEL}\n[run]\nmethod = \"steady\"\n"),
    );
    let out = tmp.path().join("entire");
    let status = kslab()
        .args(["run", "--config"])
        .arg(&entire_cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("bounds certified: true"), "{summary}");
    assert!(out.join("certificate.csv").exists());

    let pert_cfg = write_config(
        tmp.path(),
        "pert.toml",
        &format!(
            "kind = \"perturbation\"\n{MODEL}\n[init]\nkind = \"constant\"\nvalue = 0.7\n\n[run]\nhorizon = 2.0\nchi_list = [0.05, 0.1]\n"
        ),
    );
    let out = tmp.path().join("pert");
    let status = kslab()
        .args(["run", "--config"])
        .arg(&pert_cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("perturbation.csv")).unwrap();
    assert!(csv.contains("k_value"));
    assert!(csv.lines().count() >= 4, "{csv}");
}

#[test]
fn failed_runs_leave_a_flagged_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // A front that reaches the guard band near the box boundary fails the
    // spreading measurement; the manifest must record the failure.
    let model = MODEL
        .replace("box = 10.0", "box = 40.0")
        .replace("grid = 64", "grid = 2048");
    let cfg = write_config(
        tmp.path(),
        "small.toml",
        &format!(
            "kind = \"spreading\"\n{model}\n[init]\nkind = \"bump\"\nheight = 0.8\nradius = 5.0\n\n[run]\nhorizon = 25.0\nstore_interval = 1.0\n"
        ),
    );
    let out = tmp.path().join("small");
    let output = kslab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(value["status"], "failed");
    assert!(value["error"].as_str().unwrap().contains("box too small"));
}

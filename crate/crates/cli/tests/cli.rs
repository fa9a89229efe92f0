use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use drough::driver::load_driver;
use drough_cli::config::{AreaDefect, ExperimentConfig};

fn drough(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drough"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("DROUGH_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join(format!("{}.json", cfg.name));
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// CSV rows without the provenance lines.
fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn generated_driver_loads_back_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let o = drough(&["gen-driver", "--seed", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let loaded = load_driver(&dir.path().join("driver-5.drpd")).unwrap();
    let cfg = ExperimentConfig::preset("heat_delay").unwrap();
    let d = &cfg.driver;
    let fresh = d.source.build(5, cfg.model.t_end, d.n, 64).unwrap();
    assert!(loaded == fresh);

    let line = stdout(&o).lines().find(|l| l.starts_with("chen residual")).unwrap().to_string();
    let plain: f64 = line.split_whitespace().nth(2).unwrap().trim_end_matches(',').parse().unwrap();
    assert!(plain <= 1e-12, "{line}");

    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("driver-5.json")).unwrap()).unwrap();
    assert_eq!(info["provenance"]["seed"], 5);
    assert_eq!(info["provenance"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn different_seeds_give_different_files_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        assert_eq!(drough(&["gen-driver", "--seed", seed], dir.path()).status.code(), Some(0));
    }
    let (a, b) = (fs::read(dir.path().join("driver-1.drpd")).unwrap(), fs::read(dir.path().join("driver-2.drpd")).unwrap());
    assert_ne!(a, b);
    let hash = |s: &str| -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(format!("driver-{s}.json"))).unwrap()).unwrap();
        v["provenance"]["config_hash"].clone()
    };
    assert_ne!(hash("1"), hash("2"));
}

#[test]
fn default_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = drough(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let table = report["smoothing_constants"].as_array().unwrap();
    assert_eq!(table.len(), 5);
    // σ = 0: sup_t ‖S_t‖ = 1
    assert_eq!(table[0]["c0"], 1.0);
}

#[test]
fn injected_area_defect_fails_the_chen_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset("heat_delay").unwrap();
    cfg.validate.inject_area_defect = Some(AreaDefect { cell: 100, i: 0, j: 0, amount: 1e-6 });
    let path = write_config(dir.path(), &cfg);
    let o = drough(&["validate", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("chen_residual"), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn ode_preset_matches_the_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let o = drough(&["solve", "--config", "preset:decay_ode"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("solve.csv")).unwrap();
    let rows = body(&csv);
    assert_eq!(rows[0], "t,norm_theta,norm_theta_minus_alpha,picard_iterations");
    assert_eq!(rows.len(), 1 + 257);
    let last: Vec<f64> = rows.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - (-1.0f64).exp()).abs() < 1e-5, "{}", last[1]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(drough(&["solve"], out).status.code(), Some(0));
        assert_eq!(drough(&["stability", "--threads", "1"], out).status.code(), Some(0));
    }
    for f in ["solve.csv", "solve.json", "stability.csv", "stability.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("solve.csv")).unwrap();
    let hash = ExperimentConfig::preset("heat_delay").unwrap().hash();
    assert!(csv.starts_with(&format!("# config_hash={hash}\n# seed=1\n# version={}\n", env!("CARGO_PKG_VERSION"))));
    assert!(!csv.contains('\r'));
}

#[test]
fn solving_from_a_driver_file_matches_sampling() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(drough(&["gen-driver"], dir.path()).status.code(), Some(0));
    let mut cfg = ExperimentConfig::preset("heat_delay").unwrap();
    cfg.driver.file = Some(dir.path().join("driver-1.drpd"));
    let path = write_config(dir.path(), &cfg);
    let from_file = dir.path().join("file");
    assert_eq!(drough(&["solve", "--config", &path], &from_file).status.code(), Some(0));
    let sampled = dir.path().join("sampled");
    assert_eq!(drough(&["solve"], &sampled).status.code(), Some(0));
    let (x, y) = (fs::read_to_string(from_file.join("solve.csv")).unwrap(), fs::read_to_string(sampled.join("solve.csv")).unwrap());
    assert_eq!(body(&x), body(&y));
    assert_ne!(x, y, "the config hash differs");
}

#[test]
fn missing_driver_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset("heat_delay").unwrap();
    cfg.driver.file = Some(dir.path().join("nowhere.drpd"));
    let path = write_config(dir.path(), &cfg);
    let o = drough(&["solve", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.drpd"), "{}", stderr(&o));
    assert!(!dir.path().join("solve.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(drough(&["solve", "--config", "preset:nope"], dir.path()).status.code(), Some(2));
    assert_eq!(drough(&["solve", "--config", "/no/such/config.json"], dir.path()).status.code(), Some(2));
    assert_eq!(drough(&["converge"], dir.path()).status.code(), Some(2), "heat_delay has no converge block");
    assert_eq!(drough(&["frobnicate"], dir.path()).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"name\": 1 }").unwrap();
    assert_eq!(drough(&["validate", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn converge_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset("delay_to_zero").unwrap();
    cfg.driver.n = 200;
    cfg.converge.as_mut().unwrap().n_seeds = 2;
    cfg.converge.as_mut().unwrap().r_list = vec![0.2, 0.1, 0.05];
    let path = write_config(dir.path(), &cfg);
    let o = drough(&["converge", "--config", &path, "--seed", "40"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert!(csv.contains("# seed=40\n"));
    let rows = body(&csv);
    assert_eq!(rows[0], "r,median_distance,median_area_gap,distance_slope,area_gap_slope,r_steps,failures");
    assert_eq!(rows.len(), 4);
    for (row, r) in rows[1..].iter().zip([0.2, 0.1, 0.05]) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 7);
        assert_eq!(f[0].parse::<f64>().unwrap(), r);
        assert!(f[1].parse::<f64>().unwrap() > 0.0);
        assert_eq!(f[6], "0");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("converge.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 6);
}

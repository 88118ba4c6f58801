//! End-to-end behaviour of the `tdas-dicke` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdas-dicke"))
}

fn run_scenario(scenario: &str, config: &Path, out: &Path) -> Output {
    bin()
        .arg(scenario)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

const SIMULATE: &str = r#"
[model]
g_over_gc = 1.1

[[feedback]]
label = "open"
gain_fraction = 0.0

[[feedback]]
tau_us = 5.0

[simulate]
t_end_us = 200.0
"#;

#[test]
fn simulate_writes_trajectories_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_scenario("simulate", &cfg, &a).status.success());
    assert!(run_scenario("simulate", &cfg, &b).status.success());
    assert_eq!(files(&a), files(&b));

    let names: Vec<String> = files(&a).into_iter().map(|f| f.0).collect();
    for n in [
        "trajectory_open.csv",
        "trajectory_open_filtered.csv",
        "trajectory_k1_tau5us.csv",
        "manifest.toml",
        "summary.json",
    ] {
        assert!(names.iter().any(|x| x == n), "missing {n} in {names:?}");
    }
    let csv = fs::read_to_string(a.join("trajectory_open.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t_us,x1,x2,jx,jy,jz,g,photon_number");
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert_eq!(row[0], "0.0000000000000000e0");
    assert_eq!(summary(&a)["status"], "ok");
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_scenario("simulate", &cfg, &a).status.success());
    assert!(run_scenario("simulate", &a.join("manifest.toml"), &b).status.success());
    assert_eq!(files(&a), files(&b));
}

#[test]
fn fixed_points_report_threshold_and_super_radiant_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fp.toml", "[model]\ng_over_gc = 1.1\n");
    let out = tmp.path().join("o");
    assert!(run_scenario("fixed-points", &cfg, &out).status.success());
    let s = summary(&out);
    let gc = s["model"]["critical_coupling_2pi_mhz"].as_f64().unwrap();
    assert!((gc - 0.193727).abs() < 1e-6);
    let sr = &s["results"]["fixed_points"][2];
    assert_eq!(sr["kind"], "super-radiant-plus");
    assert_eq!(sr["state"].as_array().unwrap().len(), 5);
    let jz = sr["state"][4].as_f64().unwrap();
    assert!(jz > -0.5 && jz < 0.0);
}

#[test]
fn scan_sweep_exponent_and_ramp_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "stability-scan",
            "[model]\ng_over_gc = 0.74\n[stability-scan]\ntau_us = { start = 0.0, stop = 10.0, step = 5.0 }\napproximation = true\n",
            "scan_normal.csv",
            "k,tau_us,re_lambda1_radus,im_lambda1_radus,residual,converged,re_approx_radus,im_approx_radus",
        ),
        (
            "fluctuations",
            "[fluctuations]\ng_over_gc = [0.8, 1.2]\n",
            "sweep_open.csv",
            "g_over_gc,phase,k,tau_us,fluct,converged",
        ),
        (
            "exponent",
            "[exponent]\nsides = [\"normal\"]\npoints = 3\neps_min = 1e-3\neps_max = 1e-2\n",
            "exponent_points_open.csv",
            "g_over_gc,phase,k,tau_us,fluct,converged",
        ),
        (
            "ramp",
            "[ramp]\nt0_us = 50.0\n",
            "ramp_open.csv",
            "t_us,x1,x2,jx,jy,jz,g,photon_number",
        ),
    ];
    for (scenario, text, file, header) in cases {
        let cfg = write(tmp.path(), &format!("{scenario}.toml"), text);
        let out = tmp.path().join(scenario);
        let o = run_scenario(scenario, &cfg, &out);
        assert!(o.status.success(), "{scenario}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(csv.lines().next().unwrap(), header, "{scenario}");
    }
    let fits: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("exponent/exponent_open.json")).unwrap()).unwrap();
    let fit = &fits[0];
    assert_eq!(fit["side"], "normal");
    assert!(fit["exponent"].is_f64() && fit["stderr"].is_f64());
    assert_eq!(fit["window"], serde_json::json!([1e-3, 1e-2]));
}

#[test]
fn unknown_figure_lists_valid_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["figure", "fig42", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for id in ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"] {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn config_errors_exit_with_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let bad = [
        "[model]\ng_over_gc = 1.1\nbogus = 1\n",
        "[model]\ng_over_gc = 1.1\n[simulate]\nt_end_us = 10.0\nbogus_us = 1.0\n",
        "[model]\ng_over_gc = 1.1\n[[feedback]]\ntau_us = -1.0\n",
        "[model]\ng_over_gc = 1.1\n[ramp]\nt0_us = 10.0\n",
        "[meta]\nscenario = \"ramp\"\n[model]\ng_over_gc = 1.1\n",
        "[model]\ng_over_gc = 1.1\ng_2pi_mhz = 0.2\n",
        "[model\n",
    ];
    for text in bad {
        let cfg = write(tmp.path(), "bad.toml", text);
        let o = run_scenario("simulate", &cfg, &out);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{text}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = run_scenario("simulate", &tmp.path().join("missing.toml"), &out);
    assert_eq!(o.status.code(), Some(1));
    let o = bin().arg("no-such-scenario").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_status_two_and_reports_the_error() {
    let tmp = tempfile::tempdir().unwrap();
    // No super-radiant point exists below threshold.
    let cfg = write(
        tmp.path(),
        "scan.toml",
        "[model]\ng_over_gc = 0.74\n[stability-scan]\nfixed_points = [\"super-radiant-plus\"]\n",
    );
    let out = tmp.path().join("o");
    let o = run_scenario("stability-scan", &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["kind"], "not-a-fixed-point");
}

#[test]
fn thread_count_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fp.toml", "[model]\ng_over_gc = 1.1\n");
    let o = bin()
        .env("TDAS_THREADS", "zero")
        .args(["fixed-points", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .env("TDAS_THREADS", "2")
        .args(["fixed-points", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert!(o.status.success());
}

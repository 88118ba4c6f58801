//! Scenario execution. Heavy numerical work runs on the rayon pool; files are
//! written afterwards from the calling thread in a fixed order.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use tdas_dicke_core::dde::{integrate, integrate_ramp, lowpass, relaxation_time, RampSchedule, Stepping, Trajectory};
use tdas_dicke_core::fluctuations::{fit_exponent, photon_fluct_at, rescaled_log_amplitude, FluctOptions, Side};
use tdas_dicke_core::model::{critical_coupling, fixed_point, inverted_critical_coupling, threshold_coupling};
use tdas_dicke_core::quadrature::QuadOptions;
use tdas_dicke_core::stability::{
    approx_rightmost, linearize, rightmost_root_with, scan_k_tau_row, CharRoot, ScanPoint, SearchOptions,
};
use tdas_dicke_core::units::{from_2pi_mhz, to_2pi_hz, to_2pi_mhz};
use tdas_dicke_core::{Error, FeedbackParams, FixedPointKind, MeanFieldState, ModelParams};

use crate::config::{log_grid, Config, FixedPointName, Scenario, SideName};
use crate::error::{error_json, CliError};
use crate::output::{Cell, Csv, OutDir};

pub const TRAJECTORY_HEADER: [&str; 8] = ["t_us", "x1", "x2", "jx", "jy", "jz", "g", "photon_number"];
pub const SCAN_HEADER: [&str; 6] = [
    "k",
    "tau_us",
    "re_lambda1_radus",
    "im_lambda1_radus",
    "residual",
    "converged",
];
pub const APPROX_COLUMNS: [&str; 2] = ["re_approx_radus", "im_approx_radus"];
pub const SWEEP_HEADER: [&str; 6] = ["g_over_gc", "phase", "k", "tau_us", "fluct", "converged"];

/// Outcome of one scenario run.
#[derive(Debug)]
pub struct RunReport {
    pub scenario: Scenario,
    pub exit_code: i32,
    pub summary: Value,
    pub files: Vec<String>,
}

/// Resolves `config`, writes `manifest.toml`, runs the scenario and writes
/// its data files and `summary.json` into `out`. Configuration and I/O
/// problems are returned as errors; numerical failures produce a report
/// with exit code 2 and the error embedded in the summary.
pub fn run(config: Config, scenario: Scenario, out: &Path) -> Result<RunReport, CliError> {
    let config = config.resolve(scenario)?;
    let mut dir = OutDir::create(out)?;
    dir.write_text("manifest.toml", &config.to_toml_string())?;

    let outcome = match scenario {
        Scenario::FixedPoints => fixed_points(&config),
        Scenario::Simulate => simulate(&config, &mut dir),
        Scenario::Ramp => ramp(&config, &mut dir),
        Scenario::StabilityScan => stability_scan(&config, &mut dir),
        Scenario::Fluctuations => fluctuations(&config, &mut dir),
        Scenario::Exponent => exponent(&config, &mut dir),
    };
    let (status, exit_code, results, error) = match outcome {
        Ok(r) => ("ok", 0, r, Value::Null),
        Err(CliError::Numerical(e)) => ("error", 2, Value::Null, error_json(&e)),
        Err(e) => return Err(e),
    };
    let mut files = dir.files().to_vec();
    files.push("summary.json".into());
    let summary = json!({
        "scenario": scenario.as_str(),
        "version": crate::VERSION,
        "status": status,
        "error": error,
        "model": model_json(&config),
        "results": results,
        "files": files,
    });
    dir.write_json("summary.json", &summary)?;
    Ok(RunReport {
        scenario,
        exit_code,
        summary,
        files,
    })
}

fn opt_f64(r: Result<f64, Error>) -> Value {
    r.map_or(Value::Null, |x| json!(x))
}

fn model_json(c: &Config) -> Value {
    let Ok(p) = c.model_params() else { return Value::Null };
    let g = c.coupling().ok().map(|q| q.g);
    json!({
        "critical_coupling_2pi_mhz": opt_f64(critical_coupling(&p).map(to_2pi_mhz)),
        "inverted_critical_coupling_2pi_mhz": opt_f64(inverted_critical_coupling(&p).map(to_2pi_mhz)),
        "threshold_coupling_2pi_mhz": opt_f64(threshold_coupling(&p).map(to_2pi_mhz)),
        "g_2pi_mhz": g.map(to_2pi_mhz),
    })
}

fn state_json(s: &MeanFieldState) -> Value {
    json!(s.as_array())
}

fn root_json(r: &CharRoot) -> Value {
    json!({
        "re_2pi_hz": to_2pi_hz(r.lambda.re),
        "im_2pi_hz": to_2pi_hz(r.lambda.im),
        "re_radus": r.lambda.re,
        "im_radus": r.lambda.im,
        "residual": r.residual,
    })
}

fn feedback_json(label: &str, f: &FeedbackParams) -> Value {
    json!({ "label": label, "k_radus": f.k(), "tau_us": f.tau })
}

/// Fixed points of `p` that exist, in the canonical order.
fn existing_fixed_points(p: &ModelParams) -> Vec<(FixedPointKind, MeanFieldState)> {
    FixedPointKind::ALL
        .iter()
        .filter_map(|&k| fixed_point(k, p).ok().map(|s| (k, s)))
        .collect()
}

fn fixed_points(c: &Config) -> Result<Value, CliError> {
    let p = c.coupling()?;
    let feedback = c.feedback_params()?;
    let with_stability = c.fixed_points.as_ref().and_then(|b| b.stability).unwrap_or(true);
    let mut list = Vec::new();
    for kind in FixedPointKind::ALL {
        let name = FixedPointName::of(kind).as_str();
        let fp = match fixed_point(kind, &p) {
            Ok(fp) => fp,
            Err(e) => {
                list.push(json!({ "kind": name, "exists": false, "reason": e.to_string() }));
                continue;
            }
        };
        let mut stability = Vec::new();
        if with_stability {
            for (label, f) in &feedback {
                let mut entry = feedback_json(label, f);
                let res = linearize(&p, &fp)
                    .and_then(|s| s.with_feedback(f.k(), f.tau))
                    .and_then(|s| rightmost_root_with(&s, &SearchOptions::default(), &[]));
                match res {
                    Ok(r) => {
                        entry["lambda1"] = root_json(&r);
                        entry["stable"] = json!(r.lambda.re < 0.0);
                        entry["relaxation_time_us"] = if r.lambda.re < 0.0 {
                            json!(-1.0 / r.lambda.re)
                        } else {
                            Value::Null
                        };
                    }
                    Err(e) => entry["error"] = error_json(&e),
                }
                stability.push(entry);
            }
        }
        list.push(json!({
            "kind": name,
            "exists": true,
            "state": state_json(&fp),
            "photon_number": fp.photon_number(),
            "stability": stability,
        }));
    }
    Ok(json!({ "fixed_points": list }))
}

fn trajectory_csv(traj: &Trajectory, every: usize, columns: Option<&[Vec<f64>; 6]>) -> Csv {
    let mut csv = Csv::new(&TRAJECTORY_HEADER);
    for i in (0..traj.len()).step_by(every) {
        let (x, n) = match columns {
            Some(c) => ([c[0][i], c[1][i], c[2][i], c[3][i], c[4][i]], c[5][i]),
            None => (traj.states[i].as_array(), traj.states[i].photon_number()),
        };
        csv.row(&[
            Cell::F(traj.times[i]),
            Cell::F(x[0]),
            Cell::F(x[1]),
            Cell::F(x[2]),
            Cell::F(x[3]),
            Cell::F(x[4]),
            Cell::F(traj.couplings[i]),
            Cell::F(n),
        ]);
    }
    csv
}

fn relaxation_json(traj: &Trajectory, p: &ModelParams, eps: f64) -> Value {
    let mut out = Vec::new();
    let mut nearest: Option<(FixedPointKind, f64)> = None;
    for (kind, fp) in existing_fixed_points(p) {
        let d = traj.final_state.distance(&fp);
        if nearest.is_none_or(|(_, best)| d < best) {
            nearest = Some((kind, d));
        }
        out.push(json!({
            "kind": FixedPointName::of(kind).as_str(),
            "time_us": relaxation_time(traj, &fp, eps).time(),
            "final_distance": d,
        }));
    }
    json!({
        "eps": eps,
        "fixed_points": out,
        "nearest": nearest.map(|(k, d)| json!({ "kind": FixedPointName::of(k).as_str(), "distance": d })),
    })
}

struct Rendered {
    csvs: Vec<(String, Csv)>,
    summary: Value,
}

fn write_rendered(dir: &mut OutDir, runs: Vec<Result<Rendered, Error>>) -> Result<Value, CliError> {
    let mut summaries = Vec::new();
    for r in runs {
        let r = r?;
        for (name, csv) in &r.csvs {
            dir.write_csv(name, csv)?;
        }
        summaries.push(r.summary);
    }
    Ok(json!({ "runs": summaries }))
}

fn simulate(c: &Config, dir: &mut OutDir) -> Result<Value, CliError> {
    let p = c.coupling()?;
    let b = c.simulate.clone().expect("resolved");
    let feedback = c.feedback_params()?;
    let h = b.h_us.expect("resolved");
    let stepping = Stepping::new(h, b.t_end_us.expect("resolved"), b.sample_stride.expect("resolved"));
    let every = b.output_every.expect("resolved");
    let cutoff = from_2pi_mhz(b.lowpass_cutoff_2pi_mhz.expect("resolved"));
    let eps = b.relaxation_eps.expect("resolved");
    let ic = Config::initial_state(b.initial.as_ref().expect("resolved"));

    let runs: Vec<Result<Rendered, Error>> = feedback
        .par_iter()
        .map(|(label, f)| {
            let traj = integrate(&p, f, &ic, &stepping)?;
            let dt = traj.sample_spacing();
            let filtered: [Vec<f64>; 6] = [
                lowpass(&traj.component(|s| s.x1), dt, cutoff),
                lowpass(&traj.component(|s| s.x2), dt, cutoff),
                lowpass(&traj.component(|s| s.jx), dt, cutoff),
                lowpass(&traj.component(|s| s.jy), dt, cutoff),
                lowpass(&traj.component(|s| s.jz), dt, cutoff),
                lowpass(&traj.component(MeanFieldState::photon_number), dt, cutoff),
            ];
            let mut summary = feedback_json(label, f);
            summary["h_us"] = json!(traj.h);
            summary["samples"] = json!(traj.len());
            summary["final_time_us"] = json!(traj.final_time);
            summary["final_state"] = state_json(&traj.final_state);
            summary["max_norm_drift"] = json!(traj.max_norm_drift);
            summary["relaxation"] = relaxation_json(&traj, &p, eps);
            Ok(Rendered {
                csvs: vec![
                    (format!("trajectory_{label}.csv"), trajectory_csv(&traj, every, None)),
                    (
                        format!("trajectory_{label}_filtered.csv"),
                        trajectory_csv(&traj, every, Some(&filtered)),
                    ),
                ],
                summary,
            })
        })
        .collect();
    write_rendered(dir, runs)
}

fn ramp(c: &Config, dir: &mut OutDir) -> Result<Value, CliError> {
    let b = c.ramp.clone().expect("resolved");
    let feedback = c.feedback_params()?;
    let g_final = b.g_final_over_gc.expect("resolved") * c.threshold()?;
    let p = c.model_params()?.with_g(g_final);
    let schedule = RampSchedule::new(b.t0_us.expect("resolved"), g_final)?;
    let stepping = Stepping::new(
        b.h_us.expect("resolved"),
        b.t_end_us.expect("resolved"),
        b.sample_stride.expect("resolved"),
    );
    let ic = Config::initial_state(b.initial.as_ref().expect("resolved"));
    let targets: Vec<MeanFieldState> = [FixedPointKind::SuperRadiantPlus, FixedPointKind::SuperRadiantMinus]
        .iter()
        .filter_map(|&k| fixed_point(k, &p).ok())
        .collect();

    let runs: Vec<Result<Rendered, Error>> = feedback
        .par_iter()
        .map(|(label, f)| {
            let traj = integrate_ramp(&p, f, &schedule, &ic, &stepping)?;
            let end = traj.final_state;
            let mut summary = feedback_json(label, f);
            summary["h_us"] = json!(traj.h);
            summary["final_time_us"] = json!(traj.final_time);
            summary["final_state"] = state_json(&end);
            summary["final_photon_number"] = json!(end.photon_number());
            summary["max_norm_drift"] = json!(traj.max_norm_drift);
            let target = targets
                .iter()
                .min_by(|a, b| end.distance(a).total_cmp(&end.distance(b)));
            summary["target"] = match target {
                Some(t) => {
                    let rel = end.distance(t) / t.norm();
                    json!({
                        "state": state_json(t),
                        "distance": end.distance(t),
                        "relative_distance": rel,
                        "photon_ratio": end.photon_number() / t.photon_number(),
                        "reached": rel < 0.02,
                    })
                }
                None => Value::Null,
            };
            summary["relaxation"] = relaxation_json(&traj, &p, 1e-3);
            Ok(Rendered {
                csvs: vec![(format!("ramp_{label}.csv"), trajectory_csv(&traj, 1, None))],
                summary,
            })
        })
        .collect();
    let mut out = write_rendered(dir, runs)?;
    out["g_final_2pi_mhz"] = json!(to_2pi_mhz(g_final));
    Ok(out)
}

/// Strict interior minima of `Re λ₁` along a row, in grid order.
fn local_minima(row: &[ScanPoint]) -> Vec<usize> {
    let re = |i: usize| row[i].root.map(|r| r.lambda.re);
    (1..row.len().saturating_sub(1))
        .filter(|&i| match (re(i - 1), re(i), re(i + 1)) {
            (Some(a), Some(b), Some(c)) => b < a && b <= c,
            _ => false,
        })
        .collect()
}

fn point_json(pt: &ScanPoint) -> Value {
    json!({ "tau_us": pt.tau, "lambda1": pt.root.as_ref().map(root_json) })
}

fn stability_scan(c: &Config, dir: &mut OutDir) -> Result<Value, CliError> {
    let p = c.coupling()?;
    let b = c.stability_scan.clone().expect("resolved");
    let fractions = b.gain_fractions.as_ref().expect("resolved").values()?;
    let taus = b.tau_us.as_ref().expect("resolved").values()?;
    let approx = b.approximation.expect("resolved");
    let opts = SearchOptions {
        collocation_degree: b.collocation_degree.expect("resolved"),
        ..Default::default()
    };
    let half_kappa = 0.5 * p.kappa;

    let mut results = Vec::new();
    for name in b.fixed_points.expect("resolved") {
        let kind = name.kind();
        let fp = fixed_point(kind, &p)?;
        let sys = linearize(&p, &fp)?;
        let rows: Vec<Result<Vec<ScanPoint>, Error>> = fractions
            .par_iter()
            .map(|&fr| scan_k_tau_row(&p, kind, fr * half_kappa, &taus, &opts))
            .collect();
        let mut header: Vec<&str> = SCAN_HEADER.to_vec();
        if approx {
            header.extend(APPROX_COLUMNS);
        }
        let mut csv = Csv::new(&header);
        let mut row_summaries = Vec::new();
        for (fr, row) in fractions.iter().zip(rows) {
            let row = row?;
            for pt in &row {
                let (re, im, res) = pt.root.map_or((f64::NAN, f64::NAN, f64::NAN), |r| {
                    (r.lambda.re, r.lambda.im, r.residual)
                });
                let mut cells = vec![
                    Cell::F(pt.k),
                    Cell::F(pt.tau),
                    Cell::F(re),
                    Cell::F(im),
                    Cell::F(res),
                    Cell::B(pt.root.is_some()),
                ];
                if approx {
                    let a = sys
                        .with_feedback(pt.k, pt.tau)
                        .and_then(|s| approx_rightmost(&s))
                        .map_or((f64::NAN, f64::NAN), |r| (r.lambda.re, r.lambda.im));
                    cells.push(Cell::F(a.0));
                    cells.push(Cell::F(a.1));
                }
                csv.row(&cells);
            }
            let best = row
                .iter()
                .filter(|pt| pt.root.is_some())
                .min_by(|a, b| a.root.unwrap().lambda.re.total_cmp(&b.root.unwrap().lambda.re));
            let minima = local_minima(&row);
            row_summaries.push(json!({
                "gain_fraction": fr,
                "k_radus": fr * half_kappa,
                "first": point_json(&row[0]),
                "minimum": best.map(point_json),
                "first_local_minimum": minima.first().map(|&i| point_json(&row[i])),
                "failures": row.iter().filter(|pt| pt.root.is_none()).count(),
                "branch_jumps": row.iter().filter(|pt| pt.branch_jump).count(),
            }));
        }
        let file = format!("scan_{}.csv", name.as_str());
        dir.write_csv(&file, &csv)?;
        results.push(json!({
            "fixed_point": name.as_str(),
            "state": state_json(&fp),
            "file": file,
            "rows": row_summaries,
        }));
    }
    Ok(json!({ "scans": results }))
}

fn fluct_options(rel_tol: f64) -> FluctOptions {
    FluctOptions {
        quad: QuadOptions {
            rel_tol,
            ..Default::default()
        },
        ..Default::default()
    }
}

struct FluctPoint {
    g_over_gc: f64,
    phase: &'static str,
    result: Result<f64, Error>,
}

fn fluct_point(p: &ModelParams, gc: f64, ratio: f64, f: &FeedbackParams, opts: &FluctOptions) -> FluctPoint {
    let q = p.with_g(ratio * gc);
    let phase = Side::of(&q).map_or("critical", Side::as_str);
    let result = photon_fluct_at(&q, f.k(), f.tau, opts).map(|r| r.value);
    FluctPoint {
        g_over_gc: ratio,
        phase,
        result,
    }
}

fn sweep_csv(points: &[FluctPoint], f: &FeedbackParams) -> Csv {
    let mut csv = Csv::new(&SWEEP_HEADER);
    for pt in points {
        let (v, ok) = match pt.result {
            Ok(v) => (v, true),
            Err(_) => (f64::NAN, false),
        };
        csv.row(&[
            Cell::F(pt.g_over_gc),
            Cell::S(pt.phase),
            Cell::F(f.k()),
            Cell::F(f.tau),
            Cell::F(v),
            Cell::B(ok),
        ]);
    }
    csv
}

fn fluctuations(c: &Config, dir: &mut OutDir) -> Result<Value, CliError> {
    let p = c.model_params()?;
    let gc = critical_coupling(&p)?;
    let b = c.fluctuations.clone().expect("resolved");
    let grid = b.g_over_gc.as_ref().expect("resolved").values()?;
    let opts = fluct_options(b.rel_tol.expect("resolved"));
    let feedback = c.feedback_params()?;

    let mut runs = Vec::new();
    for (label, f) in &feedback {
        let points: Vec<FluctPoint> = grid.par_iter().map(|&r| fluct_point(&p, gc, r, f, &opts)).collect();
        let file = format!("sweep_{label}.csv");
        dir.write_csv(&file, &sweep_csv(&points, f))?;
        let values: Vec<Value> = points
            .iter()
            .map(|pt| match &pt.result {
                Ok(v) => json!({ "g_over_gc": pt.g_over_gc, "phase": pt.phase, "fluct": v }),
                Err(e) => json!({ "g_over_gc": pt.g_over_gc, "phase": pt.phase, "error": error_json(e) }),
            })
            .collect();
        let mut s = feedback_json(label, f);
        s["file"] = json!(file);
        s["converged"] = json!(points.iter().filter(|pt| pt.result.is_ok()).count());
        s["points"] = json!(values);
        runs.push(s);
    }
    Ok(json!({ "runs": runs }))
}

fn exponent(c: &Config, dir: &mut OutDir) -> Result<Value, CliError> {
    let p = c.model_params()?;
    let gc = critical_coupling(&p)?;
    let b = c.exponent.clone().expect("resolved");
    let (lo, hi) = (b.eps_min.expect("resolved"), b.eps_max.expect("resolved"));
    let eps = log_grid(lo, hi, b.points.expect("resolved"));
    let opts = fluct_options(b.rel_tol.expect("resolved"));
    let sides = b.sides.expect("resolved");
    let feedback = c.feedback_params()?;

    let mut runs = Vec::new();
    let mut failure = None;
    for (label, f) in &feedback {
        let mut fits = Vec::new();
        let mut all_points = Vec::new();
        for side in &sides {
            let sign = match side {
                SideName::Normal => -1.0,
                SideName::SuperRadiant => 1.0,
            };
            let side_name = match side {
                SideName::Normal => Side::Normal.as_str(),
                SideName::SuperRadiant => Side::SuperRadiant.as_str(),
            };
            let mut points: Vec<FluctPoint> = eps
                .par_iter()
                .map(|&e| fluct_point(&p, gc, 1.0 + sign * e, f, &opts))
                .collect();
            points.sort_by(|a, b| a.g_over_gc.total_cmp(&b.g_over_gc));
            let fit = points
                .iter()
                .map(|pt| {
                    pt.result
                        .clone()
                        .map(|v| ((pt.g_over_gc - 1.0).abs(), rescaled_log_amplitude(pt.g_over_gc, v)))
                })
                .collect::<Result<Vec<_>, _>>()
                .and_then(|xy| {
                    let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
                    fit_exponent(&x, &y)
                });
            match fit {
                Ok(fit) => fits.push(json!({
                    "side": side_name,
                    "exponent": fit.exponent,
                    "stderr": fit.stderr,
                    "window": [lo, hi],
                })),
                Err(e) => {
                    fits.push(json!({ "side": side_name, "window": [lo, hi], "error": error_json(&e) }));
                    failure.get_or_insert(e);
                }
            }
            all_points.extend(points);
        }
        let json_file = format!("exponent_{label}.json");
        let csv_file = format!("exponent_points_{label}.csv");
        dir.write_json(&json_file, &json!(fits))?;
        dir.write_csv(&csv_file, &sweep_csv(&all_points, f))?;
        let mut s = feedback_json(label, f);
        s["fits"] = json!(fits);
        s["files"] = json!([json_file, csv_file]);
        runs.push(s);
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(json!({ "runs": runs })),
    }
}

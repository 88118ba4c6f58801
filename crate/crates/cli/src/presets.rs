//! Ready-made configurations reproducing each figure's data at the reference
//! parameters. A figure may need several runs (different couplings or ramp
//! durations); each gets its own subdirectory.

use std::path::Path;

use serde_json::json;

use crate::config::{
    Config, FeedbackBlock, FixedPointName, Grid, InitialBlock, ModelBlock, RampBlock, ScanBlock, Scenario,
    SimulateBlock, SweepBlock,
};
use crate::error::CliError;
use crate::output::OutDir;
use crate::runner::run;

pub const FIGURE_IDS: [&str; 7] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

#[derive(Debug, Clone)]
pub struct Preset {
    /// Subdirectory of the figure output.
    pub name: &'static str,
    pub scenario: Scenario,
    pub config: Config,
}

fn model(g_over_gc: f64) -> ModelBlock {
    ModelBlock {
        g_over_gc: Some(g_over_gc),
        ..Default::default()
    }
}

fn labelled(label: &str, gain_fraction: f64, tau_us: f64) -> FeedbackBlock {
    FeedbackBlock {
        label: Some(label.into()),
        ..FeedbackBlock::new(gain_fraction, tau_us)
    }
}

/// Time evolution from the tilted state below and above threshold. The CSVs
/// carry both `jz` and the photon number, so the same runs serve fig3 and
/// fig4.
fn evolution() -> Vec<Preset> {
    let sim = SimulateBlock {
        initial: Some(InitialBlock::tilted()),
        ..Default::default()
    };
    vec![
        Preset {
            name: "g074",
            scenario: Scenario::Simulate,
            config: Config {
                model: model(0.74),
                feedback: vec![
                    FeedbackBlock::open(),
                    labelled("tau50", 1.0, 50.0),
                    labelled("tau100", 1.0, 100.0),
                ],
                simulate: Some(sim.clone()),
                ..Default::default()
            },
        },
        Preset {
            name: "g110",
            scenario: Scenario::Simulate,
            config: Config {
                model: model(1.1),
                feedback: vec![FeedbackBlock::open(), labelled("tau50", 1.0, 50.0)],
                simulate: Some(sim),
                ..Default::default()
            },
        },
    ]
}

fn delay_scan(g_over_gc: f64, kinds: Vec<FixedPointName>, name: &'static str, surface: bool) -> Preset {
    let block = if surface {
        ScanBlock {
            fixed_points: Some(kinds),
            gain_fractions: Some(Grid::range(0.0, 1.0, 0.05)),
            tau_us: Some(Grid::range(0.0, 150.0, 1.0)),
            approximation: Some(false),
            ..Default::default()
        }
    } else {
        ScanBlock {
            fixed_points: Some(kinds),
            gain_fractions: Some(Grid::Values(vec![1.0])),
            tau_us: Some(Grid::range(0.0, 150.0, 0.5)),
            approximation: Some(true),
            ..Default::default()
        }
    };
    Preset {
        name,
        scenario: Scenario::StabilityScan,
        config: Config {
            model: model(g_over_gc),
            stability_scan: Some(block),
            ..Default::default()
        },
    }
}

/// Ramps to 1.5 times threshold over `t0 ∈ {20, 200}` ms with and without
/// the `(κ/2, 16 μs)` loop.
fn ramps(omega_2pi_mhz: f64) -> Vec<Preset> {
    [("t0_20ms", 20_000.0), ("t0_200ms", 200_000.0)]
        .into_iter()
        .map(|(name, t0)| Preset {
            name,
            scenario: Scenario::Ramp,
            config: Config {
                model: ModelBlock {
                    omega_2pi_mhz,
                    ..Default::default()
                },
                feedback: vec![FeedbackBlock::open(), labelled("tau16", 1.0, 16.0)],
                ramp: Some(RampBlock {
                    t0_us: Some(t0),
                    g_final_over_gc: Some(1.5),
                    ..Default::default()
                }),
                ..Default::default()
            },
        })
        .collect()
}

/// Couplings from 0.5 to 1.5 `g_c` in steps of 0.01, skipping `g_c` itself
/// and refined logarithmically down to `|1 - g/g_c| = 1e-4`.
pub fn fluctuation_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=100)
        .filter(|&i| i != 50)
        .map(|i| (50 + i) as f64 / 100.0)
        .collect();
    for e in crate::config::log_grid(1e-4, 5e-3, 8) {
        g.push(1.0 - e);
        g.push(1.0 + e);
    }
    g.sort_by(f64::total_cmp);
    g
}

fn fluctuation_sweep() -> Preset {
    Preset {
        name: "sweep",
        scenario: Scenario::Fluctuations,
        config: Config {
            feedback: vec![FeedbackBlock::open(), labelled("tau50", 1.0, 50.0)],
            fluctuations: Some(SweepBlock {
                g_over_gc: Some(Grid::Values(fluctuation_grid())),
                rel_tol: None,
            }),
            ..Default::default()
        },
    }
}

pub fn figure(id: &str) -> Option<Vec<Preset>> {
    use FixedPointName::*;
    Some(match id {
        "fig3" | "fig4" => evolution(),
        "fig5" => vec![
            delay_scan(0.74, vec![Normal, Inverted], "g074", false),
            delay_scan(1.1, vec![SuperRadiantPlus, Inverted], "g110", false),
        ],
        "fig6" => ramps(14.0),
        "fig7" => ramps(-10.0),
        "fig8" => vec![
            delay_scan(0.74, vec![Normal], "g074", true),
            delay_scan(1.1, vec![SuperRadiantPlus], "g110", true),
        ],
        "fig9" => vec![fluctuation_sweep()],
        _ => return None,
    })
}

pub fn unknown_figure(id: &str) -> CliError {
    CliError::config(format!(
        "unknown figure id `{id}`; valid ids: {}",
        FIGURE_IDS.join(", ")
    ))
}

/// Runs every preset of `id` under `out/<preset name>/` and writes an index
/// `figure.json`. Returns the largest exit code of the runs.
pub fn run_figure(id: &str, out: &Path) -> Result<i32, CliError> {
    let presets = figure(id).ok_or_else(|| unknown_figure(id))?;
    let mut dir = OutDir::create(out)?;
    let mut runs = Vec::new();
    let mut code = 0;
    for p in presets {
        let report = run(p.config, p.scenario, &out.join(p.name))?;
        code = code.max(report.exit_code);
        runs.push(json!({
            "name": p.name,
            "scenario": p.scenario.as_str(),
            "status": report.summary["status"],
            "exit_code": report.exit_code,
        }));
    }
    dir.write_json(
        "figure.json",
        &json!({ "figure": id, "version": crate::VERSION, "runs": runs }),
    )?;
    Ok(code)
}

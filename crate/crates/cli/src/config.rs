//! TOML run configuration.
//!
//! Rates carry a `_2pi_mhz` suffix and are converted to rad/μs on load;
//! times carry `_us`. Unknown keys are rejected everywhere. [`Config::resolve`]
//! fills every default so that the manifest written next to the outputs is a
//! complete, re-runnable configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tdas_dicke_core::dde::Stepping;
use tdas_dicke_core::model::threshold_coupling;
use tdas_dicke_core::units::from_2pi_mhz;
use tdas_dicke_core::{FeedbackParams, FixedPointKind, MeanFieldState, ModelParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FixedPoints,
    Simulate,
    Ramp,
    StabilityScan,
    Fluctuations,
    Exponent,
}

impl Scenario {
    pub const ALL: [Self; 6] = [
        Self::FixedPoints,
        Self::Simulate,
        Self::Ramp,
        Self::StabilityScan,
        Self::Fluctuations,
        Self::Exponent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FixedPoints => "fixed-points",
            Self::Simulate => "simulate",
            Self::Ramp => "ramp",
            Self::StabilityScan => "stability-scan",
            Self::Fluctuations => "fluctuations",
            Self::Exponent => "exponent",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|x| x.as_str()).collect();
            format!("unknown scenario `{s}`; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointName {
    Normal,
    Inverted,
    SuperRadiantPlus,
    SuperRadiantMinus,
}

impl FixedPointName {
    pub fn kind(self) -> FixedPointKind {
        match self {
            Self::Normal => FixedPointKind::Normal,
            Self::Inverted => FixedPointKind::Inverted,
            Self::SuperRadiantPlus => FixedPointKind::SuperRadiantPlus,
            Self::SuperRadiantMinus => FixedPointKind::SuperRadiantMinus,
        }
    }

    pub fn of(kind: FixedPointKind) -> Self {
        match kind {
            FixedPointKind::Normal => Self::Normal,
            FixedPointKind::Inverted => Self::Inverted,
            FixedPointKind::SuperRadiantPlus => Self::SuperRadiantPlus,
            FixedPointKind::SuperRadiantMinus => Self::SuperRadiantMinus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Inverted => "inverted",
            Self::SuperRadiantPlus => "super-radiant-plus",
            Self::SuperRadiantMinus => "super-radiant-minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideName {
    Normal,
    SuperRadiant,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    /// Version of the tool that resolved the configuration; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    /// When present it must name the scenario being run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "defaults::omega0")]
    pub omega0_2pi_mhz: f64,
    #[serde(default = "defaults::omega")]
    pub omega_2pi_mhz: f64,
    #[serde(default = "defaults::u")]
    pub u_2pi_mhz: f64,
    #[serde(default = "defaults::kappa")]
    pub kappa_2pi_mhz: f64,
    #[serde(default = "defaults::n_atoms")]
    pub n_atoms: f64,
    /// Coupling in units of the threshold coupling (the critical coupling of
    /// the normal phase, or of the inverted phase when `ω < U/2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_gc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_2pi_mhz: Option<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            omega0_2pi_mhz: defaults::omega0(),
            omega_2pi_mhz: defaults::omega(),
            u_2pi_mhz: defaults::u(),
            kappa_2pi_mhz: defaults::kappa(),
            n_atoms: defaults::n_atoms(),
            g_over_gc: None,
            g_2pi_mhz: None,
        }
    }
}

/// One feedback loop setting. The cavity is symmetric (`κ_b = κ_c = κ/2`)
/// and the loop transmits `gain_fraction`, giving `k = gain_fraction · κ/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub tau_us: f64,
    #[serde(default = "defaults::one")]
    pub gain_fraction: f64,
}

impl FeedbackBlock {
    pub fn open() -> Self {
        Self {
            label: Some("open".into()),
            tau_us: 0.0,
            gain_fraction: 0.0,
        }
    }

    pub fn new(gain_fraction: f64, tau_us: f64) -> Self {
        Self {
            label: None,
            tau_us,
            gain_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialBlock {
    /// The normal phase nudged by `1/√N` spin fluctuations.
    NearNormal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_atoms: Option<f64>,
    },
    Explicit {
        state: [f64; 5],
    },
}

impl InitialBlock {
    /// `(0, 0, 1/√12, 1/√12, 1/√12)`: equal spin projections on all axes.
    pub fn tilted() -> Self {
        let c = 1.0 / 12f64.sqrt();
        Self::Explicit {
            state: [0.0, 0.0, c, c, c],
        }
    }
}

/// Either an explicit list or an arithmetic progression including both ends
/// (up to rounding of `(stop - start) / step`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(RangeGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Self::Range(RangeGrid { start, stop, step })
    }

    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Self::Values(v) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::config(
                        "grid values must be a non-empty list of finite numbers",
                    ));
                }
                Ok(v.clone())
            }
            Self::Range(r) => {
                if !(r.step > 0.0 && r.start.is_finite() && r.stop >= r.start && r.stop.is_finite()) {
                    return Err(CliError::config(format!(
                        "grid range needs finite start <= stop and step > 0, got {r:?}"
                    )));
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
                if n > 10_000_000 {
                    return Err(CliError::config("grid range has more than 1e7 points"));
                }
                Ok((0..=n).map(|i| r.point(i)).collect())
            }
        }
    }
}

impl RangeGrid {
    /// `start + i·step`. When start and step are short decimals the point is
    /// computed as an integer multiple of a power of ten and divided once, so
    /// `0.05 × 3` comes out as the literal `0.15`.
    fn point(&self, i: usize) -> f64 {
        let decimal = |x: f64, scale: f64| {
            let y = x * scale;
            ((y - y.round()).abs() <= 1e-9 * y.abs().max(1.0)).then(|| y.round())
        };
        for d in 0..=12 {
            let scale = 10f64.powi(d);
            if let (Some(a), Some(b)) = (decimal(self.start, scale), decimal(self.step, scale)) {
                let v = a + i as f64 * b;
                if v.abs() < 2f64.powi(53) {
                    return v / scale;
                }
            }
        }
        self.start + i as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointsBlock {
    /// Also report the rightmost characteristic root for each feedback entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_us: Option<f64>,
    /// Integrator steps per stored sample; the low-pass filter runs on the
    /// stored samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<usize>,
    /// Stored samples per CSV row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowpass_cutoff_2pi_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_us: Option<f64>,
    /// Final coupling in units of the threshold coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_final_over_gc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_points: Option<Vec<FixedPointName>>,
    /// Loop transmission values; each row has `k = gain_fraction · κ/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_fractions: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_us: Option<Grid>,
    /// Append the small-delay approximation as extra CSV columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximation: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation_degree: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Couplings in units of the normal-phase critical coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_gc: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<SideName>>,
    /// Smallest and largest `|1 - g/g_c|` of the fit window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    /// Log-spaced couplings per side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub meta: Meta,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feedback: Vec<FeedbackBlock>,
    #[serde(default, rename = "fixed-points", skip_serializing_if = "Option::is_none")]
    pub fixed_points: Option<FixedPointsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampBlock>,
    #[serde(default, rename = "stability-scan", skip_serializing_if = "Option::is_none")]
    pub stability_scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluctuations: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentBlock>,
}

mod defaults {
    pub fn omega0() -> f64 {
        8.3e-3
    }
    pub fn omega() -> f64 {
        14.0
    }
    pub fn u() -> f64 {
        -8.0
    }
    pub fn kappa() -> f64 {
        1.25
    }
    pub fn n_atoms() -> f64 {
        1e5
    }
    pub fn one() -> f64 {
        1.0
    }

    pub const RELAXATION_EPS: f64 = 1e-3;
    /// Low-pass cutoff as a fraction of `|ω|`.
    pub const LOWPASS_FRACTION: f64 = 0.01;
    /// Spacing of CSV rows, in μs, when not configured.
    pub const ROW_SPACING_US: f64 = 10.0;
    pub const SIMULATE_T_END_US: f64 = 50_000.0;
    pub const RAMP_G_FINAL: f64 = 1.5;
    pub const SCAN_TAU: (f64, f64, f64) = (0.0, 150.0, 0.5);
    pub const SWEEP_G: (f64, f64, f64) = (0.5, 1.5, 0.01);
    pub const EXPONENT_WINDOW: (f64, f64) = (1e-4, 1e-2);
    pub const EXPONENT_POINTS: usize = 20;
    pub const REL_TOL: f64 = 1e-10;
}

fn non_empty_vec<T>(v: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    match v {
        Some(v) if !v.is_empty() => v,
        _ => default,
    }
}

fn check_positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "`{name}` must be a finite number > 0, got {v}"
        )))
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Model parameters in rad/μs. `g` is zero when the block names no
    /// coupling; scenarios that need one call [`Config::coupling`].
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let p = ModelParams::new(
            from_2pi_mhz(m.omega0_2pi_mhz),
            from_2pi_mhz(m.omega_2pi_mhz),
            from_2pi_mhz(m.u_2pi_mhz),
            from_2pi_mhz(m.kappa_2pi_mhz),
            0.0,
            m.n_atoms,
        )
        .map_err(|e| CliError::config(format!("[model]: {e}")))?;
        Ok(p)
    }

    /// Threshold coupling in rad/μs.
    pub fn threshold(&self) -> Result<f64, CliError> {
        let p = self.model_params()?;
        threshold_coupling(&p).map_err(|e| CliError::config(format!("[model]: no threshold coupling: {e}")))
    }

    /// Model parameters including the configured coupling.
    pub fn coupling(&self) -> Result<ModelParams, CliError> {
        let p = self.model_params()?;
        let g = match (self.model.g_over_gc, self.model.g_2pi_mhz) {
            (Some(r), None) => r * self.threshold()?,
            (None, Some(g)) => from_2pi_mhz(g),
            (None, None) => {
                return Err(CliError::config(
                    "[model] needs a coupling: set `g_over_gc` or `g_2pi_mhz`",
                ))
            }
            (Some(_), Some(_)) => return Err(CliError::config("[model]: set only one of `g_over_gc` and `g_2pi_mhz`")),
        };
        if !(g >= 0.0 && g.is_finite()) {
            return Err(CliError::config(format!(
                "[model]: coupling must be finite and >= 0, got {g}"
            )));
        }
        Ok(p.with_g(g))
    }

    /// Resolved feedback entries; an empty list means a single open loop.
    pub fn feedback_params(&self) -> Result<Vec<(String, FeedbackParams)>, CliError> {
        let p = self.model_params()?;
        self.feedback
            .iter()
            .map(|f| {
                let label = f.label.clone().unwrap_or_default();
                let params = FeedbackParams::symmetric(p.kappa, f.gain_fraction, f.tau_us)
                    .map_err(|e| CliError::config(format!("[[feedback]] `{label}`: {e}")))?;
                Ok((label, params))
            })
            .collect()
    }

    /// Fills every default, validates, and returns the configuration that is
    /// written as the run manifest. Resolving twice is a no-op.
    pub fn resolve(mut self, scenario: Scenario) -> Result<Self, CliError> {
        if let Some(s) = self.meta.scenario {
            if s != scenario {
                return Err(CliError::config(format!(
                    "config is for scenario `{s}` but `{scenario}` was requested"
                )));
            }
        }
        self.meta.scenario = Some(scenario);
        self.meta.version = Some(crate::VERSION.to_string());

        let p = self.model_params()?;
        if self.model.g_over_gc.is_some() || self.model.g_2pi_mhz.is_some() {
            self.coupling()?;
        }
        self.resolve_feedback()?;

        let others_present = [
            (Scenario::FixedPoints, self.fixed_points.is_some()),
            (Scenario::Simulate, self.simulate.is_some()),
            (Scenario::Ramp, self.ramp.is_some()),
            (Scenario::StabilityScan, self.stability_scan.is_some()),
            (Scenario::Fluctuations, self.fluctuations.is_some()),
            (Scenario::Exponent, self.exponent.is_some()),
        ];
        for (s, present) in others_present {
            if present && s != scenario {
                return Err(CliError::config(format!(
                    "config has a [{s}] block but scenario `{scenario}` was requested"
                )));
            }
        }

        match scenario {
            Scenario::FixedPoints => {
                self.coupling()?;
                let mut b = self.fixed_points.take().unwrap_or_default();
                b.stability.get_or_insert(true);
                self.fixed_points = Some(b);
            }
            Scenario::Simulate => {
                let p = self.coupling()?;
                let b = self.simulate.take().unwrap_or_default();
                self.simulate = Some(self.resolve_simulate(&p, b)?);
            }
            Scenario::Ramp => {
                let b = self.ramp.take().unwrap_or_default();
                self.ramp = Some(self.resolve_ramp(&p, b)?);
            }
            Scenario::StabilityScan => {
                self.coupling()?;
                let b = self.stability_scan.take().unwrap_or_default();
                self.stability_scan = Some(resolve_scan(b)?);
            }
            Scenario::Fluctuations => {
                let mut b = self.fluctuations.take().unwrap_or_default();
                let (a, z, s) = defaults::SWEEP_G;
                let g = b.g_over_gc.get_or_insert_with(|| Grid::range(a, z, s));
                if g.values()?.iter().any(|&x| !(x >= 0.0)) {
                    return Err(CliError::config("[fluctuations] couplings must be >= 0"));
                }
                check_positive("rel_tol", *b.rel_tol.get_or_insert(defaults::REL_TOL))?;
                self.fluctuations = Some(b);
            }
            Scenario::Exponent => {
                let b = self.exponent.take().unwrap_or_default();
                self.exponent = Some(resolve_exponent(b)?);
            }
        }
        Ok(self)
    }

    fn resolve_feedback(&mut self) -> Result<(), CliError> {
        if self.feedback.is_empty() {
            self.feedback.push(FeedbackBlock::open());
        }
        for f in &mut self.feedback {
            if !(0.0..=1.0).contains(&f.gain_fraction) {
                return Err(CliError::config(format!(
                    "[[feedback]] gain_fraction must lie in [0, 1], got {}",
                    f.gain_fraction
                )));
            }
            if !(f.tau_us >= 0.0 && f.tau_us.is_finite()) {
                return Err(CliError::config(format!(
                    "[[feedback]] tau_us must be >= 0, got {}",
                    f.tau_us
                )));
            }
            let label = f.label.get_or_insert_with(|| {
                if f.gain_fraction == 0.0 || f.tau_us == 0.0 {
                    "open".to_string()
                } else {
                    format!("k{}_tau{}us", f.gain_fraction, f.tau_us)
                }
            });
            let ok = !label.is_empty()
                && label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
            if !ok {
                return Err(CliError::config(format!(
                    "[[feedback]] label `{label}` must be non-empty and use only [A-Za-z0-9_.-]"
                )));
            }
        }
        let mut labels: Vec<&str> = self.feedback.iter().map(|f| f.label.as_deref().unwrap()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::config(format!("[[feedback]] label `{}` is used twice", w[0])));
        }
        Ok(())
    }

    /// Largest step allowed for every feedback entry.
    fn default_step(&self, p: &ModelParams) -> Result<f64, CliError> {
        let mut h = f64::INFINITY;
        for (_, f) in self.feedback_params()? {
            h = h.min(Stepping::default_step(p, &f));
        }
        Ok(h)
    }

    fn check_step(&self, h: f64) -> Result<(), CliError> {
        check_positive("h_us", h)?;
        for f in &self.feedback {
            if f.tau_us > 0.0 && h > f.tau_us {
                return Err(CliError::config(format!(
                    "h_us = {h} exceeds the delay tau_us = {}",
                    f.tau_us
                )));
            }
        }
        Ok(())
    }

    fn resolve_simulate(&self, p: &ModelParams, mut b: SimulateBlock) -> Result<SimulateBlock, CliError> {
        let t_end = check_positive("t_end_us", *b.t_end_us.get_or_insert(defaults::SIMULATE_T_END_US))?;
        let h = *b.h_us.get_or_insert(self.default_step(p)?);
        self.check_step(h)?;
        let cutoff = *b
            .lowpass_cutoff_2pi_mhz
            .get_or_insert(defaults::LOWPASS_FRACTION * self.model.omega_2pi_mhz.abs());
        let cutoff = check_positive("lowpass_cutoff_2pi_mhz", cutoff)?;
        // Ten samples per filter time constant keep the smoother accurate.
        let stride = *b
            .sample_stride
            .get_or_insert_with(|| ((0.1 / (from_2pi_mhz(cutoff) * h)).floor() as usize).max(1));
        if stride == 0 {
            return Err(CliError::config("`sample_stride` must be >= 1"));
        }
        let every = *b
            .output_every
            .get_or_insert_with(|| ((defaults::ROW_SPACING_US / (h * stride as f64)).round() as usize).max(1));
        if every == 0 {
            return Err(CliError::config("`output_every` must be >= 1"));
        }
        if t_end / h > 1e11 {
            return Err(CliError::config("t_end_us / h_us exceeds 1e11 steps"));
        }
        let initial = *b.initial.get_or_insert_with(InitialBlock::tilted);
        b.initial = Some(self.resolve_initial(initial)?);
        check_positive(
            "relaxation_eps",
            *b.relaxation_eps.get_or_insert(defaults::RELAXATION_EPS),
        )?;
        Ok(b)
    }

    fn resolve_ramp(&self, p: &ModelParams, mut b: RampBlock) -> Result<RampBlock, CliError> {
        let t0 = b.t0_us.ok_or_else(|| CliError::config("[ramp] needs `t0_us`"))?;
        check_positive("t0_us", t0)?;
        let gf = *b.g_final_over_gc.get_or_insert(defaults::RAMP_G_FINAL);
        check_positive("g_final_over_gc", gf)?;
        self.threshold()?;
        let t_end = check_positive("t_end_us", *b.t_end_us.get_or_insert(t0))?;
        let h = *b.h_us.get_or_insert(self.default_step(p)?);
        self.check_step(h)?;
        if t_end / h > 1e11 {
            return Err(CliError::config("t_end_us / h_us exceeds 1e11 steps"));
        }
        let stride = *b
            .sample_stride
            .get_or_insert_with(|| ((defaults::ROW_SPACING_US / h).round() as usize).max(1));
        if stride == 0 {
            return Err(CliError::config("`sample_stride` must be >= 1"));
        }
        let initial = *b.initial.get_or_insert(InitialBlock::NearNormal { n_atoms: None });
        b.initial = Some(self.resolve_initial(initial)?);
        Ok(b)
    }

    fn resolve_initial(&self, b: InitialBlock) -> Result<InitialBlock, CliError> {
        match b {
            InitialBlock::NearNormal { n_atoms } => {
                let n = n_atoms.unwrap_or(self.model.n_atoms);
                if !(n >= 8.0 && n.is_finite()) {
                    return Err(CliError::config(format!(
                        "near-normal initial state needs n_atoms >= 8, got {n}"
                    )));
                }
                Ok(InitialBlock::NearNormal { n_atoms: Some(n) })
            }
            InitialBlock::Explicit { state } => {
                if state.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::config("explicit initial state must be finite"));
                }
                Ok(b)
            }
        }
    }

    pub fn initial_state(b: &InitialBlock) -> tdas_dicke_core::dde::InitialCondition {
        use tdas_dicke_core::dde::InitialCondition;
        match *b {
            InitialBlock::NearNormal { n_atoms } => InitialCondition::NearNormal {
                n_atoms: n_atoms.expect("resolved"),
            },
            InitialBlock::Explicit { state } => InitialCondition::Explicit(MeanFieldState::from_array(state)),
        }
    }
}

fn resolve_scan(mut b: ScanBlock) -> Result<ScanBlock, CliError> {
    b.fixed_points = Some(non_empty_vec(b.fixed_points.take(), vec![FixedPointName::Normal]));
    let k = b.gain_fractions.get_or_insert(Grid::Values(vec![1.0]));
    if k.values()?.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(CliError::config("[stability-scan] gain_fractions must lie in [0, 1]"));
    }
    let (a, z, s) = defaults::SCAN_TAU;
    let tau = b.tau_us.get_or_insert(Grid::range(a, z, s)).values()?;
    if tau.iter().any(|&t| !(t >= 0.0)) || tau.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::config(
            "[stability-scan] tau_us must be >= 0 and strictly increasing",
        ));
    }
    b.approximation.get_or_insert(false);
    let m = *b
        .collocation_degree
        .get_or_insert(tdas_dicke_core::stability::SearchOptions::default().collocation_degree);
    if !(4..=400).contains(&m) {
        return Err(CliError::config(format!(
            "collocation_degree must lie in [4, 400], got {m}"
        )));
    }
    Ok(b)
}

fn resolve_exponent(mut b: ExponentBlock) -> Result<ExponentBlock, CliError> {
    b.sides = Some(non_empty_vec(
        b.sides.take(),
        vec![SideName::Normal, SideName::SuperRadiant],
    ));
    let lo = check_positive("eps_min", *b.eps_min.get_or_insert(defaults::EXPONENT_WINDOW.0))?;
    let hi = check_positive("eps_max", *b.eps_max.get_or_insert(defaults::EXPONENT_WINDOW.1))?;
    if !(lo < hi && hi < 0.5) {
        return Err(CliError::config(format!(
            "exponent window needs eps_min < eps_max < 0.5, got [{lo}, {hi}]"
        )));
    }
    let n = *b.points.get_or_insert(defaults::EXPONENT_POINTS);
    if n < 3 {
        return Err(CliError::config("exponent fit needs `points` >= 3"));
    }
    check_positive("rel_tol", *b.rel_tol.get_or_insert(defaults::REL_TOL))?;
    Ok(b)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

//! Run configuration (JSON in) and run report (JSON out).
//!
//! Unknown fields are rejected so typos fail loudly; every validation error
//! carries the offending field path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{BoundsCertificate, ConformalFactor};
use crate::observables::ObservableSet;
use crate::solver::{SolveReport, SolveSettings};
use crate::vortex::{Vortex, VortexConfiguration};

/// Serializable description of a conformal factor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    #[default]
    Flat,
    GaussianBump {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        center: (f64, f64),
    },
    PowerGrowth {
        exponent: f64,
    },
    RadialTable {
        radii: Vec<f64>,
        values: Vec<f64>,
    },
}

impl MetricConfig {
    pub fn build(&self) -> Result<ConformalFactor> {
        match self {
            MetricConfig::Flat => Ok(ConformalFactor::flat()),
            MetricConfig::GaussianBump {
                amplitude,
                sigma,
                center,
            } => ConformalFactor::gaussian_bump(*amplitude, *sigma, *center),
            MetricConfig::PowerGrowth { exponent } => ConformalFactor::power_growth(*exponent),
            MetricConfig::RadialTable { radii, values } => {
                ConformalFactor::radial_table(radii.clone(), values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: default_half_width(),
            nodes: default_nodes(),
        }
    }
}

fn default_half_width() -> f64 {
    16.0
}

fn default_nodes() -> usize {
    513
}

fn default_mu() -> f64 {
    1.0
}

/// Which artifacts a run should leave on disk besides the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for field dumps and heatmaps; current directory if unset.
    pub directory: Option<String>,
    /// Write `w`, `bfield`, and `a0` node values as CSV.
    pub dump_fields: bool,
    /// Render SVG heatmaps of `w` and `B̃`.
    pub heatmaps: bool,
    /// Override the decay-fit window `(r₁, r₂)`.
    pub decay_window: Option<(f64, f64)>,
}

/// Top-level batch configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfiguration {
    pub metric: MetricConfig,
    pub vortices: Vec<Vortex>,
    pub mu: f64,
    pub grid: GridConfig,
    pub solver: SolveSettings,
    pub outputs: OutputConfig,
}

impl Default for RunConfiguration {
    fn default() -> Self {
        RunConfiguration {
            metric: MetricConfig::default(),
            vortices: Vec::new(),
            mu: default_mu(),
            grid: GridConfig::default(),
            solver: SolveSettings::default(),
            outputs: OutputConfig::default(),
        }
    }
}

impl RunConfiguration {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfiguration = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Cross-field validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.metric.build()?;
        let vc = self.vortex_configuration()?;
        let l = self.grid.half_width;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::config("grid.half_width", "must be finite and > 0"));
        }
        for (k, v) in vc.vortices().iter().enumerate() {
            if v.x.abs() >= l || v.y.abs() >= l {
                return Err(Error::config(
                    format!("vortices[{k}]"),
                    "must lie strictly inside the domain",
                ));
            }
        }
        if let Some((r1, r2)) = self.outputs.decay_window {
            if !(0.0 < r1 && r1 < r2 && r2 <= l) {
                return Err(Error::config(
                    "outputs.decay_window",
                    "requires 0 < r1 < r2 <= half_width",
                ));
            }
        }
        Ok(())
    }

    pub fn vortex_configuration(&self) -> Result<VortexConfiguration> {
        VortexConfiguration::new(self.vortices.clone(), self.mu)
    }

    pub fn conformal_factor(&self) -> Result<ConformalFactor> {
        self.metric.build()
    }
}

/// Deviation of the 2D solution from the radial oracle, when applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub sup_deviation: f64,
    pub l2_deviation: f64,
    pub oracle_flux: f64,
}

/// Full machine-readable output of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub configuration: RunConfiguration,
    pub bounds: BoundsCertificate,
    pub total_vorticity: u32,
    pub solve: SolveReport,
    pub observables: ObservableSet,
    pub expected_flux: f64,
    pub expected_energy: f64,
    pub oracle: Option<OracleComparison>,
}

/// Round to 12 significant digits, keeping reports stable across runs that
/// differ only in nondeterministic last-bit noise.
pub fn round_sig(v: f64, digits: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = digits - 1 - v.abs().log10().floor() as i32;
    let factor = 10f64.powi(scale);
    (v * factor).round() / factor
}

impl RunReport {
    /// Round all observable values to 12 significant digits in place.
    pub fn round_observables(&mut self) {
        let o = &mut self.observables;
        o.flux = round_sig(o.flux, 12);
        o.energy = round_sig(o.energy, 12);
        o.spin_direct = round_sig(o.spin_direct, 12);
        o.spin_by_parts = round_sig(o.spin_by_parts, 12);
        o.w_max = round_sig(o.w_max, 12);
        for v in &mut o.a0_core_values {
            *v = round_sig(*v, 12);
        }
        if let Some(fit) = &mut o.decay_fit {
            fit.a_fit = round_sig(fit.a_fit, 12);
            fit.b_fit = round_sig(fit.b_fit, 12);
        }
    }

    /// Serialization with timing stripped, for bitwise determinism checks.
    pub fn to_json_deterministic(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.solve.wall_time_s = 0.0;
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

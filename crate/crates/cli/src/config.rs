//! Experiment configuration files.
//!
//! A configuration is a flat, sectioned key-value file in TOML syntax with
//! four sections: `[device]`, `[numerics]`, `[experiment]` and `[output]`.
//! Every key has a default except `experiment.name`; unknown keys are errors.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fluxcirc_core::fluxon::JunctionParams;
use fluxcirc_core::scattering::Numerics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Iv,
    Spectrum,
    Splitting,
    BiasSweep,
    FreqSweep,
    LossG,
    LossP,
    Power,
    FluxonSweep,
    CouplingCompare,
    Validate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Iv => "iv",
            Self::Spectrum => "spectrum",
            Self::Splitting => "splitting",
            Self::BiasSweep => "bias-sweep",
            Self::FreqSweep => "freq-sweep",
            Self::LossG => "loss-g",
            Self::LossP => "loss-p",
            Self::Power => "power",
            Self::FluxonSweep => "fluxon-sweep",
            Self::CouplingCompare => "coupling-compare",
            Self::Validate => "validate",
        }
    }
}

/// A list of values, or `{ start, stop, count }` for an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            bail!("grid `{name}` is empty");
        }
        if v.iter().any(|x| !x.is_finite()) {
            bail!("grid `{name}` has non-finite entries");
        }
        if !v.windows(2).all(|w| w[1] > w[0]) {
            bail!("grid `{name}` is not strictly increasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    /// Circumference in Josephson lengths.
    pub length: f64,
    pub fluxons: u32,
    pub g: f64,
    pub p: f64,
    /// Josephson length in metres.
    pub lambda_j: f64,
    /// Plasma frequency in hertz.
    pub f_p: f64,
    /// Junction characteristic impedance in ohms.
    pub z_ljj: f64,
    /// Waveguide impedance in ohms.
    pub z0: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let c = JunctionParams::<f64>::circulator();
        Self {
            length: c.length,
            fluxons: c.fluxons,
            g: c.g,
            p: c.p,
            lambda_j: c.lambda_j,
            f_p: c.f_p,
            z_ljj: c.z_ljj,
            z0: c.z0,
        }
    }
}

impl DeviceSection {
    pub fn params(&self) -> JunctionParams<f64> {
        JunctionParams::new(
            self.length,
            self.fluxons,
            self.g,
            self.p,
            self.lambda_j,
            self.f_p,
            self.z_ljj,
            self.z0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub nodes_per_lambda: f64,
    pub dt_factor: f64,
    pub transient_periods: f64,
    pub transient_decay: f64,
    pub window_periods: u32,
    pub steady_tol: f64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let n = Numerics::default();
        Self {
            nodes_per_lambda: n.nodes_per_lambda,
            dt_factor: n.dt_factor,
            transient_periods: n.transient_periods,
            transient_decay: n.transient_decay,
            window_periods: n.window_periods,
            steady_tol: n.steady_tol,
            workers: 0,
        }
    }
}

impl NumericsSection {
    pub fn numerics(&self) -> Numerics {
        Numerics {
            nodes_per_lambda: self.nodes_per_lambda,
            dt_factor: self.dt_factor,
            transient_periods: self.transient_periods,
            transient_decay: self.transient_decay,
            window_periods: self.window_periods,
            steady_tol: self.steady_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentKind,
    /// Bias for fixed-bias experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_grid: Option<Grid>,
    /// Drive frequency in GHz for fixed-frequency experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_ghz_grid: Option<Grid>,
    /// Relative detuning `(ω_d − ω_res)/ω_res`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_grid: Option<Grid>,
    /// Dimensionless drive amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluxon_counts: Option<Vec<u32>>,
    /// Extra fluxon numbers overlaid on a frequency sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay_fluxons: Option<Vec<u32>>,
    /// Coupling capacitances in femtofarads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_capacitance_ff: Option<Vec<f64>>,
    /// Include the galvanic-port drag when computing the train velocity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port_drag: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// Significant digits for floats (17 round-trips exactly).
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            precision: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The configuration as TOML, for embedding in output metadata.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.device;
        for (name, v) in [
            ("device.length", d.length),
            ("device.lambda_j", d.lambda_j),
            ("device.f_p", d.f_p),
            ("device.z_ljj", d.z_ljj),
            ("device.z0", d.z0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("`{name}` must be positive, got {v}");
            }
        }
        for (name, v) in [("device.g", d.g), ("device.p", d.p)] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!("`{name}` must be non-negative, got {v}");
            }
        }
        let n = &self.numerics;
        for (name, v) in [
            ("numerics.nodes_per_lambda", n.nodes_per_lambda),
            ("numerics.dt_factor", n.dt_factor),
            ("numerics.transient_periods", n.transient_periods),
            ("numerics.steady_tol", n.steady_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("`{name}` must be positive, got {v}");
            }
        }
        if !(n.transient_decay >= 0.0) {
            bail!("`numerics.transient_decay` must be non-negative");
        }
        if n.window_periods < 2 {
            bail!("`numerics.window_periods` must be at least 2");
        }
        let e = &self.experiment;
        for (name, g) in [
            ("bias_grid", &e.bias_grid),
            ("frequency_ghz_grid", &e.frequency_ghz_grid),
            ("detuning_grid", &e.detuning_grid),
            ("power_dbm_grid", &e.power_dbm_grid),
            ("g_grid", &e.g_grid),
            ("p_grid", &e.p_grid),
        ] {
            if let Some(g) = g {
                g.check(name)?;
            }
        }
        if let Some(g) = &e.g_grid {
            if g.values().iter().any(|&x| x < 0.0) {
                bail!("`g_grid` must be non-negative");
            }
        }
        if let Some(g) = &e.p_grid {
            if g.values().iter().any(|&x| x < 0.0) {
                bail!("`p_grid` must be non-negative");
            }
        }
        if let Some(g) = &e.frequency_ghz_grid {
            if g.values().iter().any(|&x| x <= 0.0) {
                bail!("`frequency_ghz_grid` must be positive");
            }
        }
        for (name, v) in [("fluxon_counts", &e.fluxon_counts), ("overlay_fluxons", &e.overlay_fluxons)] {
            if let Some(v) = v {
                if v.is_empty() || v.contains(&0) {
                    bail!("`{name}` must be a non-empty list of positive integers");
                }
                if !v.windows(2).all(|w| w[1] > w[0]) {
                    bail!("`{name}` is not strictly increasing");
                }
            }
        }
        if let Some(c) = &e.coupling_capacitance_ff {
            if c.is_empty() || c.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                bail!("`coupling_capacitance_ff` must be a non-empty list of positive values");
            }
        }
        if let Some(a) = e.amplitude {
            if !(a > 0.0 && a.is_finite()) {
                bail!("`amplitude` must be positive");
            }
        }
        if let Some(f) = e.frequency_ghz {
            if !(f > 0.0 && f.is_finite()) {
                bail!("`frequency_ghz` must be positive");
            }
        }
        if !(1..=17).contains(&self.output.precision) {
            bail!("`output.precision` must be between 1 and 17");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_circulator_defaults() {
        let c = ExperimentConfig::parse("[experiment]\nname = \"bias-sweep\"\n").unwrap();
        assert_eq!(c.device.params(), JunctionParams::circulator());
        assert_eq!(c.numerics.numerics(), Numerics::default());
        assert_eq!(c.output.precision, 17);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse("[experiment]\nname = \"iv\"\nfoo = 1\n").is_err());
        assert!(ExperimentConfig::parse("[device]\nlenght = 2\n[experiment]\nname = \"iv\"\n").is_err());
        assert!(ExperimentConfig::parse("[experiment]\nname = \"nope\"\n").is_err());
        assert!(ExperimentConfig::parse("[extra]\n[experiment]\nname = \"iv\"\n").is_err());
    }

    #[test]
    fn grids() {
        let c = ExperimentConfig::parse(
            "[experiment]\nname = \"iv\"\nbias_grid = { start = 0.0, stop = 0.1, count = 3 }\ng_grid = [0.0, 0.01]\n",
        )
        .unwrap();
        assert_eq!(c.experiment.bias_grid.unwrap().values(), vec![0.0, 0.05, 0.1]);
        assert!(ExperimentConfig::parse("[experiment]\nname = \"iv\"\nbias_grid = [0.1, 0.0]\n").is_err());
        assert!(ExperimentConfig::parse("[experiment]\nname = \"iv\"\nbias_grid = []\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::parse("[device]\nlength = -1.0\n[experiment]\nname = \"iv\"\n").is_err());
        assert!(ExperimentConfig::parse("[device]\ng = -0.1\n[experiment]\nname = \"iv\"\n").is_err());
        assert!(ExperimentConfig::parse("[output]\nprecision = 30\n[experiment]\nname = \"iv\"\n").is_err());
    }

    #[test]
    fn toml_echo_round_trips() {
        let c = ExperimentConfig::parse(
            "[device]\nlength = 15.0\ng = 0.02\n[experiment]\nname = \"iv\"\nfluxon_counts = [2, 4]\n",
        )
        .unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }
}

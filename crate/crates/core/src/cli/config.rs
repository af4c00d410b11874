//! TOML run configuration.
//!
//! ```toml
//! output_dir = "out/adder_fock"
//!
//! [scenario]
//! device = "adder"          # or "subtractor"
//! cutoff = 5                # highest retained Fock level
//!
//! [scenario.initial]
//! kind = "fock"             # "fock" | "coherent" | "squeezed"
//! levels = [1, 2]
//!
//! [pulse]
//! omega = 16.0
//! tau = 0.14
//!
//! [outputs]
//! timeseries = true
//! summary = true
//! q_states = ["initial", "steady", "ideal_target"]
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::channels::KrausKind;
use crate::dynamics::{
    DeviceKind, PulseParams, Scenario, DEFAULT_DT, DEFAULT_G, DEFAULT_SAMPLE_EVERY,
    DEFAULT_STEADY_TOL, DEFAULT_T_END,
};
use crate::error::{Error, Result};
use crate::hilbert::SpaceLayout;
use crate::observables::QGridSpec;
use crate::optimizer::{FidelityConvention, GridSpec};
use crate::states::{InitialStateSpec, DEFAULT_MAX_LEAKAGE};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub pulse: Option<PulseConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub outputs: OutputsConfig,
    pub channel: Option<ChannelConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Required by `simulate` and `optimize`; ignored by `channel`.
    pub device: Option<DeviceKind>,
    pub cutoff: usize,
    pub initial: InitialConfig,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_max_leakage")]
    pub max_leakage: f64,
}

fn default_g() -> f64 {
    DEFAULT_G
}
fn default_gamma() -> f64 {
    1.0
}
fn default_t_end() -> f64 {
    DEFAULT_T_END
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_sample_every() -> usize {
    DEFAULT_SAMPLE_EVERY
}
fn default_steady_tol() -> f64 {
    DEFAULT_STEADY_TOL
}
fn default_max_leakage() -> f64 {
    DEFAULT_MAX_LEAKAGE
}

/// Complex numbers are written `[re, im]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Amplitudes default to equal weights and are normalized.
    Fock {
        levels: Vec<usize>,
        amplitudes: Option<Vec<[f64; 2]>>,
    },
    Coherent {
        alpha: [f64; 2],
    },
    Squeezed {
        r: f64,
        #[serde(default)]
        theta: f64,
    },
}

impl InitialConfig {
    pub fn to_spec(&self) -> Result<InitialStateSpec> {
        match self {
            InitialConfig::Fock { levels, amplitudes } => {
                if levels.is_empty() {
                    return Err(Error::Config("initial.levels is empty".into()));
                }
                let amps: Vec<C64> = match amplitudes {
                    Some(a) if a.len() != levels.len() => {
                        return Err(Error::Config(format!(
                            "initial.amplitudes has {} entries for {} levels",
                            a.len(),
                            levels.len()
                        )))
                    }
                    Some(a) => a.iter().map(|&[re, im]| C64::new(re, im)).collect(),
                    None => vec![C64::new(1.0, 0.0); levels.len()],
                };
                let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::Config(
                        "initial.amplitudes must have a finite, nonzero norm".into(),
                    ));
                }
                Ok(InitialStateSpec::fock(
                    levels
                        .iter()
                        .zip(amps)
                        .map(|(&n, c)| (n, c / norm))
                        .collect(),
                ))
            }
            InitialConfig::Coherent { alpha: [re, im] } => {
                Ok(InitialStateSpec::coherent(C64::new(*re, *im)))
            }
            InitialConfig::Squeezed { r, theta } => Ok(InitialStateSpec::squeezed(*r, *theta)),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub omega: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    #[serde(default)]
    pub convention: FidelityConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QState {
    Initial,
    Steady,
    IdealTarget,
}

impl QState {
    pub fn file_name(self) -> &'static str {
        match self {
            QState::Initial => "q_initial.csv",
            QState::Steady => "q_steady.csv",
            QState::IdealTarget => "q_ideal_target.csv",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "yes")]
    pub timeseries: bool,
    #[serde(default = "yes")]
    pub summary: bool,
    #[serde(default)]
    pub q_states: Vec<QState>,
    pub qgrid: Option<QGridSpec>,
}

fn yes() -> bool {
    true
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            timeseries: true,
            summary: true,
            q_states: Vec::new(),
            qgrid: None,
        }
    }
}

impl OutputsConfig {
    pub fn qgrid(&self) -> QGridSpec {
        self.qgrid.unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: KrausKind,
    #[serde(default = "yes")]
    pub qfunction: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::new(self.scenario.cutoff).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pulse(&self) -> Result<Option<PulseParams>> {
        self.pulse
            .map(|p| PulseParams::new(p.omega, p.tau))
            .transpose()
    }

    /// Builds and validates the scenario, including the initial state.
    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        let device = s
            .device
            .ok_or_else(|| Error::Config("scenario.device is required".into()))?;
        let mut sc =
            Scenario::new(device, s.initial.to_spec()?, self.layout()?).with_pulse(self.pulse()?);
        sc.g = s.g;
        sc.gamma = s.gamma;
        sc.t_end = s.t_end;
        sc.dt = s.dt;
        sc.sample_every = s.sample_every;
        sc.steady_tol = s.steady_tol;
        sc.max_leakage = s.max_leakage;
        sc.validate()?;
        sc.initial_state()?;
        Ok(sc)
    }

    pub fn grid(&self) -> Result<(GridSpec, FidelityConvention)> {
        let g = self
            .grid
            .ok_or_else(|| Error::Config("the [grid] section is required".into()))?;
        let spec = GridSpec {
            omega_min: g.omega_min,
            omega_max: g.omega_max,
            n_omega: g.n_omega,
            tau_min: g.tau_min,
            tau_max: g.tau_max,
            n_tau: g.n_tau,
        };
        spec.validate()?;
        Ok((spec, g.convention))
    }

    pub fn output_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        cli_override
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

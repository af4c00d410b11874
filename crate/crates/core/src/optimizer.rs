//! Grid search over rectangular control pulses.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{apply_channel, build_kraus, KrausKind};
use crate::dynamics::{integrate, steady_state, DeviceKind, PulseParams, Scenario};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SpaceLayout};
use crate::observables::{trace_out_atom, uhlmann_fidelity};
use crate::states::{build_cavity_state_with_tolerance, InitialStateSpec};

/// Fraction of grid points allowed to fail before a search is abandoned.
pub const MAX_MISSING_FRACTION: f64 = 0.05;

/// Samples per simulation during a search; only the steady state matters.
pub const SEARCH_SAMPLE_EVERY: usize = 2500;

/// Whether the optimization objective is `Tr√(√ρσ√ρ)` or its square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityConvention {
    Root,
    #[default]
    Squared,
}

impl FidelityConvention {
    pub fn apply(self, root: f64) -> f64 {
        match self {
            FidelityConvention::Root => root,
            FidelityConvention::Squared => root * root,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            omega_min: 5.0,
            omega_max: 30.0,
            n_omega: 26,
            tau_min: 0.05,
            tau_max: 0.30,
            n_tau: 26,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_omega < 2 || self.n_tau < 2 {
            return Err(Error::InvalidGrid(format!(
                "grid needs at least 2 points per axis, got {}x{}",
                self.n_omega, self.n_tau
            )));
        }
        let finite = [self.omega_min, self.omega_max, self.tau_min, self.tau_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.omega_min >= self.omega_max || self.tau_min >= self.tau_max {
            return Err(Error::InvalidGrid(
                "grid ranges must be finite and increasing".into(),
            ));
        }
        if self.omega_min < 0.0 || self.tau_min < 0.0 {
            return Err(Error::InvalidGrid(
                "pulse strength and duration must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn omega(&self, i: usize) -> f64 {
        linspace(self.omega_min, self.omega_max, self.n_omega, i)
    }

    pub fn tau(&self, j: usize) -> f64 {
        linspace(self.tau_min, self.tau_max, self.n_tau, j)
    }

    pub fn len(&self) -> usize {
        self.n_omega * self.n_tau
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub omega: f64,
    pub tau: f64,
    pub fidelity: f64,
    pub i_omega: usize,
    pub i_tau: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySurface {
    pub grid: GridSpec,
    pub convention: FidelityConvention,
    /// Ω-major: `values[i * n_tau + j]` belongs to `(omega(i), tau(j))`.
    /// `None` marks a point whose simulation did not converge.
    pub values: Vec<Option<f64>>,
    pub argmax: Optimum,
    pub missing: usize,
}

impl FidelitySurface {
    pub fn at(&self, i_omega: usize, i_tau: usize) -> Option<f64> {
        self.values[i_omega * self.grid.n_tau + i_tau]
    }

    /// Maximum over present values; ties go to the smallest Ω, then the
    /// smallest τ.
    pub fn from_values(
        grid: GridSpec,
        convention: FidelityConvention,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::dims("fidelity surface", grid.len(), values.len()));
        }
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * values.len() as f64 {
            return Err(Error::TooManyFailures {
                failed: missing,
                total: values.len(),
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in values.iter().enumerate() {
            if let Some(f) = *v {
                if best.is_none_or(|(_, b)| f > b) {
                    best = Some((k, f));
                }
            }
        }
        let (k, f) = best.ok_or(Error::TooManyFailures {
            failed: missing,
            total: values.len(),
        })?;
        let (i, j) = (k / grid.n_tau, k % grid.n_tau);
        Ok(Self {
            argmax: Optimum {
                omega: grid.omega(i),
                tau: grid.tau(j),
                fidelity: f,
                i_omega: i,
                i_tau: j,
            },
            grid,
            convention,
            values,
            missing,
        })
    }
}

/// Ideal coherent-channel output for the scenario's initial cavity state.
pub fn target_state(scenario: &Scenario) -> Result<DensityMatrix> {
    let cav = build_cavity_state_with_tolerance(
        &scenario.initial,
        &scenario.layout,
        scenario.max_leakage,
    )?;
    let kind = match scenario.device {
        DeviceKind::Adder => KrausKind::SpaCoherent,
        DeviceKind::Subtractor => KrausKind::SpsCoherent,
    };
    let set = build_kraus(kind, &scenario.layout);
    Ok(apply_channel(&set, &cav.state.projector())?.state)
}

/// Steady cavity state reached under `pulse` (or without drive for `None`).
pub fn steady_cavity_state(
    scenario: &Scenario,
    pulse: Option<PulseParams>,
) -> Result<DensityMatrix> {
    let sc = scenario.clone().with_pulse(pulse);
    let traj = integrate(&sc)?;
    let (rho, _) = steady_state(&traj, sc.steady_tol)?;
    trace_out_atom(&rho, &sc.layout)
}

fn fidelity_against(
    scenario: &Scenario,
    target: &DensityMatrix,
    pulse: Option<PulseParams>,
    convention: FidelityConvention,
) -> Result<f64> {
    let rho_c = steady_cavity_state(scenario, pulse)?;
    Ok(convention.apply(uhlmann_fidelity(&rho_c, target)?))
}

pub fn fidelity_at(
    scenario: &Scenario,
    pulse: PulseParams,
    convention: FidelityConvention,
) -> Result<f64> {
    let target = target_state(scenario)?;
    fidelity_against(scenario, &target, Some(pulse), convention)
}

/// Evaluates the whole grid in parallel; results land by index, so the
/// surface does not depend on the worker count.
pub fn grid_search(
    scenario: &Scenario,
    grid: &GridSpec,
    convention: FidelityConvention,
) -> Result<FidelitySurface> {
    grid.validate()?;
    scenario.validate()?;
    let target = target_state(scenario)?;
    let mut sc = scenario.clone();
    sc.sample_every = sc.sample_every.max(SEARCH_SAMPLE_EVERY);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let pulse = PulseParams::new(grid.omega(k / grid.n_tau), grid.tau(k % grid.n_tau))?;
            match fidelity_against(&sc, &target, Some(pulse), convention) {
                Ok(f) => Ok(Some(f)),
                Err(Error::NotConverged { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FidelitySurface::from_values(*grid, convention, values)
}

/// The six device/state combinations studied: both devices acting on
/// `(|1⟩+|2⟩)/√2`, a coherent state with α = 1 and squeezed vacuum with r = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    AdderFock,
    AdderCoherent,
    AdderSqueezed,
    SubtractorFock,
    SubtractorCoherent,
    SubtractorSqueezed,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::AdderFock,
        Preset::AdderCoherent,
        Preset::AdderSqueezed,
        Preset::SubtractorFock,
        Preset::SubtractorCoherent,
        Preset::SubtractorSqueezed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::AdderFock => "adder_fock",
            Preset::AdderCoherent => "adder_coherent",
            Preset::AdderSqueezed => "adder_squeezed",
            Preset::SubtractorFock => "subtractor_fock",
            Preset::SubtractorCoherent => "subtractor_coherent",
            Preset::SubtractorSqueezed => "subtractor_squeezed",
        }
    }

    pub fn device(self) -> DeviceKind {
        match self {
            Preset::AdderFock | Preset::AdderCoherent | Preset::AdderSqueezed => DeviceKind::Adder,
            _ => DeviceKind::Subtractor,
        }
    }

    /// Scenario with the cutoffs used for the published figures. The squeezed
    /// cases keep 25 levels, which drops about 2e-4 of the norm, so their
    /// leakage tolerance is relaxed accordingly.
    pub fn scenario(self) -> Scenario {
        let (initial, cutoff, max_leakage) = match self {
            Preset::AdderFock | Preset::SubtractorFock => {
                (InitialStateSpec::fock_one_two(), 5, None)
            }
            Preset::AdderCoherent | Preset::SubtractorCoherent => {
                (InitialStateSpec::coherent(C64::new(1.0, 0.0)), 15, None)
            }
            Preset::AdderSqueezed | Preset::SubtractorSqueezed => {
                (InitialStateSpec::squeezed(1.0, 0.0), 25, Some(1e-3))
            }
        };
        let layout = SpaceLayout::new(cutoff).expect("preset cutoff is positive");
        let mut sc = Scenario::new(self.device(), initial, layout);
        if let Some(tol) = max_leakage {
            sc.max_leakage = tol;
        }
        sc
    }
}

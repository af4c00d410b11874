//! Rotating-frame master-equation dynamics of the adder and subtractor.
//!
//! Everything is in units `γ = 1`, `ħ = 1`. On resonance the free cavity and
//! atom terms drop out of the interaction-picture Hamiltonian, leaving the
//! Jaynes–Cummings coupling and the (time-independent) control drive.

mod oracle;
mod sectors;

pub use oracle::{closed_subspace_oracle, subspace_states, OracleSample};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, atomic_sigma, embed, AtomLevel, DensityMatrix, Operator, SpaceLayout, Subsystem,
    PSD_TOL,
};
use crate::states::{build_cavity_state_with_tolerance, joint_initial, InitialStateSpec};
use sectors::{BlockStepper, PairBlock, SectorModel};

pub const DEFAULT_G: f64 = 10.0;
pub const DEFAULT_DT: f64 = 2e-4;
pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_SAMPLE_EVERY: usize = 1000;
pub const DEFAULT_STEADY_TOL: f64 = 1e-7;

/// Upper bound on `dt · g · √(N_max + 1)`.
pub const MAX_RABI_PHASE_PER_STEP: f64 = 0.05;
/// Minimum number of steps inside a pulse.
pub const MIN_PULSE_STEPS: usize = 20;
/// Largest accumulated trace/Hermiticity correction tolerated along a run.
pub const MAX_CUMULATIVE_CORRECTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Adder,
    Subtractor,
}

impl DeviceKind {
    /// Atom level the device starts in.
    pub fn initial_level(self) -> AtomLevel {
        match self {
            DeviceKind::Adder => AtomLevel::E,
            DeviceKind::Subtractor => AtomLevel::S,
        }
    }

    /// The decaying level; also the upper level of the driven transition.
    pub fn decaying_level(self) -> AtomLevel {
        match self {
            DeviceKind::Adder => AtomLevel::S,
            DeviceKind::Subtractor => AtomLevel::E,
        }
    }

    /// Atom-only collapse operator `σ_gs` (adder) or `σ_ge` (subtractor).
    pub fn collapse(self) -> Operator {
        atomic_sigma(AtomLevel::G, self.decaying_level())
    }

    /// Atom-only drive `σ + σ†` on the decaying transition.
    pub fn control(self) -> Operator {
        let s = self.collapse();
        &s + &s.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Strength Ω in units of γ.
    pub omega: f64,
    /// Duration τ in units of 1/γ.
    pub tau: f64,
}

impl PulseParams {
    pub fn new(omega: f64, tau: f64) -> Result<Self> {
        if !(omega >= 0.0 && tau >= 0.0) || !omega.is_finite() || !tau.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "pulse needs omega >= 0 and tau >= 0, got omega = {omega}, tau = {tau}"
            )));
        }
        Ok(Self { omega, tau })
    }

    /// Rectangular envelope.
    pub fn strength_at(&self, t: f64) -> f64 {
        if t >= 0.0 && t <= self.tau {
            self.omega
        } else {
            0.0
        }
    }

    /// A zero-strength or zero-length pulse is no pulse.
    pub fn is_active(&self) -> bool {
        self.omega > 0.0 && self.tau > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub device: DeviceKind,
    pub initial: InitialStateSpec,
    pub layout: SpaceLayout,
    pub g: f64,
    pub gamma: f64,
    pub pulse: Option<PulseParams>,
    pub t_end: f64,
    /// Target step; shrunk so that a pulse ends on a step boundary.
    pub dt: f64,
    pub sample_every: usize,
    pub steady_tol: f64,
    /// Tail mass tolerated when truncating the initial cavity state.
    pub max_leakage: f64,
}

impl Scenario {
    pub fn new(device: DeviceKind, initial: InitialStateSpec, layout: SpaceLayout) -> Self {
        Self {
            device,
            initial,
            layout,
            g: DEFAULT_G,
            gamma: 1.0,
            pulse: None,
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            sample_every: DEFAULT_SAMPLE_EVERY,
            steady_tol: DEFAULT_STEADY_TOL,
            max_leakage: crate::states::DEFAULT_MAX_LEAKAGE,
        }
    }

    pub fn with_pulse(mut self, pulse: Option<PulseParams>) -> Self {
        self.pulse = pulse;
        self
    }

    pub fn active_pulse(&self) -> Option<PulseParams> {
        self.pulse.filter(PulseParams::is_active)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.g > 0.0) {
            return bad(format!("coupling g must be positive, got {}", self.g));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("decay rate must be positive, got {}", self.gamma));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return bad("dt and t_end must be positive".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol must be positive".into());
        }
        if let Some(p) = self.pulse {
            PulseParams::new(p.omega, p.tau)?;
        }
        let plan = self.plan();
        let phase = plan.dt * self.g * (self.layout.cavity_dim() as f64).sqrt();
        if phase > MAX_RABI_PHASE_PER_STEP {
            return bad(format!(
                "dt = {} under-resolves the Rabi frequency (dt·g·√(N+1) = {phase:.3} > {MAX_RABI_PHASE_PER_STEP})",
                plan.dt
            ));
        }
        if plan.pulse_steps > 0 && plan.pulse_steps < MIN_PULSE_STEPS {
            return bad(format!(
                "pulse resolved by only {} steps (need {MIN_PULSE_STEPS})",
                plan.pulse_steps
            ));
        }
        Ok(())
    }

    /// Actual step size and step counts.
    pub fn plan(&self) -> StepPlan {
        let ceil_steps = |span: f64, dt: f64| {
            let k = span / dt;
            let r = k.round();
            if (k - r).abs() < 1e-9 * r.max(1.0) {
                r as usize
            } else {
                k.ceil() as usize
            }
        };
        match self.active_pulse() {
            Some(p) => {
                let pulse_steps = ceil_steps(p.tau, self.dt).max(1);
                let dt = p.tau / pulse_steps as f64;
                let total = ceil_steps(self.t_end, dt).max(pulse_steps);
                StepPlan {
                    dt,
                    pulse_steps,
                    total_steps: total,
                }
            }
            None => StepPlan {
                dt: self.dt,
                pulse_steps: 0,
                total_steps: ceil_steps(self.t_end, self.dt).max(1),
            },
        }
    }

    pub fn initial_state(&self) -> Result<(DensityMatrix, f64)> {
        let cav = build_cavity_state_with_tolerance(&self.initial, &self.layout, self.max_leakage)?;
        let rho = joint_initial(&cav.state, self.device.initial_level(), &self.layout)?;
        Ok((rho, cav.renormalization))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    /// Steps taken with the drive on; the pulse ends exactly at `pulse_steps · dt`.
    pub pulse_steps: usize,
    pub total_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `‖dρ/dt‖_max` at each sample under the generator active right after it.
    pub residuals: Vec<f64>,
    /// Whether the drive is still on after each sample.
    pub pulse_active: Vec<bool>,
    pub converged_at: Option<f64>,
    /// Accumulated trace and Hermiticity corrections.
    pub cumulative_correction: f64,
    pub dt: f64,
    /// Squared-norm factor applied when truncating the initial cavity state.
    pub renormalization: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }
}

/// Interaction-picture Hamiltonian `g(a σ_se† + a† σ_se) + Ω(σ + σ†)`.
pub fn build_hamiltonian(
    device: DeviceKind,
    g: f64,
    omega_now: f64,
    layout: &SpaceLayout,
) -> Result<Operator> {
    if !(omega_now >= 0.0) {
        return Err(Error::InvalidScenario(format!(
            "pulse strength must be non-negative, got {omega_now}"
        )));
    }
    let a = embed(&annihilation(layout), Subsystem::Cavity, layout)?;
    let sigma_se = embed(
        &atomic_sigma(AtomLevel::S, AtomLevel::E),
        Subsystem::Atom,
        layout,
    )?;
    let jc = &(&a * &sigma_se.adjoint()) + &(&a.adjoint() * &sigma_se);
    let ctrl = embed(&device.control(), Subsystem::Atom, layout)?;
    Ok(&(g * &jc) + &(omega_now * &ctrl))
}

fn layout_for(dim: usize) -> Result<SpaceLayout> {
    if !dim.is_multiple_of(3) || dim < 6 {
        return Err(Error::dims(
            "joint space (multiple of 3)",
            3 * (dim / 3).max(2),
            dim,
        ));
    }
    SpaceLayout::new(dim / 3 - 1)
}

fn dissipator_into(out: &mut DMatrix<C64>, rho: &DMatrix<C64>, l: &DMatrix<C64>, gamma: f64) {
    let ldl = l.adjoint() * l;
    let half = C64::new(0.5 * gamma, 0.0);
    *out += (l * rho * l.adjoint()) * C64::new(gamma, 0.0) - (&ldl * rho + rho * &ldl) * half;
}

fn rhs_matrix(rho: &DMatrix<C64>, h: &DMatrix<C64>, l: &DMatrix<C64>, gamma: f64) -> DMatrix<C64> {
    let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
    dissipator_into(&mut out, rho, l, gamma);
    out
}

/// `−i[H, ρ] + (γ/2)(2LρL† − L†Lρ − ρL†L)` with the device's collapse operator.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &Operator,
    device: DeviceKind,
    gamma: f64,
) -> Result<Operator> {
    if rho.dim() != h.dim() {
        return Err(Error::dims("lindblad_rhs", h.dim(), rho.dim()));
    }
    let layout = layout_for(rho.dim())?;
    let l = embed(&device.collapse(), Subsystem::Atom, &layout)?;
    Operator::from_matrix(rhs_matrix(rho.matrix(), h.matrix(), l.matrix(), gamma))
}

/// Plain dense RK4 on the full joint matrix, one step at a time.
///
/// Slow (`O(dim³)` per stage); kept as an independent check on [`integrate`].
pub fn integrate_dense(scenario: &Scenario, n_steps: usize) -> Result<DensityMatrix> {
    scenario.validate()?;
    let plan = scenario.plan();
    let (rho0, _) = scenario.initial_state()?;
    let layout = &scenario.layout;
    let l = embed(&scenario.device.collapse(), Subsystem::Atom, layout)?;
    let omega = scenario.active_pulse().map_or(0.0, |p| p.omega);
    let h_on = build_hamiltonian(scenario.device, scenario.g, omega, layout)?;
    let h_off = build_hamiltonian(scenario.device, scenario.g, 0.0, layout)?;
    let dt = C64::new(plan.dt, 0.0);
    let mut rho = rho0.into_matrix();
    for step in 0..n_steps {
        let h = if step < plan.pulse_steps {
            &h_on
        } else {
            &h_off
        };
        let f = |r: &DMatrix<C64>| rhs_matrix(r, h.matrix(), l.matrix(), scenario.gamma);
        let k1 = f(&rho);
        let k2 = f(&(&rho + &k1 * (dt * 0.5)));
        let k3 = f(&(&rho + &k2 * (dt * 0.5)));
        let k4 = f(&(&rho + &k3 * dt));
        rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (dt / 6.0);
    }
    DensityMatrix::new(rho)
}

struct PairEvolution {
    block: PairBlock,
    on: Option<BlockStepper>,
    off: BlockStepper,
    gen_on: Option<DMatrix<C64>>,
    gen_off: DMatrix<C64>,
}

/// Fixed-step RK4 integration of the master equation.
///
/// Samples are taken every `sample_every` steps (and at the last step). At
/// each sample the state is re-Hermitized and trace-renormalized; the sum of
/// those corrections must stay below [`MAX_CUMULATIVE_CORRECTION`].
pub fn integrate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let plan = scenario.plan();
    let layout = &scenario.layout;
    let (rho0, renormalization) = scenario.initial_state()?;

    let h0 = build_hamiltonian(scenario.device, scenario.g, 0.0, layout)?;
    let ctrl = embed(&scenario.device.control(), Subsystem::Atom, layout)?;
    let l = embed(&scenario.device.collapse(), Subsystem::Atom, layout)?;
    let model = SectorModel::new(&h0, &ctrl, &l, scenario.gamma);
    let omega = scenario.active_pulse().map_or(0.0, |p| p.omega);
    let chunk = scenario.sample_every;

    let mut pairs: Vec<PairEvolution> = model
        .split(rho0.matrix())
        .into_iter()
        .map(|block| {
            let gen_off = model.generator(block.a, block.b, 0.0);
            let gen_on = (plan.pulse_steps > 0).then(|| model.generator(block.a, block.b, omega));
            PairEvolution {
                on: gen_on
                    .as_ref()
                    .map(|m| BlockStepper::new(m, plan.dt, chunk)),
                off: BlockStepper::new(&gen_off, plan.dt, chunk),
                gen_on,
                gen_off,
                block,
            }
        })
        .collect();

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        residuals: Vec::new(),
        pulse_active: Vec::new(),
        converged_at: None,
        cumulative_correction: 0.0,
        dt: plan.dt,
        renormalization,
    };

    let mut step = 0usize;
    loop {
        let t = step as f64 * plan.dt;
        traj.cumulative_correction += normalize_blocks(&model, &mut pairs, t)?;
        if traj.cumulative_correction > MAX_CUMULATIVE_CORRECTION {
            return Err(Error::InvariantViolation(format!(
                "cumulative trace/Hermiticity correction {:.3e} at t = {t}",
                traj.cumulative_correction
            )));
        }
        let driven = step < plan.pulse_steps;
        let residual = pairs
            .iter()
            .map(|p| {
                let gen = if driven {
                    p.gen_on.as_ref().unwrap_or(&p.gen_off)
                } else {
                    &p.gen_off
                };
                (gen * &p.block.x)
                    .iter()
                    .fold(0.0f64, |m, z| m.max(z.norm()))
            })
            .fold(0.0, f64::max);
        let blocks: Vec<PairBlock> = pairs.iter().map(|p| p.block.clone()).collect();
        let state = DensityMatrix::from_matrix_unchecked(model.assemble(&blocks))?;
        if traj.converged_at.is_none() && !driven && residual < scenario.steady_tol {
            traj.converged_at = Some(t);
        }
        traj.times.push(t);
        traj.states.push(state);
        traj.residuals.push(residual);
        traj.pulse_active.push(driven);

        if step >= plan.total_steps {
            break;
        }
        let next = (step + chunk).min(plan.total_steps);
        let on_steps = next.min(plan.pulse_steps).saturating_sub(step);
        let off_steps = next - step - on_steps;
        for p in &mut pairs {
            let mut x = p.block.x.clone();
            if on_steps > 0 {
                x = p.on.as_ref().expect("driven stepper").advance(&x, on_steps);
            }
            p.block.x = p.off.advance(&x, off_steps);
        }
        step = next;
    }
    traj.final_state().validate()?;
    Ok(traj)
}

/// Hermitizes diagonal blocks, rescales to unit trace and checks populations.
/// Returns the size of the correction applied.
fn normalize_blocks(model: &SectorModel, pairs: &mut [PairEvolution], t: f64) -> Result<f64> {
    let mut herm_dev = 0.0f64;
    let mut trace = C64::new(0.0, 0.0);
    for p in pairs.iter_mut().filter(|p| p.block.a == p.block.b) {
        let n = model.block_len(p.block.a);
        let x = &mut p.block.x;
        for i in 0..n {
            for j in i..n {
                let (u, v) = (x[i * n + j], x[j * n + i]);
                herm_dev = herm_dev.max((u - v.conj()).norm());
                let avg = 0.5 * (u + v.conj());
                x[i * n + j] = avg;
                x[j * n + i] = avg.conj();
            }
            let pop = x[i * n + i].re;
            if pop < -PSD_TOL {
                return Err(Error::InvariantViolation(format!(
                    "negative population {pop:.3e} at t = {t}"
                )));
            }
            trace += x[i * n + i];
        }
    }
    if !(trace.re > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "trace collapsed at t = {t}"
        )));
    }
    for p in pairs.iter_mut() {
        p.block.x.unscale_mut(trace.re);
    }
    Ok(herm_dev + (trace - 1.0).norm())
}

/// First sample with the drive off whose residual is below `tol`.
pub fn steady_state(traj: &Trajectory, tol: f64) -> Result<(DensityMatrix, f64)> {
    if traj.states.is_empty() {
        return Err(Error::InvalidScenario("empty trajectory".into()));
    }
    let hit = (0..traj.states.len()).find(|&i| !traj.pulse_active[i] && traj.residuals[i] < tol);
    match hit {
        Some(i) => {
            let rho = traj.states[i].clone();
            rho.validate()?;
            Ok((rho, traj.times[i]))
        }
        None => Err(Error::NotConverged {
            residual: *traj.residuals.last().unwrap(),
            t_end: *traj.times.last().unwrap(),
        }),
    }
}

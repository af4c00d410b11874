//! Initial cavity states on a truncated Fock space.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hilbert::{AtomLevel, DensityMatrix, PureState, SpaceLayout};

/// Largest tail mass above the cutoff accepted by default.
pub const DEFAULT_MAX_LEAKAGE: f64 = 1e-8;

const COEFF_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStateSpec {
    /// `Σ C_n |n⟩` from explicit `(n, C_n)` pairs.
    FockSuperposition {
        coefficients: Vec<(usize, C64)>,
    },
    Coherent {
        alpha: C64,
    },
    /// Squeeze factor `r ≥ 0` and squeeze angle `theta` in radians.
    SqueezedVacuum {
        r: f64,
        theta: f64,
    },
}

impl InitialStateSpec {
    pub fn fock(coefficients: Vec<(usize, C64)>) -> Self {
        Self::FockSuperposition { coefficients }
    }

    /// `(|1⟩ + |2⟩)/√2`
    pub fn fock_one_two() -> Self {
        let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::fock(vec![(1, c), (2, c)])
    }

    pub fn coherent(alpha: C64) -> Self {
        Self::Coherent { alpha }
    }

    pub fn squeezed(r: f64, theta: f64) -> Self {
        Self::SqueezedVacuum { r, theta }
    }
}

/// A built cavity state plus what truncation did to it.
#[derive(Debug, Clone)]
pub struct CavityState {
    pub state: PureState,
    /// Probability mass of the exact state above the cutoff.
    pub leakage: f64,
    /// `1 / (retained mass)`, the factor applied to the squared norm.
    pub renormalization: f64,
}

/// `⟨n|α⟩` for `n < len`, exact (not renormalized).
pub fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Exact squeezed-vacuum amplitude on `|2m⟩`.
fn squeezed_amplitude(r: f64, theta: f64, m: usize) -> C64 {
    if m == 0 {
        return C64::new((1.0 / r.cosh()).sqrt(), 0.0);
    }
    let t = r.tanh();
    if t == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let mf = m as f64;
    let log_mag = 0.5 * (1.0 / r.cosh()).ln() + 0.5 * ln_gamma(2.0 * mf + 1.0) - ln_gamma(mf + 1.0)
        + mf * (0.5 * t).ln();
    // (−e^{iθ})^m
    let phase = mf * (std::f64::consts::PI + theta);
    C64::from_polar(log_mag.exp(), phase)
}

pub fn squeezed_amplitudes(r: f64, theta: f64, len: usize) -> Vec<C64> {
    (0..len)
        .map(|n| {
            if n % 2 == 0 {
                squeezed_amplitude(r, theta, n / 2)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Smallest cutoff whose coherent-state tail mass is within `tol`.
pub fn coherent_cutoff(alpha: C64, tol: f64) -> usize {
    let mut kept = 0.0;
    let mut c = (-0.5 * alpha.norm_sqr()).exp();
    let a = alpha.norm();
    for n in 0.. {
        if n > 0 {
            c *= a / (n as f64).sqrt();
        }
        kept += c * c;
        if n >= 1 && 1.0 - kept <= tol {
            return n;
        }
    }
    unreachable!()
}

pub fn build_cavity_state(spec: &InitialStateSpec, layout: &SpaceLayout) -> Result<CavityState> {
    build_cavity_state_with_tolerance(spec, layout, DEFAULT_MAX_LEAKAGE)
}

/// Builds the truncated, renormalized cavity state; errors if the exact
/// state's mass above the cutoff exceeds `max_leakage`.
pub fn build_cavity_state_with_tolerance(
    spec: &InitialStateSpec,
    layout: &SpaceLayout,
    max_leakage: f64,
) -> Result<CavityState> {
    let d = layout.cavity_dim();
    let amps: Vec<C64> = match spec {
        InitialStateSpec::FockSuperposition { coefficients } => {
            if coefficients.is_empty() {
                return Err(Error::InvalidState("empty Fock superposition".into()));
            }
            let mut v = vec![C64::new(0.0, 0.0); d];
            let mut norm = 0.0;
            for &(n, c) in coefficients {
                if n >= d {
                    return Err(Error::InvalidState(format!(
                        "Fock level {n} above cutoff {}",
                        layout.cavity_cutoff()
                    )));
                }
                v[n] += c;
                norm += c.norm_sqr();
            }
            if (norm - 1.0).abs() > COEFF_NORM_TOL {
                return Err(Error::InvalidState(format!(
                    "Fock coefficients have squared norm {norm}, expected 1"
                )));
            }
            v
        }
        InitialStateSpec::Coherent { alpha } => coherent_amplitudes(*alpha, d),
        InitialStateSpec::SqueezedVacuum { r, theta } => {
            if !(*r >= 0.0) || !r.is_finite() || !theta.is_finite() {
                return Err(Error::InvalidState(format!("invalid squeeze factor {r}")));
            }
            squeezed_amplitudes(*r, *theta, d)
        }
    };

    let kept: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    // both closed forms have total mass exactly 1
    let leakage = (1.0 - kept).max(0.0);
    if leakage > max_leakage {
        return Err(Error::Leakage {
            mass: leakage,
            tolerance: max_leakage,
        });
    }
    let state = PureState::normalized(DVector::from_vec(amps))?;
    Ok(CavityState {
        state,
        leakage,
        renormalization: 1.0 / kept,
    })
}

/// `|ψ_c⟩⟨ψ_c| ⊗ |k⟩⟨k|` in the cavity-major joint basis.
pub fn joint_initial(
    cavity: &PureState,
    atom_level: AtomLevel,
    layout: &SpaceLayout,
) -> Result<DensityMatrix> {
    if cavity.dim() != layout.cavity_dim() {
        return Err(Error::dims(
            "joint_initial cavity state",
            layout.cavity_dim(),
            cavity.dim(),
        ));
    }
    let atom = PureState::basis(layout.atom_dim(), atom_level.index())?;
    let rho = cavity.kron(&atom).projector();
    rho.validate()?;
    Ok(rho)
}

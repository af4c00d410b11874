//! Three-state closed-subspace equations for a Fock-state input without drive.
//!
//! Adder: `|n,e⟩ ↔ |n+1,s⟩ → |n+1,g⟩` with coupling `√(n+1)·g`.
//! Subtractor: `|n,s⟩ ↔ |n−1,e⟩ → |n−1,g⟩` with coupling `√n·g`.
//! The state is three real populations and the complex coherence between the
//! two coupled levels, stepped with the same classical RK4 scheme.

use num_complex::Complex64 as C64;

use super::DeviceKind;
use crate::error::{Error, Result};
use crate::hilbert::AtomLevel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub t: f64,
    /// Populations in the order returned by [`subspace_states`].
    pub populations: [f64; 3],
}

/// `(Fock index, atom level)` of the initial, partner and final states.
pub fn subspace_states(device: DeviceKind, n: usize) -> Result<[(usize, AtomLevel); 3]> {
    match device {
        DeviceKind::Adder => Ok([
            (n, AtomLevel::E),
            (n + 1, AtomLevel::S),
            (n + 1, AtomLevel::G),
        ]),
        DeviceKind::Subtractor => {
            if n == 0 {
                return Err(Error::InvalidState(
                    "subtractor subspace needs n >= 1".into(),
                ));
            }
            Ok([
                (n, AtomLevel::S),
                (n - 1, AtomLevel::E),
                (n - 1, AtomLevel::G),
            ])
        }
    }
}

#[derive(Clone, Copy)]
struct Vars {
    p_init: f64,
    p_mid: f64,
    p_final: f64,
    /// ρ_{mid; init}
    coh: C64,
}

impl Vars {
    fn axpy(self, h: f64, d: Vars) -> Vars {
        Vars {
            p_init: self.p_init + h * d.p_init,
            p_mid: self.p_mid + h * d.p_mid,
            p_final: self.p_final + h * d.p_final,
            coh: self.coh + d.coh * h,
        }
    }
}

fn derivative(v: Vars, coupling: f64, gamma: f64) -> Vars {
    let i = C64::new(0.0, 1.0);
    let flow = -i * coupling * (v.coh - v.coh.conj());
    Vars {
        p_init: flow.re,
        p_mid: -flow.re - gamma * v.p_mid,
        p_final: gamma * v.p_mid,
        coh: -i * coupling * (v.p_init - v.p_mid) - 0.5 * gamma * v.coh,
    }
}

pub fn closed_subspace_oracle(
    device: DeviceKind,
    n: usize,
    g: f64,
    gamma: f64,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<OracleSample>> {
    subspace_states(device, n)?;
    if !(dt > 0.0) || !(t_end >= 0.0) || sample_every == 0 {
        return Err(Error::InvalidScenario(
            "oracle needs dt > 0 and sample_every >= 1".into(),
        ));
    }
    let coupling = match device {
        DeviceKind::Adder => ((n + 1) as f64).sqrt() * g,
        DeviceKind::Subtractor => (n as f64).sqrt() * g,
    };
    let total = (t_end / dt).round() as usize;
    let mut v = Vars {
        p_init: 1.0,
        p_mid: 0.0,
        p_final: 0.0,
        coh: C64::new(0.0, 0.0),
    };
    let sample = |step: usize, v: &Vars| OracleSample {
        t: step as f64 * dt,
        populations: [v.p_init, v.p_mid, v.p_final],
    };
    let mut out = vec![sample(0, &v)];
    for step in 1..=total {
        let k1 = derivative(v, coupling, gamma);
        let k2 = derivative(v.axpy(0.5 * dt, k1), coupling, gamma);
        let k3 = derivative(v.axpy(0.5 * dt, k2), coupling, gamma);
        let k4 = derivative(v.axpy(dt, k3), coupling, gamma);
        v = v
            .axpy(dt / 6.0, k1)
            .axpy(dt / 3.0, k2)
            .axpy(dt / 3.0, k3)
            .axpy(dt / 6.0, k4);
        if step % sample_every == 0 || step == total {
            out.push(sample(step, &v));
        }
    }
    Ok(out)
}

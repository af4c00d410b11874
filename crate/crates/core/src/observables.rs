//! Reduced cavity state, photon-number and quadrature statistics, Husimi Q
//! function and Uhlmann fidelity.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, expectation, number, DensityMatrix, Operator, SpaceLayout, ATOM_DIM, PSD_TOL,
};
use crate::states::coherent_amplitudes;

/// `(ρ_c)_{mn} = Σ_k ρ_{(m,k),(n,k)}`
pub fn trace_out_atom(rho: &DensityMatrix, layout: &SpaceLayout) -> Result<DensityMatrix> {
    if rho.dim() != layout.joint_dim() {
        return Err(Error::dims("trace_out_atom", layout.joint_dim(), rho.dim()));
    }
    let d = layout.cavity_dim();
    let m = rho.matrix();
    let rc = DMatrix::from_fn(d, d, |i, j| {
        (0..ATOM_DIM)
            .map(|k| m[(i * ATOM_DIM + k, j * ATOM_DIM + k)])
            .sum()
    });
    DensityMatrix::new(rc)
}

/// Atom populations `(p_g, p_s, p_e)` of a joint state.
pub fn atom_populations(rho: &DensityMatrix, layout: &SpaceLayout) -> Result<[f64; 3]> {
    if rho.dim() != layout.joint_dim() {
        return Err(Error::dims(
            "atom_populations",
            layout.joint_dim(),
            rho.dim(),
        ));
    }
    let mut p = [0.0; 3];
    for n in 0..layout.cavity_dim() {
        for (k, slot) in p.iter_mut().enumerate() {
            let i = n * ATOM_DIM + k;
            *slot += rho.get(i, i).re;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub mean_n: f64,
    pub std_n: f64,
    pub std_x1: f64,
    pub std_x2: f64,
}

fn std_dev(rho: &DensityMatrix, op: &Operator) -> Result<f64> {
    let mean = expectation(rho, op)?.re;
    let second = expectation(rho, &(op * op))?.re;
    Ok((second - mean * mean).max(0.0).sqrt())
}

/// Photon number and `X₁ = (a† + a)/2`, `X₂ = (a† − a)/(2i)` fluctuations,
/// with squares taken on the truncated space.
pub fn quadrature_stats(rho_c: &DensityMatrix) -> Result<QuadratureStats> {
    if rho_c.dim() < 2 {
        return Err(Error::dims(
            "quadrature_stats cavity dimension",
            2,
            rho_c.dim(),
        ));
    }
    let layout = SpaceLayout::new(rho_c.dim() - 1)?;
    let a = annihilation(&layout);
    let ad = a.adjoint();
    let x1 = 0.5 * &(&ad + &a);
    let x2 = C64::new(0.0, -0.5) * &(&ad - &a);
    let n = number(&layout);
    Ok(QuadratureStats {
        mean_n: expectation(rho_c, &n)?.re,
        std_n: std_dev(rho_c, &n)?,
        std_x1: std_dev(rho_c, &x1)?,
        std_x2: std_dev(rho_c, &x2)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Points per axis.
    pub resolution: usize,
}

impl Default for QGridSpec {
    fn default() -> Self {
        Self {
            re_min: -3.0,
            re_max: 3.0,
            im_min: -3.0,
            im_max: 3.0,
            resolution: 121,
        }
    }
}

impl QGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidGrid(
                "Q grid needs at least 2 points per axis".into(),
            ));
        }
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(Error::InvalidGrid(
                "Q grid ranges must be finite and increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn re(&self, i: usize) -> f64 {
        self.re_min + (self.re_max - self.re_min) * i as f64 / (self.resolution - 1) as f64
    }

    pub fn im(&self, j: usize) -> f64 {
        self.im_min + (self.im_max - self.im_min) * j as f64 / (self.resolution - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        let r = (self.resolution - 1) as f64;
        (self.re_max - self.re_min) / r * (self.im_max - self.im_min) / r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QGrid {
    pub spec: QGridSpec,
    /// Row-major with the imaginary axis outer: `values[j * res + i]` is at
    /// `re(i) + i·im(j)`.
    pub values: Vec<f64>,
}

impl QGrid {
    pub fn at(&self, i_re: usize, j_im: usize) -> f64 {
        self.values[j_im * self.spec.resolution + i_re]
    }

    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    /// Grid indices and value of the maximum (first on ties).
    pub fn argmax(&self) -> (usize, usize, f64) {
        let res = self.spec.resolution;
        let (k, v) =
            self.values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| {
                    if v > bv {
                        (k, v)
                    } else {
                        (bk, bv)
                    }
                });
        (k % res, k / res, v)
    }
}

/// `Q(α) = ⟨α|ρ_c|α⟩ / π` on a rectangular grid.
///
/// Coherent-state overlaps use the exact `⟨n|α⟩` on the retained levels, so
/// no truncation error enters as long as `ρ_c` itself lives below the cutoff.
pub fn husimi_q(rho_c: &DensityMatrix, spec: &QGridSpec) -> Result<QGrid> {
    spec.validate()?;
    let d = rho_c.dim();
    let m = rho_c.matrix();
    let res = spec.resolution;
    let values: Vec<f64> = (0..res * res)
        .into_par_iter()
        .map(|k| {
            let alpha = C64::new(spec.re(k % res), spec.im(k / res));
            let c = coherent_amplitudes(alpha, d);
            let mut acc = C64::new(0.0, 0.0);
            for (i, ci) in c.iter().enumerate() {
                let mut row = C64::new(0.0, 0.0);
                for (j, cj) in c.iter().enumerate() {
                    row += m[(i, j)] * cj;
                }
                acc += ci.conj() * row;
            }
            (acc.re / std::f64::consts::PI).max(0.0)
        })
        .collect();
    Ok(QGrid {
        spec: *spec,
        values,
    })
}

const EIG_FLUSH: f64 = 1e-14;

fn psd_sqrt(m: &DMatrix<C64>, check: bool) -> Result<DMatrix<C64>> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut vals = eig.eigenvalues.clone();
    // round-off eigenvalues would otherwise leak in at the √ε level
    let floor = EIG_FLUSH * vals.amax().max(1.0);
    for v in vals.iter_mut() {
        if check && *v < -PSD_TOL {
            return Err(Error::InvariantViolation(format!(
                "fidelity input has negative eigenvalue {v:.3e}"
            )));
        }
        *v = if *v < floor { 0.0 } else { v.sqrt() };
    }
    let vecs = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * vals[j]);
    Ok(scaled * vecs.adjoint())
}

/// `F = Tr √(√ρ σ √ρ)` (not squared).
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::dims("uhlmann_fidelity", rho.dim(), sigma.dim()));
    }
    // Tr √(√ρ σ √ρ) is the trace norm of √ρ √σ
    let sr = psd_sqrt(rho.matrix(), true)?;
    let ss = psd_sqrt(sigma.matrix(), true)?;
    let f: f64 = (sr * ss).singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply_channel, build_kraus, KrausKind};
    use crate::hilbert::{AtomLevel, PureState};
    use crate::states::{
        build_cavity_state, build_cavity_state_with_tolerance, joint_initial, InitialStateSpec,
    };
    use nalgebra::DVector;

    fn diag(d: usize, entries: &[(usize, f64)]) -> DensityMatrix {
        let mut m = DMatrix::zeros(d, d);
        for &(n, p) in entries {
            m[(n, n)] = C64::new(p, 0.0);
        }
        DensityMatrix::new(m).unwrap()
    }

    fn pure(v: &[f64]) -> PureState {
        PureState::normalized(DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::new(x, 0.0)),
        ))
        .unwrap()
    }

    #[test]
    fn partial_trace_examples() {
        let layout = SpaceLayout::new(3).unwrap();
        let psi = pure(&[0.0, 1.0, 1.0, 0.0]);
        let rho = joint_initial(&psi, AtomLevel::E, &layout).unwrap();
        assert!(
            trace_out_atom(&rho, &layout)
                .unwrap()
                .max_abs_diff(&psi.projector())
                < 1e-15
        );

        let mut m = DMatrix::zeros(12, 12);
        m[(layout.index(1, AtomLevel::E), layout.index(1, AtomLevel::E))] = C64::new(0.5, 0.0);
        m[(layout.index(2, AtomLevel::G), layout.index(2, AtomLevel::G))] = C64::new(0.5, 0.0);
        let rc = trace_out_atom(&DensityMatrix::new(m).unwrap(), &layout).unwrap();
        assert!(rc.max_abs_diff(&diag(4, &[(1, 0.5), (2, 0.5)])) < 1e-15);

        // (|1,e⟩ + |2,s⟩)/√2
        let mut v = DVector::zeros(12);
        v[layout.index(1, AtomLevel::E)] = C64::new(1.0, 0.0);
        v[layout.index(2, AtomLevel::S)] = C64::new(1.0, 0.0);
        let rho = PureState::normalized(v).unwrap().projector();
        let rc = trace_out_atom(&rho, &layout).unwrap();
        assert!(rc.max_abs_diff(&diag(4, &[(1, 0.5), (2, 0.5)])) < 1e-15);

        assert!(trace_out_atom(&rc, &layout).is_err());
    }

    #[test]
    fn quadratures_of_incoherent_adder_output() {
        let s = quadrature_stats(&diag(6, &[(2, 0.5), (3, 0.5)])).unwrap();
        assert!((s.mean_n - 2.5).abs() < 1e-14);
        assert!((s.std_n - 0.5).abs() < 1e-14);
        // ⟨X²⟩ = (2n+1)/4 averaged = 1.5
        assert!((s.std_x1 - 1.5f64.sqrt()).abs() < 1e-14);
        assert!((s.std_x2 - 1.5f64.sqrt()).abs() < 1e-14);
        assert!((s.std_x1 - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn quadratures_of_pure_superposition() {
        let s = quadrature_stats(&pure(&[0.0, 0.0, 1.0, 1.0, 0.0]).projector()).unwrap();
        assert!((s.std_x1 - 0.75f64.sqrt()).abs() < 1e-14);
        assert!((s.std_x1 - 0.866).abs() < 1e-3);
    }

    #[test]
    fn quadratures_of_coherent_state() {
        let layout = SpaceLayout::new(15).unwrap();
        let rho = build_cavity_state(&InitialStateSpec::coherent(C64::new(1.0, 0.0)), &layout)
            .unwrap()
            .state
            .projector();
        let s = quadrature_stats(&rho).unwrap();
        assert!((s.std_n - 1.0).abs() < 1e-6);
        assert!((s.std_x1 - 0.5).abs() < 1e-6);
        assert!((s.std_x2 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn quadratures_of_squeezed_vacuum() {
        let spec = InitialStateSpec::squeezed(1.0, 0.0);
        // at the reported cutoff the truncation artifacts show up
        let layout = SpaceLayout::new(25).unwrap();
        let rho = build_cavity_state_with_tolerance(&spec, &layout, 1e-3)
            .unwrap()
            .state
            .projector();
        let s = quadrature_stats(&rho).unwrap();
        assert!((s.std_n - 2.536).abs() < 1e-3);
        assert!((s.std_x1 - 0.186).abs() < 1e-3);
        assert!((s.std_x2 - 1.357).abs() < 1e-3);

        let layout = SpaceLayout::new(60).unwrap();
        let rho = build_cavity_state(&spec, &layout)
            .unwrap()
            .state
            .projector();
        let s = quadrature_stats(&rho).unwrap();
        assert!((s.std_x1 - (-1f64).exp() / 2.0).abs() < 1e-3);
        assert!((s.std_x2 - 1f64.exp() / 2.0).abs() < 1e-3);
        // √2 sinh r cosh r
        assert!((s.std_n - 2f64.sqrt() * 1f64.sinh() * 1f64.cosh()).abs() < 1e-4);
    }

    #[test]
    fn coherent_adder_target_quadratures() {
        let layout = SpaceLayout::new(15).unwrap();
        let rho = build_cavity_state(&InitialStateSpec::coherent(C64::new(1.0, 0.0)), &layout)
            .unwrap()
            .state
            .projector();
        let out = apply_channel(&build_kraus(KrausKind::SpaCoherent, &layout), &rho).unwrap();
        let s = quadrature_stats(&out.state).unwrap();
        assert!((s.std_x1 - 0.614).abs() < 2e-3);
        assert!((s.std_x2 - 0.710).abs() < 2e-3);
    }

    #[test]
    fn vacuum_q_function() {
        let spec = QGridSpec {
            resolution: 61,
            ..QGridSpec::default()
        };
        let q = husimi_q(&diag(6, &[(0, 1.0)]), &spec).unwrap();
        let (i0, j0) = (30, 30);
        assert!((q.at(i0, j0) - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        for j in 0..61 {
            for i in 0..61 {
                let r2 = spec.re(i).powi(2) + spec.im(j).powi(2);
                assert!((q.at(i, j) - (-r2).exp() / std::f64::consts::PI).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn coherent_q_function_peaks_at_alpha() {
        let layout = SpaceLayout::new(15).unwrap();
        let rho = build_cavity_state(&InitialStateSpec::coherent(C64::new(1.0, 0.0)), &layout)
            .unwrap()
            .state
            .projector();
        let spec = QGridSpec::default();
        let q = husimi_q(&rho, &spec).unwrap();
        let (i, j, _) = q.argmax();
        assert!((spec.re(i) - 1.0).abs() < 1e-9 && spec.im(j).abs() < 1e-9);
    }

    #[test]
    fn diagonal_mixture_q_is_rotationally_symmetric() {
        let rho = diag(6, &[(2, 0.5), (3, 0.5)]);
        // sample a ring directly
        let spec = QGridSpec::default();
        let _ = spec;
        let mut vals = Vec::new();
        for k in 0..24 {
            let phi = k as f64 * std::f64::consts::TAU / 24.0;
            let s = QGridSpec {
                re_min: 1.7 * phi.cos(),
                re_max: 1.7 * phi.cos() + 1.0,
                im_min: 1.7 * phi.sin(),
                im_max: 1.7 * phi.sin() + 1.0,
                resolution: 2,
            };
            vals.push(husimi_q(&rho, &s).unwrap().at(0, 0));
        }
        let (lo, hi) = vals
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi - lo <= 1e-10);
    }

    #[test]
    fn q_grid_rejects_bad_spec() {
        let rho = diag(3, &[(0, 1.0)]);
        let spec = QGridSpec {
            resolution: 1,
            ..QGridSpec::default()
        };
        assert!(husimi_q(&rho, &spec).is_err());
        let spec = QGridSpec {
            re_min: 1.0,
            re_max: 0.0,
            ..QGridSpec::default()
        };
        assert!(husimi_q(&rho, &spec).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let a = diag(4, &[(0, 1.0)]);
        let b = diag(4, &[(1, 1.0)]);
        assert!(uhlmann_fidelity(&a, &b).unwrap().abs() < 1e-12);
        assert!((uhlmann_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        let mixed = diag(5, &[(2, 0.5), (3, 0.5)]);
        let target = pure(&[0.0, 0.0, 1.0, 1.0, 0.0]).projector();
        let f = uhlmann_fidelity(&mixed, &target).unwrap();
        assert!((f - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((uhlmann_fidelity(&target, &mixed).unwrap() - f).abs() < 1e-9);
        assert!(uhlmann_fidelity(&a, &mixed).is_err());
    }
}

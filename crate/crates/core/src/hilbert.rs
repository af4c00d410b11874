//! Dense operator algebra on the truncated cavity ⊗ three-level-atom space.
//!
//! The joint basis is cavity-major: `|n, k⟩` sits at index `3n + k` with the
//! atom ordered `g = 0, s = 1, e = 2`. Operators are plain dense matrices; the
//! largest joint space used anywhere is 78-dimensional.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ATOM_DIM: usize = 3;

/// Tolerances for [`DensityMatrix`] validation.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomLevel {
    G = 0,
    S = 1,
    E = 2,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::G, AtomLevel::S, AtomLevel::E];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AtomLevel::G => "g",
            AtomLevel::S => "s",
            AtomLevel::E => "e",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// joint index = n * 3 + atom index
    CavityMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceLayout {
    cavity_cutoff: usize,
}

impl SpaceLayout {
    pub fn new(cavity_cutoff: usize) -> Result<Self> {
        if cavity_cutoff < 1 {
            return Err(Error::InvalidLayout(
                "cavity cutoff must be at least 1".into(),
            ));
        }
        Ok(Self { cavity_cutoff })
    }

    /// Highest retained Fock index.
    pub fn cavity_cutoff(&self) -> usize {
        self.cavity_cutoff
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_cutoff + 1
    }

    pub fn atom_dim(&self) -> usize {
        ATOM_DIM
    }

    pub fn joint_dim(&self) -> usize {
        ATOM_DIM * self.cavity_dim()
    }

    pub fn ordering(&self) -> Ordering {
        Ordering::CavityMajor
    }

    pub fn index(&self, n: usize, level: AtomLevel) -> usize {
        n * ATOM_DIM + level.index()
    }

    /// Inverse of [`SpaceLayout::index`].
    pub fn split(&self, joint: usize) -> (usize, AtomLevel) {
        (joint / ATOM_DIM, AtomLevel::ALL[joint % ATOM_DIM])
    }
}

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims("operator must be square", m.nrows(), m.ncols()));
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        max_abs_diff(&self.0, &self.0.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&rhs.0 * C64::new(self, 0.0))
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&rhs.0 * self)
    }
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(DVector<C64>);

impl PureState {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "amplitudes have squared norm {norm_sqr}, expected 1"
            )));
        }
        Ok(Self(amplitudes))
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self(amplitudes.unscale(norm)))
    }

    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::dims("basis index", dim, n));
        }
        let mut v = DVector::zeros(dim);
        v[n] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        PureState(self.0.kronecker(&other.0))
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    /// Validates every density-matrix invariant.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Checks only squareness; callers are responsible for the physics.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims(
                "density matrix must be square",
                m.nrows(),
                m.ncols(),
            ));
        }
        Ok(Self(m))
    }

    pub fn validate(&self) -> Result<()> {
        let herm = max_abs_diff(&self.0, &self.0.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = self.0.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -PSD_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix has negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn as_operator(&self) -> Operator {
        Operator(self.0.clone())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.as_operator().hermitian_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kronecker(&other.0))
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Cavity annihilation operator on `N_max + 1` levels: `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(layout: &SpaceLayout) -> Operator {
    let d = layout.cavity_dim();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator(m)
}

pub fn creation(layout: &SpaceLayout) -> Operator {
    annihilation(layout).adjoint()
}

/// `a†a`, built directly from integers.
pub fn number(layout: &SpaceLayout) -> Operator {
    let d = layout.cavity_dim();
    Operator(DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| {
        C64::new(n as f64, 0.0)
    })))
}

/// `|i⟩⟨j|` on the atom.
pub fn atomic_sigma(i: AtomLevel, j: AtomLevel) -> Operator {
    let mut m = DMatrix::zeros(ATOM_DIM, ATOM_DIM);
    m[(i.index(), j.index())] = C64::new(1.0, 0.0);
    Operator(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Cavity,
    Atom,
}

/// Lifts a single-subsystem operator to the joint space.
pub fn embed(op: &Operator, which: Subsystem, layout: &SpaceLayout) -> Result<Operator> {
    match which {
        Subsystem::Cavity => {
            if op.dim() != layout.cavity_dim() {
                return Err(Error::dims(
                    "embed cavity operator",
                    layout.cavity_dim(),
                    op.dim(),
                ));
            }
            Ok(op.kron(&Operator::identity(ATOM_DIM)))
        }
        Subsystem::Atom => {
            if op.dim() != ATOM_DIM {
                return Err(Error::dims("embed atom operator", ATOM_DIM, op.dim()));
            }
            Ok(Operator::identity(layout.cavity_dim()).kron(op))
        }
    }
}

/// `Tr(ρ · op)`
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::dims("expectation", rho.dim(), op.dim()));
    }
    // Tr(AB) = Σ_ij A_ij B_ji without forming the product
    let (a, b) = (&rho.0, &op.0);
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn annihilation_single_entry_for_cutoff_one() {
        let a = annihilation(&SpaceLayout::new(1).unwrap());
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get(0, 1), c(1.0));
        assert_eq!(a.get(0, 0), c(0.0));
        assert_eq!(a.get(1, 0), c(0.0));
        assert_eq!(a.get(1, 1), c(0.0));
    }

    #[test]
    fn annihilation_lowers_fock_two() {
        let layout = SpaceLayout::new(3).unwrap();
        let v = PureState::basis(4, 2).unwrap();
        let out = annihilation(&layout).apply(v.amplitudes());
        for (n, z) in out.iter().enumerate() {
            let expect = if n == 1 { 2f64.sqrt() } else { 0.0 };
            assert!((z - c(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn number_operator_diagonal_matches_product() {
        let layout = SpaceLayout::new(7).unwrap();
        let a = annihilation(&layout);
        let n = &a.adjoint() * &a;
        for k in 0..8 {
            assert!((n.get(k, k) - c(k as f64)).norm() < 1e-14);
            assert_eq!(number(&layout).get(k, k), c(k as f64));
        }
        assert!((&n - &number(&layout)).max_abs() < 1e-14);
    }

    #[test]
    fn truncated_commutator() {
        let layout = SpaceLayout::new(6).unwrap();
        let a = annihilation(&layout);
        let comm = a.commutator(&a.adjoint());
        for i in 0..7 {
            for j in 0..7 {
                let expect = match (i, j) {
                    (6, 6) => -6.0,
                    _ if i == j => 1.0,
                    _ => 0.0,
                };
                assert!(
                    (comm.get(i, j) - c(expect)).norm() < 1e-14,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn sigma_algebra() {
        use AtomLevel::*;
        let se = atomic_sigma(S, E);
        assert_eq!(se.get(1, 2), c(1.0));
        assert_eq!(se.max_abs(), 1.0);
        assert_eq!(se.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(
            &atomic_sigma(G, S) * &atomic_sigma(S, G),
            atomic_sigma(G, G)
        );
        assert_eq!(atomic_sigma(G, S).adjoint(), atomic_sigma(S, G));
    }

    #[test]
    fn embed_identity_and_products() {
        let layout = SpaceLayout::new(3).unwrap();
        let id = embed(&Operator::identity(4), Subsystem::Cavity, &layout).unwrap();
        assert_eq!(id, Operator::identity(12));

        let a = annihilation(&layout);
        let se = atomic_sigma(AtomLevel::S, AtomLevel::E);
        let lhs = &embed(&a, Subsystem::Cavity, &layout).unwrap()
            * &embed(&se, Subsystem::Atom, &layout).unwrap();
        assert!((&lhs - &a.kron(&se)).max_abs() < 1e-15);
    }

    #[test]
    fn embedded_coupling_entries_match_subspace_rates() {
        // ⟨n,s| a† σ_se |n−1,e⟩ = √n
        let layout = SpaceLayout::new(5).unwrap();
        let g = 10.0;
        let coupling = g * &(&embed(&creation(&layout), Subsystem::Cavity, &layout).unwrap()
            * &embed(
                &atomic_sigma(AtomLevel::S, AtomLevel::E),
                Subsystem::Atom,
                &layout,
            )
            .unwrap());
        for n in 1..=5 {
            let z = coupling.get(
                layout.index(n, AtomLevel::S),
                layout.index(n - 1, AtomLevel::E),
            );
            assert!((z.re - g * (n as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let layout = SpaceLayout::new(3).unwrap();
        assert!(embed(&Operator::identity(3), Subsystem::Cavity, &layout).is_err());
        assert!(embed(&Operator::identity(4), Subsystem::Atom, &layout).is_err());
    }

    #[test]
    fn expectation_examples() {
        let layout = SpaceLayout::new(4).unwrap();
        let n = number(&layout);
        let vac = PureState::basis(5, 0).unwrap().projector();
        assert_eq!(expectation(&vac, &n).unwrap(), c(0.0));

        let mut m = DMatrix::zeros(5, 5);
        m[(1, 1)] = c(0.5);
        m[(2, 2)] = c(0.5);
        let rho = DensityMatrix::new(m).unwrap();
        assert!((expectation(&rho, &n).unwrap() - c(1.5)).norm() < 1e-15);
        assert!(expectation(&rho, &Operator::identity(3)).is_err());
    }

    #[test]
    fn density_matrix_rejects_bad_input() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(Error::InvariantViolation(_))
        ));

        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5);
        assert!(DensityMatrix::new(m).is_err());

        let mut m = DMatrix::identity(2, 2) * c(0.5);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn layout_invariants() {
        assert!(SpaceLayout::new(0).is_err());
        let layout = SpaceLayout::new(25).unwrap();
        assert_eq!(layout.joint_dim(), 78);
        assert_eq!(layout.index(2, AtomLevel::E), 8);
        assert_eq!(layout.split(8), (2, AtomLevel::E));
    }
}

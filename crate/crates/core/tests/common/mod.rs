#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use spasim::hilbert::{DensityMatrix, Operator};

/// Random normalized vector supported on levels `0..support` of a `dim`-level space.
pub fn random_pure<R: Rng>(rng: &mut R, dim: usize, support: usize) -> DVector<C64> {
    let mut v = DVector::from_fn(dim, |i, _| {
        if i < support {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let n = v.norm();
    v.unscale_mut(n);
    v
}

/// Mixture of up to three random pure states on `0..support`.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, support: usize) -> DensityMatrix {
    let k = rng.gen_range(1..=3);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut m = DMatrix::zeros(dim, dim);
    for w in weights {
        let v = random_pure(rng, dim, support);
        m += &v * v.adjoint() * C64::new(w / total, 0.0);
    }
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(m).expect("random mixture is a valid state")
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(random_hermitian(rng, dim));
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(0.0, eig.eigenvalues[i]).exp()
        } else {
            C64::new(0.0, 0.0)
        }
    });
    v * phases * v.adjoint()
}

pub fn conjugate(u: &DMatrix<C64>, rho: &DensityMatrix) -> DensityMatrix {
    let m = u * rho.matrix() * u.adjoint();
    DensityMatrix::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

pub fn op(m: DMatrix<C64>) -> Operator {
    Operator::from_matrix(m).unwrap()
}

pub fn mean_n(rho: &DensityMatrix) -> f64 {
    (0..rho.dim()).map(|n| n as f64 * rho.get(n, n).re).sum()
}

/// Prints one acceptance line and returns whether it passed.
pub fn report(id: &str, pass: bool, detail: &str) -> bool {
    println!(
        "[{}] criterion {id}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

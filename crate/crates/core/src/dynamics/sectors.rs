//! Block decomposition of the master equation.
//!
//! The Jaynes–Cummings coupling, the control drive and the collapse operator
//! all conserve a shifted excitation number, so the joint basis splits into
//! small sectors (at most three states) that never mix. Every block `ρ_AB`
//! between two sectors then obeys its own linear ODE of dimension `|A|·|B|`.
//! A fixed RK4 step of a linear autonomous ODE is the matrix polynomial
//! `I + hM + (hM)²/2 + (hM)³/6 + (hM)⁴/24`, which lets whole runs of steps be
//! applied as matrix powers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::hilbert::Operator;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

struct LocalOps {
    h: DMatrix<C64>,
    ctrl: DMatrix<C64>,
    l: DMatrix<C64>,
    ldl: DMatrix<C64>,
}

pub(crate) struct SectorModel {
    dim: usize,
    sectors: Vec<Vec<usize>>,
    local: Vec<LocalOps>,
    gamma: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn restrict(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

impl SectorModel {
    /// `h` is the undriven Hamiltonian, `ctrl` the drive operator multiplied
    /// by Ω, `l` the collapse operator with rate `gamma`.
    pub(crate) fn new(h: &Operator, ctrl: &Operator, l: &Operator, gamma: f64) -> Self {
        let dim = h.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        for m in [h.matrix(), ctrl.matrix(), l.matrix()] {
            for i in 0..dim {
                for j in 0..dim {
                    if m[(i, j)] != ZERO {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
        let mut sectors: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            if slot[root] == usize::MAX {
                slot[root] = sectors.len();
                sectors.push(Vec::new());
            }
            sectors[slot[root]].push(i);
        }
        let ldl = l.matrix().adjoint() * l.matrix();
        let local = sectors
            .iter()
            .map(|idx| LocalOps {
                h: restrict(h.matrix(), idx),
                ctrl: restrict(ctrl.matrix(), idx),
                l: restrict(l.matrix(), idx),
                ldl: restrict(&ldl, idx),
            })
            .collect();
        Self {
            dim,
            sectors,
            local,
            gamma,
        }
    }

    #[cfg(test)]
    pub(crate) fn sectors(&self) -> &[Vec<usize>] {
        &self.sectors
    }

    /// Generator of `vec(ρ_AB)` (row-major) at drive strength `omega`.
    pub(crate) fn generator(&self, a: usize, b: usize, omega: f64) -> DMatrix<C64> {
        let (la, lb) = (&self.local[a], &self.local[b]);
        let ha = &la.h + &la.ctrl * C64::new(omega, 0.0);
        let hb = &lb.h + &lb.ctrl * C64::new(omega, 0.0);
        let (na, nb) = (ha.nrows(), hb.nrows());
        let g = self.gamma;
        let mi = C64::new(0.0, -1.0);
        let mut m = DMatrix::zeros(na * nb, na * nb);
        for i in 0..na {
            for j in 0..nb {
                let row = i * nb + j;
                for k in 0..na {
                    for l in 0..nb {
                        let col = k * nb + l;
                        let mut v = g * la.l[(i, k)] * lb.l[(j, l)].conj();
                        if j == l {
                            v += mi * ha[(i, k)] - 0.5 * g * la.ldl[(i, k)];
                        }
                        if i == k {
                            v += -mi * hb[(l, j)] - 0.5 * g * lb.ldl[(l, j)];
                        }
                        m[(row, col)] = v;
                    }
                }
            }
        }
        m
    }

    /// Cuts a joint matrix into the upper-triangular list of sector blocks.
    pub(crate) fn split(&self, rho: &DMatrix<C64>) -> Vec<PairBlock> {
        let mut out = Vec::new();
        for a in 0..self.sectors.len() {
            for b in a..self.sectors.len() {
                let (sa, sb) = (&self.sectors[a], &self.sectors[b]);
                let x = DVector::from_fn(sa.len() * sb.len(), |r, _| {
                    rho[(sa[r / sb.len()], sb[r % sb.len()])]
                });
                if x.iter().any(|z| *z != ZERO) {
                    out.push(PairBlock { a, b, x });
                }
            }
        }
        out
    }

    pub(crate) fn assemble(&self, blocks: &[PairBlock]) -> DMatrix<C64> {
        let mut rho = DMatrix::zeros(self.dim, self.dim);
        for blk in blocks {
            let (sa, sb) = (&self.sectors[blk.a], &self.sectors[blk.b]);
            for (r, z) in blk.x.iter().enumerate() {
                let (i, j) = (sa[r / sb.len()], sb[r % sb.len()]);
                rho[(i, j)] = *z;
                rho[(j, i)] = z.conj();
            }
        }
        rho
    }

    pub(crate) fn block_len(&self, a: usize) -> usize {
        self.sectors[a].len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PairBlock {
    pub a: usize,
    pub b: usize,
    pub x: DVector<C64>,
}

/// One classical RK4 step of `ẋ = M x` as a matrix.
pub(crate) fn rk4_step_matrix(m: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let n = m.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let hm = m * C64::new(dt, 0.0);
    let mut p = &id + &hm * C64::new(0.25, 0.0);
    p = &id + &hm * &p * C64::new(1.0 / 3.0, 0.0);
    p = &id + &hm * &p * C64::new(0.5, 0.0);
    &id + &hm * &p
}

pub(crate) fn matrix_power(p: &DMatrix<C64>, mut k: usize) -> DMatrix<C64> {
    let n = p.nrows();
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut base = p.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Step map of one block with the chunk power cached.
pub(crate) struct BlockStepper {
    step: DMatrix<C64>,
    chunk: usize,
    chunk_map: DMatrix<C64>,
}

impl BlockStepper {
    pub(crate) fn new(generator: &DMatrix<C64>, dt: f64, chunk: usize) -> Self {
        let step = rk4_step_matrix(generator, dt);
        let chunk_map = matrix_power(&step, chunk);
        Self {
            step,
            chunk,
            chunk_map,
        }
    }

    pub(crate) fn advance(&self, x: &DVector<C64>, steps: usize) -> DVector<C64> {
        match steps {
            0 => x.clone(),
            1 => &self.step * x,
            k if k == self.chunk => &self.chunk_map * x,
            k => matrix_power(&self.step, k) * x,
        }
    }
}

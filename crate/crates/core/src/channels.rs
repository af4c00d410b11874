//! Ideal single-photon addition and subtraction channels in Kraus form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{creation, number, DensityMatrix, Operator, PureState, SpaceLayout};
use crate::states::{build_cavity_state, InitialStateSpec};

/// Highest population allowed on `|N_max⟩` before an adder channel runs.
pub const TOP_LEVEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrausKind {
    /// `{A†}` with `A† = Σ |n+1⟩⟨n|`
    SpaCoherent,
    /// `{|n+1⟩⟨n|}` one operator per Fock level
    SpaIncoherent,
    /// `{A₀, A}` with `A₀ = |0⟩⟨0|`, `A = Σ_{n≥1} |n−1⟩⟨n|`
    SpsCoherent,
    /// `{|0⟩⟨0|} ∪ {|n−1⟩⟨n|}`
    SpsIncoherent,
    /// `A ρ A† / Tr(A ρ A†)`, conditioned on a subtraction having happened
    SpsPostSelected,
}

impl KrausKind {
    pub fn is_adder(self) -> bool {
        matches!(self, KrausKind::SpaCoherent | KrausKind::SpaIncoherent)
    }
}

#[derive(Debug, Clone)]
pub struct KrausSet {
    pub kind: KrausKind,
    pub operators: Vec<Operator>,
    /// Set for adder sets: `|N_max⟩` is mapped to zero by the truncated `A†`.
    pub truncation_edge: bool,
}

impl KrausSet {
    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    /// `Σ K†K`
    pub fn completeness(&self) -> Operator {
        self.operators
            .iter()
            .fold(Operator::zeros(self.dim()), |acc, k| {
                &acc + &(&k.adjoint() * k)
            })
    }
}

fn ket_bra(dim: usize, row: usize, col: usize) -> Operator {
    let mut m = DMatrix::zeros(dim, dim);
    m[(row, col)] = C64::new(1.0, 0.0);
    Operator::from_matrix(m).expect("square")
}

pub fn build_kraus(kind: KrausKind, layout: &SpaceLayout) -> KrausSet {
    let d = layout.cavity_dim();
    let shift_up =
        || Operator::from_fn(d, |i, j| C64::new(if i == j + 1 { 1.0 } else { 0.0 }, 0.0));
    let operators = match kind {
        KrausKind::SpaCoherent => vec![shift_up()],
        KrausKind::SpaIncoherent => (0..d - 1).map(|n| ket_bra(d, n + 1, n)).collect(),
        KrausKind::SpsCoherent => vec![ket_bra(d, 0, 0), shift_up().adjoint()],
        KrausKind::SpsIncoherent => std::iter::once(ket_bra(d, 0, 0))
            .chain((1..d).map(|n| ket_bra(d, n - 1, n)))
            .collect(),
        KrausKind::SpsPostSelected => vec![shift_up().adjoint()],
    };
    KrausSet {
        kind,
        operators,
        truncation_edge: kind.is_adder(),
    }
}

#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub state: DensityMatrix,
    /// `Tr Σ K ρ K†` before renormalization.
    pub raw_trace: f64,
}

/// `ρ → Σ K ρ K†`, renormalized to unit trace.
pub fn apply_channel(set: &KrausSet, rho: &DensityMatrix) -> Result<ChannelOutput> {
    let d = set.dim();
    if rho.dim() != d {
        return Err(Error::dims("apply_channel", d, rho.dim()));
    }
    if set.kind.is_adder() {
        let top = rho.get(d - 1, d - 1).re;
        if top > TOP_LEVEL_TOL {
            return Err(Error::TruncationLeak { population: top });
        }
    }
    let m = rho.matrix();
    let out = set.operators.iter().fold(DMatrix::zeros(d, d), |acc, k| {
        let k = k.matrix();
        acc + k * m * k.adjoint()
    });
    let raw_trace = out.trace().re;
    if raw_trace <= 0.0 {
        return Err(Error::InvalidState(
            "channel output has zero trace (nothing to subtract from vacuum)".into(),
        ));
    }
    let mut out = out.unscale(raw_trace);
    // re-symmetrize round-off
    out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    Ok(ChannelOutput {
        state: DensityMatrix::new(out)?,
        raw_trace,
    })
}

/// `⟨ψ|a†a|ψ⟩ − ⟨α|a†a|α⟩` for `|ψ⟩ ∝ a†|α⟩`, evaluated on the truncated space.
///
/// The coherent state lives on levels `0..N_max` so that `a†` loses nothing.
pub fn ladder_defect(alpha: C64, layout: &SpaceLayout) -> Result<f64> {
    let n_max = layout.cavity_cutoff();
    if n_max < 2 {
        return Err(Error::InvalidLayout(
            "ladder defect needs a cutoff of at least 2".into(),
        ));
    }
    let inner = SpaceLayout::new(n_max - 1)?;
    let coh = build_cavity_state(&InitialStateSpec::coherent(alpha), &inner)?;
    let mut padded = DVector::zeros(layout.cavity_dim());
    padded
        .rows_mut(0, inner.cavity_dim())
        .copy_from(coh.state.amplitudes());
    let before = PureState::new(padded)?;
    let after = PureState::normalized(creation(layout).apply(before.amplitudes()))?;

    let n_op = number(layout);
    let mean = |s: &PureState| {
        let v = s.amplitudes();
        (v.adjoint() * n_op.apply(v))[(0, 0)].re
    };
    Ok(mean(&after) - mean(&before))
}

/// `1 + |α|²/(|α|² + 1)`
pub fn ladder_defect_closed_form(alpha: C64) -> f64 {
    let a2 = alpha.norm_sqr();
    1.0 + a2 / (a2 + 1.0)
}

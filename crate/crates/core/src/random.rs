//! Random matrices, states and contexts for property checks and the
//! `postulates` experiment.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{Context, ContextId, Observable};
use crate::ensemble::QuantumState;
use crate::error::Result;
use crate::linalg::{c, CMatrix};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        c(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Observable {
    let g = ginibre(dim, rng);
    Observable::new((&g + g.adjoint()).scale(0.5)).expect("Hermitian by construction")
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Full-rank mixed state `G G† / tr(G G†)`.
pub fn mixed_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> QuantumState {
    let g = ginibre(dim, rng);
    let rho = &g * g.adjoint();
    let tr = crate::linalg::trace(&rho).re;
    QuantumState::new(rho.unscale(tr)).expect("positive by construction")
}

pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> QuantumState {
    let amps: Vec<_> = (0..dim)
        .map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    QuantumState::pure(&amps).expect("nonzero with probability one")
}

/// Maximal context from the columns of a Haar unitary.
pub fn maximal_context<R: Rng + ?Sized>(
    id: impl Into<ContextId>,
    dim: usize,
    rng: &mut R,
) -> Result<Context> {
    Context::from_basis(id, &unitary(dim, rng))
}

/// Observable `Σ c_i P_i` with integer coefficients drawn from `levels`
/// distinct levels, so degeneracies are frequent.
pub fn in_context<R: Rng + ?Sized>(q: &Context, levels: usize, rng: &mut R) -> Observable {
    let mut m = CMatrix::zeros(q.dim(), q.dim());
    for p in q.projectors() {
        let v = rng.gen_range(0..levels.max(1)) as f64 - (levels / 2) as f64;
        m += p.scale(v);
    }
    Observable::new(m).expect("real combination of projectors")
}

/// Observable `Σ c_i P_i` with Gaussian coefficients.
pub fn generic_in_context<R: Rng + ?Sized>(q: &Context, rng: &mut R) -> Observable {
    let mut m = CMatrix::zeros(q.dim(), q.dim());
    for p in q.projectors() {
        let v: f64 = StandardNormal.sample(rng);
        m += p.scale(v);
    }
    Observable::new(m).expect("real combination of projectors")
}

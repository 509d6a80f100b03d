//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use aqm_core::algebra::{masa_from, Context, Observable};
use aqm_core::ensemble::QuantumState;
use aqm_core::linalg::CMatrix;
use aqm_core::random;
use aqm_core::two_slit::{prepare_conditioned, slit_projectors, SlitGeometry};
use rand::seq::SliceRandom;
use rand::Rng;

/// Lattice of 4..=`max_sites` sites with two disjoint, non-empty slits.
pub fn random_geometry<R: Rng>(rng: &mut R, max_sites: usize) -> SlitGeometry {
    let sites = rng.gen_range(4..=max_sites);
    let mut order: Vec<usize> = (0..sites).collect();
    order.shuffle(rng);
    let na = rng.gen_range(1..=sites / 2);
    let nb = rng.gen_range(1..=sites - na);
    let mut a = order[..na].to_vec();
    let mut b = order[na..na + nb].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    SlitGeometry::new(sites, a, b).expect("disjoint in-range slits")
}

/// Random mixed state conditioned on the slits, with the slit projectors.
pub fn conditioned_state<R: Rng>(
    rng: &mut R,
    geom: &SlitGeometry,
) -> (QuantumState, Observable, Observable) {
    let (p_a, p_b) = slit_projectors(geom).unwrap();
    let psi0 = random::mixed_state(geom.sites, rng);
    let psi_ab = prepare_conditioned(&psi0, &p_a, &p_b).unwrap();
    (psi_ab, p_a, p_b)
}

/// Random Hermitian `K` with `[p, K] = 0`: independent blocks on the range
/// of `p` and of `1 − p`.
pub fn commuting_with<R: Rng>(p: &Observable, rng: &mut R) -> Observable {
    let n = p.dim();
    let pm = p.matrix();
    let q = CMatrix::identity(n, n) - pm;
    let h1 = random::hermitian(n, rng);
    let h2 = random::hermitian(n, rng);
    Observable::new(pm * h1.matrix() * pm + &q * h2.matrix() * &q).unwrap()
}

/// A state, an observable with a repeated eigenvalue, a maximal context
/// containing it and a second maximal context containing it whose
/// projectors differ on the degenerate eigenspace.
pub struct DegenerateInstance {
    pub psi: QuantumState,
    pub a: Observable,
    pub q: Context,
    pub qp: Context,
}

pub fn degenerate_instance<R: Rng>(rng: &mut R, dim: usize) -> DegenerateInstance {
    assert!(dim >= 2);
    loop {
        let psi = random::mixed_state(dim, rng);
        let q = random::maximal_context("Q", dim, rng).unwrap();
        let a = random::in_context(&q, 3, rng);
        if distinct_eigenvalues(&q, &a) == dim {
            continue;
        }
        let qp = masa_from("Q'", &a, Some(&random::unitary(dim, rng))).unwrap();
        return DegenerateInstance { psi, a, q, qp };
    }
}

fn distinct_eigenvalues(q: &Context, a: &Observable) -> usize {
    let mut v = q.branch_values(a).unwrap();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    v.len()
}

/// `max |P_i − P'_j|` over the best matching of projectors; large when the
/// two contexts are genuinely different.
pub fn context_distance(q: &Context, qp: &Context) -> f64 {
    q.projectors()
        .iter()
        .map(|p| {
            qp.projectors()
                .iter()
                .map(|pp| (p - pp).iter().fold(0.0_f64, |m, z| m.max(z.norm())))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0_f64, f64::max)
}

/// Slit projectors and a conditioned state in a random orthonormal frame,
/// so the identities are exercised without exact zeros.
pub fn rotated_conditioned_state<R: Rng>(
    rng: &mut R,
    geom: &SlitGeometry,
) -> (QuantumState, Observable, Observable) {
    let (p_a, p_b) = slit_projectors(geom).unwrap();
    let u = random::unitary(geom.sites, rng);
    let rot = |p: &Observable| Observable::new(&u * p.matrix() * u.adjoint()).unwrap();
    let (p_a, p_b) = (rot(&p_a), rot(&p_b));
    let psi0 = random::mixed_state(geom.sites, rng);
    let psi_ab = prepare_conditioned(&psi0, &p_a, &p_b).unwrap();
    (psi_ab, p_a, p_b)
}

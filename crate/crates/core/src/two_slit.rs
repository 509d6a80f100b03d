//! Two-slit scattering on an `N`-site lattice.
//!
//! Slits are diagonal 0/1 projectors on site sets, momentum directions are
//! bins of the unitary DFT basis. Conditioning on `p_a + p_b` prepares the
//! state `Ψ_{a+b}`, whose mean on a momentum projector `K` splits into the
//! slit-a term, the slit-b term and the interference term
//! `Ψ(p_a K p_b + p_b K p_a)`.
//!
//! [`stacked_screens`] is the per-event model: every event is localized at
//! exactly one slit, and the momentum is then drawn from a slit-conditional
//! distribution that carries half of the interference mass.

use std::f64::consts::PI;
use std::ops::Range;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Observable;
use crate::ensemble::{condition_on_event, QuantumState};
use crate::error::{AqmError, Result};
use crate::linalg::{self, c, ensure_dim, max_abs, max_abs_diff, CMatrix, CVector};
use crate::rng::StreamFactory;

/// Closure tolerance for the three-term decomposition.
pub const CLOSURE_TOL: f64 = 1e-10;
/// `|1 − Ψ(p_a + p_b)|` above this means the state is not conditioned.
pub const CONDITIONED_TOL: f64 = 1e-8;
/// Per-site allowance for clamping negative slit-conditional mass.
pub const CLAMP_PER_SITE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slit {
    A,
    B,
}

impl Slit {
    pub fn as_char(self) -> char {
        match self {
            Slit::A => 'a',
            Slit::B => 'b',
        }
    }
}

/// Lattice size and the two slit site sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitGeometry {
    pub sites: usize,
    pub slit_a: Vec<usize>,
    pub slit_b: Vec<usize>,
}

impl SlitGeometry {
    pub fn new(sites: usize, slit_a: Vec<usize>, slit_b: Vec<usize>) -> Result<Self> {
        let geom = Self {
            sites,
            slit_a,
            slit_b,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Point slits at sites `N/4` and `3N/4` of a 64-site lattice.
    pub fn symmetric64() -> Self {
        Self {
            sites: 64,
            slit_a: vec![16],
            slit_b: vec![48],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(AqmError::InvalidGeometry("lattice has no sites".into()));
        }
        if self.slit_a.is_empty() || self.slit_b.is_empty() {
            return Err(AqmError::InvalidGeometry(
                "both slits must be non-empty".into(),
            ));
        }
        for &s in self.slit_a.iter().chain(&self.slit_b) {
            if s >= self.sites {
                return Err(AqmError::InvalidGeometry(format!(
                    "site {s} outside lattice of {} sites",
                    self.sites
                )));
            }
        }
        if let Some(s) = self.slit_a.iter().find(|s| self.slit_b.contains(s)) {
            return Err(AqmError::InvalidGeometry(format!(
                "slits overlap at site {s}"
            )));
        }
        Ok(())
    }
}

fn site_projector(sites: usize, set: &[usize]) -> Observable {
    let mut diag = vec![0.0; sites];
    for &s in set {
        diag[s] = 1.0;
    }
    Observable::diagonal(&diag)
}

/// Diagonal 0/1 projectors `(p_a, p_b)` on the slit site sets.
pub fn slit_projectors(geom: &SlitGeometry) -> Result<(Observable, Observable)> {
    geom.validate()?;
    Ok((
        site_projector(geom.sites, &geom.slit_a).labeled("p_a"),
        site_projector(geom.sites, &geom.slit_b).labeled("p_b"),
    ))
}

/// Contiguous range of DFT momentum indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentumBin {
    pub range: Range<usize>,
}

impl MomentumBin {
    pub fn new(range: Range<usize>) -> Self {
        Self { range }
    }

    pub fn single(k: usize) -> Self {
        Self { range: k..k + 1 }
    }
}

/// k-th column of the unitary DFT: `f_k[j] = exp(2πi·jk/N) / √N`.
pub fn dft_column(k: usize, sites: usize) -> CVector {
    let norm = (sites as f64).sqrt();
    CVector::from_fn(sites, |j, _| {
        let phase = 2.0 * PI * ((j * k) % sites) as f64 / sites as f64;
        c(phase.cos() / norm, phase.sin() / norm)
    })
}

/// `K = Σ_{k∈bin} |f_k⟩⟨f_k|`.
pub fn momentum_projector(bin: &MomentumBin, sites: usize) -> Result<Observable> {
    let r = &bin.range;
    if r.start >= r.end || r.end > sites {
        return Err(AqmError::BinOutOfRange {
            start: r.start,
            end: r.end,
            sites,
        });
    }
    let mut k = CMatrix::zeros(sites, sites);
    for idx in r.clone() {
        k += linalg::outer(&dft_column(idx, sites));
    }
    Ok(Observable::new(k)?.labeled(format!("K[{}..{}]", r.start, r.end)))
}

fn slit_sum(p_a: &Observable, p_b: &Observable) -> Result<CMatrix> {
    ensure_dim(p_a.dim(), p_b.dim())?;
    Ok(p_a.matrix() + p_b.matrix())
}

/// Conditions `psi0` on the event "the particle hits slit a or slit b".
pub fn prepare_conditioned(
    psi0: &QuantumState,
    p_a: &Observable,
    p_b: &Observable,
) -> Result<QuantumState> {
    condition_on_event(psi0, &slit_sum(p_a, p_b)?)
}

fn ensure_conditioned(psi: &QuantumState, e: &CMatrix) -> Result<()> {
    let residual = (1.0 - psi.expectation(e)?.re).abs();
    if residual > CONDITIONED_TOL {
        return Err(AqmError::NotConditioned { residual });
    }
    Ok(())
}

/// Largest of `|Ψ(A) − Ψ(AE)|`, `|Ψ(A) − Ψ(EA)|`, `|Ψ(A) − Ψ(EAE)|` with
/// `E = p_a + p_b`, over the given dynamical variables.
pub fn support_residual(
    psi_ab: &QuantumState,
    p_a: &Observable,
    p_b: &Observable,
    variables: &[CMatrix],
) -> Result<f64> {
    let e = slit_sum(p_a, p_b)?;
    ensure_dim(psi_ab.dim(), e.nrows())?;
    ensure_conditioned(psi_ab, &e)?;
    let mut worst = 0.0_f64;
    for a in variables {
        let base = psi_ab.expectation(a)?;
        let right = psi_ab.expectation(&(a * &e))?;
        let left = psi_ab.expectation(&(&e * a))?;
        let both = psi_ab.expectation(&(&e * a * &e))?;
        worst = worst
            .max((base - right).norm())
            .max((base - left).norm())
            .max((base - both).norm());
    }
    Ok(worst)
}

/// [`support_residual`] over `trials` random complex dynamical variables.
pub fn verify_support_identities<R: Rng + ?Sized>(
    psi_ab: &QuantumState,
    p_a: &Observable,
    p_b: &Observable,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let vars: Vec<CMatrix> = (0..trials)
        .map(|_| crate::random::ginibre(psi_ab.dim(), rng))
        .collect();
    support_residual(psi_ab, p_a, p_b, &vars)
}

/// The three terms of `⟨K⟩` on a conditioned state and the total
/// `tr(ρK)` computed separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceDecomposition {
    pub direct_a: f64,
    pub direct_b: f64,
    pub interference: f64,
    pub total: f64,
}

impl InterferenceDecomposition {
    /// `|direct_a + direct_b + interference − total|`.
    pub fn closure_residual(&self) -> f64 {
        (self.direct_a + self.direct_b + self.interference - self.total).abs()
    }
}

pub fn decompose_mean(
    psi_ab: &QuantumState,
    k: &Observable,
    p_a: &Observable,
    p_b: &Observable,
) -> Result<InterferenceDecomposition> {
    let e = slit_sum(p_a, p_b)?;
    ensure_dim(psi_ab.dim(), k.dim())?;
    ensure_dim(psi_ab.dim(), e.nrows())?;
    ensure_conditioned(psi_ab, &e)?;
    let (pa, pb, km) = (p_a.matrix(), p_b.matrix(), k.matrix());
    let direct_a = psi_ab.expectation(&(pa * km * pa))?.re;
    let direct_b = psi_ab.expectation(&(pb * km * pb))?.re;
    let interference = psi_ab.expectation(&(pa * km * pb + pb * km * pa))?.re;
    let total = psi_ab.mean(k)?;
    Ok(InterferenceDecomposition {
        direct_a,
        direct_b,
        interference,
        total,
    })
}

/// Per-bin decomposition of the momentum distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub bins: Vec<InterferenceDecomposition>,
}

impl Pattern {
    pub fn intensity(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.total).collect()
    }

    /// `(max − min) / (max + min)` of the intensity.
    pub fn visibility(&self) -> f64 {
        let i = self.intensity();
        let max = i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = i.iter().cloned().fold(f64::INFINITY, f64::min);
        (max - min) / (max + min)
    }
}

/// Decomposition at every single-site momentum bin.
///
/// Uses `tr(ρ·X K_k Y) = ⟨f_k| YρX |f_k⟩` for the rank-1 bin projectors,
/// which avoids forming `K_k`.
pub fn pattern(psi_ab: &QuantumState, geom: &SlitGeometry) -> Result<Pattern> {
    let (p_a, p_b) = slit_projectors(geom)?;
    ensure_dim(geom.sites, psi_ab.dim())?;
    let e = slit_sum(&p_a, &p_b)?;
    ensure_conditioned(psi_ab, &e)?;
    let rho = psi_ab.density();
    let (pa, pb) = (p_a.matrix(), p_b.matrix());
    let m_aa = pa * rho * pa;
    let m_bb = pb * rho * pb;
    let m_cross = pb * rho * pa + pa * rho * pb;
    let quad = |m: &CMatrix, f: &CVector| f.dotc(&(m * f)).re;
    let bins = (0..geom.sites)
        .map(|k| {
            let f = dft_column(k, geom.sites);
            InterferenceDecomposition {
                direct_a: quad(&m_aa, &f),
                direct_b: quad(&m_bb, &f),
                interference: quad(&m_cross, &f),
                total: quad(rho, &f),
            }
        })
        .collect();
    Ok(Pattern { bins })
}

/// Uniform pure state over all sites, the default source.
pub fn uniform_source(sites: usize) -> QuantumState {
    QuantumState::pure(&vec![c(1.0, 0.0); sites]).expect("non-empty")
}

/// Slit-conditional momentum distributions of the kernel + dark-field
/// model: `P(k | s) ∝ Ψ(p_s K_k p_s) + ½ Ψ(p_s K_k p_s̄ + p_s̄ K_k p_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    /// `Ψ_{a+b}(p_a)`, `Ψ_{a+b}(p_b)`.
    pub slit_probs: [f64; 2],
    /// Normalized conditional distributions; `None` for a slit of zero mass.
    pub conditional: [Option<Vec<f64>>; 2],
    /// Negative mass removed by clamping, per slit.
    pub clamped_mass: [f64; 2],
}

impl KernelModel {
    pub fn new(psi0: &QuantumState, geom: &SlitGeometry) -> Result<Self> {
        let (p_a, p_b) = slit_projectors(geom)?;
        let psi_ab = prepare_conditioned(psi0, &p_a, &p_b)?;
        let pat = pattern(&psi_ab, geom)?;
        let slit_probs = [
            psi_ab.mean(&p_a)?.clamp(0.0, 1.0),
            psi_ab.mean(&p_b)?.clamp(0.0, 1.0),
        ];
        let limit = CLAMP_PER_SITE * geom.sites as f64;
        let mut conditional = [None, None];
        let mut clamped_mass = [0.0; 2];
        for (idx, slit) in [Slit::A, Slit::B].into_iter().enumerate() {
            let mass = slit_probs[idx];
            if mass <= crate::ensemble::IMPOSSIBLE_MASS {
                continue;
            }
            let raw: Vec<f64> = pat
                .bins
                .iter()
                .map(|b| {
                    let direct = if slit == Slit::A {
                        b.direct_a
                    } else {
                        b.direct_b
                    };
                    (direct + 0.5 * b.interference) / mass
                })
                .collect();
            let negative: f64 = raw.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
            if negative > limit {
                return Err(AqmError::ModelViolation {
                    slit: slit.as_char(),
                    negative_mass: negative,
                    limit,
                });
            }
            let clipped: Vec<f64> = raw.iter().map(|&p| p.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            conditional[idx] = Some(clipped.into_iter().map(|p| p / total).collect());
            clamped_mass[idx] = negative;
        }
        Ok(Self {
            slit_probs,
            conditional,
            clamped_mass,
        })
    }
}

/// One event on one screen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenHit {
    pub event: u64,
    pub slit: Slit,
    pub site: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenRun {
    pub histogram: Vec<u64>,
    /// `(n_a, n_b)`.
    pub slit_tally: (u64, u64),
    pub hits: Vec<ScreenHit>,
}

impl ScreenRun {
    pub fn n_events(&self) -> u64 {
        self.hits.len() as u64
    }

    /// Total-variation distance between the normalized histogram and `probs`.
    pub fn tv_distance(&self, probs: &[f64]) -> f64 {
        let n = self.n_events() as f64;
        0.5 * self
            .histogram
            .iter()
            .zip(probs)
            .map(|(&h, &p)| (h as f64 / n - p).abs())
            .sum::<f64>()
    }
}

/// Convergence scale `2·sqrt(N / n_events)` of the stacked histogram.
pub fn tv_bound(sites: usize, n_events: u64) -> f64 {
    2.0 * (sites as f64 / n_events as f64).sqrt()
}

/// Independent single-event runs, one per screen, stacked into one
/// histogram. Event `e` draws from stream `(seed, e)`: first the slit with
/// probability `Ψ_{a+b}(p_s)`, then the momentum site from `P(k | s)`.
pub fn stacked_screens(
    psi0: &QuantumState,
    geom: &SlitGeometry,
    n_events: u64,
    seed: u64,
) -> Result<ScreenRun> {
    if n_events == 0 {
        return Err(AqmError::InvalidArgument(
            "n_events must be at least 1".into(),
        ));
    }
    let model = KernelModel::new(psi0, geom)?;
    let slit_sampler = WeightedIndex::new(model.slit_probs)
        .map_err(|e| AqmError::InvalidArgument(format!("slit weights: {e}")))?;
    let site_samplers: Vec<Option<WeightedIndex<f64>>> = model
        .conditional
        .iter()
        .map(|c| {
            c.as_ref()
                .map(|p| WeightedIndex::new(p).expect("normalized"))
        })
        .collect();
    let factory = StreamFactory::new(seed);
    let hits: Vec<ScreenHit> = (0..n_events)
        .into_par_iter()
        .map(|event| {
            let mut rng = factory.trial(event);
            let idx = slit_sampler.sample(&mut rng);
            let site = site_samplers[idx]
                .as_ref()
                .expect("zero-mass slit is never sampled")
                .sample(&mut rng);
            ScreenHit {
                event,
                slit: if idx == 0 { Slit::A } else { Slit::B },
                site,
            }
        })
        .collect();
    let mut histogram = vec![0u64; geom.sites];
    let mut tally = (0u64, 0u64);
    for h in &hits {
        histogram[h.site] += 1;
        match h.slit {
            Slit::A => tally.0 += 1,
            Slit::B => tally.1 += 1,
        }
    }
    Ok(ScreenRun {
        histogram,
        slit_tally: tally,
        hits,
    })
}

/// `max |[p, K]|` helper for the commutation kill-switch.
pub fn commutator_norm(p: &Observable, k: &Observable) -> f64 {
    max_abs(&linalg::commutator(p.matrix(), k.matrix()))
}

/// `K² = K` check used by tests and the CLI.
pub fn idempotence_defect(k: &Observable) -> f64 {
    max_abs_diff(&(k.matrix() * k.matrix()), k.matrix())
}

//! Quantum states as probability functionals on the algebra.
//!
//! A [`QuantumState`] is a density matrix; its functional is
//! `Ψ(A) = tr(ρA)`. Individual outcomes come from characters sampled per
//! context at measurement time with Born weights `tr(ρP_i)`, and the
//! post-measurement state is the Lüders projection of the sampled branch.

use std::io::Write;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Character, Context, ContextId, Observable, COMMUTE_TOL, PROJECTOR_TOL};
use crate::error::{AqmError, Result};
use crate::linalg::{
    self, ensure_dim, ensure_square, hermiticity_defect, max_abs_diff, CMatrix, CVector,
};
use crate::rng::{derive_seed, StreamFactory, TrialRng};

/// Tolerance for state validity: Hermiticity, unit trace, positivity.
pub const STATE_TOL: f64 = 1e-10;
/// Exact-equality tolerance for pushforward distributions and linearity.
pub const EXACT_TOL: f64 = 1e-10;
/// Probability mass below which an event counts as impossible.
pub const IMPOSSIBLE_MASS: f64 = 1e-14;
/// Significance level of the two-sample Kolmogorov–Smirnov smoke test.
pub const KS_ALPHA: f64 = 0.01;

/// Density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    rho: CMatrix,
}

impl QuantumState {
    /// Validates Hermiticity, unit trace and positivity within [`STATE_TOL`].
    pub fn new(rho: CMatrix) -> Result<Self> {
        let n = ensure_square(&rho)?;
        if n == 0 {
            return Err(AqmError::InvalidState("empty matrix".into()));
        }
        let herm = hermiticity_defect(&rho);
        if herm > STATE_TOL {
            return Err(AqmError::InvalidState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let rho = linalg::hermitian_part(&rho);
        let tr = linalg::trace(&rho).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(AqmError::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = rho
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(v));
        if min_eig < -STATE_TOL {
            return Err(AqmError::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { rho })
    }

    /// `|ψ⟩⟨ψ|` for the normalized amplitude vector.
    pub fn pure(amplitudes: &[num_complex::Complex64]) -> Result<Self> {
        let v = CVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if amplitudes.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(AqmError::InvalidState(
                "zero or non-finite amplitude vector".into(),
            ));
        }
        let v = v.unscale(norm);
        Ok(Self {
            rho: linalg::outer(&v),
        })
    }

    /// Basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(AqmError::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(index, index)] = linalg::ONE;
        Ok(Self { rho })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    /// Classical mixture of basis states with the given weights.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_real(weights))
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn density(&self) -> &CMatrix {
        &self.rho
    }

    /// `Ψ(X) = tr(ρX)` for any dynamical variable `X`.
    pub fn expectation(&self, x: &CMatrix) -> Result<num_complex::Complex64> {
        ensure_square(x)?;
        ensure_dim(self.dim(), x.nrows())?;
        Ok(linalg::trace_of_product(&self.rho, x))
    }

    /// Quantum mean `tr(ρA)` of an observable.
    pub fn mean(&self, a: &Observable) -> Result<f64> {
        Ok(self.expectation(a.matrix())?.re)
    }

    /// Renormalized `EρE / tr(ρE)` after checking `tr(ρE)` is positive.
    fn project(&self, e: &CMatrix) -> Result<Self> {
        let mass = self.expectation(e)?.re;
        if !(mass > IMPOSSIBLE_MASS) {
            return Err(AqmError::ImpossibleEvent { mass });
        }
        let projected = e * &self.rho * e;
        Ok(Self {
            rho: linalg::hermitian_part(&projected).unscale(mass),
        })
    }
}

/// Born probabilities of the branches of one context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDistribution {
    pub context_id: ContextId,
    pub probs: Vec<f64>,
}

impl BranchDistribution {
    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probs).expect("probabilities are nonnegative and sum to one")
    }
}

/// One measured value, addressed by `(seed, trial)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub trial: u64,
    pub seed: u64,
    pub context: String,
    pub observable: String,
    pub value: f64,
}

/// Writes records as CSV with header `trial,seed,context,observable,value`.
pub fn write_records_csv<W: Write>(writer: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)
            .map_err(|e| AqmError::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| AqmError::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// `p_i = tr(ρP_i)`, clamped to `[0, 1]` and renormalized.
pub fn born_distribution(psi: &QuantumState, q: &Context) -> Result<BranchDistribution> {
    ensure_dim(q.dim(), psi.dim())?;
    let mut probs: Vec<f64> = q
        .projectors()
        .iter()
        .map(|p| {
            linalg::trace_of_product(psi.density(), p)
                .re
                .clamp(0.0, 1.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(BranchDistribution {
        context_id: q.id().clone(),
        probs,
    })
}

/// Draws a character of `q` with Born weights.
pub fn sample_character<R: Rng + ?Sized>(
    psi: &QuantumState,
    q: &Context,
    rng: &mut R,
) -> Result<Character> {
    let dist = born_distribution(psi, q)?;
    q.character(dist.sampler().sample(rng))
}

/// Outcome of [`measure`].
#[derive(Clone, Debug)]
pub struct Measurement {
    pub value: f64,
    pub character: Character,
    pub post_state: QuantumState,
    pub record: MeasurementRecord,
}

/// Samples a character of `q`, reads off the value of `a` and applies the
/// Lüders update for the sampled projector.
pub fn measure(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    rng: &mut TrialRng,
) -> Result<Measurement> {
    ensure_dim(q.dim(), a.dim())?;
    let values = q.branch_values(a)?;
    let chi = sample_character(psi, q, rng)?;
    let post_state = psi.project(&q.projectors()[chi.branch])?;
    let value = values[chi.branch];
    Ok(Measurement {
        value,
        record: MeasurementRecord {
            trial: rng.trial(),
            seed: rng.seed(),
            context: q.id().to_string(),
            observable: a.label().to_owned(),
            value,
        },
        character: chi,
        post_state,
    })
}

/// `EρE / tr(ρE)` for a projector `E`.
pub fn condition_on_event(psi: &QuantumState, e: &CMatrix) -> Result<QuantumState> {
    ensure_square(e)?;
    ensure_dim(psi.dim(), e.nrows())?;
    let herm = hermiticity_defect(e);
    let idem = max_abs_diff(&(e * e), e);
    if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
        return Err(AqmError::NotProjector(format!(
            "event operator: hermiticity {herm:e}, idempotence {idem:e}"
        )));
    }
    psi.project(e)
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Branch counts of `n` independent measurements of `q` on fresh copies of
/// `psi`; trial `t` draws from stream `(seed, t)`.
fn branch_counts(dist: &BranchDistribution, n: u64, seed: u64) -> Vec<u64> {
    let sampler = dist.sampler();
    let factory = StreamFactory::new(seed);
    let len = dist.probs.len();
    (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; len],
            |mut acc, t| {
                acc[sampler.sample(&mut factory.trial(t))] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Arithmetic mean of `n` measured values of `a` in context `q`.
///
/// Each trial measures a fresh copy of `psi`, so only the branch counts
/// matter; the reduction over trials is integer addition and therefore
/// independent of scheduling.
pub fn monte_carlo_mean(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    n: u64,
    seed: u64,
) -> Result<MeanEstimate> {
    if n == 0 {
        return Err(AqmError::InvalidArgument("n must be at least 1".into()));
    }
    ensure_dim(q.dim(), a.dim())?;
    let values = q.branch_values(a)?;
    let dist = born_distribution(psi, q)?;
    let counts = branch_counts(&dist, n, seed);
    let nf = n as f64;
    let estimate = counts
        .iter()
        .zip(&values)
        .map(|(&k, &v)| k as f64 * v)
        .sum::<f64>()
        / nf;
    let stderr = if n > 1 {
        let ss: f64 = counts
            .iter()
            .zip(&values)
            .map(|(&k, &v)| k as f64 * (v - estimate).powi(2))
            .sum();
        (ss / (nf - 1.0)).sqrt() / nf.sqrt()
    } else {
        0.0
    };
    Ok(MeanEstimate {
        estimate,
        stderr,
        n,
    })
}

/// Measurement records of `n` independent trials, in trial order.
pub fn measurement_records(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    n: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    let values = q.branch_values(a)?;
    let dist = born_distribution(psi, q)?;
    let sampler = dist.sampler();
    let factory = StreamFactory::new(seed);
    Ok((0..n)
        .into_par_iter()
        .map(|t| MeasurementRecord {
            trial: t,
            seed,
            context: q.id().to_string(),
            observable: a.label().to_owned(),
            value: values[sampler.sample(&mut factory.trial(t))],
        })
        .collect())
}

/// A measuring device: picks a branch given the Born distribution.
///
/// [`BornDevice`] is the faithful device; other implementations exist so
/// the Postulate-5 checker can be shown to reject biased devices.
pub trait Device: Sync {
    fn choose_branch(&self, dist: &BranchDistribution, rng: &mut TrialRng) -> usize;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BornDevice;

impl Device for BornDevice {
    fn choose_branch(&self, dist: &BranchDistribution, rng: &mut TrialRng) -> usize {
        dist.sampler().sample(rng)
    }
}

/// Distribution of the values of `a` measured in `q`: `(value, probability)`
/// pairs in ascending value order, merging branches with equal values.
pub fn value_distribution(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
) -> Result<Vec<(f64, f64)>> {
    let values = q.branch_values(a)?;
    let dist = born_distribution(psi, q)?;
    let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(dist.probs).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let tol = value_merge_tol(a);
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (v, p) in pairs {
        match merged.last_mut() {
            Some(last) if (v - last.0).abs() <= tol => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    Ok(merged)
}

fn value_merge_tol(a: &Observable) -> f64 {
    1e-8 * linalg::max_abs(a.matrix()).max(1.0)
}

/// Sorted distinct support points of both distributions.
fn common_support(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = a.iter().chain(b).map(|&(v, _)| v).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= tol);
    pts
}

/// `P(value ≤ threshold)` under a discrete distribution.
fn cdf_at(dist: &[(f64, f64)], threshold: f64, tol: f64) -> f64 {
    dist.iter()
        .filter(|&&(v, _)| v <= threshold + tol)
        .map(|&(_, p)| p)
        .sum()
}

/// Kolmogorov distance `sup_A |P(F_A) − P'(F_A)|` between two discrete
/// value distributions.
pub fn cdf_distance(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> f64 {
    common_support(a, b, tol)
        .into_iter()
        .map(|t| (cdf_at(a, t, tol) - cdf_at(b, t, tol)).abs())
        .fold(0.0, f64::max)
}

/// Critical value of the two-sample KS statistic for sample sizes `n`, `m`.
pub fn ks_critical(alpha: f64, n: u64, m: u64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Postulate5Report {
    /// Kolmogorov distance between the exact value distributions.
    pub exact_distance: f64,
    /// Two-sample KS statistic of the sampled values.
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub pass: bool,
}

/// Device independence of `P(F_A)`: the value distributions of `a` under
/// `q` and `qp` must agree exactly, and `n` sampled values from each must
/// pass a two-sample KS test at [`KS_ALPHA`].
pub fn check_postulate5(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    qp: &Context,
    n: u64,
    seed: u64,
) -> Result<Postulate5Report> {
    check_postulate5_with(psi, a, q, qp, n, seed, &BornDevice, &BornDevice)
}

#[allow(clippy::too_many_arguments)]
pub fn check_postulate5_with(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    qp: &Context,
    n: u64,
    seed: u64,
    device_q: &dyn Device,
    device_qp: &dyn Device,
) -> Result<Postulate5Report> {
    if n == 0 {
        return Err(AqmError::InvalidArgument("n must be at least 1".into()));
    }
    let tol = value_merge_tol(a);
    let exact_q = value_distribution(psi, a, q)?;
    let exact_qp = value_distribution(psi, a, qp)?;
    let exact_distance = cdf_distance(&exact_q, &exact_qp, tol);

    let sample = |ctx: &Context, device: &dyn Device, domain: u64| -> Result<Vec<(f64, f64)>> {
        let values = ctx.branch_values(a)?;
        let dist = born_distribution(psi, ctx)?;
        let factory = StreamFactory::new(derive_seed(seed, domain));
        let mut counts = vec![0u64; values.len()];
        for t in 0..n {
            counts[device.choose_branch(&dist, &mut factory.trial(t))] += 1;
        }
        Ok(values
            .into_iter()
            .zip(counts)
            .map(|(v, k)| (v, k as f64 / n as f64))
            .collect())
    };
    let emp_q = sample(q, device_q, 1)?;
    let emp_qp = sample(qp, device_qp, 2)?;
    let ks_statistic = cdf_distance(&emp_q, &emp_qp, tol);
    let critical = ks_critical(KS_ALPHA, n, n);
    Ok(Postulate5Report {
        exact_distance,
        ks_statistic,
        ks_critical: critical,
        pass: exact_distance <= EXACT_TOL && ks_statistic < critical,
    })
}

/// `|tr(ρA) + tr(ρB) − tr(ρ(A+B))|`.
pub fn postulate6_residual(psi: &QuantumState, a: &Observable, b: &Observable) -> Result<f64> {
    ensure_dim(a.dim(), b.dim())?;
    let sum = a.add(b)?;
    Ok((psi.mean(a)? + psi.mean(b)? - psi.mean(&sum)?).abs())
}

/// Linearity of the state functional on a (possibly incompatible) pair.
pub fn check_postulate6(psi: &QuantumState, a: &Observable, b: &Observable) -> Result<bool> {
    Ok(postulate6_residual(psi, a, b)? <= EXACT_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Postulate6Sampled {
    pub mean_a: MeanEstimate,
    pub mean_b: MeanEstimate,
    pub mean_sum: MeanEstimate,
    /// `mean_a + mean_b − mean_sum`.
    pub defect: f64,
    /// `4 · sqrt(se_a² + se_b² + se_sum²)`.
    pub bound: f64,
    pub pass: bool,
}

/// Linearity checked on sampled means: `A`, `B` and `A+B` are each measured
/// in their own maximal context.
pub fn postulate6_sampled(
    psi: &QuantumState,
    a: &Observable,
    b: &Observable,
    n: u64,
    seed: u64,
) -> Result<Postulate6Sampled> {
    let sum = a.add(b)?;
    let qa = crate::algebra::masa_from("masa(A)", a, None)?;
    let qb = crate::algebra::masa_from("masa(B)", b, None)?;
    let qs = crate::algebra::masa_from("masa(A+B)", &sum, None)?;
    let mean_a = monte_carlo_mean(psi, a, &qa, n, derive_seed(seed, 1))?;
    let mean_b = monte_carlo_mean(psi, b, &qb, n, derive_seed(seed, 2))?;
    let mean_sum = monte_carlo_mean(psi, &sum, &qs, n, derive_seed(seed, 3))?;
    let defect = mean_a.estimate + mean_b.estimate - mean_sum.estimate;
    let bound =
        4.0 * (mean_a.stderr.powi(2) + mean_b.stderr.powi(2) + mean_sum.stderr.powi(2)).sqrt();
    Ok(Postulate6Sampled {
        mean_a,
        mean_b,
        mean_sum,
        defect,
        bound,
        pass: defect.abs() <= bound.max(EXACT_TOL),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproducibility {
    pub trials: u64,
    pub agreements: u64,
}

impl Reproducibility {
    pub fn rate(&self) -> f64 {
        self.agreements as f64 / self.trials as f64
    }
}

/// Measures `a` in `q`, then re-measures it on the post-measurement state
/// in `qp` (another context containing `a`) and counts agreements.
pub fn luders_reproducibility(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    qp: &Context,
    trials: u64,
    seed: u64,
) -> Result<Reproducibility> {
    if !qp.contains(a, COMMUTE_TOL)? {
        return Err(AqmError::Incompatible {
            context: qp.id().to_string(),
            observable: a.label().to_owned(),
        });
    }
    let first = StreamFactory::new(derive_seed(seed, 1));
    let second = StreamFactory::new(derive_seed(seed, 2));
    let tol = value_merge_tol(a);
    let agreements = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let m1 = measure(psi, a, q, &mut first.trial(t))?;
            let m2 = measure(&m1.post_state, a, qp, &mut second.trial(t))?;
            Ok(u64::from((m1.value - m2.value).abs() <= tol))
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    Ok(Reproducibility { trials, agreements })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhinchinReport {
    pub exact: f64,
    pub n_small: u64,
    pub n_large: u64,
    pub seeds: usize,
    pub median_error_small: f64,
    pub median_error_large: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Accepted band for the median-error ratio (theory: `sqrt(n_large/n_small)`).
pub const KHINCHIN_RATIO_BAND: (f64, f64) = (3.0, 33.0);

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Convergence rate of the sample mean: median absolute error over `seeds`
/// at `n_small` and `n_large` trials, and their ratio.
pub fn khinchin_scaling(
    psi: &QuantumState,
    a: &Observable,
    q: &Context,
    n_small: u64,
    n_large: u64,
    seeds: &[u64],
) -> Result<KhinchinReport> {
    if seeds.is_empty() {
        return Err(AqmError::InvalidArgument(
            "at least one seed required".into(),
        ));
    }
    let exact = psi.mean(a)?;
    let mut small = Vec::with_capacity(seeds.len());
    let mut large = Vec::with_capacity(seeds.len());
    for &s in seeds {
        small.push(
            (monte_carlo_mean(psi, a, q, n_small, derive_seed(s, 10))?.estimate - exact).abs(),
        );
        large.push(
            (monte_carlo_mean(psi, a, q, n_large, derive_seed(s, 11))?.estimate - exact).abs(),
        );
    }
    let median_error_small = median(small);
    let median_error_large = median(large);
    let ratio = median_error_small / median_error_large;
    Ok(KhinchinReport {
        exact,
        n_small,
        n_large,
        seeds: seeds.len(),
        median_error_small,
        median_error_large,
        ratio,
        pass: ratio >= KHINCHIN_RATIO_BAND.0 && ratio <= KHINCHIN_RATIO_BAND.1,
    })
}

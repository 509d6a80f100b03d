//! Matrix model of the algebra of dynamical variables.
//!
//! The algebra is the full matrix algebra `M_n(C)`. Observables are its
//! Hermitian elements. A [`Context`] is a complete family of orthogonal
//! projectors, i.e. the minimal projections of a commutative subalgebra; a
//! context made only of rank-1 projectors is a maximal abelian subalgebra.
//! A [`Character`] of a context picks one of its projectors and evaluates
//! every observable of the context to its eigenvalue on that projector.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AqmError, Result};
use crate::linalg::{
    self, commutator, ensure_dim, ensure_square, hermiticity_defect, max_abs, max_abs_diff,
    CMatrix, CVector,
};

/// Default Hermiticity tolerance (absolute, max-entry norm).
pub const HERM_TOL: f64 = 1e-10;
/// Default commutation tolerance, relative to `max(1, ‖A‖_max)`.
pub const COMMUTE_TOL: f64 = 1e-10;
/// Eigenvalues closer than this multiple of the spectral radius are merged.
pub const SPECTRAL_REL_TOL: f64 = 1e-8;
/// Tolerance for projector idempotence, orthogonality and completeness.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Minimum residual norm for a refinement vector to be accepted into a
/// degenerate eigenspace during Gram-Schmidt.
const REFINE_ACCEPT: f64 = 1e-8;

/// An element of the algebra: a square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalVariable(CMatrix);

impl DynamicalVariable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self(self.0.map(|x| x * z))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_defect(&self.0) <= tol
    }
}

/// A Hermitian element of the algebra.
///
/// The stored matrix is the exact Hermitian part of the input, so the
/// invariant holds to the last bit once construction succeeded.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    label: String,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tol(matrix, HERM_TOL)
    }

    pub fn with_tol(matrix: CMatrix, herm_tol: f64) -> Result<Self> {
        ensure_square(&matrix)?;
        let deviation = hermiticity_defect(&matrix);
        if !(deviation <= herm_tol) {
            return Err(AqmError::NotHermitian { deviation });
        }
        Ok(Self {
            matrix: linalg::hermitian_part(&matrix),
            label: "A".to_owned(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            label: "I".to_owned(),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self {
            matrix: linalg::diag_real(values),
            label: "A".to_owned(),
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn to_variable(&self) -> DynamicalVariable {
        DynamicalVariable(self.matrix.clone())
    }

    pub fn add(&self, other: &Observable) -> Result<Observable> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Observable {
            matrix: &self.matrix + &other.matrix,
            label: format!("{}+{}", self.label, other.label),
        })
    }

    pub fn scale(&self, factor: f64) -> Observable {
        Observable {
            matrix: self.matrix.scale(factor),
            label: format!("{}*{}", factor, self.label),
        }
    }

    /// `A²`, which is again Hermitian.
    pub fn square(&self) -> Observable {
        Observable {
            matrix: linalg::hermitian_part(&(&self.matrix * &self.matrix)),
            label: format!("{}^2", self.label),
        }
    }

    /// Spectral radius, the scale used for eigenvalue clustering.
    pub fn spectral_radius(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl TryFrom<DynamicalVariable> for Observable {
    type Error = AqmError;

    fn try_from(value: DynamicalVariable) -> Result<Self> {
        Observable::new(value.0)
    }
}

/// Opaque label of a context (a device type).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextId(String);

impl ContextId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ContextId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ContextId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// A complete family of mutually orthogonal Hermitian projectors.
#[derive(Clone, Debug)]
pub struct Context {
    id: ContextId,
    dim: usize,
    projectors: Vec<CMatrix>,
    ranks: Vec<usize>,
}

impl Context {
    /// Validates idempotence, Hermiticity, orthogonality and completeness
    /// within [`PROJECTOR_TOL`].
    pub fn new(id: impl Into<ContextId>, projectors: Vec<CMatrix>) -> Result<Self> {
        let id = id.into();
        let first = projectors
            .first()
            .ok_or_else(|| AqmError::InvalidContext(format!("`{id}` has no projectors")))?;
        let dim = ensure_square(first)?;
        let mut sum = CMatrix::zeros(dim, dim);
        let mut ranks = Vec::with_capacity(projectors.len());
        for (i, p) in projectors.iter().enumerate() {
            ensure_square(p)?;
            ensure_dim(dim, p.nrows())?;
            let herm = hermiticity_defect(p);
            let idem = max_abs_diff(&(p * p), p);
            if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
                return Err(AqmError::NotProjector(format!(
                    "`{id}` entry {i}: hermiticity {herm:e}, idempotence {idem:e}"
                )));
            }
            let rank = linalg::trace(p).re.round();
            if rank < 1.0 {
                return Err(AqmError::InvalidContext(format!(
                    "`{id}` entry {i} is zero"
                )));
            }
            ranks.push(rank as usize);
            sum += p;
        }
        for i in 0..projectors.len() {
            for j in (i + 1)..projectors.len() {
                let overlap = max_abs(&(&projectors[i] * &projectors[j]));
                if overlap > PROJECTOR_TOL {
                    return Err(AqmError::InvalidContext(format!(
                        "`{id}` projectors {i} and {j} overlap ({overlap:e})"
                    )));
                }
            }
        }
        let completeness = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if completeness > PROJECTOR_TOL {
            return Err(AqmError::InvalidContext(format!(
                "`{id}` projectors do not sum to identity ({completeness:e})"
            )));
        }
        Ok(Self {
            id,
            dim,
            projectors,
            ranks,
        })
    }

    /// Maximal context of rank-1 projectors onto the columns of an
    /// orthonormal basis.
    ///
    /// `P_i P_j = v_i (v_i† v_j) v_j†`, so the Gram defect of the basis
    /// bounds every pairwise overlap and no pairwise products are formed.
    pub fn from_basis(id: impl Into<ContextId>, basis: &CMatrix) -> Result<Self> {
        let id = id.into();
        let dim = ensure_square(basis)?;
        if dim == 0 {
            return Err(AqmError::InvalidContext(format!(
                "`{id}` has no projectors"
            )));
        }
        let gram = linalg::orthonormality_defect(basis);
        let completeness = max_abs_diff(&(basis * basis.adjoint()), &CMatrix::identity(dim, dim));
        if gram > PROJECTOR_TOL || completeness > PROJECTOR_TOL {
            return Err(AqmError::InvalidContext(format!(
                "`{id}` basis is not orthonormal (gram {gram:e}, completeness {completeness:e})"
            )));
        }
        let projectors = basis
            .column_iter()
            .map(|col| linalg::outer(&col.into_owned()))
            .collect();
        Ok(Self {
            id,
            dim,
            projectors,
            ranks: vec![1; dim],
        })
    }

    pub fn id(&self) -> &ContextId {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn projector(&self, branch: usize) -> Option<&CMatrix> {
        self.projectors.get(branch)
    }

    pub fn rank(&self, branch: usize) -> Option<usize> {
        self.ranks.get(branch).copied()
    }

    /// All projectors rank 1.
    pub fn is_maximal(&self) -> bool {
        self.ranks.iter().all(|&r| r == 1)
    }

    pub fn character(&self, branch: usize) -> Result<Character> {
        if branch >= self.len() {
            return Err(AqmError::BranchOutOfRange {
                context: self.id.to_string(),
                branch,
                len: self.len(),
            });
        }
        Ok(Character {
            context_id: self.id.clone(),
            branch,
        })
    }

    pub fn characters(&self) -> impl Iterator<Item = Character> + '_ {
        (0..self.len()).map(move |branch| Character {
            context_id: self.id.clone(),
            branch,
        })
    }

    /// True iff `a` commutes with every projector within
    /// `tol · max(1, ‖a‖_max)`.
    pub fn contains(&self, a: &Observable, tol: f64) -> Result<bool> {
        ensure_dim(self.dim, a.dim())?;
        let bound = tol * max_abs(a.matrix()).max(1.0);
        Ok(self
            .projectors
            .iter()
            .all(|p| max_abs(&commutator(a.matrix(), p)) <= bound))
    }

    /// Value the character assigns to `a`.
    pub fn evaluate(&self, chi: &Character, a: &Observable) -> Result<f64> {
        if chi.context_id != self.id {
            return Err(AqmError::ContextMismatch {
                expected: self.id.to_string(),
                found: chi.context_id.to_string(),
            });
        }
        let p = self
            .projector(chi.branch)
            .ok_or(AqmError::BranchOutOfRange {
                context: self.id.to_string(),
                branch: chi.branch,
                len: self.len(),
            })?;
        if !self.contains(a, COMMUTE_TOL)? {
            return Err(self.incompatible(a));
        }
        self.branch_value(p, self.ranks[chi.branch], a)
    }

    /// Eigenvalue of `a` on every branch, in branch order.
    pub fn branch_values(&self, a: &Observable) -> Result<Vec<f64>> {
        if !self.contains(a, COMMUTE_TOL)? {
            return Err(self.incompatible(a));
        }
        self.projectors
            .iter()
            .zip(&self.ranks)
            .map(|(p, &rank)| self.branch_value(p, rank, a))
            .collect()
    }

    fn branch_value(&self, p: &CMatrix, rank: usize, a: &Observable) -> Result<f64> {
        let value = linalg::trace_of_product(p, a.matrix()).re / rank as f64;
        // Non-maximal contexts may hold observables that are not constant on
        // a branch; those have no character value.
        let residual = max_abs_diff(&(a.matrix() * p), &p.scale(value));
        if residual > COMMUTE_TOL * max_abs(a.matrix()).max(1.0) {
            return Err(self.incompatible(a));
        }
        Ok(value)
    }

    fn incompatible(&self, a: &Observable) -> AqmError {
        AqmError::Incompatible {
            context: self.id.to_string(),
            observable: a.label().to_owned(),
        }
    }
}

/// Character of one context: selects a branch (joint eigenprojector).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Character {
    pub context_id: ContextId,
    pub branch: usize,
}

/// One term `(λ, P)` of a spectral decomposition.
#[derive(Clone, Debug)]
pub struct SpectralComponent {
    pub eigenvalue: f64,
    pub projector: CMatrix,
}

/// True iff `‖AB − BA‖_max ≤ tol`.
pub fn commutes(a: &Observable, b: &Observable, tol: f64) -> Result<bool> {
    ensure_dim(a.dim(), b.dim())?;
    Ok(max_abs(&commutator(a.matrix(), b.matrix())) <= tol)
}

/// Eigenvalues in descending order with their eigenprojectors; eigenvalues
/// within `SPECTRAL_REL_TOL` of the spectral radius are merged.
pub fn spectral_decompose(a: &Observable) -> Vec<SpectralComponent> {
    spectral_decompose_with(a, SPECTRAL_REL_TOL)
}

pub fn spectral_decompose_with(a: &Observable, rel_tol: f64) -> Vec<SpectralComponent> {
    eigenspaces(a.matrix(), rel_tol, None)
        .into_iter()
        .map(|space| SpectralComponent {
            eigenvalue: space.value,
            projector: linalg::span_projector(&space.basis),
        })
        .collect()
}

/// Context generated by `a`, with degenerate eigenspaces split into rank-1
/// projectors by Gram-Schmidt over `refinement` (columns; default: the
/// standard basis). Projectors are ordered by descending eigenvalue, then
/// by refinement order.
pub fn masa_from(
    id: impl Into<ContextId>,
    a: &Observable,
    refinement: Option<&CMatrix>,
) -> Result<Context> {
    masa_from_commuting(id, &[a], refinement)
}

/// Common maximal context of two commuting observables.
pub fn masa_from_pair(id: impl Into<ContextId>, a: &Observable, b: &Observable) -> Result<Context> {
    masa_from_commuting(id, &[a, b], None)
}

/// Joint eigenbasis of pairwise commuting observables: each observable in
/// turn splits the eigenspaces left by the previous ones, and whatever
/// degeneracy remains is resolved with `refinement`.
pub fn masa_from_commuting(
    id: impl Into<ContextId>,
    observables: &[&Observable],
    refinement: Option<&CMatrix>,
) -> Result<Context> {
    let first = observables
        .first()
        .ok_or_else(|| AqmError::InvalidArgument("no observables given".into()))?;
    let dim = first.dim();
    for (i, a) in observables.iter().enumerate() {
        ensure_dim(dim, a.dim())?;
        for b in &observables[i + 1..] {
            let deviation = max_abs(&commutator(a.matrix(), b.matrix()));
            let bound = COMMUTE_TOL * max_abs(a.matrix()).max(max_abs(b.matrix())).max(1.0);
            if deviation > bound {
                return Err(AqmError::NotCommuting { deviation });
            }
        }
    }
    if let Some(basis) = refinement {
        ensure_square(basis)?;
        if basis.nrows() != dim {
            return Err(AqmError::InvalidRefinement(format!(
                "basis has dimension {}, expected {dim}",
                basis.nrows()
            )));
        }
        check_orthonormal_basis(basis, dim)?;
    }

    let mut spaces = vec![CMatrix::identity(dim, dim)];
    for a in observables {
        let scale = a.spectral_radius();
        let mut next = Vec::with_capacity(dim);
        for basis in &spaces {
            if basis.ncols() == 1 {
                next.push(basis.clone());
                continue;
            }
            let restricted = linalg::hermitian_part(&(basis.adjoint() * a.matrix() * basis));
            for sub in eigenspaces(&restricted, SPECTRAL_REL_TOL, Some(scale)) {
                next.push(basis * sub.basis);
            }
        }
        spaces = next;
    }

    let standard;
    let candidates = match refinement {
        Some(b) => b,
        None => {
            standard = CMatrix::identity(dim, dim);
            &standard
        }
    };
    let mut columns: Vec<CVector> = Vec::with_capacity(dim);
    for basis in &spaces {
        if basis.ncols() == 1 {
            columns.push(basis.column(0).into_owned());
        } else {
            columns.extend(refine_subspace(basis, candidates)?);
        }
    }
    Context::from_basis(id, &CMatrix::from_columns(&columns))
}

/// Module-level alias of [`Context::contains`].
pub fn contains(q: &Context, a: &Observable, tol: f64) -> Result<bool> {
    q.contains(a, tol)
}

/// Module-level alias of [`Context::evaluate`].
pub fn evaluate(q: &Context, chi: &Character, a: &Observable) -> Result<f64> {
    q.evaluate(chi, a)
}

struct Eigenspace {
    value: f64,
    basis: CMatrix,
}

/// Eigenspaces of a Hermitian matrix in descending eigenvalue order.
/// Adjacent eigenvalues closer than `rel_tol · scale` are merged, `scale`
/// defaulting to the spectral radius of `m`.
fn eigenspaces(m: &CMatrix, rel_tol: f64, scale: Option<f64>) -> Vec<Eigenspace> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let radius = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = rel_tol * scale.unwrap_or(radius);

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match clusters.last_mut() {
            Some(cluster)
                if eig.eigenvalues[*cluster.last().unwrap()] - eig.eigenvalues[idx]
                    <= threshold =>
            {
                cluster.push(idx)
            }
            _ => clusters.push(vec![idx]),
        }
    }
    clusters
        .into_iter()
        .map(|cluster| {
            let value =
                cluster.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
            let columns: Vec<CVector> = cluster
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect();
            Eigenspace {
                value,
                basis: CMatrix::from_columns(&columns),
            }
        })
        .collect()
}

/// Orthonormal basis of span(`basis`) built by Gram-Schmidt over the
/// projections of the `candidates` columns, in order.
fn refine_subspace(basis: &CMatrix, candidates: &CMatrix) -> Result<Vec<CVector>> {
    let k = basis.ncols();
    let mut accepted: Vec<CVector> = Vec::with_capacity(k);
    for u in candidates.column_iter() {
        if accepted.len() == k {
            break;
        }
        let mut w = basis * (basis.adjoint() * u);
        for _ in 0..2 {
            for v in &accepted {
                let overlap = v.dotc(&w);
                w -= v * overlap;
            }
            w = basis * (basis.adjoint() * &w);
        }
        let norm = w.norm();
        if norm > REFINE_ACCEPT {
            accepted.push(w.unscale(norm));
        }
    }
    if accepted.len() < k {
        return Err(AqmError::InvalidRefinement(format!(
            "refinement spans only {} of {k} degenerate directions",
            accepted.len()
        )));
    }
    Ok(accepted)
}

fn check_orthonormal_basis(basis: &CMatrix, dim: usize) -> Result<()> {
    if basis.nrows() != dim || basis.ncols() != dim {
        return Err(AqmError::InvalidRefinement(format!(
            "expected {dim}x{dim} basis, found {}x{}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let defect = linalg::orthonormality_defect(basis);
    if defect > PROJECTOR_TOL {
        return Err(AqmError::InvalidRefinement(format!(
            "columns are not orthonormal (defect {defect:e})"
        )));
    }
    Ok(())
}

/// A finite registered family of contexts of equal dimension.
#[derive(Clone, Debug, Default)]
pub struct ContextFamily {
    contexts: BTreeMap<ContextId, Context>,
}

impl ContextFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_contexts(contexts: impl IntoIterator<Item = Context>) -> Result<Self> {
        let mut family = Self::new();
        for q in contexts {
            family.insert(q)?;
        }
        Ok(family)
    }

    pub fn insert(&mut self, context: Context) -> Result<()> {
        if let Some(existing) = self.contexts.values().next() {
            ensure_dim(existing.dim(), context.dim())?;
        }
        if self.contexts.contains_key(context.id()) {
            return Err(AqmError::DuplicateContext(context.id().to_string()));
        }
        self.contexts.insert(context.id().clone(), context);
        Ok(())
    }

    pub fn get(&self, id: &ContextId) -> Option<&Context> {
        self.contexts.get(id)
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.contexts.values().next().map(Context::dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Context> {
        self.contexts.values()
    }

    /// Contexts containing `a`, in id order.
    pub fn containing<'a>(&'a self, a: &Observable, tol: f64) -> Result<Vec<&'a Context>> {
        let mut out = Vec::new();
        for q in self.contexts.values() {
            if q.contains(a, tol)? {
                out.push(q);
            }
        }
        Ok(out)
    }
}

/// Per-context assignment of characters; contexts may be filled lazily.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElementaryState {
    assignment: BTreeMap<ContextId, Character>,
}

impl ElementaryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_characters(
        family: &ContextFamily,
        characters: impl IntoIterator<Item = Character>,
    ) -> Result<Self> {
        let mut phi = Self::new();
        for chi in characters {
            phi.assign(family, chi)?;
        }
        Ok(phi)
    }

    /// Stores `chi` after checking it names a registered context and a
    /// valid branch. Replaces any earlier character for that context.
    pub fn assign(&mut self, family: &ContextFamily, chi: Character) -> Result<()> {
        let q = family
            .get(&chi.context_id)
            .ok_or_else(|| AqmError::UnknownContext(chi.context_id.to_string()))?;
        q.character(chi.branch)?;
        self.assignment.insert(chi.context_id.clone(), chi);
        Ok(())
    }

    pub fn character(&self, id: &ContextId) -> Option<&Character> {
        self.assignment.get(id)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn characters(&self) -> impl Iterator<Item = &Character> {
        self.assignment.values()
    }
}

/// True iff every character of `phi` on a family context containing `a`
/// gives `a` the same value within `tol`.
pub fn is_stable(
    phi: &ElementaryState,
    a: &Observable,
    family: &ContextFamily,
    tol: f64,
) -> Result<bool> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in family.containing(a, COMMUTE_TOL)? {
        let chi = phi
            .character(q.id())
            .ok_or_else(|| AqmError::Indeterminate(q.id().to_string()))?;
        let v = q.evaluate(chi, a)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(!(hi - lo > tol))
}

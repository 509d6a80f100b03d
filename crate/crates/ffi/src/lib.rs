//! C ABI over `aqm-core`.
//!
//! States and contexts are opaque heap handles released with their `_free`
//! function. Every call returns an [`AqmStatus`]; on failure the message is
//! kept per thread and can be copied out with [`aqm_last_error_message`].
//! Matrices are passed row-major as `dim * dim` [`AqmComplex`] values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aqm_core::algebra::{self, Context, Observable};
use aqm_core::ensemble::{self, QuantumState};
use aqm_core::interferometer::{self, BuiltinPolicy, DeviceConfig};
use aqm_core::linalg::CMatrix;
use aqm_core::rng::TrialRng;
use aqm_core::two_slit::{self, SlitGeometry};
use aqm_core::AqmError;
use num_complex::Complex64;

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AqmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotHermitian = 4,
    InvalidState = 5,
    InvalidContext = 6,
    Incompatible = 7,
    ImpossibleEvent = 8,
    InvalidGeometry = 9,
    ModelViolation = 10,
    NonUnitarySplitter = 11,
    BufferTooSmall = 12,
    Internal = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AqmComplex {
    pub re: f64,
    pub im: f64,
}

/// Opaque density-matrix handle.
pub struct AqmState(QuantumState);

/// Opaque context handle.
pub struct AqmContext(Context);

/// Choice policy selector for [`aqm_interferometer_equivalence`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AqmPolicy {
    AlwaysAbsent = 0,
    AlwaysPresent = 1,
    DelayedRandom = 2,
    DelayedAlternating = 3,
}

/// Detector statistics per `M4` sub-ensemble. Event counts are zero for an
/// empty sub-ensemble.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AqmEquivalence {
    pub absent_events: u64,
    pub absent_freq_da: f64,
    pub absent_freq_db: f64,
    pub present_events: u64,
    pub present_freq_da: f64,
    pub present_freq_db: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(AqmStatus, String);

impl From<AqmError> for Failure {
    fn from(e: AqmError) -> Self {
        let status = match &e {
            AqmError::DimensionMismatch { .. } | AqmError::NotSquare { .. } => {
                AqmStatus::DimensionMismatch
            }
            AqmError::NotHermitian { .. } => AqmStatus::NotHermitian,
            AqmError::InvalidState(_) | AqmError::NotConditioned { .. } => AqmStatus::InvalidState,
            AqmError::NotProjector(_)
            | AqmError::InvalidContext(_)
            | AqmError::InvalidRefinement(_)
            | AqmError::NotCommuting { .. } => AqmStatus::InvalidContext,
            AqmError::Incompatible { .. } | AqmError::ContextMismatch { .. } => {
                AqmStatus::Incompatible
            }
            AqmError::ImpossibleEvent { .. } => AqmStatus::ImpossibleEvent,
            AqmError::InvalidGeometry(_) | AqmError::BinOutOfRange { .. } => {
                AqmStatus::InvalidGeometry
            }
            AqmError::ModelViolation { .. } => AqmStatus::ModelViolation,
            AqmError::NonUnitarySplitter { .. } => AqmStatus::NonUnitarySplitter,
            _ => AqmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AqmStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AqmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AqmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AqmStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn matrix(p: *const AqmComplex, dim: usize, what: &str) -> Result<CMatrix, Failure> {
    if dim == 0 {
        return Err(Failure(
            AqmStatus::InvalidArgument,
            "dimension is zero".into(),
        ));
    }
    let data = slice(p, dim * dim, what)?;
    Ok(CMatrix::from_row_iterator(
        dim,
        dim,
        data.iter().map(|z| Complex64::new(z.re, z.im)),
    ))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aqm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn aqm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Pure state from `dim` amplitudes (normalized internally).
///
/// # Safety
/// `amplitudes` must point to `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_state_from_pure(
    amplitudes: *const AqmComplex,
    dim: usize,
    out_state: *mut *mut AqmState,
) -> AqmStatus {
    guard(|| {
        let out_state = out(out_state, "out_state")?;
        if dim == 0 {
            return Err(Failure(
                AqmStatus::InvalidArgument,
                "dimension is zero".into(),
            ));
        }
        let amps: Vec<Complex64> = slice(amplitudes, dim, "amplitudes")?
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        *out_state = boxed(AqmState(QuantumState::pure(&amps)?));
        Ok(())
    })
}

/// State from a density matrix.
///
/// # Safety
/// `rho` must point to `dim * dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_state_from_density(
    rho: *const AqmComplex,
    dim: usize,
    out_state: *mut *mut AqmState,
) -> AqmStatus {
    guard(|| {
        let out_state = out(out_state, "out_state")?;
        let m = matrix(rho, dim, "rho")?;
        *out_state = boxed(AqmState(QuantumState::new(m)?));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aqm_state_free(state: *mut AqmState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live handle; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_state_dim(state: *const AqmState, out_dim: *mut usize) -> AqmStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        *out(out_dim, "out_dim")? = s.0.dim();
        Ok(())
    })
}

/// `tr(ρX)` for a `dim × dim` matrix `x`.
///
/// # Safety
/// `state` must be a live handle, `x` must point to `dim * dim` values.
#[no_mangle]
pub unsafe extern "C" fn aqm_state_expectation(
    state: *const AqmState,
    x: *const AqmComplex,
    dim: usize,
    out_value: *mut AqmComplex,
) -> AqmStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        let out_value = out(out_value, "out_value")?;
        let z = s.0.expectation(&matrix(x, dim, "x")?)?;
        *out_value = AqmComplex { re: z.re, im: z.im };
        Ok(())
    })
}

/// Maximal context diagonalizing the Hermitian matrix `a`; degenerate
/// eigenspaces are split along the standard basis.
///
/// # Safety
/// `id` must be a NUL-terminated UTF-8 string, `a` must point to
/// `dim * dim` values.
#[no_mangle]
pub unsafe extern "C" fn aqm_context_from_observable(
    id: *const c_char,
    a: *const AqmComplex,
    dim: usize,
    out_context: *mut *mut AqmContext,
) -> AqmStatus {
    guard(|| {
        let out_context = out(out_context, "out_context")?;
        if id.is_null() {
            return Err(null("id"));
        }
        let id = CStr::from_ptr(id)
            .to_str()
            .map_err(|_| Failure(AqmStatus::InvalidArgument, "id is not UTF-8".into()))?;
        let obs = Observable::new(matrix(a, dim, "a")?)?;
        *out_context = boxed(AqmContext(algebra::masa_from(id, &obs, None)?));
        Ok(())
    })
}

/// Number of projectors in the context.
///
/// # Safety
/// `context` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_context_len(
    context: *const AqmContext,
    out_len: *mut usize,
) -> AqmStatus {
    guard(|| {
        let q = context.as_ref().ok_or_else(|| null("context"))?;
        *out(out_len, "out_len")? = q.0.len();
        Ok(())
    })
}

/// # Safety
/// `context` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aqm_context_free(context: *mut AqmContext) {
    if !context.is_null() {
        drop(Box::from_raw(context));
    }
}

/// Born probabilities of the context's branches; `len` must equal the
/// context length.
///
/// # Safety
/// Handles must be live; `probs` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn aqm_born_distribution(
    state: *const AqmState,
    context: *const AqmContext,
    probs: *mut f64,
    len: usize,
) -> AqmStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        let q = context.as_ref().ok_or_else(|| null("context"))?;
        let dist = ensemble::born_distribution(&s.0, &q.0)?;
        if len < dist.probs.len() {
            return Err(Failure(
                AqmStatus::BufferTooSmall,
                format!("need {} entries, got {len}", dist.probs.len()),
            ));
        }
        slice_mut(probs, dist.probs.len(), "probs")?.copy_from_slice(&dist.probs);
        Ok(())
    })
}

/// Measures the Hermitian matrix `a` with the context on stream
/// `(seed, trial)`. Writes the value, the branch index and a new handle to
/// the post-measurement state.
///
/// # Safety
/// Handles must be live, `a` must point to `dim * dim` values and the
/// out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_measure(
    state: *const AqmState,
    a: *const AqmComplex,
    dim: usize,
    context: *const AqmContext,
    seed: u64,
    trial: u64,
    out_value: *mut f64,
    out_branch: *mut usize,
    out_post: *mut *mut AqmState,
) -> AqmStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        let q = context.as_ref().ok_or_else(|| null("context"))?;
        let out_value = out(out_value, "out_value")?;
        let out_branch = out(out_branch, "out_branch")?;
        let out_post = out(out_post, "out_post")?;
        let obs = Observable::new(matrix(a, dim, "a")?)?;
        let m = ensemble::measure(&s.0, &obs, &q.0, &mut TrialRng::new(seed, trial))?;
        *out_value = m.value;
        *out_branch = m.character.branch;
        *out_post = boxed(AqmState(m.post_state));
        Ok(())
    })
}

/// `EρE / tr(ρE)` for a projector `e`.
///
/// # Safety
/// `state` must be live, `e` must point to `dim * dim` values.
#[no_mangle]
pub unsafe extern "C" fn aqm_condition_on_event(
    state: *const AqmState,
    e: *const AqmComplex,
    dim: usize,
    out_state: *mut *mut AqmState,
) -> AqmStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        let out_state = out(out_state, "out_state")?;
        let post = ensemble::condition_on_event(&s.0, &matrix(e, dim, "e")?)?;
        *out_state = boxed(AqmState(post));
        Ok(())
    })
}

/// Wave-model detector probabilities of the interferometer with the
/// standard splitter and an extra phase on path A.
///
/// # Safety
/// The out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_wave_probabilities(
    m4_present: bool,
    path_a_phase: f64,
    out_p_da: *mut f64,
    out_p_db: *mut f64,
) -> AqmStatus {
    guard(|| {
        let out_p_da = out(out_p_da, "out_p_da")?;
        let out_p_db = out(out_p_db, "out_p_db")?;
        let config = DeviceConfig {
            path_a_phase,
            ..DeviceConfig::position_a().with_m4(m4_present)
        };
        let (da, db) = interferometer::wave_probabilities(&config)?;
        *out_p_da = da;
        *out_p_db = db;
        Ok(())
    })
}

/// Runs `n` particle-model events and compares each `M4` sub-ensemble
/// with the wave model. `p` and `policy_seed` are used only by
/// [`AqmPolicy::DelayedRandom`].
///
/// # Safety
/// `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aqm_interferometer_equivalence(
    policy: AqmPolicy,
    p: f64,
    policy_seed: u64,
    n: u64,
    seed: u64,
    out_report: *mut AqmEquivalence,
) -> AqmStatus {
    guard(|| {
        let out_report = out(out_report, "out_report")?;
        let policy = match policy {
            AqmPolicy::AlwaysAbsent => BuiltinPolicy::Always { m4_present: false },
            AqmPolicy::AlwaysPresent => BuiltinPolicy::Always { m4_present: true },
            AqmPolicy::DelayedRandom => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Failure(
                        AqmStatus::InvalidArgument,
                        format!("p = {p} is not a probability"),
                    ));
                }
                BuiltinPolicy::DelayedRandom {
                    p,
                    seed: policy_seed,
                }
            }
            AqmPolicy::DelayedAlternating => BuiltinPolicy::DelayedAlternating,
        };
        let r = interferometer::equivalence_report(&policy, n, seed)?;
        let mut report = AqmEquivalence {
            max_deviation: r.max_deviation,
            pass: r.pass,
            ..Default::default()
        };
        if let Some(a) = &r.absent {
            report.absent_events = a.events;
            report.absent_freq_da = a.freq_da;
            report.absent_freq_db = a.freq_db;
        }
        if let Some(b) = &r.present {
            report.present_events = b.events;
            report.present_freq_da = b.freq_da;
            report.present_freq_db = b.freq_db;
        }
        *out_report = report;
        Ok(())
    })
}

unsafe fn geometry(
    sites: usize,
    slit_a: *const usize,
    len_a: usize,
    slit_b: *const usize,
    len_b: usize,
) -> Result<SlitGeometry, Failure> {
    let a = slice(slit_a, len_a, "slit_a")?.to_vec();
    let b = slice(slit_b, len_b, "slit_b")?.to_vec();
    Ok(SlitGeometry::new(sites, a, b)?)
}

unsafe fn source(amplitudes: *const AqmComplex, sites: usize) -> Result<QuantumState, Failure> {
    if amplitudes.is_null() {
        return Ok(two_slit::uniform_source(sites));
    }
    let amps: Vec<Complex64> = slice(amplitudes, sites, "source")?
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    Ok(QuantumState::pure(&amps)?)
}

/// Per-site momentum pattern of a two-slit device: the slit-a and slit-b
/// terms, the interference term and the total, each written to an array of
/// `sites` values. A null `source` selects the uniform source.
///
/// # Safety
/// `slit_a`/`slit_b` must point to `len_a`/`len_b` indices, `source` must
/// be null or point to `sites` amplitudes, and each output array must hold
/// `sites` values.
#[no_mangle]
pub unsafe extern "C" fn aqm_two_slit_pattern(
    sites: usize,
    slit_a: *const usize,
    len_a: usize,
    slit_b: *const usize,
    len_b: usize,
    source_amplitudes: *const AqmComplex,
    out_direct_a: *mut f64,
    out_direct_b: *mut f64,
    out_interference: *mut f64,
    out_total: *mut f64,
) -> AqmStatus {
    guard(|| {
        let geom = geometry(sites, slit_a, len_a, slit_b, len_b)?;
        let psi0 = source(source_amplitudes, sites)?;
        let direct_a = slice_mut(out_direct_a, sites, "out_direct_a")?;
        let direct_b = slice_mut(out_direct_b, sites, "out_direct_b")?;
        let interference = slice_mut(out_interference, sites, "out_interference")?;
        let total = slice_mut(out_total, sites, "out_total")?;
        let (p_a, p_b) = two_slit::slit_projectors(&geom)?;
        let psi_ab = two_slit::prepare_conditioned(&psi0, &p_a, &p_b)?;
        let pat = two_slit::pattern(&psi_ab, &geom)?;
        for (k, bin) in pat.bins.iter().enumerate() {
            direct_a[k] = bin.direct_a;
            direct_b[k] = bin.direct_b;
            interference[k] = bin.interference;
            total[k] = bin.total;
        }
        Ok(())
    })
}

/// Stacked single-event screens: writes the histogram over `sites` momentum
/// sites and how many events went through each slit.
///
/// # Safety
/// As for [`aqm_two_slit_pattern`]; `out_histogram` must hold `sites`
/// values.
#[no_mangle]
pub unsafe extern "C" fn aqm_stacked_screens(
    sites: usize,
    slit_a: *const usize,
    len_a: usize,
    slit_b: *const usize,
    len_b: usize,
    source_amplitudes: *const AqmComplex,
    n_events: u64,
    seed: u64,
    out_histogram: *mut u64,
    out_count_a: *mut u64,
    out_count_b: *mut u64,
) -> AqmStatus {
    guard(|| {
        let geom = geometry(sites, slit_a, len_a, slit_b, len_b)?;
        let psi0 = source(source_amplitudes, sites)?;
        let histogram = slice_mut(out_histogram, sites, "out_histogram")?;
        let count_a = out(out_count_a, "out_count_a")?;
        let count_b = out(out_count_b, "out_count_b")?;
        let run = two_slit::stacked_screens(&psi0, &geom, n_events, seed)?;
        histogram.copy_from_slice(&run.histogram);
        *count_a = run.slit_tally.0;
        *count_b = run.slit_tally.1;
        Ok(())
    })
}

use thiserror::Error;

/// Errors raised by the algebra, ensemble and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AqmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("not a projector: {0}")]
    NotProjector(String),

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("invalid refinement basis: {0}")]
    InvalidRefinement(String),

    #[error("observables do not commute (max commutator entry {deviation:e})")]
    NotCommuting { deviation: f64 },

    /// The observable does not belong to the context, so a device of this
    /// type cannot assign it a value.
    #[error("observable `{observable}` is not contained in context `{context}`")]
    Incompatible { context: String, observable: String },

    #[error("branch {branch} out of range for context `{context}` with {len} projectors")]
    BranchOutOfRange {
        context: String,
        branch: usize,
        len: usize,
    },

    #[error("character belongs to context `{found}`, expected `{expected}`")]
    ContextMismatch { expected: String, found: String },

    #[error("duplicate context id `{0}`")]
    DuplicateContext(String),

    #[error("unknown context id `{0}`")]
    UnknownContext(String),

    /// The elementary state lacks a character for a context that contains
    /// the observable, so stability cannot be decided.
    #[error("elementary state has no character for context `{0}`")]
    Indeterminate(String),

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("event has zero probability (mass {mass:e})")]
    ImpossibleEvent { mass: f64 },

    #[error("invalid slit geometry: {0}")]
    InvalidGeometry(String),

    #[error("momentum bin {start}..{end} out of range for {sites} sites")]
    BinOutOfRange {
        start: usize,
        end: usize,
        sites: usize,
    },

    #[error("state is not conditioned on the slits (|1 - Psi(p_a + p_b)| = {residual:e})")]
    NotConditioned { residual: f64 },

    /// The kernel + dark-field sampler would need a negative conditional
    /// probability larger than the clamp allowance.
    #[error(
        "model violation: slit {slit} has negative conditional mass {negative_mass:e} \
         (clamp limit {limit:e}); the equal-split kernel sampler cannot reproduce this pattern"
    )]
    ModelViolation {
        slit: char,
        negative_mass: f64,
        limit: f64,
    },

    #[error("beam splitter is not unitary (deviation {deviation:e})")]
    NonUnitarySplitter { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AqmError>;

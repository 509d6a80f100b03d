//! Finite-dimensional algebraic quantum mechanics.
//!
//! * [`algebra`]: observables, contexts (commutative subalgebras given by
//!   projector families), characters, elementary states and stability.
//! * [`ensemble`]: density-matrix states, Born-rule sampling of
//!   characters, Lüders updates, Monte Carlo means and the checks of
//!   device independence and linearity.
//! * [`two_slit`]: conditioned two-slit states, the three-term momentum
//!   decomposition and the per-event stacked-screens sampler.
//! * [`interferometer`]: the delayed-choice Mach-Zehnder device under a
//!   wave model and a kernel + dark-field particle model.
//! * [`cli`]: the `aqm` command line.

pub mod algebra;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod interferometer;
pub mod linalg;
pub mod random;
pub mod rng;
pub mod serial;
pub mod two_slit;

pub use error::{AqmError, Result};

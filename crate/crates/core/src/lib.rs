//! Monte Carlo toolkit for fluctuating Brownian functionals.
//!
//! The object of study is X_t = int_0^t V(B_s) ds for a linear Brownian
//! motion B and the two-sided power kernel V(x) = x^alpha (x >= 0),
//! -lambda |x|^alpha (x < 0). The crate samples the bilateral exit time
//! T_ab = inf{ t : X_t not in (-a, b) }, fits the exponential tail rate of
//! P[T_ab > t], estimates small-ball probabilities of sup_[0,1] |X|, and
//! checks the structural identities that tie these quantities together:
//! self-similarity of X, the shrink/rescale window map, submultiplicativity
//! of the sup-over-starts survival function, the inverse-local-time view
//! (stable subordinator, time-changed stable process, exit-level
//! inequality), and the liminf normalization of the running supremum.
//!
//! Everything is a pure function of its inputs; random streams are keyed by
//! `(seed, replicate_id)`, so batches parallelize with results independent
//! of scheduling.

pub mod error;
pub mod estimators;
pub mod exit;
pub mod kernel;
pub mod levy;
pub mod lil;
pub mod stats;

pub use error::{Error, Result};
pub use exit::{ExitRecord, ExitSide, StartState, Window};
pub use kernel::{Kernel, PathSpec, SamplePath};

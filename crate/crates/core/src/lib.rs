//! Numerical engine for self-testing many-body singlets from coarse-grained
//! Bell statistics.
//!
//! The toolkit evaluates a permutation-invariant chained-type Bell expression
//! built from two-body correlators, reproduces its classical and quantum
//! bounds, verifies the sum-of-squares decomposition of the shifted Bell
//! operator as an exact matrix identity, performs the SWAP-isometry state
//! extraction with spectral regularization, and checks the accompanying
//! robustness bound — all by exact dense simulation at small party number.
//!
//! Modules follow the pipeline:
//!
//! - [`hilbert`] — dense operator algebra: embeddings, partial trace,
//!   collective spin, sign regularization.
//! - [`bellspec`] — the inequality instance, correlator tables, Bell values,
//!   closed-form classical and quantum bounds.
//! - [`lhv`] — brute-force enumeration of deterministic local strategies; the
//!   independent oracle for the classical bound.
//! - [`quantum`] — the qubit realization: planar measurements, the singlet
//!   manifold, rotated singlets, noise families.
//! - [`sos`] — black-box models, the Bell operator, sum-of-squares residuals
//!   and the operator relations they certify.
//! - [`swap`] — the SWAP-isometry extraction and the robustness bound.
//! - [`sampler`] — finite-statistics simulation and estimation.
//! - [`cli`] — the command-line surface used by the `singlet-selftest` binary.

pub mod bellspec;
pub mod cli;
pub mod error;
pub mod hilbert;
pub mod lhv;
pub mod quantum;
mod randutil;
pub mod sampler;
pub mod sos;
pub mod swap;

pub use error::{Error, Result};

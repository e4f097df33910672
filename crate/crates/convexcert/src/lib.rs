//! Sampling-based certification of convexity, smoothness, strong convexity
//! and the gradient-dominance inequality on concrete objective functions,
//! together with gradient-descent rate verification.
//!
//! The library evaluates each characterization as a falsification check
//! over a seeded cloud of point pairs: a violated inequality surfaces a
//! concrete witness, a satisfied one reports its worst margin. Constants
//! can also be estimated empirically (with their sampling bias made
//! explicit) and fed back into the checks. A gradient-descent engine
//! records optimality-gap traces and verifies per-step descent guarantees
//! plus the two linear contraction factors `1 - nu/L` and
//! `(L - nu)/(L + nu)` on executed runs.
//!
//! Everything is deterministic given a seed; see [`linalg`] for the stream
//! layout of the generator. The `convexcert` binary wires the pieces into
//! reproducible report files; see [`cli`] for the catalog grammar and the
//! file schemas.

pub mod bregman;
pub mod certify;
pub mod cli;
pub mod conjugate;
pub mod error;
pub mod gd;
pub mod linalg;
pub mod matrix;
pub mod objectives;

pub use certify::{
    check_condition, check_family, estimate_l, estimate_mu, estimate_pl, CertReport, ConditionId,
    ConstantEstimate, Constants, Family, Witness,
};
pub use conjugate::{
    conjugate_numeric, conjugate_quadratic, dual_shift_check, fenchel_identity_residual,
    inverse_gradient, ConjugateSolverParams,
};
pub use error::{Error, Result};
pub use gd::{
    compare_rates, gd_run, gd_step, model_argmin, verify_descent_inequalities, verify_rate,
    GdConfig, GdTrace, RatePair,
};
pub use linalg::{dot, fd_gradient, norm, sample_pairs, sample_points, SampleCloud, Vector};
pub use objectives::{Objective, ObjectiveMeta};

//! Approximation of a positive-definite covariance by a factor-analysis
//! covariance `H H^T + D` (low rank plus positive diagonal), minimizing the
//! I-divergence between the corresponding zero-mean Gaussian laws.
//!
//! The solver alternates two closed-form partial minimizations over a lifted
//! space of block covariances; see [`lifted`] for the geometry and [`altmin`]
//! for the iteration. [`matops`] carries the dense symmetric/partitioned
//! matrix kernels, [`divergence`] the objective, and [`harness`] seeded
//! problem generators and probe oracles for testing.
//!
//! The crate is `no_std` (with `alloc`); all state lives in the values the
//! functions return, so everything can be called concurrently.

#![no_std]
// Negated float comparisons like `!(v > 0.0)` are deliberate here: they
// treat NaN the same as an out-of-range value.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod altmin;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod lifted;
pub mod matops;
pub mod rng;

#[cfg(test)]
pub(crate) mod testutil;

pub use altmin::{
    alg1_step, alg2_step, fit, fixed_point_residual, init_model, stationarity_check, FitConfig,
    FitResult, FitTrace, Init, IterRecord, Termination, Variant,
};
pub use divergence::{i_divergence, objective, CovarianceMatrix};
pub use error::{Error, Result};
pub use harness::{
    plant_model, probe_oracle_first_min, probe_oracle_second_min, sample_covariance,
    SyntheticSpec,
};
pub use lifted::{
    assemble_lifted, exact_fa_diagnostic, first_partial_min, pythagoras_first, pythagoras_second,
    second_partial_min, FactorModel, LiftedCovariance,
};
pub use matops::{BlockPartition, Mat, SymMatrix};

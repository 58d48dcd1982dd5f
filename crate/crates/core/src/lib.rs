//! Strassen's optimal excess-cost probability for product distributions on
//! finite alphabets.
//!
//! The crate computes `G_α(P_X^n, P_Y^n)`, the smallest probability over all
//! couplings that the per-letter average cost exceeds `α`, exactly at finite
//! `n` by lifting the problem to the lattice of empirical types. On top of
//! that it evaluates the large-deviation, moderate-deviation and central-limit
//! characterisations of the same quantity so they can be checked against the
//! exact values.
//!
//! Layout:
//!
//! * [`measures`]: distributions, KL / TV / χ² functionals, coupling transfer.
//! * [`transport`]: Monge–Kantorovich cost, Strassen ECP via max-flow,
//!   duality certificates and the optimal support set.
//! * [`finite_n`]: type lattices, the nested formula and the coupling
//!   constructions used to prove it.
//! * [`ldp`]: the rate functions `f(α)` and `g(α)`.
//! * [`mdp`]: the signed-coupling LP `θ` and the moderate-deviation rates.
//! * [`clt`]: Gaussian limit quantities for the binary case.
//! * [`cli`]: the batch front end behind the `strassen-lab` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clt;
pub mod error;
pub mod exact;
pub mod finite_n;
pub mod instance;
pub mod ldp;
pub mod mdp;
pub mod measures;
pub mod numeric;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{Dist, JointDist, SignedVec};
pub use transport::{CostMatrix, SupportSet, TransportPlan};

//! Movement modeling for interacting animal groups.
//!
//! Each individual follows a continuous-time biased correlated random walk:
//! velocity is an Ornstein-Uhlenbeck process with drift, location its time
//! integral, and observed positions carry Gaussian error. Group cohesion is
//! modeled by tilting the joint transition density with a pairwise
//! attraction-repulsion interaction function borrowed from spatial point
//! processes (the DPPI model). The interaction introduces an intractable
//! normalizing function, so Bayesian fitting uses a double
//! Metropolis-Hastings sampler with a nested chain for the auxiliary draw.
//!
//! Module map:
//! - [`motion`]: exact one-step transition kernel, densities, samplers.
//! - [`interaction`]: the attraction-repulsion function and its breakpoints.
//! - [`model`]: path containers, joint unnormalized density, forward simulators.
//! - [`inference`]: priors, latent-state updates, the independent-model and
//!   double-MH samplers, convergence diagnostics.
//! - [`summaries`]: pairwise-distance statistics, posterior-predictive
//!   envelopes, posterior tables.

// Parameter validation deliberately writes `!(x > 0.0)` so that NaN fails
// the check; `partial_cmp` spells the same thing with more ceremony.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod inference;
pub mod interaction;
pub mod model;
pub mod motion;
pub mod numeric;
pub mod summaries;

pub(crate) mod tuning;

//! Bayesian fitting of the movement models.
//!
//! The posterior couples the latent states with the model parameters, so
//! both samplers alternate a full sweep of latent-state block updates with
//! one-at-a-time parameter updates:
//!
//! * [`fit_independent`] — no interaction. Parameter updates are standard
//!   Metropolis-Hastings: the likelihood factors are all tractable.
//! * [`fit_dppi`] — the interacting model. The interaction's normalizing
//!   function is intractable, so each parameter update is a double
//!   Metropolis-Hastings step: a nested chain generates an auxiliary draw
//!   from the unconditional model under the proposed parameters, and the
//!   auxiliary's density ratio stands in for the normalizing-constant
//!   ratio. The hard-core radius is fixed at the minimum observed pairwise
//!   distance ([`estimate_hardcore_radius`]) rather than sampled.
//!
//! Proposal scales adapt toward fixed acceptance targets during burn-in and
//! freeze afterwards, so the retained chain has a fixed transition kernel.
//! [`PosteriorSamples`] holds the retained draws plus acceptance rates;
//! [`batch_means_mcse`] and [`half_chain_ks`] are the convergence
//! diagnostics used to judge run lengths.

mod chain;
mod diagnostics;
mod double_mh;
mod independent;
mod latent;
mod priors;

pub use chain::{
    ChainConfig, ChainState, ModelKind, ParamId, PosteriorSamples, ProposalScales,
};
pub use diagnostics::{batch_means_mcse, half_chain_ks};
pub use double_mh::{double_mh_update, fit_dppi, nested_auxiliary_sample};
pub use independent::fit_independent;
pub use latent::update_latent_states;
pub use priors::{
    estimate_hardcore_radius, prior_log_density, NormalPrior, PriorSpec, TruncNormalPrior,
    UniformPrior,
};

use crate::interaction::InteractionError;
use crate::model::ModelError;
use crate::motion::MotionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("need at least {need} individuals for this operation, got {got}")]
    TooFewIndividuals { got: usize, need: usize },
    #[error("invalid chain configuration: {0}")]
    BadConfig(&'static str),
    #[error("invalid prior specification: {0}")]
    BadPrior(&'static str),
    #[error("chain too short: {got} draws, need at least {need}")]
    ChainTooShort { got: usize, need: usize },
    #[error("initial chain state has non-finite log-density ({0})")]
    NonFiniteInit(&'static str),
    #[error("observations have {got} time points but the grid has {want}")]
    GridMismatch { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

//! Prior distributions for the model parameters.
//!
//! Every scalar parameter gets an independent prior. The default choices are
//! weakly informative: huge-variance Gaussians, truncated where a parameter
//! has restricted support. Truncated-normal densities are evaluated without
//! their normalizing constants — the constant depends only on the fixed
//! hyperparameters, so it cancels from every Metropolis ratio the samplers
//! form.

use crate::interaction::InteractionParams;
use crate::model::ObservationSet;
use crate::motion::MovementParams;
use crate::numeric::{normal_cdf, normal_log_pdf, normal_quantile};

use super::InferenceError;

/// Gaussian prior on an unconstrained parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn log_density(&self, x: f64) -> f64 {
        let sd = self.var.sqrt();
        normal_log_pdf((x - self.mean) / sd) - sd.ln()
    }

    pub fn median(&self) -> f64 {
        self.mean
    }
}

/// Gaussian prior truncated to `(lower, +inf)`, evaluated without its
/// (parameter-independent) normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormalPrior {
    pub mean: f64,
    pub var: f64,
    pub lower: f64,
}

impl TruncNormalPrior {
    /// Unnormalized log density: the Gaussian log density for `x > lower`,
    /// `-inf` otherwise.
    pub fn log_density(&self, x: f64) -> f64 {
        if x <= self.lower {
            return f64::NEG_INFINITY;
        }
        let sd = self.var.sqrt();
        normal_log_pdf((x - self.mean) / sd) - sd.ln()
    }

    /// Exact median of the truncated distribution.
    pub fn median(&self) -> f64 {
        let sd = self.var.sqrt();
        let z_lo = (self.lower - self.mean) / sd;
        let p = 0.5 * (normal_cdf(z_lo) + 1.0);
        self.mean + sd * normal_quantile(p)
    }
}

/// Uniform prior on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPrior {
    pub lo: f64,
    pub hi: f64,
}

impl UniformPrior {
    pub fn log_density(&self, x: f64) -> f64 {
        if x > self.lo && x < self.hi {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn median(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// The full set of parameter priors, plus the fixed hard-core radius the
/// interaction priors are anchored to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub beta: TruncNormalPrior,
    pub gamma_x: NormalPrior,
    pub gamma_y: NormalPrior,
    pub sigma2: TruncNormalPrior,
    pub sigma_e2: TruncNormalPrior,
    pub theta1: TruncNormalPrior,
    pub theta2: TruncNormalPrior,
    pub theta3: UniformPrior,
    /// Plug-in hard-core radius: the interaction is zero inside this
    /// distance, and `theta2`'s support starts here.
    pub r_hat: f64,
}

impl PriorSpec {
    /// Weakly informative defaults anchored at a hard-core radius estimate.
    ///
    /// Positive parameters get variance-`1e4` Gaussians truncated at their
    /// support boundary; the drift components get unrestricted
    /// variance-`1e4` Gaussians; the tail-decay parameter is uniform on
    /// `(0, 1)`.
    pub fn defaults(r_hat: f64) -> Self {
        let wide = 1e4;
        Self {
            beta: TruncNormalPrior { mean: 1.0, var: wide, lower: 0.0 },
            gamma_x: NormalPrior { mean: 0.0, var: wide },
            gamma_y: NormalPrior { mean: 0.0, var: wide },
            sigma2: TruncNormalPrior { mean: 1.0, var: wide, lower: 0.0 },
            sigma_e2: TruncNormalPrior { mean: 1.0, var: wide, lower: 0.0 },
            theta1: TruncNormalPrior { mean: 2.0, var: wide, lower: 1.0 },
            theta2: TruncNormalPrior { mean: r_hat + 1.0, var: wide, lower: r_hat },
            theta3: UniformPrior { lo: 0.0, hi: 1.0 },
            r_hat,
        }
    }

    /// Check internal consistency (positive variances, ordered bounds,
    /// interaction support anchored at `r_hat`).
    pub fn validate(&self) -> Result<(), InferenceError> {
        let vars = [
            self.beta.var,
            self.gamma_x.var,
            self.gamma_y.var,
            self.sigma2.var,
            self.sigma_e2.var,
            self.theta1.var,
            self.theta2.var,
        ];
        if vars.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(InferenceError::BadPrior("prior variances must be positive and finite"));
        }
        if !self.r_hat.is_finite() || self.r_hat < 0.0 {
            return Err(InferenceError::BadPrior("hard-core radius must be finite and >= 0"));
        }
        if self.beta.lower < 0.0 || self.sigma2.lower < 0.0 || self.sigma_e2.lower < 0.0 {
            return Err(InferenceError::BadPrior(
                "beta, sigma2 and sigma_e2 priors must be truncated at or above zero",
            ));
        }
        if self.theta1.lower < 1.0 {
            return Err(InferenceError::BadPrior("theta1 prior must be truncated at or above 1"));
        }
        if self.theta2.lower < self.r_hat {
            return Err(InferenceError::BadPrior(
                "theta2 prior must be truncated at or above the hard-core radius",
            ));
        }
        if !(self.theta3.lo < self.theta3.hi)
            || self.theta3.lo < 0.0
            || self.theta3.hi > 1.0
        {
            return Err(InferenceError::BadPrior(
                "theta3 prior must be a sub-interval of (0, 1)",
            ));
        }
        Ok(())
    }

    /// Joint log prior of the movement block.
    pub fn movement_log_density(&self, m: &MovementParams) -> f64 {
        self.beta.log_density(m.beta)
            + self.gamma_x.log_density(m.gamma_x)
            + self.gamma_y.log_density(m.gamma_y)
            + self.sigma2.log_density(m.sigma2)
            + self.sigma_e2.log_density(m.sigma_e2)
    }

    /// Joint log prior of the interaction block.
    pub fn interaction_log_density(&self, t: &InteractionParams) -> f64 {
        self.theta1.log_density(t.theta1)
            + self.theta2.log_density(t.theta2)
            + self.theta3.log_density(t.theta3)
    }
}

/// Joint log prior density of a full parameter set. Returns `-inf` outside
/// the prior support. Pass `None` for the interaction block when fitting the
/// independent model.
pub fn prior_log_density(
    movement: &MovementParams,
    interaction: Option<&InteractionParams>,
    prior: &PriorSpec,
) -> f64 {
    let mut lp = prior.movement_log_density(movement);
    if let Some(t) = interaction {
        lp += prior.interaction_log_density(t);
    }
    lp
}

/// Plug-in estimate of the hard-core radius: the minimum pairwise distance
/// anywhere in the observed tracks. Needs at least two individuals.
pub fn estimate_hardcore_radius(obs: &ObservationSet) -> Result<f64, InferenceError> {
    obs.min_pairwise_distance()
        .ok_or(InferenceError::TooFewIndividuals { got: obs.n_individuals(), need: 2 })
}

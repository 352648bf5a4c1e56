//! Proposal-scale adaptation shared by the samplers.
//!
//! Scales adapt on the log scale with a Robbins-Monro schedule during
//! burn-in and are frozen afterwards, which keeps the post-burn-in chain a
//! genuine fixed-kernel Markov chain.

/// One adaptive proposal scale.
///
/// Each call to [`AdaptiveScale::observe`] nudges `log(scale)` toward the
/// target acceptance rate with step size `step0 / t^0.7`; the decaying step
/// satisfies the usual diminishing-adaptation condition, and freezing makes
/// the question moot anyway.
#[derive(Debug, Clone)]
pub(crate) struct AdaptiveScale {
    log_scale: f64,
    target: f64,
    step0: f64,
    t: u64,
    frozen: bool,
}

impl AdaptiveScale {
    pub fn new(initial: f64, target: f64) -> Self {
        assert!(initial > 0.0 && initial.is_finite());
        assert!(target > 0.0 && target < 1.0);
        Self {
            log_scale: initial.ln(),
            target,
            step0: 1.0,
            t: 0,
            frozen: false,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Record one accept/reject outcome.
    pub fn observe(&mut self, accepted: bool) {
        self.observe_rate(if accepted { 1.0 } else { 0.0 });
    }

    /// Record a batch acceptance rate in [0, 1] (e.g. averaged over a sweep).
    pub fn observe_rate(&mut self, rate: f64) {
        if self.frozen {
            return;
        }
        self.t += 1;
        let step = self.step0 / (self.t as f64).powf(0.7);
        self.log_scale += step * (rate - self.target);
        // Clamp to keep a run of rejections from driving the scale to zero
        // before the chain finds the typical set.
        self.log_scale = self.log_scale.clamp(-23.0, 23.0);
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

//! Pairwise interaction function for the point-process part of the model.
//!
//! The interaction `psi(r)` weights configurations by the distance `r`
//! between a pair of individuals:
//!
//! * `r <= hard_core`: `psi = 0` — overlapping closer than the hard core is
//!   impossible.
//! * `hard_core < r < r1`: an inverted parabola
//!   `psi1(r) = theta1 (1 - ((r - theta2)/(theta2 - hard_core))^2)` rising
//!   from 0 at the hard core to its peak `theta1 > 1` at the preferred
//!   distance `theta2` — attraction toward a typical spacing.
//! * `r >= r1`: a long-range tail `psi2(r) = 1 + 1/(theta3 (r - r2))^2`
//!   decaying to 1 (no interaction) as `r` grows.
//!
//! The inner breakpoint `r1` and tail offset `r2` are not free: they are
//! pinned down by requiring `psi` to be continuously differentiable at
//! `r1`. Matching derivatives gives `r2` in closed form as a function of
//! `r1`, and matching values leaves a scalar root-finding problem solved at
//! construction time.

use crate::motion::State;
use crate::numeric::bracketed_root;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InteractionError {
    #[error("peak height theta1 must exceed 1 and be finite, got {0}")]
    BadTheta1(f64),
    #[error("preferred distance theta2 ({theta2}) must exceed the hard core ({hard_core})")]
    BadTheta2 { theta2: f64, hard_core: f64 },
    #[error("tail rate theta3 must be positive and finite, got {0}")]
    BadTheta3(f64),
    #[error("hard core must be nonnegative and finite, got {0}")]
    BadHardCore(f64),
    #[error("breakpoint solve failed: no sign change on the admissible interval")]
    NoBreakpoint,
}

/// Interaction parameters: peak height, preferred distance, tail rate, and
/// the hard-core radius (fixed from data, not sampled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub hard_core: f64,
}

impl InteractionParams {
    pub fn new(
        theta1: f64,
        theta2: f64,
        theta3: f64,
        hard_core: f64,
    ) -> Result<Self, InteractionError> {
        if !(hard_core >= 0.0) || !hard_core.is_finite() {
            return Err(InteractionError::BadHardCore(hard_core));
        }
        if !(theta1 > 1.0) || !theta1.is_finite() {
            return Err(InteractionError::BadTheta1(theta1));
        }
        if !(theta2 > hard_core) || !theta2.is_finite() {
            return Err(InteractionError::BadTheta2 { theta2, hard_core });
        }
        if !(theta3 > 0.0) || !theta3.is_finite() {
            return Err(InteractionError::BadTheta3(theta3));
        }
        Ok(Self { theta1, theta2, theta3, hard_core })
    }
}

/// The derived switch points of the interaction function: `r1` is the
/// parabola/tail boundary, `r2` the offset of the tail branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoints {
    pub r1: f64,
    pub r2: f64,
}

/// A ready-to-evaluate interaction function with its breakpoints solved.
#[derive(Debug, Clone, Copy)]
pub struct Interaction {
    params: InteractionParams,
    /// Switch point between the parabola and the tail.
    r1: f64,
    /// Offset of the tail branch.
    r2: f64,
    inv_span2: f64,
    inv_theta3_2: f64,
}

impl Interaction {
    pub fn new(params: InteractionParams) -> Result<Self, InteractionError> {
        // Re-validate so an `Interaction` can only exist in a good state
        // even if the params struct was built by hand.
        let params = InteractionParams::new(
            params.theta1,
            params.theta2,
            params.theta3,
            params.hard_core,
        )?;
        let InteractionParams { theta1, theta2, theta3, hard_core } = params;
        let span = theta2 - hard_core;
        let r2_of = |r1: f64| r1 - (span * span / (theta1 * theta3 * theta3 * (r1 - theta2))).cbrt();
        // Value-matching residual. Right of theta2 the parabola falls from
        // theta1 toward 1; the tail is > 1 with the derivative-matched
        // offset, so the residual goes + to - across the interval.
        let objective = |r1: f64| {
            let u = (r1 - theta2) / span;
            let psi1 = theta1 * (1.0 - u * u);
            let t = theta3 * (r1 - r2_of(r1));
            psi1 - 1.0 - 1.0 / (t * t)
        };
        // psi1 reaches 1 at theta2 + span sqrt((theta1-1)/theta1); the
        // crossing lies strictly between theta2 and that point.
        let hi = theta2 + span * ((theta1 - 1.0) / theta1).sqrt();
        let lo = theta2 + 1e-12 * span;
        let root = bracketed_root(objective, lo, hi * (1.0 - 1e-15), 1e-14)
            .ok_or(InteractionError::NoBreakpoint)?;
        let r1 = root.x;
        let r2 = r2_of(r1);
        Ok(Self {
            params,
            r1,
            r2,
            inv_span2: 1.0 / (span * span),
            inv_theta3_2: 1.0 / (theta3 * theta3),
        })
    }

    pub fn params(&self) -> &InteractionParams {
        &self.params
    }

    /// The derived switch points of the interaction function.
    pub fn breakpoints(&self) -> Breakpoints {
        Breakpoints { r1: self.r1, r2: self.r2 }
    }

    /// Evaluate `psi` at a pairwise distance `r >= 0`.
    pub fn psi(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "pairwise distance must be nonnegative, got {r}");
        if r <= self.params.hard_core {
            0.0
        } else if r < self.r1 {
            let d = r - self.params.theta2;
            self.params.theta1 * (1.0 - d * d * self.inv_span2)
        } else {
            let d = r - self.r2;
            1.0 + self.inv_theta3_2 / (d * d)
        }
    }

    /// `ln psi(r)`; `-inf` at or inside the hard core.
    pub fn log_psi(&self, r: f64) -> f64 {
        if r <= self.params.hard_core {
            f64::NEG_INFINITY
        } else {
            self.psi(r).ln()
        }
    }
}

/// Euclidean distance between the locations of two states; velocities do
/// not enter the interaction.
pub fn pairwise_distance(a: &State, b: &State) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Running product of nonnegative `psi` values that folds into a log
/// accumulator before the partial product can over- or underflow, so the
/// final logarithm is exact-as-float for any number of factors.
///
/// Taking one logarithm at the end instead of summing `ln psi` per pair
/// cuts the dominant transcendental cost out of the samplers' inner loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PsiProduct {
    log: f64,
    partial: f64,
}

impl PsiProduct {
    pub fn new() -> Self {
        Self { log: 0.0, partial: 1.0 }
    }

    /// Multiply in one factor. Returns `false` once the product hits zero
    /// (a hard-core violation), at which point the caller can stop early.
    pub fn push(&mut self, psi: f64) -> bool {
        self.partial *= psi;
        if self.partial == 0.0 {
            return false;
        }
        if !(1e-150..=1e150).contains(&self.partial) {
            self.log += self.partial.ln();
            self.partial = 1.0;
        }
        true
    }

    /// `ln` of the accumulated product; `-inf` if any factor was zero.
    pub fn finish(&self) -> f64 {
        if self.partial == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log + self.partial.ln()
        }
    }
}

/// Log of the pairwise interaction over one time slice: the sum of
/// `ln psi` over unordered pairs of the `states`. Zero or one individual
/// gives an empty product, hence 0. `-inf` as soon as any pair sits at or
/// inside the hard core.
pub fn log_interaction_at_time(states: &[State], psi: &Interaction) -> f64 {
    let mut prod = PsiProduct::new();
    for j in 0..states.len() {
        for k in (j + 1)..states.len() {
            if !prod.push(psi.psi(pairwise_distance(&states[j], &states[k]))) {
                return f64::NEG_INFINITY;
            }
        }
    }
    prod.finish()
}

/// Log-interaction terms of one slice that involve individual `j` only:
/// the sum of `ln psi` over pairs `(j, k)`, `k != j`. This is the part of
/// [`log_interaction_at_time`] that changes when only `j` moves.
pub(crate) fn log_interaction_about(states: &[State], j: usize, psi: &Interaction) -> f64 {
    let mut prod = PsiProduct::new();
    for (k, other) in states.iter().enumerate() {
        if k == j {
            continue;
        }
        if !prod.push(psi.psi(pairwise_distance(&states[j], other))) {
            return f64::NEG_INFINITY;
        }
    }
    prod.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make(theta1: f64, theta2: f64, theta3: f64, hard_core: f64) -> Interaction {
        Interaction::new(InteractionParams::new(theta1, theta2, theta3, hard_core).unwrap())
            .unwrap()
    }

    #[test]
    fn breakpoints_match_reference_values() {
        // Reference values computed offline with 50-digit arithmetic.
        let cases = [
            (2.5, 3.0, 0.5, 1.0, 3.853_824_269_928_282, 1.896_765_686_641_825_7),
            (32.0, 33.0, 0.3, 1.5, 62.895_073_516_223_79, 60.636_281_045_854_76),
            (100.0, 20.0, 0.5, 1.5, 37.956_161_533_926_31, 37.042_616_457_126_25),
            (10.0, 80.0, 0.5, 1.5, 152.872_170_447_183_37, 149.638_126_876_497_3),
        ];
        for (t1, t2, t3, r, want_r1, want_r2) in cases {
            let psi = make(t1, t2, t3, r);
            let Breakpoints { r1, r2 } = psi.breakpoints();
            assert!(
                (r1 - want_r1).abs() < 1e-9 * want_r1,
                "r1 for ({t1},{t2},{t3},{r}): {r1} vs {want_r1}"
            );
            assert!(
                (r2 - want_r2).abs() < 1e-9 * want_r2,
                "r2 for ({t1},{t2},{t3},{r}): {r2} vs {want_r2}"
            );
        }
    }

    #[test]
    fn psi_is_zero_inside_hard_core_and_peaks_at_theta2() {
        let psi = make(2.5, 3.0, 0.5, 1.0);
        assert_eq!(psi.psi(0.0), 0.0);
        assert_eq!(psi.psi(0.7), 0.0);
        assert_eq!(psi.psi(1.0), 0.0);
        assert_eq!(psi.psi(3.0), 2.5);
        assert_eq!(psi.log_psi(0.5), f64::NEG_INFINITY);
        // Just outside the hard core the parabola starts from zero.
        assert!(psi.psi(1.0 + 1e-9) > 0.0);
        assert!(psi.psi(1.0 + 1e-9) < 1e-6);
    }

    #[test]
    fn psi_is_continuous_and_smooth_at_the_switch_point() {
        for (t1, t2, t3, r) in [
            (2.5, 3.0, 0.5, 1.0),
            (32.0, 33.0, 0.3, 1.5),
            (100.0, 20.0, 0.5, 1.5),
            (10.0, 80.0, 0.5, 1.5),
        ] {
            let psi = make(t1, t2, t3, r);
            let Breakpoints { r1, r2 } = psi.breakpoints();
            // Value continuity: both closed forms agree at r1.
            let u = (r1 - t2) / (t2 - r);
            let parabola = t1 * (1.0 - u * u);
            let tail = 1.0 + 1.0 / (t3 * (r1 - r2)).powi(2);
            assert!(
                (parabola - tail).abs() < 1e-10 * parabola.abs(),
                "value mismatch at r1 for ({t1},{t2},{t3},{r}): {parabola} vs {tail}"
            );
            // Derivative continuity, from the closed forms on each side.
            let d_parabola = -2.0 * t1 * (r1 - t2) / (t2 - r).powi(2);
            let d_tail = -2.0 / (t3 * t3 * (r1 - r2).powi(3));
            assert!(
                (d_parabola - d_tail).abs() < 1e-8 * d_parabola.abs(),
                "derivative mismatch for ({t1},{t2},{t3},{r}): {d_parabola} vs {d_tail}"
            );
            // And the evaluator itself is continuous across the branch.
            let eps = 1e-9 * r1;
            let below = psi.psi(r1 - eps);
            let above = psi.psi(r1 + eps);
            assert!((below - above).abs() < 1e-6 * parabola.abs());
        }
    }

    #[test]
    fn tail_decays_monotonically_to_one() {
        let psi = make(32.0, 33.0, 0.3, 1.5);
        let r1 = psi.breakpoints().r1;
        let mut prev = psi.psi(r1);
        assert!(prev > 1.0);
        for k in 1..200 {
            let r = r1 + k as f64;
            let v = psi.psi(r);
            assert!(v < prev, "tail not decreasing at r = {r}");
            assert!(v > 1.0);
            prev = v;
        }
        assert!((psi.psi(1e7) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parabola_rises_to_peak_then_falls_to_switch_point() {
        let psi = make(2.5, 3.0, 0.5, 1.0);
        let r1 = psi.breakpoints().r1;
        let mut prev = 0.0;
        let n = 200;
        for k in 1..=n {
            let r = 1.0 + (3.0 - 1.0) * k as f64 / n as f64;
            let v = psi.psi(r);
            assert!(v >= prev, "not increasing before the peak at r = {r}");
            prev = v;
        }
        for k in 1..=n {
            let r = 3.0 + (r1 - 3.0) * k as f64 / n as f64;
            let v = psi.psi(r);
            assert!(v <= prev, "not decreasing after the peak at r = {r}");
            prev = v;
        }
        // The value where the branches meet still exceeds 1.
        assert!(psi.psi(r1) > 1.0);
    }

    #[test]
    fn switch_point_ordering_holds() {
        for (t1, t2, t3, r) in [
            (2.5, 3.0, 0.5, 1.0),
            (32.0, 33.0, 0.3, 1.5),
            (100.0, 20.0, 0.5, 1.5),
            (10.0, 80.0, 0.5, 1.5),
            (1.5, 2.0, 0.9, 0.0),
        ] {
            let psi = make(t1, t2, t3, r);
            let Breakpoints { r1, r2 } = psi.breakpoints();
            assert!(t2 < r1, "r1 must lie beyond the peak");
            assert!(r2 < r1, "tail offset must lie below r1");
            let upper = t2 + (t2 - r) * ((t1 - 1.0) / t1).sqrt();
            assert!(r1 < upper, "r1 must lie before the parabola reaches 1");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            InteractionParams::new(1.0, 3.0, 0.5, 1.0),
            Err(InteractionError::BadTheta1(_))
        ));
        assert!(matches!(
            InteractionParams::new(0.5, 3.0, 0.5, 1.0),
            Err(InteractionError::BadTheta1(_))
        ));
        assert!(matches!(
            InteractionParams::new(2.0, 1.0, 0.5, 1.0),
            Err(InteractionError::BadTheta2 { .. })
        ));
        assert!(matches!(
            InteractionParams::new(2.0, 3.0, 0.0, 1.0),
            Err(InteractionError::BadTheta3(_))
        ));
        assert!(matches!(
            InteractionParams::new(2.0, 3.0, 0.5, -0.1),
            Err(InteractionError::BadHardCore(_))
        ));
        assert!(matches!(
            InteractionParams::new(f64::NAN, 3.0, 0.5, 1.0),
            Err(InteractionError::BadTheta1(_))
        ));
    }

    #[test]
    fn pairwise_distance_uses_locations_only() {
        let a = State::new(0.0, 99.0, 0.0, -99.0);
        let b = State::new(3.0, 1.0, 4.0, 2.0);
        assert_eq!(pairwise_distance(&a, &b), 5.0);
        assert_eq!(pairwise_distance(&a, &a), 0.0);
    }

    #[test]
    fn slice_interaction_sums_log_psi_over_pairs() {
        let psi = make(2.5, 3.0, 0.5, 1.0);
        let states = [
            State::at_rest(0.0, 0.0),
            State::at_rest(3.0, 0.0),
            State::at_rest(0.0, 4.0),
        ];
        // Pair distances: 3, 4, 5.
        let want = psi.log_psi(3.0) + psi.log_psi(4.0) + psi.log_psi(5.0);
        let got = log_interaction_at_time(&states, &psi);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // Zero or one individual: empty product.
        assert_eq!(log_interaction_at_time(&[], &psi), 0.0);
        assert_eq!(log_interaction_at_time(&states[..1], &psi), 0.0);
    }

    #[test]
    fn slice_interaction_is_neg_infinite_inside_hard_core() {
        let psi = make(2.5, 3.0, 0.5, 1.0);
        let states = [
            State::at_rest(0.0, 0.0),
            State::at_rest(0.5, 0.0), // within the hard core of the first
            State::at_rest(10.0, 0.0),
        ];
        assert_eq!(log_interaction_at_time(&states, &psi), f64::NEG_INFINITY);
    }

    #[test]
    fn about_terms_are_the_pairs_involving_one_individual() {
        let psi = make(2.5, 3.0, 0.5, 1.0);
        let states = [
            State::at_rest(0.0, 0.0),
            State::at_rest(3.0, 0.0),
            State::at_rest(0.0, 4.0),
        ];
        // Individual 0 participates in the distance-3 and distance-4 pairs.
        let want = psi.log_psi(3.0) + psi.log_psi(4.0);
        let got = log_interaction_about(&states, 0, &psi);
        assert!((got - want).abs() < 1e-12);
        // Sum over individuals double-counts each pair.
        let total: f64 = (0..3).map(|j| log_interaction_about(&states, j, &psi)).sum();
        let full = log_interaction_at_time(&states, &psi);
        assert!((total - 2.0 * full).abs() < 1e-12);
    }

    #[test]
    fn psi_product_survives_overflow_scale_runs() {
        // 2000 factors of 1e100 would overflow a plain product; the
        // accumulator must fold into log space and stay exact.
        let mut prod = PsiProduct::new();
        for _ in 0..2000 {
            assert!(prod.push(1e100));
        }
        let want = 2000.0 * 1e100f64.ln();
        assert!((prod.finish() - want).abs() < 1e-9 * want);
        // Underflow direction.
        let mut prod = PsiProduct::new();
        for _ in 0..2000 {
            assert!(prod.push(1e-120));
        }
        let want = 2000.0 * 1e-120f64.ln();
        assert!((prod.finish() - want).abs() < 1e-9 * want.abs());
        // A zero factor is terminal.
        let mut prod = PsiProduct::new();
        assert!(prod.push(0.5));
        assert!(!prod.push(0.0));
        assert_eq!(prod.finish(), f64::NEG_INFINITY);
    }
}

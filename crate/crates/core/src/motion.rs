//! Single-individual movement model: a continuous-time correlated random
//! walk in which velocity is an Ornstein-Uhlenbeck process pulled toward a
//! drift velocity, observed at discrete times through Gaussian location
//! error.
//!
//! The state of one individual is `(location, velocity)` per coordinate
//! axis; the two axes evolve independently with shared parameters, so all
//! kernel math here is done on 2-vectors `(location, velocity)` for a single
//! axis and applied twice.
//!
//! Between observation times the model integrates exactly: over a step of
//! length `dt` the state is Gaussian with
//!
//! ```text
//! mean = persistence * prev + drift,
//! cov  = sigma2 * [[v1, v3], [v3, v2]],
//! ```
//!
//! where `persistence = [[1, h], [0, e]]`, `e = exp(-beta dt)`,
//! `h = (1 - e)/beta`, and the `v` entries are the integrated OU
//! covariances. Small `beta * dt` hits catastrophic cancellation in the
//! textbook expressions for `v1` and `dt - h`, so those switch to Taylor
//! expansions below a cutoff; everything else routes through `exp_m1`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("reversion rate beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("step length dt must be positive and finite, got {0}")]
    BadDt(f64),
    #[error("{name} must be nonnegative and finite, got {value}")]
    BadVariance { name: &'static str, value: f64 },
    #[error("drift velocity must be finite, got ({0}, {1})")]
    BadDrift(f64, f64),
    #[error("{0} is zero, so the distribution is degenerate and has no density")]
    DegenerateDensity(&'static str),
}

/// Full state of one individual at one time: location and velocity per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

impl State {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64) -> Self {
        Self { x, vx, y, vy }
    }

    /// Location with zero velocity.
    pub fn at_rest(x: f64, y: f64) -> Self {
        Self::new(x, 0.0, y, 0.0)
    }

    pub fn location(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.vx.is_finite() && self.y.is_finite() && self.vy.is_finite()
    }
}

/// A located observation of one individual at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

impl Observation {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Movement parameters shared by both axes of one population.
///
/// `sigma2` (velocity noise) and `sigma_e2` (observation noise) may be zero,
/// which gives the deterministic, respectively noiseless, limit: useful for
/// simulation, but densities then do not exist and the corresponding
/// evaluations return [`MotionError::DegenerateDensity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementParams {
    pub beta: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub sigma2: f64,
    pub sigma_e2: f64,
}

impl MovementParams {
    pub fn new(
        beta: f64,
        gamma_x: f64,
        gamma_y: f64,
        sigma2: f64,
        sigma_e2: f64,
    ) -> Result<Self, MotionError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(MotionError::BadBeta(beta));
        }
        if !gamma_x.is_finite() || !gamma_y.is_finite() {
            return Err(MotionError::BadDrift(gamma_x, gamma_y));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(MotionError::BadVariance { name: "sigma2", value: sigma2 });
        }
        if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
            return Err(MotionError::BadVariance { name: "sigma_e2", value: sigma_e2 });
        }
        Ok(Self { beta, gamma_x, gamma_y, sigma2, sigma_e2 })
    }
}

/// Exact one-axis discretization of the motion model over a step `dt`.
///
/// `(loc', vel')` given `(loc, vel)` is Gaussian with mean
/// `persistence * (loc, vel) + drift` and covariance `sigma2 * noise`
/// (`noise` here is the unit-variance integrated covariance, so the caller
/// scales it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKernel {
    /// Row-major `[[1, h], [0, e]]`.
    pub persistence: [[f64; 2]; 2],
    /// Mean contribution of the drift velocity: `gamma * (dt - h, 1 - e)`.
    pub drift: [f64; 2],
    /// Unit-variance noise covariance `[[v1, v3], [v3, v2]]`.
    pub noise: [[f64; 2]; 2],
    pub dt: f64,
}

/// Below this value of `beta * dt` the closed forms for `v1` and `dt - h`
/// lose too many leading digits and the Taylor expansions take over. At the
/// cutoff both routes are good to ~1e-12 relative, so the switch is seamless.
const SERIES_CUTOFF: f64 = 1e-2;

impl TransitionKernel {
    pub fn new(beta: f64, gamma: f64, dt: f64) -> Result<Self, MotionError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(MotionError::BadBeta(beta));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(MotionError::BadDt(dt));
        }
        if !gamma.is_finite() {
            return Err(MotionError::BadDrift(gamma, 0.0));
        }
        let a = beta * dt;
        let a2 = a * a;
        let em1 = (-a).exp_m1(); // e^{-a} - 1, accurate for small a
        let decay = 1.0 + em1;
        let h = -em1 / beta;
        let dt_minus_h = if a < SERIES_CUTOFF {
            dt * (0.5 * a)
                * (1.0 - a / 3.0 + a2 / 12.0 - a2 * a / 60.0 + a2 * a2 / 360.0
                    - a2 * a2 * a / 2520.0)
        } else {
            dt - h
        };
        let v2 = -(-2.0 * a).exp_m1() / (2.0 * beta);
        let v3 = 0.5 * h * h;
        let v1 = if a < SERIES_CUTOFF {
            dt * dt
                * dt
                * (1.0 / 3.0 - 0.25 * a + (7.0 / 60.0) * a2 - a2 * a / 24.0
                    + (31.0 / 2520.0) * a2 * a2
                    - a2 * a2 * a / 320.0)
        } else {
            (dt - 2.0 * h + v2) / (beta * beta)
        };
        Ok(Self {
            persistence: [[1.0, h], [0.0, decay]],
            drift: [gamma * dt_minus_h, gamma * (1.0 - decay)],
            noise: [[v1, v3], [v3, v2]],
            dt,
        })
    }

    /// Mean of `(loc', vel')` given `(loc, vel)`.
    pub fn mean(&self, loc: f64, vel: f64) -> (f64, f64) {
        (
            loc + self.persistence[0][1] * vel + self.drift[0],
            self.persistence[1][1] * vel + self.drift[1],
        )
    }
}

/// Precomputed transition model for a fixed `(params, dt)` pair.
///
/// Samplers evaluate millions of transition densities per run, so the
/// Cholesky factor, inverse, and log-normalizer of the per-axis step
/// covariance are computed once here and the per-call work is a handful of
/// multiplies.
#[derive(Debug, Clone, Copy)]
pub struct StepModel {
    kernel_x: TransitionKernel,
    kernel_y: TransitionKernel,
    /// Lower Cholesky factor of `sigma2 * noise`: `[l11, l21, l22]`.
    chol: [f64; 3],
    /// Inverse of `sigma2 * noise`: `[i11, i12, i22]`. Meaningless when
    /// `degenerate`.
    inv: [f64; 3],
    /// Per-axis log-normalizer `-log(2 pi) - 0.5 log det(sigma2 * noise)`.
    log_norm: f64,
    degenerate: bool,
}

impl StepModel {
    pub fn new(params: &MovementParams, dt: f64) -> Result<Self, MotionError> {
        let kernel_x = TransitionKernel::new(params.beta, params.gamma_x, dt)?;
        let kernel_y = TransitionKernel::new(params.beta, params.gamma_y, dt)?;
        let s2 = params.sigma2;
        let n = kernel_x.noise;
        let (c11, c12, c22) = (s2 * n[0][0], s2 * n[0][1], s2 * n[1][1]);
        if s2 == 0.0 {
            return Ok(Self {
                kernel_x,
                kernel_y,
                chol: [0.0; 3],
                inv: [0.0; 3],
                log_norm: f64::NEG_INFINITY,
                degenerate: true,
            });
        }
        let det = c11 * c22 - c12 * c12;
        // The unit noise matrix is a Gram matrix of two independent
        // functions, so this only trips on pathological over/underflow.
        debug_assert!(det > 0.0, "step covariance not positive definite");
        let l11 = c11.sqrt();
        let l21 = c12 / l11;
        let l22 = (c22 - l21 * l21).max(0.0).sqrt();
        Ok(Self {
            kernel_x,
            kernel_y,
            chol: [l11, l21, l22],
            inv: [c22 / det, -c12 / det, c11 / det],
            log_norm: -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln(),
            degenerate: false,
        })
    }

    pub fn dt(&self) -> f64 {
        self.kernel_x.dt
    }

    pub fn kernel_x(&self) -> &TransitionKernel {
        &self.kernel_x
    }

    pub fn kernel_y(&self) -> &TransitionKernel {
        &self.kernel_y
    }

    /// Mean of the next state given `prev`.
    pub fn mean(&self, prev: &State) -> State {
        let (mx, mvx) = self.kernel_x.mean(prev.x, prev.vx);
        let (my, mvy) = self.kernel_y.mean(prev.y, prev.vy);
        State::new(mx, mvx, my, mvy)
    }

    /// Log-density of `next` given `prev`. Errors when `sigma2 == 0`.
    pub fn log_density(&self, prev: &State, next: &State) -> Result<f64, MotionError> {
        if self.degenerate {
            return Err(MotionError::DegenerateDensity("sigma2"));
        }
        Ok(self.log_density_fast(prev, next))
    }

    /// Log-density without the degeneracy check; callers validate once at
    /// setup. Returns garbage (`-inf`/NaN) when `sigma2 == 0`.
    pub(crate) fn log_density_fast(&self, prev: &State, next: &State) -> f64 {
        2.0 * self.log_norm + self.neg_half_quad(prev, next)
    }

    /// `-0.5 * quadratic form` of the transition residual: the log-density
    /// up to its state-independent normalizer. Metropolis ratios at fixed
    /// parameters only need differences of this, which keeps the hot path
    /// free of logarithms.
    pub(crate) fn neg_half_quad(&self, prev: &State, next: &State) -> f64 {
        let mean = self.mean(prev);
        let (rx0, rx1) = (next.x - mean.x, next.vx - mean.vx);
        let (ry0, ry1) = (next.y - mean.y, next.vy - mean.vy);
        let [i11, i12, i22] = self.inv;
        let qx = i11 * rx0 * rx0 + 2.0 * i12 * rx0 * rx1 + i22 * rx1 * rx1;
        let qy = i11 * ry0 * ry0 + 2.0 * i12 * ry0 * ry1 + i22 * ry1 * ry1;
        -0.5 * (qx + qy)
    }

    /// Draw the next state given `prev`. With `sigma2 == 0` this is the
    /// deterministic mean path.
    pub fn sample<R: Rng + ?Sized>(&self, prev: &State, rng: &mut R) -> State {
        let mut next = self.mean(prev);
        if self.degenerate {
            return next;
        }
        let [l11, l21, l22] = self.chol;
        let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        next.x += l11 * z1;
        next.vx += l21 * z1 + l22 * z2;
        let (z3, z4): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        next.y += l11 * z3;
        next.vy += l21 * z3 + l22 * z4;
        next
    }
}

/// Log-density of one transition. Convenience wrapper; when evaluating many
/// transitions at the same `(params, dt)`, build one [`StepModel`] instead.
pub fn step_log_density(
    prev: &State,
    next: &State,
    params: &MovementParams,
    dt: f64,
) -> Result<f64, MotionError> {
    StepModel::new(params, dt)?.log_density(prev, next)
}

/// Draw one transition. See [`step_log_density`] on reuse.
pub fn sample_step<R: Rng + ?Sized>(
    prev: &State,
    params: &MovementParams,
    dt: f64,
    rng: &mut R,
) -> Result<State, MotionError> {
    Ok(StepModel::new(params, dt)?.sample(prev, rng))
}

/// Log-density of an observation given the underlying state: independent
/// Gaussian error with variance `sigma_e2` on each coordinate.
pub fn obs_log_density(obs: &Observation, state: &State, sigma_e2: f64) -> Result<f64, MotionError> {
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(MotionError::BadVariance { name: "sigma_e2", value: sigma_e2 });
    }
    if sigma_e2 == 0.0 {
        return Err(MotionError::DegenerateDensity("sigma_e2"));
    }
    let dx = obs.x - state.x;
    let dy = obs.y - state.y;
    Ok(-(2.0 * std::f64::consts::PI).ln() - sigma_e2.ln() - (dx * dx + dy * dy) / (2.0 * sigma_e2))
}

/// Draw an observation of `state`. `sigma_e2 == 0` returns the exact
/// location.
pub fn sample_obs<R: Rng + ?Sized>(
    state: &State,
    sigma_e2: f64,
    rng: &mut R,
) -> Result<Observation, MotionError> {
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(MotionError::BadVariance { name: "sigma_e2", value: sigma_e2 });
    }
    let sd = sigma_e2.sqrt();
    let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
    Ok(Observation::new(state.x + sd * z1, state.y + sd * z2))
}

/// Distribution of the first latent state of one individual: location
/// `N(anchor, loc_var I)` and velocity at the stationary law of the velocity
/// process, `N(gamma, sigma2/(2 beta) I)`.
///
/// `anchor` is typically the individual's first observed location with a
/// large `loc_var`, giving a diffuse but proper prior on the starting point.
#[derive(Debug, Clone, Copy)]
pub struct InitialState {
    pub anchor: (f64, f64),
    pub loc_var: f64,
}

impl InitialState {
    pub fn new(anchor: (f64, f64), loc_var: f64) -> Result<Self, MotionError> {
        if !(loc_var >= 0.0) || !loc_var.is_finite() {
            return Err(MotionError::BadVariance { name: "loc_var", value: loc_var });
        }
        if !anchor.0.is_finite() || !anchor.1.is_finite() {
            return Err(MotionError::BadDrift(anchor.0, anchor.1));
        }
        Ok(Self { anchor, loc_var })
    }

    pub fn log_density(&self, state: &State, params: &MovementParams) -> Result<f64, MotionError> {
        let vel_var = params.sigma2 / (2.0 * params.beta);
        if self.loc_var == 0.0 {
            return Err(MotionError::DegenerateDensity("loc_var"));
        }
        if vel_var == 0.0 {
            return Err(MotionError::DegenerateDensity("sigma2"));
        }
        let (dx, dy) = (state.x - self.anchor.0, state.y - self.anchor.1);
        let (dvx, dvy) = (state.vx - params.gamma_x, state.vy - params.gamma_y);
        let two_pi = 2.0 * std::f64::consts::PI;
        Ok(-two_pi.ln() - self.loc_var.ln() - (dx * dx + dy * dy) / (2.0 * self.loc_var)
            - two_pi.ln()
            - vel_var.ln()
            - (dvx * dvx + dvy * dvy) / (2.0 * vel_var))
    }

    /// `-0.5 * quadratic form` of the initial-state residual; see
    /// [`StepModel::neg_half_quad`]. Infinite when a variance is zero.
    pub(crate) fn neg_half_quad(&self, state: &State, params: &MovementParams) -> f64 {
        let vel_var = params.sigma2 / (2.0 * params.beta);
        let (dx, dy) = (state.x - self.anchor.0, state.y - self.anchor.1);
        let (dvx, dvy) = (state.vx - params.gamma_x, state.vy - params.gamma_y);
        -(dx * dx + dy * dy) / (2.0 * self.loc_var) - (dvx * dvx + dvy * dvy) / (2.0 * vel_var)
    }

    pub fn sample<R: Rng + ?Sized>(&self, params: &MovementParams, rng: &mut R) -> State {
        let loc_sd = self.loc_var.sqrt();
        let vel_sd = (params.sigma2 / (2.0 * params.beta)).sqrt();
        let z: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        State::new(
            self.anchor.0 + loc_sd * z[0],
            params.gamma_x + vel_sd * z[1],
            self.anchor.1 + loc_sd * z[2],
            params.gamma_y + vel_sd * z[3],
        )
    }
}

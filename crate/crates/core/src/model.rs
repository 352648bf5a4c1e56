//! The joint model for a group of individuals: independent movement per
//! individual, an optional pairwise interaction tilting each time slice, and
//! Gaussian observation error.
//!
//! Up to a normalizing constant that never needs to be computed, the joint
//! density of latent paths `A` and observations `S` factors as
//!
//! ```text
//! p(S, A) = h(S | A) g(A) prod_times prod_pairs psi(delta) / c
//! ```
//!
//! where `h` is the observation layer, `g` the product of per-individual
//! initial densities and movement transitions, and `psi` the pairwise
//! interaction evaluated at the inter-individual distances of every time
//! slice. All density functions here return logs of the unnormalized
//! factors; the samplers only ever use ratios, so `c` cancels.
//!
//! Simulators start from a caller-supplied configuration of states: the
//! first time slice is the given configuration verbatim, and only the later
//! slices are random. That matches how the simulators are used downstream,
//! where synthetic data and posterior-predictive replicates reuse a known
//! starting configuration.

use crate::interaction::{
    log_interaction_about, log_interaction_at_time, pairwise_distance, Interaction,
    InteractionError,
};
use crate::motion::{
    obs_log_density, InitialState, MotionError, MovementParams, Observation, State, StepModel,
};
use crate::tuning::AdaptiveScale;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("time grid must contain at least two times, got {0}")]
    TooFewTimes(usize),
    #[error("times must be finite and strictly increasing (offender at index {0})")]
    BadTimes(usize),
    #[error("dimension mismatch: {context} has {got} {unit}, expected {want}")]
    DimensionMismatch { context: &'static str, got: usize, want: usize, unit: &'static str },
    #[error("need at least one individual")]
    NoIndividuals,
    #[error("initial state of individual {0} is not finite")]
    BadInitialState(usize),
    #[error(
        "initial configuration violates the hard core: individuals {a} and {b} are {distance} \
         apart with hard core {hard_core}"
    )]
    InitInsideHardCore { a: usize, b: usize, distance: f64, hard_core: f64 },
    #[error("deterministic movement (sigma2 = 0) drives a pair inside the hard core at time index {0}")]
    DeterministicCollision(usize),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

/// Strictly increasing observation times shared by all individuals. At
/// least two, so every grid has at least one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, ModelError> {
        if times.len() < 2 {
            return Err(ModelError::TooFewTimes(times.len()));
        }
        if !times[0].is_finite() {
            return Err(ModelError::BadTimes(0));
        }
        for i in 1..times.len() {
            if !times[i].is_finite() || times[i] <= times[i - 1] {
                return Err(ModelError::BadTimes(i));
            }
        }
        Ok(Self { times })
    }

    /// `n` equally spaced times starting at `start`.
    pub fn regular(start: f64, dt: f64, n: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::TooFewTimes(n));
        }
        if !(dt > 0.0) || !dt.is_finite() || !start.is_finite() {
            return Err(ModelError::BadTimes(if start.is_finite() { 1 } else { 0 }));
        }
        Self::new((0..n).map(|i| start + dt * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Length of step `i`, from time `i` to time `i + 1`.
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Latent states for all individuals at all grid times, stored time-major:
/// one contiguous slice per time holds every individual's state, which is
/// the access pattern of both the interaction terms and the slice samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    n_times: usize,
    n_individuals: usize,
    states: Vec<State>,
}

impl PathSet {
    pub fn filled(n_times: usize, n_individuals: usize, state: State) -> Self {
        Self { n_times, n_individuals, states: vec![state; n_times * n_individuals] }
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn state(&self, time_idx: usize, indiv: usize) -> &State {
        &self.states[time_idx * self.n_individuals + indiv]
    }

    pub fn state_mut(&mut self, time_idx: usize, indiv: usize) -> &mut State {
        &mut self.states[time_idx * self.n_individuals + indiv]
    }

    /// All individuals at one time.
    pub fn slice(&self, time_idx: usize) -> &[State] {
        let k = self.n_individuals;
        &self.states[time_idx * k..(time_idx + 1) * k]
    }

    pub fn slice_mut(&mut self, time_idx: usize) -> &mut [State] {
        let k = self.n_individuals;
        &mut self.states[time_idx * k..(time_idx + 1) * k]
    }

    /// One individual's states over time.
    pub fn path(&self, indiv: usize) -> impl Iterator<Item = &State> + '_ {
        (0..self.n_times).map(move |i| self.state(i, indiv))
    }
}

/// Observed locations for all individuals at all grid times (time-major,
/// like [`PathSet`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    n_times: usize,
    n_individuals: usize,
    obs: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(
        n_times: usize,
        n_individuals: usize,
        obs: Vec<Observation>,
    ) -> Result<Self, ModelError> {
        if obs.len() != n_times * n_individuals {
            return Err(ModelError::DimensionMismatch {
                context: "observation buffer",
                got: obs.len(),
                want: n_times * n_individuals,
                unit: "entries",
            });
        }
        Ok(Self { n_times, n_individuals, obs })
    }

    pub fn filled(n_times: usize, n_individuals: usize, o: Observation) -> Self {
        Self { n_times, n_individuals, obs: vec![o; n_times * n_individuals] }
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn get(&self, time_idx: usize, indiv: usize) -> &Observation {
        &self.obs[time_idx * self.n_individuals + indiv]
    }

    pub fn get_mut(&mut self, time_idx: usize, indiv: usize) -> &mut Observation {
        &mut self.obs[time_idx * self.n_individuals + indiv]
    }

    pub fn slice(&self, time_idx: usize) -> &[Observation] {
        let k = self.n_individuals;
        &self.obs[time_idx * k..(time_idx + 1) * k]
    }

    /// Smallest pairwise distance over all times; `None` with fewer than two
    /// individuals. This is the data-driven hard-core radius.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        if self.n_individuals < 2 || self.n_times == 0 {
            return None;
        }
        let mut best = f64::INFINITY;
        for t in 0..self.n_times {
            let s = self.slice(t);
            for j in 0..s.len() {
                for l in (j + 1)..s.len() {
                    let dx = s[j].x - s[l].x;
                    let dy = s[j].y - s[l].y;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        Some(best)
    }
}

/// Precomputed per-step transition models for a grid, one per step (steps
/// with distinct lengths get distinct models).
pub(crate) fn step_models(
    movement: &MovementParams,
    grid: &TimeGrid,
) -> Result<Vec<StepModel>, MotionError> {
    (0..grid.n_steps()).map(|i| StepModel::new(movement, grid.dt(i))).collect()
}

fn check_dims(paths: &PathSet, grid: &TimeGrid, init: &[InitialState]) -> Result<(), ModelError> {
    if paths.n_times() != grid.len() {
        return Err(ModelError::DimensionMismatch {
            context: "paths",
            got: paths.n_times(),
            want: grid.len(),
            unit: "times",
        });
    }
    if init.len() != paths.n_individuals() {
        return Err(ModelError::DimensionMismatch {
            context: "initial states",
            got: init.len(),
            want: paths.n_individuals(),
            unit: "individuals",
        });
    }
    if paths.n_individuals() == 0 {
        return Err(ModelError::NoIndividuals);
    }
    Ok(())
}

/// Log of the movement factor `g(A)`: per-individual initial densities plus
/// all transition densities. Requires `sigma2 > 0`.
pub fn log_g(
    paths: &PathSet,
    movement: &MovementParams,
    init: &[InitialState],
    grid: &TimeGrid,
) -> Result<f64, ModelError> {
    check_dims(paths, grid, init)?;
    let steps = step_models(movement, grid)?;
    log_g_with_steps(paths, movement, init, &steps)
}

/// [`log_g`] against precomputed step models; the fitting loops build the
/// models once per parameter value and reuse them across evaluations.
pub(crate) fn log_g_with_steps(
    paths: &PathSet,
    movement: &MovementParams,
    init: &[InitialState],
    steps: &[StepModel],
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for (j, ini) in init.iter().enumerate() {
        total += ini.log_density(paths.state(0, j), movement)?;
    }
    for (i, step) in steps.iter().enumerate() {
        for j in 0..paths.n_individuals() {
            total += step.log_density(paths.state(i, j), paths.state(i + 1, j))?;
        }
    }
    Ok(total)
}

/// Log of the observation factor `h(S | A)`. Requires `sigma_e2 > 0`.
pub fn log_h(
    observations: &ObservationSet,
    paths: &PathSet,
    sigma_e2: f64,
) -> Result<f64, ModelError> {
    if observations.n_times() != paths.n_times()
        || observations.n_individuals() != paths.n_individuals()
    {
        return Err(ModelError::DimensionMismatch {
            context: "observations",
            got: observations.n_times() * observations.n_individuals(),
            want: paths.n_times() * paths.n_individuals(),
            unit: "entries",
        });
    }
    let mut total = 0.0;
    for t in 0..paths.n_times() {
        for j in 0..paths.n_individuals() {
            total += obs_log_density(observations.get(t, j), paths.state(t, j), sigma_e2)?;
        }
    }
    Ok(total)
}

/// Log of the interaction factor over the whole path set: every time slice
/// contributes its pairwise product.
pub fn log_interaction_paths(paths: &PathSet, interaction: &Interaction) -> f64 {
    let mut total = 0.0;
    for t in 0..paths.n_times() {
        let lp = log_interaction_at_time(paths.slice(t), interaction);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += lp;
    }
    total
}

/// Log of the unnormalized joint density of `(observations, paths)`. Pass
/// `None` for `interaction` to get the interaction-free model.
pub fn log_joint_unnormalized(
    observations: &ObservationSet,
    paths: &PathSet,
    movement: &MovementParams,
    interaction: Option<&Interaction>,
    init: &[InitialState],
    grid: &TimeGrid,
) -> Result<f64, ModelError> {
    let mut total =
        log_h(observations, paths, movement.sigma_e2)? + log_g(paths, movement, init, grid)?;
    if let Some(psi) = interaction {
        total += log_interaction_paths(paths, psi);
    }
    Ok(total)
}

/// Build per-individual diffuse initial-state models anchored at the first
/// observation of each individual.
pub fn anchors_from_observations(
    observations: &ObservationSet,
    loc_var: f64,
) -> Result<Vec<InitialState>, ModelError> {
    if observations.n_times() == 0 {
        return Err(ModelError::TooFewTimes(0));
    }
    (0..observations.n_individuals())
        .map(|j| {
            let o = observations.get(0, j);
            InitialState::new((o.x, o.y), loc_var).map_err(ModelError::from)
        })
        .collect()
}

fn check_init(init: &[State]) -> Result<(), ModelError> {
    if init.is_empty() {
        return Err(ModelError::NoIndividuals);
    }
    for (j, s) in init.iter().enumerate() {
        if !s.is_finite() {
            return Err(ModelError::BadInitialState(j));
        }
    }
    Ok(())
}

/// Simulate the interaction-free model from a fixed starting configuration:
/// the first time slice is `init` verbatim, every individual then follows
/// its own movement process independently, and every state is observed
/// through Gaussian location error.
pub fn simulate_independent<R: Rng + ?Sized>(
    init: &[State],
    movement: &MovementParams,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<(PathSet, ObservationSet), ModelError> {
    check_init(init)?;
    let k = init.len();
    let n = grid.len();
    let steps = step_models(movement, grid)?;
    let mut paths = PathSet::filled(n, k, State::at_rest(0.0, 0.0));
    paths.slice_mut(0).copy_from_slice(init);
    for (i, step) in steps.iter().enumerate() {
        for j in 0..k {
            *paths.state_mut(i + 1, j) = step.sample(paths.state(i, j), rng);
        }
    }
    let obs = observe_paths(&paths, movement.sigma_e2, rng)?;
    Ok((paths, obs))
}

/// Draw one observation per state of `paths`.
pub fn observe_paths<R: Rng + ?Sized>(
    paths: &PathSet,
    sigma_e2: f64,
    rng: &mut R,
) -> Result<ObservationSet, ModelError> {
    let mut obs =
        ObservationSet::filled(paths.n_times(), paths.n_individuals(), Observation::new(0.0, 0.0));
    let sd = if sigma_e2 >= 0.0 && sigma_e2.is_finite() {
        sigma_e2.sqrt()
    } else {
        return Err(ModelError::Motion(MotionError::BadVariance {
            name: "sigma_e2",
            value: sigma_e2,
        }));
    };
    for t in 0..paths.n_times() {
        for j in 0..paths.n_individuals() {
            let s = paths.state(t, j);
            let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            *obs.get_mut(t, j) = Observation::new(s.x + sd * z1, s.y + sd * z2);
        }
    }
    Ok(obs)
}

/// Redraws of a slice's independent start before the simulator gives up on
/// clearing the hard core.
const INIT_RETRIES: usize = 200;

/// Simulate the interacting model from a fixed starting configuration.
///
/// The first time slice is `init` verbatim and must already respect the
/// hard core. Later slices are generated in order: conditionally on slice
/// `i - 1`, slice `i` targets the product of movement transitions tilted by
/// the pairwise interaction. Because the interaction involves locations
/// only, velocities integrate out of that target exactly: the sampler runs
/// `inner_iters` Metropolis-Hastings sweeps of per-individual random-walk
/// updates on locations against the exact location marginal (started from
/// an independent draw, redrawn up to a bounded number of attempts until it
/// clears the hard core), then draws velocities from their exact Gaussian
/// conditional given the sampled locations. Sweeping the full state instead
/// mixes badly: location and velocity are strongly correlated within a
/// step, and the slice-by-slice scheme compounds the equilibration error
/// into runaway velocities. Observations are then drawn exactly given the
/// states.
///
/// This sequential scheme treats the interaction as acting within each step
/// conditionally on the past, which is exactly the time-slice factorization
/// of the model.
///
/// With `sigma2 == 0` the movement is deterministic and the interaction has
/// nothing to tilt, so the mean path is returned (an error if it ever
/// violates the hard core).
pub fn simulate_dppi<R: Rng + ?Sized>(
    init: &[State],
    movement: &MovementParams,
    interaction: &Interaction,
    grid: &TimeGrid,
    inner_iters: usize,
    rng: &mut R,
) -> Result<(PathSet, ObservationSet), ModelError> {
    check_init(init)?;
    let k = init.len();
    let n = grid.len();
    let hard_core = interaction.params().hard_core;
    for a in 0..k {
        for b in (a + 1)..k {
            let d = pairwise_distance(&init[a], &init[b]);
            if d <= hard_core {
                return Err(ModelError::InitInsideHardCore { a, b, distance: d, hard_core });
            }
        }
    }
    let steps = step_models(movement, grid)?;

    let mut paths = PathSet::filled(n, k, State::at_rest(0.0, 0.0));
    paths.slice_mut(0).copy_from_slice(init);

    if movement.sigma2 == 0.0 || k == 1 {
        // Point-mass transitions (or no pairs): the tilt is irrelevant.
        for (i, step) in steps.iter().enumerate() {
            for j in 0..k {
                *paths.state_mut(i + 1, j) = step.sample(paths.state(i, j), rng);
            }
            if k > 1 && movement.sigma2 == 0.0 {
                let lp = log_interaction_at_time(paths.slice(i + 1), interaction);
                if lp == f64::NEG_INFINITY {
                    return Err(ModelError::DeterministicCollision(i + 1));
                }
            }
        }
        let obs = observe_paths(&paths, movement.sigma_e2, rng)?;
        return Ok((paths, obs));
    }

    let mut buf: Vec<State> = vec![State::at_rest(0.0, 0.0); k];
    let mut means: Vec<State> = vec![State::at_rest(0.0, 0.0); k];
    for t in 1..n {
        let step = &steps[t - 1];
        let nz = step.kernel_x().noise;
        let loc_var = movement.sigma2 * nz[0][0];
        let loc_sd = loc_var.sqrt();
        // Velocity given location within one step: Gaussian with this
        // regression slope on the location residual and residual spread.
        let drag = nz[0][1] / nz[0][0];
        let vel_cond_sd =
            (movement.sigma2 * (nz[1][1] - nz[0][1] * nz[0][1] / nz[0][0])).max(0.0).sqrt();
        for (j, mean) in means.iter_mut().enumerate() {
            *mean = step.mean(paths.state(t - 1, j));
        }

        // Independent (untilted) location draw for this slice, redrawn
        // while it violates the hard core. If every redraw lands inside the
        // hard core (possible when the previous slice presses against it
        // with inward velocities), fall back to starting the chain at the
        // previous slice's locations, which are valid by construction; the
        // starting point does not change the chain's target.
        let mut ok = false;
        for _ in 0..INIT_RETRIES {
            for (b, m) in buf.iter_mut().zip(&means) {
                b.x = m.x + loc_sd * rng.sample::<f64, _>(StandardNormal);
                b.y = m.y + loc_sd * rng.sample::<f64, _>(StandardNormal);
            }
            if log_interaction_at_time(&buf, interaction) > f64::NEG_INFINITY {
                ok = true;
                break;
            }
        }
        if !ok {
            for (b, p) in buf.iter_mut().zip(paths.slice(t - 1)) {
                b.x = p.x;
                b.y = p.y;
            }
        }

        slice_mh(&mut buf, &means, loc_var, interaction, inner_iters, rng);

        // Exact conditional velocity draw given the sampled locations.
        for (b, m) in buf.iter_mut().zip(&means) {
            b.vx = m.vx
                + drag * (b.x - m.x)
                + vel_cond_sd * rng.sample::<f64, _>(StandardNormal);
            b.vy = m.vy
                + drag * (b.y - m.y)
                + vel_cond_sd * rng.sample::<f64, _>(StandardNormal);
        }
        paths.slice_mut(t).copy_from_slice(&buf);
    }
    let obs = observe_paths(&paths, movement.sigma_e2, rng)?;
    Ok((paths, obs))
}

/// Metropolis-Hastings over one slice's locations: per-individual Gaussian
/// random-walk proposals against the exact location marginal of the step
/// (mean `means[j]`, variance `loc_var` per coordinate) times the
/// interaction terms touching the individual. Velocities are untouched;
/// callers draw them from their conditional afterwards. A short warm-up
/// adapts the proposal scale toward ~30% acceptance, then the scale
/// freezes for the remaining sweeps.
fn slice_mh<R: Rng + ?Sized>(
    states: &mut [State],
    means: &[State],
    loc_var: f64,
    interaction: &Interaction,
    iters: usize,
    rng: &mut R,
) {
    let k = states.len();
    let loc_sd = loc_var.sqrt();
    let mut scale = AdaptiveScale::new(1.0, 0.3);
    let warmup = (iters / 4).min(50);
    for sweep in 0..iters {
        let mut accepted = 0usize;
        for j in 0..k {
            let base = |s: &State| {
                let dx = s.x - means[j].x;
                let dy = s.y - means[j].y;
                -(dx * dx + dy * dy) / (2.0 * loc_var)
            };
            let cur = states[j];
            let cur_lp = base(&cur) + log_interaction_about(states, j, interaction);
            let s = scale.scale();
            let mut prop = cur;
            prop.x += s * loc_sd * rng.sample::<f64, _>(StandardNormal);
            prop.y += s * loc_sd * rng.sample::<f64, _>(StandardNormal);
            states[j] = prop;
            let prop_lp = base(&prop) + log_interaction_about(states, j, interaction);
            let log_ratio = prop_lp - cur_lp;
            debug_assert!(!log_ratio.is_nan());
            if log_ratio >= 0.0 || rng.gen::<f64>() < log_ratio.exp() {
                accepted += 1;
            } else {
                states[j] = cur;
            }
        }
        if sweep < warmup {
            scale.observe_rate(accepted as f64 / k as f64);
            if sweep + 1 == warmup {
                scale.freeze();
            }
        }
    }
}

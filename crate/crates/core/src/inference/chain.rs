//! Chain configuration, mutable chain state, and retained samples.

use crate::interaction::{Interaction, InteractionParams};
use crate::model::{
    log_joint_unnormalized, anchors_from_observations, ObservationSet, PathSet, TimeGrid,
};
use crate::motion::{InitialState, MovementParams, State, StepModel};
use crate::tuning::AdaptiveScale;

use super::latent::PsiCache;
use super::priors::PriorSpec;
use super::InferenceError;

/// One scalar parameter block of the samplers, in the fixed scan order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    Beta,
    GammaX,
    GammaY,
    Sigma2,
    SigmaE2,
    Theta1,
    Theta2,
    Theta3,
}

impl ParamId {
    /// The movement-and-error block updated by both samplers.
    pub const MOVEMENT: [ParamId; 5] =
        [ParamId::Beta, ParamId::GammaX, ParamId::GammaY, ParamId::Sigma2, ParamId::SigmaE2];

    /// Every block, in scan order.
    pub const ALL: [ParamId; 8] = [
        ParamId::Beta,
        ParamId::GammaX,
        ParamId::GammaY,
        ParamId::Sigma2,
        ParamId::SigmaE2,
        ParamId::Theta1,
        ParamId::Theta2,
        ParamId::Theta3,
    ];

    /// Column index in the draw matrix (also the scan position).
    pub fn index(self) -> usize {
        match self {
            ParamId::Beta => 0,
            ParamId::GammaX => 1,
            ParamId::GammaY => 2,
            ParamId::Sigma2 => 3,
            ParamId::SigmaE2 => 4,
            ParamId::Theta1 => 5,
            ParamId::Theta2 => 6,
            ParamId::Theta3 => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Beta => "beta",
            ParamId::GammaX => "gamma_x",
            ParamId::GammaY => "gamma_y",
            ParamId::Sigma2 => "sigma2",
            ParamId::SigmaE2 => "sigma_e2",
            ParamId::Theta1 => "theta1",
            ParamId::Theta2 => "theta2",
            ParamId::Theta3 => "theta3",
        }
    }

    pub fn is_interaction(self) -> bool {
        matches!(self, ParamId::Theta1 | ParamId::Theta2 | ParamId::Theta3)
    }
}

/// Initial random-walk proposal step sizes, one per scalar block. With
/// adaptation enabled these only set the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalScales {
    pub beta: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub sigma2: f64,
    pub sigma_e2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma_x: 0.5,
            gamma_y: 0.5,
            sigma2: 1.0,
            sigma_e2: 0.5,
            theta1: 5.0,
            theta2: 2.0,
            theta3: 0.1,
        }
    }
}

impl ProposalScales {
    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::Beta => self.beta,
            ParamId::GammaX => self.gamma_x,
            ParamId::GammaY => self.gamma_y,
            ParamId::Sigma2 => self.sigma2,
            ParamId::SigmaE2 => self.sigma_e2,
            ParamId::Theta1 => self.theta1,
            ParamId::Theta2 => self.theta2,
            ParamId::Theta3 => self.theta3,
        }
    }

    fn all(&self) -> [f64; 8] {
        [
            self.beta,
            self.gamma_x,
            self.gamma_y,
            self.sigma2,
            self.sigma_e2,
            self.theta1,
            self.theta2,
            self.theta3,
        ]
    }
}

/// Sampler run configuration shared by both fitters.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    /// Iterations discarded before draws are retained; adaptation freezes
    /// at this boundary.
    pub burn_in: usize,
    /// Keep every `thinning`-th retained iteration.
    pub thinning: usize,
    /// Sweeps of the nested auxiliary chain per double-MH update.
    pub nested_length: usize,
    /// Inner equilibration sweeps for forward interacting simulation
    /// (posterior-predictive work; not used by the chain itself).
    pub inner_sim_iters: usize,
    /// Initial proposal step sizes.
    pub initial_scales: ProposalScales,
    /// Initial latent-block step multiplier (scales the per-step transition
    /// standard deviations).
    pub latent_scale: f64,
    /// Adapt proposal scales during burn-in (Robbins-Monro, frozen after).
    pub adapt: bool,
    /// Stream seed recorded for reproducibility; the fitters draw from the
    /// RNG handed to them, which callers should construct from this.
    pub seed: u64,
    /// Variance of the diffuse initial-location model anchored at each
    /// individual's first observation.
    pub loc_var: f64,
    /// Update `sigma_e2` by exact standard MH instead of double MH. Valid
    /// because the intractable normalizing function does not involve the
    /// observation error; defaults to the double-MH treatment.
    pub exact_sigma_e2: bool,
    /// Replace the interaction with the neutral function that is
    /// identically one. The interacting sampler then targets the same
    /// posterior as the independent one (interaction parameters decouple
    /// and sample their priors) — a machinery cross-check.
    pub neutral_interaction: bool,
    /// Parameters held fixed at their initial values.
    pub fixed: Vec<ParamId>,
    /// Overrides for initial parameter values (default: prior medians).
    pub initial_values: Vec<(ParamId, f64)>,
    /// Record a snapshot of the latent paths every this many retained
    /// iterations.
    pub latent_snapshot_every: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 5_000,
            thinning: 1,
            nested_length: 200,
            inner_sim_iters: 200,
            initial_scales: ProposalScales::default(),
            latent_scale: 1.0,
            adapt: true,
            seed: 0,
            loc_var: 1e4,
            exact_sigma_e2: false,
            neutral_interaction: false,
            fixed: Vec::new(),
            initial_values: Vec::new(),
            latent_snapshot_every: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.iterations == 0 {
            return Err(InferenceError::BadConfig("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(InferenceError::BadConfig("burn-in must be smaller than iterations"));
        }
        if self.thinning == 0 {
            return Err(InferenceError::BadConfig("thinning must be positive"));
        }
        if self.inner_sim_iters == 0 {
            return Err(InferenceError::BadConfig("inner simulation sweep count must be positive"));
        }
        if !(self.latent_scale.is_finite() && self.latent_scale > 0.0) {
            return Err(InferenceError::BadConfig("latent scale must be positive and finite"));
        }
        if !(self.loc_var.is_finite() && self.loc_var > 0.0) {
            return Err(InferenceError::BadConfig(
                "initial-location variance must be positive and finite",
            ));
        }
        if self.initial_scales.all().iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(InferenceError::BadConfig("proposal scales must be positive and finite"));
        }
        if let Some(every) = self.latent_snapshot_every {
            if every == 0 {
                return Err(InferenceError::BadConfig("snapshot stride must be positive"));
            }
        }
        if self.initial_values.iter().any(|(_, v)| !v.is_finite()) {
            return Err(InferenceError::BadConfig("initial parameter values must be finite"));
        }
        Ok(())
    }

    pub(crate) fn is_fixed(&self, id: ParamId) -> bool {
        self.fixed.contains(&id)
    }

    fn initial_value(&self, id: ParamId, default: f64) -> f64 {
        self.initial_values
            .iter()
            .rev()
            .find(|(p, _)| *p == id)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }
}

/// Post-freeze accept/propose tally for one block.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accept {
    pub proposed: u64,
    pub accepted: u64,
}

impl Accept {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Everything that evolves as the sampler runs: current parameters, latent
/// paths, cached interaction values, adaptive proposal scales, and
/// acceptance tallies. Borrows the fixed data.
#[derive(Debug, Clone)]
pub struct ChainState<'a> {
    pub(crate) obs: &'a ObservationSet,
    pub(crate) grid: &'a TimeGrid,
    pub(crate) movement: MovementParams,
    pub(crate) theta: Option<InteractionParams>,
    /// Ready-to-evaluate interaction; `None` for the independent model and
    /// in neutral-interaction mode.
    pub(crate) psi: Option<Interaction>,
    pub(crate) neutral: bool,
    pub(crate) init: Vec<InitialState>,
    pub(crate) steps: Vec<StepModel>,
    pub(crate) paths: PathSet,
    pub(crate) cache: Option<PsiCache>,
    /// Scratch row of proposed interaction values, reused across blocks.
    pub(crate) scratch: Vec<f64>,
    pub(crate) latent_scale: AdaptiveScale,
    /// Indexed by [`ParamId::index`].
    pub(crate) scales: Vec<AdaptiveScale>,
    pub(crate) latent_accept: Accept,
    pub(crate) param_accept: [Accept; 8],
}

/// Fractional dilation applied to each starting time slice about its
/// centroid so the initial latent configuration sits strictly outside the
/// hard core (the closest observed pair sits exactly at the plug-in
/// radius).
const INIT_DILATION: f64 = 1e-6;

impl<'a> ChainState<'a> {
    /// Chain start for the interaction-free model.
    pub fn new_independent(
        obs: &'a ObservationSet,
        grid: &'a TimeGrid,
        prior: &PriorSpec,
        config: &ChainConfig,
    ) -> Result<Self, InferenceError> {
        Self::build(obs, grid, prior, config, false)
    }

    /// Chain start for the interacting model (hard core fixed at
    /// `prior.r_hat`). Needs at least two individuals.
    pub fn new_dppi(
        obs: &'a ObservationSet,
        grid: &'a TimeGrid,
        prior: &PriorSpec,
        config: &ChainConfig,
    ) -> Result<Self, InferenceError> {
        if obs.n_individuals() < 2 {
            return Err(InferenceError::TooFewIndividuals { got: obs.n_individuals(), need: 2 });
        }
        Self::build(obs, grid, prior, config, true)
    }

    fn build(
        obs: &'a ObservationSet,
        grid: &'a TimeGrid,
        prior: &PriorSpec,
        config: &ChainConfig,
        with_interaction: bool,
    ) -> Result<Self, InferenceError> {
        config.validate()?;
        prior.validate()?;
        if obs.n_times() != grid.len() {
            return Err(InferenceError::GridMismatch { got: obs.n_times(), want: grid.len() });
        }
        if obs.n_individuals() == 0 {
            return Err(InferenceError::TooFewIndividuals { got: 0, need: 1 });
        }

        let movement = MovementParams::new(
            config.initial_value(ParamId::Beta, prior.beta.median()),
            config.initial_value(ParamId::GammaX, prior.gamma_x.median()),
            config.initial_value(ParamId::GammaY, prior.gamma_y.median()),
            config.initial_value(ParamId::Sigma2, prior.sigma2.median()),
            config.initial_value(ParamId::SigmaE2, prior.sigma_e2.median()),
        )?;

        let (theta, psi) = if with_interaction {
            let params = InteractionParams::new(
                config.initial_value(ParamId::Theta1, prior.theta1.median()),
                config.initial_value(ParamId::Theta2, prior.theta2.median()),
                config.initial_value(ParamId::Theta3, prior.theta3.median()),
                prior.r_hat,
            )?;
            let psi = if config.neutral_interaction {
                None
            } else {
                Some(Interaction::new(params)?)
            };
            (Some(params), psi)
        } else {
            (None, None)
        };

        let init = anchors_from_observations(obs, config.loc_var)?;
        let steps = crate::model::step_models(&movement, grid)?;

        let n = obs.n_times();
        let k = obs.n_individuals();
        let mut paths = PathSet::filled(n, k, State::at_rest(0.0, 0.0));
        for t in 0..n {
            let (mut cx, mut cy) = (0.0, 0.0);
            for j in 0..k {
                let o = obs.get(t, j);
                cx += o.x;
                cy += o.y;
            }
            cx /= k as f64;
            cy /= k as f64;
            let blow = if psi.is_some() { 1.0 + INIT_DILATION } else { 1.0 };
            for j in 0..k {
                let o = obs.get(t, j);
                *paths.state_mut(t, j) =
                    State::at_rest(cx + blow * (o.x - cx), cy + blow * (o.y - cy));
            }
        }

        let cache = match &psi {
            Some(p) => {
                let cache = PsiCache::build(&paths, p);
                if !cache.all_positive() {
                    return Err(InferenceError::NonFiniteInit(
                        "starting configuration violates the hard core",
                    ));
                }
                Some(cache)
            }
            None => None,
        };

        let lp = log_joint_unnormalized(obs, &paths, &movement, psi.as_ref(), &init, grid)?;
        if !lp.is_finite() {
            return Err(InferenceError::NonFiniteInit("joint log-density not finite at start"));
        }

        let mut latent_scale = AdaptiveScale::new(config.latent_scale, 0.3);
        let mut scales: Vec<AdaptiveScale> = ParamId::ALL
            .iter()
            .map(|id| AdaptiveScale::new(config.initial_scales.get(*id), 0.44))
            .collect();
        if !config.adapt {
            latent_scale.freeze();
            for s in &mut scales {
                s.freeze();
            }
        }

        Ok(Self {
            obs,
            grid,
            movement,
            theta,
            psi,
            neutral: with_interaction && config.neutral_interaction,
            init,
            steps,
            paths,
            cache,
            scratch: vec![0.0; k],
            latent_scale,
            scales,
            latent_accept: Accept::default(),
            param_accept: [Accept::default(); 8],
        })
    }

    pub fn movement(&self) -> &MovementParams {
        &self.movement
    }

    pub fn interaction_params(&self) -> Option<&InteractionParams> {
        self.theta.as_ref()
    }

    pub fn paths(&self) -> &PathSet {
        &self.paths
    }

    pub fn observations(&self) -> &ObservationSet {
        self.obs
    }

    pub fn grid(&self) -> &TimeGrid {
        self.grid
    }

    /// Unnormalized joint log-density of the current state.
    pub fn log_joint(&self) -> Result<f64, InferenceError> {
        Ok(log_joint_unnormalized(
            self.obs,
            &self.paths,
            &self.movement,
            self.psi.as_ref(),
            &self.init,
            self.grid,
        )?)
    }

    /// Freeze every adaptive proposal scale (done at the end of burn-in).
    pub fn freeze_adaptation(&mut self) {
        self.latent_scale.freeze();
        for s in &mut self.scales {
            s.freeze();
        }
    }

    /// Post-freeze acceptance rates by block name.
    pub fn acceptance_rates(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if let Some(r) = self.latent_accept.rate() {
            out.push(("latent".to_string(), r));
        }
        for id in ParamId::ALL {
            if let Some(r) = self.param_accept[id.index()].rate() {
                out.push((id.name().to_string(), r));
            }
        }
        out
    }

    /// Current value of one scalar parameter block.
    pub fn param(&self, id: ParamId) -> Option<f64> {
        match id {
            ParamId::Beta => Some(self.movement.beta),
            ParamId::GammaX => Some(self.movement.gamma_x),
            ParamId::GammaY => Some(self.movement.gamma_y),
            ParamId::Sigma2 => Some(self.movement.sigma2),
            ParamId::SigmaE2 => Some(self.movement.sigma_e2),
            ParamId::Theta1 => self.theta.as_ref().map(|t| t.theta1),
            ParamId::Theta2 => self.theta.as_ref().map(|t| t.theta2),
            ParamId::Theta3 => self.theta.as_ref().map(|t| t.theta3),
        }
    }
}

/// Which model a [`PosteriorSamples`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Independent,
    Dppi,
}

/// Retained posterior draws plus run metadata.
///
/// Rows are draws, columns are parameters in scan order: `beta`, `gamma_x`,
/// `gamma_y`, `sigma2`, `sigma_e2`, and for the interacting model `theta1`,
/// `theta2`, `theta3`.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    kind: ModelKind,
    r_hat: Option<f64>,
    names: Vec<&'static str>,
    draws: Vec<f64>,
    acceptance: Vec<(String, f64)>,
    snapshots: Vec<(usize, PathSet)>,
}

impl PosteriorSamples {
    pub(crate) fn from_parts(
        kind: ModelKind,
        r_hat: Option<f64>,
        draws: Vec<f64>,
        acceptance: Vec<(String, f64)>,
        snapshots: Vec<(usize, PathSet)>,
    ) -> Self {
        let names: Vec<&'static str> = match kind {
            ModelKind::Independent => {
                ParamId::MOVEMENT.iter().map(|id| id.name()).collect()
            }
            ModelKind::Dppi => ParamId::ALL.iter().map(|id| id.name()).collect(),
        };
        debug_assert!(draws.len().is_multiple_of(names.len()));
        Self { kind, r_hat, names, draws, acceptance, snapshots }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Hard-core radius the interaction draws are anchored to.
    pub fn r_hat(&self) -> Option<f64> {
        self.r_hat
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len() / self.names.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[&'static str] {
        &self.names
    }

    pub fn row(&self, draw: usize) -> &[f64] {
        let p = self.names.len();
        &self.draws[draw * p..(draw + 1) * p]
    }

    pub fn value(&self, draw: usize, param: usize) -> f64 {
        self.draws[draw * self.names.len() + param]
    }

    /// Copy of one parameter's chain.
    pub fn column(&self, param: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|d| self.value(d, param)).collect()
    }

    /// Copy of one parameter's chain, by name.
    pub fn column_named(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| *n == name)?;
        Some(self.column(idx))
    }

    /// Movement parameters of one draw.
    pub fn movement_at(&self, draw: usize) -> Result<MovementParams, InferenceError> {
        let r = self.row(draw);
        Ok(MovementParams::new(r[0], r[1], r[2], r[3], r[4])?)
    }

    /// Interaction parameters of one draw (`None` for the independent
    /// model).
    pub fn interaction_at(
        &self,
        draw: usize,
    ) -> Option<Result<InteractionParams, InferenceError>> {
        match (self.kind, self.r_hat) {
            (ModelKind::Dppi, Some(r_hat)) => {
                let r = self.row(draw);
                Some(InteractionParams::new(r[5], r[6], r[7], r_hat).map_err(Into::into))
            }
            _ => None,
        }
    }

    /// Post-freeze acceptance rates by block name.
    pub fn acceptance(&self) -> &[(String, f64)] {
        &self.acceptance
    }

    /// Thinned latent-path snapshots as `(iteration, paths)` pairs.
    pub fn snapshots(&self) -> &[(usize, PathSet)] {
        &self.snapshots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_bad_fields() {
        ChainConfig::default().validate().unwrap();
        let mut c = ChainConfig::default();
        c.burn_in = c.iterations;
        assert!(matches!(c.validate(), Err(InferenceError::BadConfig(_))));
        let c = ChainConfig { thinning: 0, ..ChainConfig::default() };
        assert!(c.validate().is_err());
        let mut c = ChainConfig::default();
        c.initial_scales.theta2 = 0.0;
        assert!(c.validate().is_err());
        let c = ChainConfig { latent_snapshot_every: Some(0), ..ChainConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn initial_value_overrides_take_the_last_entry() {
        let mut c = ChainConfig::default();
        c.initial_values.push((ParamId::Beta, 0.3));
        c.initial_values.push((ParamId::Beta, 0.7));
        assert_eq!(c.initial_value(ParamId::Beta, 1.0), 0.7);
        assert_eq!(c.initial_value(ParamId::Sigma2, 2.5), 2.5);
    }

    #[test]
    fn sample_layout_round_trips() {
        let draws = vec![
            0.5, -1.0, 1.0, 2.0, 0.3, //
            0.6, -1.1, 1.1, 2.1, 0.4,
        ];
        let s = PosteriorSamples::from_parts(
            ModelKind::Independent,
            None,
            draws,
            vec![("latent".into(), 0.31)],
            Vec::new(),
        );
        assert_eq!(s.n_draws(), 2);
        assert_eq!(s.n_params(), 5);
        assert_eq!(s.names()[3], "sigma2");
        assert_eq!(s.value(1, 4), 0.4);
        assert_eq!(s.column_named("gamma_x").unwrap(), vec![-1.0, -1.1]);
        let m = s.movement_at(0).unwrap();
        assert_eq!(m.sigma2, 2.0);
        assert!(s.interaction_at(0).is_none());
    }

    #[test]
    fn dppi_samples_expose_interaction_draws() {
        let draws = vec![0.5, -1.0, 1.0, 2.0, 0.3, 30.0, 33.0, 0.25];
        let s = PosteriorSamples::from_parts(
            ModelKind::Dppi,
            Some(1.5),
            draws,
            Vec::new(),
            Vec::new(),
        );
        assert_eq!(s.n_params(), 8);
        let t = s.interaction_at(0).unwrap().unwrap();
        assert_eq!(t.theta2, 33.0);
        assert_eq!(t.hard_core, 1.5);
    }
}

//! Variable-at-a-time Metropolis-Hastings for the interaction-free model.
//!
//! Without an interaction the joint density is fully tractable, so each
//! scalar parameter gets a plain random-walk MH update: prior ratio plus
//! the likelihood factor the parameter enters — the movement factor for
//! `beta`, the drifts and `sigma2`, the observation factor for `sigma_e2`.
//! Proposals landing outside the prior support are rejected outright,
//! which is valid MH for a truncated target.

use crate::model::{log_g_with_steps, log_h, step_models, ObservationSet, TimeGrid};
use crate::motion::MovementParams;
use rand::Rng;
use rand_distr::StandardNormal;

use super::chain::{ChainConfig, ChainState, ModelKind, ParamId, PosteriorSamples};
use super::latent::update_latent_states;
use super::priors::PriorSpec;
use super::InferenceError;

/// `movement` with one scalar replaced; `None` when the result is not a
/// valid parameter set (treated as a support rejection) or when `id` is an
/// interaction parameter.
pub(crate) fn with_param(
    movement: &MovementParams,
    id: ParamId,
    value: f64,
) -> Option<MovementParams> {
    let mut fields =
        [movement.beta, movement.gamma_x, movement.gamma_y, movement.sigma2, movement.sigma_e2];
    if id.is_interaction() {
        return None;
    }
    fields[id.index()] = value;
    MovementParams::new(fields[0], fields[1], fields[2], fields[3], fields[4]).ok()
}

/// Record one scalar-block outcome: adapt the proposal scale during
/// burn-in, tally acceptance after the freeze.
pub(crate) fn record_param_outcome(chain: &mut ChainState, id: ParamId, accepted: bool) {
    let idx = id.index();
    if chain.scales[idx].is_frozen() {
        chain.param_accept[idx].proposed += 1;
        chain.param_accept[idx].accepted += u64::from(accepted);
    } else {
        chain.scales[idx].observe(accepted);
    }
}

/// One standard MH update of a movement-block parameter against the exact
/// joint density. Used by the independent fitter for every parameter, and
/// by the interacting fitter for `sigma_e2` when the exact update is
/// configured.
pub(crate) fn update_param_exact<R: Rng + ?Sized>(
    chain: &mut ChainState,
    id: ParamId,
    prior: &PriorSpec,
    rng: &mut R,
) {
    let scale = chain.scales[id.index()].scale();
    let cur_val = chain.param(id).expect("movement parameter always present");
    let prop_val = cur_val + scale * rng.sample::<f64, _>(StandardNormal);
    let accepted = try_exact_step(chain, id, prop_val, prior, rng);
    record_param_outcome(chain, id, accepted);
}

fn try_exact_step<R: Rng + ?Sized>(
    chain: &mut ChainState,
    id: ParamId,
    prop_val: f64,
    prior: &PriorSpec,
    rng: &mut R,
) -> bool {
    let Some(prop_m) = with_param(&chain.movement, id, prop_val) else {
        return false;
    };
    let d_prior =
        prior.movement_log_density(&prop_m) - prior.movement_log_density(&chain.movement);
    if d_prior == f64::NEG_INFINITY {
        return false;
    }

    // Likelihood factor the parameter enters. Densities keep their
    // normalizers: these depend on the parameter being updated.
    let (d_like, prop_steps) = if id == ParamId::SigmaE2 {
        let prop = log_h(chain.obs, &chain.paths, prop_m.sigma_e2);
        let cur = log_h(chain.obs, &chain.paths, chain.movement.sigma_e2);
        match (prop, cur) {
            (Ok(p), Ok(c)) => (p - c, None),
            _ => return false,
        }
    } else {
        let Ok(steps) = step_models(&prop_m, chain.grid) else {
            return false;
        };
        let prop = log_g_with_steps(&chain.paths, &prop_m, &chain.init, &steps);
        let cur = log_g_with_steps(&chain.paths, &chain.movement, &chain.init, &chain.steps);
        match (prop, cur) {
            (Ok(p), Ok(c)) => (p - c, Some(steps)),
            _ => return false,
        }
    };

    let log_ratio = d_prior + d_like;
    if log_ratio >= 0.0 || rng.gen::<f64>() < log_ratio.exp() {
        chain.movement = prop_m;
        if let Some(steps) = prop_steps {
            chain.steps = steps;
        }
        true
    } else {
        false
    }
}

/// Append the current parameter row to the draw matrix.
pub(crate) fn push_draw(chain: &ChainState, with_interaction: bool, draws: &mut Vec<f64>) {
    let m = &chain.movement;
    draws.extend_from_slice(&[m.beta, m.gamma_x, m.gamma_y, m.sigma2, m.sigma_e2]);
    if with_interaction {
        let t = chain.theta.as_ref().expect("interacting chain carries parameters");
        draws.extend_from_slice(&[t.theta1, t.theta2, t.theta3]);
    }
}

/// Whether iteration `it` is retained, and if so whether a latent snapshot
/// is due.
pub(crate) fn retention(config: &ChainConfig, it: usize) -> (bool, bool) {
    if it < config.burn_in || !(it - config.burn_in).is_multiple_of(config.thinning) {
        return (false, false);
    }
    let kept_index = (it - config.burn_in) / config.thinning;
    let snap = config.latent_snapshot_every.is_some_and(|every| kept_index.is_multiple_of(every));
    (true, snap)
}

/// Fit the interaction-free model: alternate one latent sweep with one MH
/// update of each free movement parameter, in fixed scan order.
///
/// `grid` supplies the observation times. Draw columns are `beta`,
/// `gamma_x`, `gamma_y`, `sigma2`, `sigma_e2`.
pub fn fit_independent<R: Rng + ?Sized>(
    obs: &ObservationSet,
    grid: &TimeGrid,
    prior: &PriorSpec,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<PosteriorSamples, InferenceError> {
    let mut chain = ChainState::new_independent(obs, grid, prior, config)?;
    let retained = (config.iterations - config.burn_in).div_ceil(config.thinning);
    let mut draws = Vec::with_capacity(retained * 5);
    let mut snapshots = Vec::new();
    for it in 0..config.iterations {
        if it == config.burn_in {
            chain.freeze_adaptation();
        }
        update_latent_states(&mut chain, rng);
        for id in ParamId::MOVEMENT {
            if config.is_fixed(id) {
                continue;
            }
            update_param_exact(&mut chain, id, prior, rng);
        }
        let (keep, snap) = retention(config, it);
        if keep {
            push_draw(&chain, false, &mut draws);
            if snap {
                snapshots.push((it, chain.paths.clone()));
            }
        }
    }
    Ok(PosteriorSamples::from_parts(
        ModelKind::Independent,
        None,
        draws,
        chain.acceptance_rates(),
        snapshots,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate_independent;
    use crate::motion::State;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quantile(sorted: &[f64], p: f64) -> f64 {
        // Weibull plotting positions with linear interpolation.
        let n = sorted.len();
        let h = ((n + 1) as f64 * p).clamp(1.0, n as f64);
        let lo = (h.floor() as usize - 1).min(n - 1);
        let hi = (h.ceil() as usize - 1).min(n - 1);
        let frac = h - h.floor();
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }

    fn simulated_dataset(
        seed: u64,
        n: usize,
        k: usize,
        dt: f64,
        movement: &MovementParams,
    ) -> (crate::model::ObservationSet, TimeGrid) {
        let grid = TimeGrid::regular(0.0, dt, n).unwrap();
        let starts: Vec<State> = (0..k)
            .map(|j| {
                let ang = j as f64 / k as f64 * std::f64::consts::TAU;
                State::at_rest(6.0 * ang.cos(), 6.0 * ang.sin())
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, obs) = simulate_independent(&starts, movement, &grid, &mut rng).unwrap();
        (obs, grid)
    }

    #[test]
    fn degenerate_single_track_runs_and_stays_in_support() {
        let truth = MovementParams::new(0.8, 0.2, -0.1, 1.0, 0.2).unwrap();
        let (obs, grid) = simulated_dataset(2, 2, 1, 0.5, &truth);
        let prior = PriorSpec::defaults(0.1);
        let config = ChainConfig { iterations: 300, burn_in: 150, ..ChainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples = fit_independent(&obs, &grid, &prior, &config, &mut rng).unwrap();
        assert_eq!(samples.n_draws(), 150);
        assert_eq!(samples.n_params(), 5);
        for d in 0..samples.n_draws() {
            let r = samples.row(d);
            assert!(r.iter().all(|v| v.is_finite()));
            assert!(r[0] > 0.0 && r[3] > 0.0 && r[4] > 0.0, "supports violated at draw {d}");
        }
    }

    #[test]
    fn recovers_simulation_truth_at_desk_scale() {
        // Step size near 1/beta so the velocity autocorrelation is visible
        // and the per-step location signal dominates the observation noise.
        let truth = MovementParams::new(0.6, 0.5, -0.5, 1.5, 0.2).unwrap();
        let (obs, grid) = simulated_dataset(31, 80, 4, 1.0, &truth);
        let prior = PriorSpec::defaults(0.1);
        let config = ChainConfig { iterations: 6_000, burn_in: 2_500, ..ChainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let samples = fit_independent(&obs, &grid, &prior, &config, &mut rng).unwrap();

        let truths = [truth.beta, truth.gamma_x, truth.gamma_y, truth.sigma2, truth.sigma_e2];
        let mut covered = 0;
        for (p, want) in truths.iter().enumerate() {
            let mut col = samples.column(p);
            col.sort_by(|a, b| a.total_cmp(b));
            let (lo, hi) = (quantile(&col, 0.025), quantile(&col, 0.975));
            if (lo..=hi).contains(want) {
                covered += 1;
            }
        }
        assert!(covered >= 4, "95% intervals should cover at least 4 of 5 truths, got {covered}");

        // Acceptance sanity after the freeze.
        for (name, rate) in samples.acceptance() {
            assert!(
                (0.05..0.8).contains(rate),
                "block {name} acceptance {rate} outside (0.05, 0.8)"
            );
        }
    }

    #[test]
    fn fixed_parameters_do_not_move() {
        let truth = MovementParams::new(0.7, 0.3, -0.3, 1.2, 0.3).unwrap();
        let (obs, grid) = simulated_dataset(5, 20, 2, 0.5, &truth);
        let prior = PriorSpec::defaults(0.1);
        let config = ChainConfig {
            iterations: 400,
            burn_in: 200,
            fixed: vec![ParamId::Beta, ParamId::SigmaE2],
            initial_values: vec![(ParamId::Beta, 0.7), (ParamId::SigmaE2, 0.3)],
            ..ChainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let samples = fit_independent(&obs, &grid, &prior, &config, &mut rng).unwrap();
        let beta = samples.column_named("beta").unwrap();
        assert!(beta.iter().all(|b| *b == 0.7));
        let se2 = samples.column_named("sigma_e2").unwrap();
        assert!(se2.iter().all(|v| *v == 0.3));
        let s2 = samples.column_named("sigma2").unwrap();
        assert!(s2.windows(2).any(|w| w[0] != w[1]), "free parameters should move");
        // Fixed blocks are absent from the acceptance report.
        assert!(samples.acceptance().iter().all(|(n, _)| n != "beta" && n != "sigma_e2"));
    }

    #[test]
    fn runs_are_deterministic_under_a_fixed_seed() {
        let truth = MovementParams::new(0.9, 0.0, 0.2, 1.1, 0.25).unwrap();
        let (obs, grid) = simulated_dataset(8, 15, 2, 0.5, &truth);
        let prior = PriorSpec::defaults(0.2);
        let config = ChainConfig {
            iterations: 250,
            burn_in: 100,
            latent_snapshot_every: Some(50),
            ..ChainConfig::default()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(55);
            fit_independent(&obs, &grid, &prior, &config, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.n_draws(), b.n_draws());
        for d in 0..a.n_draws() {
            assert_eq!(a.row(d), b.row(d));
        }
        assert_eq!(a.snapshots().len(), b.snapshots().len());
        assert!(!a.snapshots().is_empty());
        for (s, t) in a.snapshots().iter().zip(b.snapshots()) {
            assert_eq!(s.0, t.0);
            assert_eq!(s.1, t.1);
        }
    }

    #[test]
    fn thinning_reduces_retained_draws() {
        let truth = MovementParams::new(0.7, 0.1, 0.1, 1.0, 0.2).unwrap();
        let (obs, grid) = simulated_dataset(3, 10, 2, 0.5, &truth);
        let prior = PriorSpec::defaults(0.3);
        let config =
            ChainConfig { iterations: 230, burn_in: 30, thinning: 10, ..ChainConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let samples = fit_independent(&obs, &grid, &prior, &config, &mut rng).unwrap();
        assert_eq!(samples.n_draws(), 20);
    }
}

//! Latent-state block updates.
//!
//! Both samplers — the posterior chain and the nested auxiliary chain of
//! the double-MH step — sweep the same kernel over the latent states: for
//! each time slice and each individual, a 4-D Gaussian random-walk proposal
//! on the full state (location and velocity, both axes) accepted by a
//! Metropolis ratio of local terms only. The local terms for block
//! `(time i, individual j)` are the incoming transition density (the
//! initial-state density at the first slice), the outgoing transition
//! density (absent at the last slice), the observation density at `i` when
//! sweeping the posterior, and the interaction factors at `i` that involve
//! `j`. At fixed parameters every Gaussian normalizer cancels between the
//! current and proposed state, so only quadratic forms are evaluated.
//!
//! Interaction values are cached per (time, pair) so a block update costs
//! `K - 1` fresh interaction evaluations instead of `K^2`.

use crate::interaction::{pairwise_distance, Interaction, PsiProduct};
use crate::model::{ObservationSet, PathSet};
use crate::motion::{InitialState, MovementParams, State, StepModel};
use rand::Rng;
use rand_distr::StandardNormal;

use super::chain::ChainState;

/// Cached pairwise interaction values for every time slice of a path set,
/// maintained incrementally as single-individual moves are accepted.
#[derive(Debug, Clone)]
pub(crate) struct PsiCache {
    k: usize,
    /// `(t * k + a) * k + b`; symmetric in `(a, b)` with ones on the
    /// diagonal.
    vals: Vec<f64>,
}

impl PsiCache {
    pub fn build(paths: &PathSet, psi: &Interaction) -> Self {
        let k = paths.n_individuals();
        let n = paths.n_times();
        let mut cache = Self { k, vals: vec![1.0; n * k * k] };
        for t in 0..n {
            let slice = paths.slice(t);
            for a in 0..k {
                for b in (a + 1)..k {
                    let v = psi.psi(pairwise_distance(&slice[a], &slice[b]));
                    let (ab, ba) = (cache.idx(t, a, b), cache.idx(t, b, a));
                    cache.vals[ab] = v;
                    cache.vals[ba] = v;
                }
            }
        }
        cache
    }

    #[inline]
    fn idx(&self, t: usize, a: usize, b: usize) -> usize {
        (t * self.k + a) * self.k + b
    }

    /// True when no cached pair sits at or inside the hard core.
    pub fn all_positive(&self) -> bool {
        self.vals.iter().all(|v| *v > 0.0)
    }

    /// Log of the product of interaction values involving individual `j`
    /// at time `t`; `-inf` on a hard-core violation.
    pub fn log_row_sum(&self, t: usize, j: usize) -> f64 {
        let mut prod = PsiProduct::new();
        for b in 0..self.k {
            if b == j {
                continue;
            }
            if !prod.push(self.vals[self.idx(t, j, b)]) {
                return f64::NEG_INFINITY;
            }
        }
        prod.finish()
    }

    /// Log of the interaction product over every time slice and unordered
    /// pair — the cached value of the full interaction factor.
    pub fn log_total(&self) -> f64 {
        let n = self.vals.len() / (self.k * self.k);
        let mut prod = PsiProduct::new();
        for t in 0..n {
            for a in 0..self.k {
                for b in (a + 1)..self.k {
                    if !prod.push(self.vals[self.idx(t, a, b)]) {
                        return f64::NEG_INFINITY;
                    }
                }
            }
        }
        prod.finish()
    }

    /// Install freshly evaluated values for individual `j` at time `t`
    /// (row and matching column). `row[j]` is ignored.
    pub fn write_row(&mut self, t: usize, j: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.k);
        for (b, &v) in row.iter().enumerate() {
            if b == j {
                continue;
            }
            let jb = self.idx(t, j, b);
            self.vals[jb] = v;
            let bj = self.idx(t, b, j);
            self.vals[bj] = v;
        }
    }
}

/// Borrowed pieces defining the target density of one latent sweep. With
/// `obs` set this is the posterior conditional; without it, the
/// unconditional (auxiliary) target of the nested chain.
pub(crate) struct SweepTarget<'b> {
    pub steps: &'b [StepModel],
    pub init: &'b [InitialState],
    pub movement: &'b MovementParams,
    pub psi: Option<&'b Interaction>,
    pub obs: Option<&'b ObservationSet>,
}

/// Local log-target terms of block `(t, j)` evaluated at state `s`, the
/// interaction factor excluded. Gaussian normalizers are dropped: they
/// cancel in every within-sweep comparison.
fn local_base(target: &SweepTarget, paths: &PathSet, t: usize, j: usize, s: &State) -> f64 {
    let mut lp = if t == 0 {
        target.init[j].neg_half_quad(s, target.movement)
    } else {
        target.steps[t - 1].neg_half_quad(paths.state(t - 1, j), s)
    };
    if t + 1 < paths.n_times() {
        lp += target.steps[t].neg_half_quad(s, paths.state(t + 1, j));
    }
    if let Some(obs) = target.obs {
        let o = obs.get(t, j);
        let (dx, dy) = (o.x - s.x, o.y - s.y);
        lp -= (dx * dx + dy * dy) / (2.0 * target.movement.sigma_e2);
    }
    lp
}

/// Interaction values between a proposed state for `j` and every other
/// individual in the slice, written into `scratch`; returns the log
/// product (`-inf` on a hard-core violation, in which case `scratch` is
/// not fully written — callers only use it after acceptance, which a
/// `-inf` ratio precludes).
fn proposal_row(
    slice: &[State],
    j: usize,
    prop: &State,
    psi: &Interaction,
    scratch: &mut [f64],
) -> f64 {
    let mut prod = PsiProduct::new();
    for (b, other) in slice.iter().enumerate() {
        if b == j {
            scratch[b] = 1.0;
            continue;
        }
        let v = psi.psi(pairwise_distance(prop, other));
        scratch[b] = v;
        if !prod.push(v) {
            return f64::NEG_INFINITY;
        }
    }
    prod.finish()
}

/// One full sweep over `(time, individual)` blocks in deterministic
/// time-major order. Proposal standard deviations come from the incoming
/// step's marginal location/velocity scales times `scale` (the first slice
/// borrows the first step's). Returns `(accepted, proposed)`.
pub(crate) fn sweep_latent<R: Rng + ?Sized>(
    target: &SweepTarget,
    paths: &mut PathSet,
    mut cache: Option<&mut PsiCache>,
    scratch: &mut [f64],
    scale: f64,
    rng: &mut R,
) -> (usize, usize) {
    let n = paths.n_times();
    let k = paths.n_individuals();
    debug_assert_eq!(target.steps.len(), n.saturating_sub(1));
    debug_assert!(target.psi.is_none() || cache.is_some());
    let mut accepted = 0usize;
    for t in 0..n {
        let nz = target.steps[t.saturating_sub(1)].kernel_x().noise;
        let loc_sd = scale * (target.movement.sigma2 * nz[0][0]).sqrt();
        let vel_sd = scale * (target.movement.sigma2 * nz[1][1]).sqrt();
        for j in 0..k {
            let cur = *paths.state(t, j);
            let cur_psi = match (&cache, target.psi) {
                (Some(c), Some(_)) => c.log_row_sum(t, j),
                _ => 0.0,
            };
            let prop = State::new(
                cur.x + loc_sd * rng.sample::<f64, _>(StandardNormal),
                cur.vx + vel_sd * rng.sample::<f64, _>(StandardNormal),
                cur.y + loc_sd * rng.sample::<f64, _>(StandardNormal),
                cur.vy + vel_sd * rng.sample::<f64, _>(StandardNormal),
            );
            let prop_psi = match target.psi {
                Some(p) => proposal_row(paths.slice(t), j, &prop, p, scratch),
                None => 0.0,
            };
            let log_ratio = if prop_psi == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let cur_base = local_base(target, paths, t, j, &cur);
                let prop_base = local_base(target, paths, t, j, &prop);
                (prop_base + prop_psi) - (cur_base + cur_psi)
            };
            debug_assert!(!log_ratio.is_nan());
            if log_ratio >= 0.0 || rng.gen::<f64>() < log_ratio.exp() {
                *paths.state_mut(t, j) = prop;
                if let (Some(c), Some(_)) = (cache.as_deref_mut(), target.psi) {
                    c.write_row(t, j, scratch);
                }
                accepted += 1;
            }
        }
    }
    (accepted, n * k)
}

/// One full posterior sweep of the latent states of `chain`.
///
/// During burn-in (scales not yet frozen) the sweep's acceptance rate
/// feeds the latent proposal-scale adaptation; after the freeze it
/// accumulates into the chain's acceptance tally. Returns the number of
/// accepted block moves.
pub fn update_latent_states<R: Rng + ?Sized>(chain: &mut ChainState, rng: &mut R) -> usize {
    let scale = chain.latent_scale.scale();
    let target = SweepTarget {
        steps: &chain.steps,
        init: &chain.init,
        movement: &chain.movement,
        psi: chain.psi.as_ref(),
        obs: Some(chain.obs),
    };
    let (accepted, proposed) = sweep_latent(
        &target,
        &mut chain.paths,
        chain.cache.as_mut(),
        &mut chain.scratch,
        scale,
        rng,
    );
    if chain.latent_scale.is_frozen() {
        chain.latent_accept.proposed += proposed as u64;
        chain.latent_accept.accepted += accepted as u64;
    } else {
        chain.latent_scale.observe_rate(accepted as f64 / proposed as f64);
    }
    accepted
}

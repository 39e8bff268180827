use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::noise::{from_pair_states, pair_states, sample_categorical};
use super::schedule::TransitionSchedule;
use super::train::DiffusionModel;
use crate::diffkit::Matrix;
use crate::error::Result;
use crate::graph::SkeletonGraph;

/// Reverse-step distribution for one variable:
/// Σ_x p̂(x) · q(z_{t−1} = j | z_t, x), where
/// q(j | z_t, x) = Q[t][j, z_t] · Qbar[t−1][x, j] / Qbar[t][x, z_t].
/// Clean states `x` that cannot reach `z_t` drop out; falls back to `p_hat`
/// when none can.
fn posterior(p_hat: &[f64], q_bar_prev: &Matrix, q_t: &Matrix, z_t: usize) -> Vec<f64> {
    let k = p_hat.len();
    let mut w = vec![0.0; k];
    for (x, &px) in p_hat.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let joint: Vec<f64> = (0..k).map(|j| q_t.get(j, z_t) * q_bar_prev.get(x, j)).collect();
        let norm: f64 = joint.iter().sum();
        if norm > 0.0 {
            for (wj, qj) in w.iter_mut().zip(joint) {
                *wj += px * qj / norm;
            }
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w
    } else {
        p_hat.to_vec()
    }
}

/// Runs the reverse chain for a graph with `n` nodes.
pub fn sample_with_size<R: Rng + ?Sized>(
    model: &DiffusionModel,
    schedule: &TransitionSchedule,
    n: usize,
    rng: &mut R,
) -> Result<SkeletonGraph> {
    let edge_marginal = [1.0 - schedule.edge_marginal, schedule.edge_marginal];
    let mut types = (0..n)
        .map(|_| sample_categorical(&schedule.node_marginal, rng))
        .collect::<Result<Vec<_>>>()?;
    let pairs = n * n.saturating_sub(1) / 2;
    let mut states = (0..pairs)
        .map(|_| sample_categorical(&edge_marginal, rng))
        .collect::<Result<Vec<_>>>()?;
    for t in (1..=schedule.steps).rev() {
        let current = from_pair_states(types.clone(), &states);
        let pred = model.denoiser.predict(&model.params, &current, t)?;
        for (u, z) in types.iter_mut().enumerate() {
            let w = posterior(pred.node.row(u), &schedule.qx_bar[t - 1], &schedule.qx[t], *z);
            *z = sample_categorical(&w, rng)?;
        }
        for (i, z) in states.iter_mut().enumerate() {
            let w = posterior(pred.edge.row(i), &schedule.qe_bar[t - 1], &schedule.qe[t], *z);
            *z = sample_categorical(&w, rng)?;
        }
    }
    let out = from_pair_states(types, &states);
    debug_assert_eq!(pair_states(&out), states);
    Ok(out)
}

/// One skeleton: size from the training size distribution, then the reverse
/// chain.
pub fn sample_skeleton<R: Rng + ?Sized>(
    model: &DiffusionModel,
    schedule: &TransitionSchedule,
    rng: &mut R,
) -> Result<SkeletonGraph> {
    let n = model.sizes.sample(rng)?;
    sample_with_size(model, schedule, n, rng)
}

/// `count` skeletons, graph `i` drawn from its own stream `i` of the seed, so
/// the output does not depend on thread scheduling.
pub fn sample_skeletons(model: &DiffusionModel, count: usize, seed: u64) -> Result<Vec<SkeletonGraph>> {
    let schedule = model.build_schedule()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_skeleton(model, &schedule, &mut rng)
        })
        .collect()
}

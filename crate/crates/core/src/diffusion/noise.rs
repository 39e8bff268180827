use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::schedule::TransitionSchedule;
use crate::error::{Error, Result};
use crate::graph::{SkeletonGraph, Structure};

/// All unordered pairs `(u, v)`, `u < v`, in lexicographic order.
pub fn node_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .collect()
}

/// Edge state (0 absent, 1 present) of every pair from [`node_pairs`].
pub fn pair_states<S: Structure + ?Sized>(g: &S) -> Vec<usize> {
    let n = g.node_count();
    let mut present = vec![false; n * n];
    for &(u, v) in g.edges() {
        present[u * n + v] = true;
        present[v * n + u] = true;
    }
    node_pairs(n)
        .into_iter()
        .map(|(u, v)| usize::from(present[u * n + v]))
        .collect()
}

/// Rebuilds a skeleton from node types and per-pair states.
pub fn from_pair_states(types: Vec<usize>, states: &[usize]) -> SkeletonGraph {
    let n = types.len();
    let edges = node_pairs(n)
        .into_iter()
        .zip(states)
        .filter(|(_, &s)| s == 1)
        .map(|(p, _)| p)
        .collect();
    SkeletonGraph::new(types, edges)
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    WeightedIndex::new(weights)
        .map(|d| d.sample(rng))
        .map_err(|e| Error::invalid(format!("categorical weights {weights:?}: {e}")))
}

/// Samples `G^t ~ q(G^t | G)`: every node type from row `types[u]` of
/// `Qbar_X[t]` and every unordered pair's state from the matching row of
/// `Qbar_E[t]`.
pub fn forward_noise<R: Rng + ?Sized>(
    s: &SkeletonGraph,
    t: usize,
    schedule: &TransitionSchedule,
    rng: &mut R,
) -> Result<SkeletonGraph> {
    if t == 0 || t > schedule.steps {
        return Err(Error::invalid(format!(
            "timestep {t} outside 1..={}",
            schedule.steps
        )));
    }
    let qx = &schedule.qx_bar[t];
    let qe = &schedule.qe_bar[t];
    let types = s
        .types
        .iter()
        .map(|&x| sample_categorical(qx.row(x), rng))
        .collect::<Result<Vec<_>>>()?;
    let states = pair_states(s)
        .into_iter()
        .map(|e| sample_categorical(qe.row(e), rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(from_pair_states(types, &states))
}

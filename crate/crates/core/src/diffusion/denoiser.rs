//! The denoising network: graph attention over the noisy skeleton with a
//! learned time embedding, a per-node type head and a symmetric per-pair
//! edge head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::{node_pairs, pair_states};
use crate::diffkit::{Bound, Dense, EdgeIndex, GatStack, Matrix, ParamId, ParamStore, Tape, Var};
use crate::diffkit::nn::{type_count_inputs, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::graph::SkeletonGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub hidden: usize,
    pub depth: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            depth: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Denoiser {
    pub k: usize,
    pub steps: usize,
    pub config: DenoiserConfig,
    input: Dense,
    time: ParamId,
    gat: GatStack,
    node_head: Dense,
    edge_hidden: Dense,
    edge_head: Dense,
}

/// Logits on a tape: `node` is n×K, `edge` is P×2 over [`node_pairs`]
/// (`None` when the graph has fewer than two nodes).
pub struct DenoiserOutput {
    pub node: Var,
    pub edge: Option<Var>,
}

/// Predicted clean-graph distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// n×K, rows sum to 1.
    pub node: Matrix,
    /// P×2 over [`node_pairs`], rows are (absent, present).
    pub edge: Matrix,
}

fn one_hot(indices: &[usize], width: usize) -> Matrix {
    let mut m = Matrix::zeros(indices.len(), width);
    for (r, &i) in indices.iter().enumerate() {
        m.set(r, i, 1.0);
    }
    m
}

impl Denoiser {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        k: usize,
        steps: usize,
        config: DenoiserConfig,
        rng: &mut R,
    ) -> Self {
        let h = config.hidden;
        Self {
            k,
            steps,
            config,
            input: Dense::new(store, "denoiser.input", 2 * k, h, rng),
            time: store.add("denoiser.time", Matrix::glorot(steps, h, rng)),
            gat: GatStack::new(store, "denoiser.gat", h, h, config.depth, rng),
            node_head: Dense::zeroed(store, "denoiser.node_head", h, k),
            edge_hidden: Dense::new(store, "denoiser.edge_hidden", 2 * h + 2, h, rng),
            edge_head: Dense::zeroed(store, "denoiser.edge_head", h, 2),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        noisy: &SkeletonGraph,
        t: usize,
    ) -> Result<DenoiserOutput> {
        if t == 0 || t > self.steps {
            return Err(Error::invalid(format!("timestep {t} outside 1..={}", self.steps)));
        }
        let n = noisy.n;
        let x = tape.constant(type_count_inputs(&noisy.types, &noisy.edges, self.k));
        let h0 = self.input.forward(tape, p, x)?;
        let time = tape.slice_rows(p.get(self.time), t - 1, 1)?;
        let h0 = tape.add_row(h0, time)?;
        let h0 = tape.leaky_relu(h0, LEAKY_SLOPE)?;
        let edges = EdgeIndex::from_undirected(n, &noisy.edges, true);
        let h = self.gat.forward(tape, p, h0, &edges)?;
        let node = self.node_head.forward(tape, p, h)?;

        let pairs = node_pairs(n);
        let edge = if pairs.is_empty() {
            None
        } else {
            let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let hu = tape.gather_rows(h, &us)?;
            let hv = tape.gather_rows(h, &vs)?;
            let sum = tape.add(hu, hv)?;
            let prod = tape.mul(hu, hv)?;
            let state = tape.constant(one_hot(&pair_states(noisy), 2));
            let z = tape.concat_cols(&[sum, prod, state])?;
            let z = self.edge_hidden.forward(tape, p, z)?;
            let z = tape.leaky_relu(z, LEAKY_SLOPE)?;
            Some(self.edge_head.forward(tape, p, z)?)
        };
        Ok(DenoiserOutput { node, edge })
    }

    /// Summed cross-entropy of the clean node types and clean pair states.
    pub fn loss(
        &self,
        tape: &mut Tape,
        p: &Bound,
        clean: &SkeletonGraph,
        noisy: &SkeletonGraph,
        t: usize,
    ) -> Result<Var> {
        if clean.n != noisy.n {
            return Err(Error::invalid("clean and noisy graphs differ in size"));
        }
        let out = self.forward(tape, p, noisy, t)?;
        let node = tape.cross_entropy(out.node, &clean.types)?;
        match out.edge {
            None => Ok(node),
            Some(e) => {
                let edge = tape.cross_entropy(e, &pair_states(clean))?;
                tape.add(node, edge)
            }
        }
    }

    pub fn predict(
        &self,
        store: &ParamStore,
        noisy: &SkeletonGraph,
        t: usize,
    ) -> Result<Prediction> {
        let mut tape = Tape::new();
        let p = store.bind_frozen(&mut tape);
        let out = self.forward(&mut tape, &p, noisy, t)?;
        let node = tape.softmax(out.node)?;
        let node = tape.value(node).clone();
        let edge = match out.edge {
            Some(e) => {
                let e = tape.softmax(e)?;
                tape.value(e).clone()
            }
            None => Matrix::zeros(0, 2),
        };
        Ok(Prediction { node, edge })
    }
}

//! Per-type conditional generators choosing node features from the pools.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::FeaturePool;
use crate::diffkit::nn::type_count_inputs;
use crate::diffkit::gumbel::{gumbel_noise, gumbel_softmax};
use crate::diffkit::{Bound, EdgeIndex, GatStack, Matrix, Mlp, ParamStore, Tape, TypeLayout, TypedBlocks, Var};
use crate::diffusion::noise::sample_categorical;
use crate::error::{Error, Result};
use crate::graph::{GroundMetric, HeteroGraph, SkeletonGraph, TypeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Width of the message-passing state h.
    pub hidden: usize,
    pub mp_depth: usize,
    /// Hidden width of each per-type head.
    pub head_hidden: usize,
    /// Heads see only the one-hot type, not the message-passing state.
    pub no_mp: bool,
    /// Heads emit feature vectors directly instead of pool logits.
    pub no_pool: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            mp_depth: 2,
            head_hidden: 32,
            no_mp: false,
            no_pool: false,
        }
    }
}

/// How features are produced from the heads' outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Hard straight-through Gumbel softmax at this temperature: exact pool
    /// rows forward, soft-relaxation gradients backward.
    Train { temperature: f64 },
    /// Categorical draws from softmax(logits); no gradient path.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub k: usize,
    pub config: GeneratorConfig,
    pub dims: Vec<usize>,
    pub metrics: Vec<GroundMetric>,
    pub pool_sizes: Vec<usize>,
    mp: GatStack,
    heads: Vec<Mlp>,
}

/// Generated features on a tape, grouped by type in [`TypeLayout`] order,
/// plus the chosen features per original node.
pub struct Assignment {
    pub layout: TypeLayout,
    pub blocks: TypedBlocks,
    pub graph: HeteroGraph,
}

fn one_hot_types(types: &[usize], k: usize) -> Matrix {
    let mut m = Matrix::zeros(types.len(), k);
    for (r, &t) in types.iter().enumerate() {
        m.set(r, t, 1.0);
    }
    m
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        table: &TypeTable,
        pools: &FeaturePool,
        config: GeneratorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let k = table.k();
        if pools.k() != k {
            return Err(Error::invalid(format!("{} pools for {k} types", pools.k())));
        }
        let mp = GatStack::new(store, "generator.mp", 2 * k, config.hidden, config.mp_depth, rng);
        let in_width = if config.no_mp { k } else { k + config.hidden };
        let heads = (0..k)
            .map(|t| {
                let out = if config.no_pool {
                    table.dim(t)
                } else {
                    pools.pools[t].len()
                };
                Mlp::new(
                    store,
                    &format!("generator.head{t}"),
                    &[in_width, config.head_hidden, out],
                    true,
                    rng,
                )
            })
            .collect();
        Ok(Self {
            k,
            config,
            dims: table.dims().to_vec(),
            metrics: table.metrics().to_vec(),
            pool_sizes: pools.sizes(),
            mp,
            heads,
        })
    }

    /// `[x_u ‖ h_u]` for every node in original order, with h from the GAT
    /// stack over the one-hot types and neighbour-type counts; just `x_u`
    /// under `no_mp`.
    pub fn mp_update(&self, tape: &mut Tape, p: &Bound, s: &SkeletonGraph) -> Result<Var> {
        let x = tape.constant(one_hot_types(&s.types, self.k));
        if self.config.no_mp {
            return Ok(x);
        }
        let edges = EdgeIndex::from_undirected(s.n, &s.edges, true);
        let counts = tape.constant(type_count_inputs(&s.types, &s.edges, self.k));
        let h = self.mp.forward(tape, p, counts, &edges)?;
        tape.concat_cols(&[x, h])
    }

    /// Head outputs per type for the nodes of that type, in layout order:
    /// pool logits, or raw feature pre-activations under `no_pool`.
    pub fn head_outputs(
        &self,
        tape: &mut Tape,
        p: &Bound,
        s: &SkeletonGraph,
        layout: &TypeLayout,
    ) -> Result<TypedBlocks> {
        if let Some(&t) = s.types.iter().find(|&&t| t >= self.k) {
            return Err(Error::invalid(format!("type {t} out of range for K = {}", self.k)));
        }
        let xh = self.mp_update(tape, p, s)?;
        (0..self.k)
            .map(|t| {
                let members = &layout.members[t];
                if members.is_empty() {
                    return Ok(None);
                }
                if !self.config.no_pool && self.pool_sizes[t] == 0 {
                    return Err(Error::invalid(format!("type {t} has an empty pool")));
                }
                let rows = tape.gather_rows(xh, members)?;
                self.heads[t].forward(tape, p, rows).map(Some)
            })
            .collect()
    }

    /// Pool logits of every node in original order (the generator logits of
    /// each node's own type).
    pub fn node_logits(&self, store: &ParamStore, s: &SkeletonGraph) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let p = store.bind_frozen(&mut tape);
        let layout = TypeLayout::new(&s.types, self.k);
        let blocks = self.head_outputs(&mut tape, &p, s, &layout)?;
        let mut out = vec![Vec::new(); s.n];
        for t in 0..self.k {
            if let Some(b) = blocks[t] {
                let v = tape.value(b);
                for (r, &u) in layout.members[t].iter().enumerate() {
                    out[u] = v.row(r).to_vec();
                }
            }
        }
        Ok(out)
    }

    /// Assigns a feature vector to every node of `s`.
    pub fn assign<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        p: &Bound,
        s: &SkeletonGraph,
        pools: &FeaturePool,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Assignment> {
        let layout = TypeLayout::new(&s.types, self.k);
        let outputs = self.head_outputs(tape, p, s, &layout)?;
        let mut features = vec![Vec::new(); s.n];
        let mut blocks = Vec::with_capacity(self.k);
        for t in 0..self.k {
            let Some(out) = outputs[t] else {
                blocks.push(None);
                continue;
            };
            let members = &layout.members[t];
            let block = if self.config.no_pool {
                self.direct_features(tape, out, t, mode, rng)?
            } else {
                self.pooled_features(tape, out, &pools.pools[t].entries, mode, rng)?
            };
            let v = tape.value(block);
            for (r, &u) in members.iter().enumerate() {
                features[u] = v.row(r).to_vec();
            }
            blocks.push(Some(block));
        }
        let graph = HeteroGraph::new(s.types.clone(), s.edges.clone(), Some(features));
        Ok(Assignment {
            layout,
            blocks,
            graph,
        })
    }

    fn pooled_features<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        logits: Var,
        entries: &[Vec<f64>],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let (rows, cols) = tape.shape(logits);
        if cols != entries.len() {
            return Err(Error::invalid(format!(
                "{cols} logits for a pool of {}",
                entries.len()
            )));
        }
        let pool = Matrix::from_rows(entries);
        match mode {
            Mode::Train { temperature } => {
                let noise = gumbel_noise(rows, cols, rng);
                let y = gumbel_softmax(tape, logits, &noise, temperature, true)?;
                let pool = tape.constant(pool);
                tape.matmul(y, pool)
            }
            Mode::Sample => {
                let probs = tape.softmax(logits)?;
                let probs = tape.value(probs).clone();
                let mut chosen = Matrix::zeros(rows, pool.cols);
                for r in 0..rows {
                    let i = sample_categorical(probs.row(r), rng)?;
                    chosen.row_mut(r).copy_from_slice(pool.row(i));
                }
                Ok(tape.constant(chosen))
            }
        }
    }

    fn direct_features<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        out: Var,
        t: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        match self.metrics[t] {
            GroundMetric::Euclidean => Ok(out),
            GroundMetric::Jaccard => {
                let probs = tape.sigmoid(out)?;
                let mut hard = tape.value(probs).clone();
                for q in &mut hard.data {
                    *q = f64::from(u8::from(rng.gen::<f64>() < *q));
                }
                match mode {
                    Mode::Train { .. } => tape.straight_through(probs, hard),
                    Mode::Sample => Ok(tape.constant(hard)),
                }
            }
        }
    }
}

//! Graph-level real/fake classifier over heterogeneous message passing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffkit::nn::type_count_inputs;
use crate::diffkit::tape::BCE_EPS;
use crate::diffkit::{Bound, HgtStack, Matrix, Mlp, ParamStore, Tape, TypeLayout, TypedBlocks, Var};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub latent: usize,
    pub depth: usize,
    pub hidden: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            latent: 16,
            depth: 2,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub k: usize,
    pub dims: Vec<usize>,
    pub config: DiscriminatorConfig,
    hgt: HgtStack,
    classifier: Mlp,
}

/// A featured graph's feature rows as constant per-type blocks.
pub fn feature_blocks(tape: &mut Tape, g: &HeteroGraph, layout: &TypeLayout) -> Result<TypedBlocks> {
    let feats = g
        .features
        .as_ref()
        .ok_or_else(|| Error::invalid("discriminator needs a featured graph"))?;
    Ok(layout
        .members
        .iter()
        .map(|members| {
            (!members.is_empty()).then(|| {
                let rows: Vec<Vec<f64>> = members.iter().map(|&u| feats[u].clone()).collect();
                tape.constant(Matrix::from_rows(&rows))
            })
        })
        .collect())
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dims: &[usize],
        config: DiscriminatorConfig,
        rng: &mut R,
    ) -> Self {
        let k = dims.len();
        let widths: Vec<usize> = dims.iter().map(|d| d + k).collect();
        Self {
            k,
            dims: dims.to_vec(),
            config,
            hgt: HgtStack::new(store, "discriminator.hgt", &widths, config.latent, config.depth, rng),
            classifier: Mlp::new(
                store,
                "discriminator.classifier",
                &[k * config.latent, config.hidden, 1],
                true,
                rng,
            ),
        }
    }

    /// Per-type means of the message-passing latents, concatenated in type
    /// order; absent types contribute zeros. 1 × K·latent.
    ///
    /// Each node enters the stack as `[features ‖ scaled neighbour-type
    /// counts]`, so the classifier can relate features to local structure.
    pub fn embed(
        &self,
        tape: &mut Tape,
        p: &Bound,
        blocks: TypedBlocks,
        layout: &TypeLayout,
        edges: &[(usize, usize)],
    ) -> Result<Var> {
        let mut types = vec![0; layout.n()];
        for (t, members) in layout.members.iter().enumerate() {
            for &u in members {
                types[u] = t;
            }
        }
        let counts = type_count_inputs(&types, edges, self.k);
        let blocks = blocks
            .into_iter()
            .zip(&layout.members)
            .map(|(b, members)| {
                b.map(|b| {
                    let rows: Vec<Vec<f64>> = members.iter().map(|&u| counts.row(u)[self.k..].to_vec()).collect();
                    let c = tape.constant(Matrix::from_rows(&rows));
                    tape.concat_cols(&[b, c])
                })
                .transpose()
            })
            .collect::<Result<TypedBlocks>>()?;
        let index = layout.edge_index(edges, false);
        let latent = self.hgt.forward(tape, p, blocks, layout, &index)?;
        let parts = latent
            .into_iter()
            .map(|b| match b {
                Some(b) => tape.mean_rows(b),
                None => Ok(tape.constant(Matrix::zeros(1, self.config.latent))),
            })
            .collect::<Result<Vec<_>>>()?;
        tape.concat_cols(&parts)
    }

    /// Probability (1×1) that the graph is real.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        blocks: TypedBlocks,
        layout: &TypeLayout,
        edges: &[(usize, usize)],
    ) -> Result<Var> {
        let e = self.embed(tape, p, blocks, layout, edges)?;
        let logit = self.classifier.forward(tape, p, e)?;
        tape.sigmoid(logit)
    }

    pub fn forward_graph(&self, tape: &mut Tape, p: &Bound, g: &HeteroGraph) -> Result<Var> {
        let layout = TypeLayout::new(&g.types, self.k);
        let blocks = feature_blocks(tape, g, &layout)?;
        self.forward(tape, p, blocks, &layout, &g.edges)
    }

    pub fn embed_graph(&self, store: &ParamStore, g: &HeteroGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = store.bind_frozen(&mut tape);
        let layout = TypeLayout::new(&g.types, self.k);
        let blocks = feature_blocks(&mut tape, g, &layout)?;
        let e = self.embed(&mut tape, &p, blocks, &layout, &g.edges)?;
        Ok(tape.value(e).data.clone())
    }

    /// [`Self::forward_graph`] clamped to [1e-7, 1 − 1e-7].
    pub fn discriminate(&self, store: &ParamStore, g: &HeteroGraph) -> Result<f64> {
        let mut tape = Tape::new();
        let p = store.bind_frozen(&mut tape);
        let d = self.forward_graph(&mut tape, &p, g)?;
        Ok(tape.value(d).item().clamp(BCE_EPS, 1.0 - BCE_EPS))
    }
}

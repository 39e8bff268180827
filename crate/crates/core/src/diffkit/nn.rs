//! Parameter storage and the layers built on the tape: dense, GATv2-style
//! graph attention, and a heterogeneous graph transformer layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: Matrix,
}

/// Named trainable matrices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub params: Vec<NamedParam>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(NamedParam {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Puts every parameter on the tape as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.params.iter().map(|p| tape.var(p.value.clone())).collect())
    }

    /// Puts every parameter on the tape as a constant.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(
            self.params
                .iter()
                .map(|p| tape.constant(p.value.clone()))
                .collect(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }
}

/// Tape handles for a bound [`ParamStore`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(pub Vec<Var>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn grads(&self, g: &Gradients) -> Vec<Matrix> {
        g.collect(&self.0)
    }
}

pub const LEAKY_SLOPE: f64 = 0.2;

/// `y = x·W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w: store.add(format!("{name}.w"), Matrix::glorot(fan_in, fan_out, rng)),
            b: store.add(format!("{name}.b"), Matrix::zeros(1, fan_out)),
            fan_in,
            fan_out,
        }
    }

    /// Zero weights and bias; an output head that starts uniform.
    pub fn zeroed(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: store.add(format!("{name}.w"), Matrix::zeros(fan_in, fan_out)),
            b: store.add(format!("{name}.b"), Matrix::zeros(1, fan_out)),
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, p.get(self.w))?;
        tape.add_row(xw, p.get(self.b))
    }
}

/// Dense layers with leaky ReLU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` = [input, hidden..., output]. The output layer is
    /// zero-initialised when `zero_head` is set.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        zero_head: bool,
        rng: &mut R,
    ) -> Self {
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let lname = format!("{name}.{i}");
                if zero_head && i == last {
                    Dense::zeroed(store, &lname, w[0], w[1])
                } else {
                    Dense::new(store, &lname, w[0], w[1], rng)
                }
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var) -> Result<Var> {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, p, x)?;
            if i + 1 < self.layers.len() {
                x = tape.leaky_relu(x, LEAKY_SLOPE)?;
            }
        }
        Ok(x)
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }
}

/// Directed (target, source) pairs for attention, one per row of a score
/// column. Built once per graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndex {
    pub n: usize,
    pub targets: Vec<usize>,
    pub sources: Vec<usize>,
}

impl EdgeIndex {
    /// Both directions of every undirected edge, optionally plus a self pair
    /// per node.
    pub fn from_undirected(n: usize, edges: &[(usize, usize)], self_loops: bool) -> Self {
        let mut targets = Vec::with_capacity(2 * edges.len() + n);
        let mut sources = Vec::with_capacity(2 * edges.len() + n);
        if self_loops {
            for u in 0..n {
                targets.push(u);
                sources.push(u);
            }
        }
        for &(u, v) in edges {
            targets.push(u);
            sources.push(v);
            targets.push(v);
            sources.push(u);
        }
        Self {
            n,
            targets,
            sources,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Dynamic graph attention: score(u, v) = aᵀ·leaky(W_t x_u + W_s x_v), the
/// softmax runs over N(u) ∪ {u}, and the output is Σ α_uv W_s x_v + b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    pub w_src: ParamId,
    pub w_dst: ParamId,
    pub att: ParamId,
    pub bias: ParamId,
    pub in_width: usize,
    pub out_width: usize,
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_width: usize,
        out_width: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w_src: store.add(format!("{name}.w_src"), Matrix::glorot(in_width, out_width, rng)),
            w_dst: store.add(format!("{name}.w_dst"), Matrix::glorot(in_width, out_width, rng)),
            att: store.add(format!("{name}.att"), Matrix::glorot(out_width, 1, rng)),
            bias: store.add(format!("{name}.bias"), Matrix::zeros(1, out_width)),
            in_width,
            out_width,
        }
    }

    /// `edges` must contain a self pair for every node.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var, edges: &EdgeIndex) -> Result<Var> {
        let xs = tape.matmul(x, p.get(self.w_src))?;
        let xd = tape.matmul(x, p.get(self.w_dst))?;
        let src = tape.gather_rows(xs, &edges.sources)?;
        let dst = tape.gather_rows(xd, &edges.targets)?;
        let z = tape.add(src, dst)?;
        let z = tape.leaky_relu(z, LEAKY_SLOPE)?;
        let scores = tape.matmul(z, p.get(self.att))?;
        let alpha = tape.segment_softmax(scores, &edges.targets)?;
        let msg = tape.mul_col(src, alpha)?;
        let agg = tape.scatter_add_rows(msg, &edges.targets, edges.n)?;
        tape.add_row(agg, p.get(self.bias))
    }
}

/// Stack of [`GatLayer`]s with leaky ReLU after each layer.
/// Scale applied to neighbour-type counts so typical degrees stay O(1).
pub const COUNT_SCALE: f64 = 0.25;

/// `[one-hot type ‖ scaled count of neighbours of each type]`, n × 2K.
/// Attention aggregation is a weighted mean and cannot see degree; the
/// counts put it back. Equivariant under node relabelling.
pub fn type_count_inputs(types: &[usize], edges: &[(usize, usize)], k: usize) -> Matrix {
    let mut m = Matrix::zeros(types.len(), 2 * k);
    for (u, &t) in types.iter().enumerate() {
        m.set(u, t, 1.0);
    }
    for &(u, v) in edges {
        let (tu, tv) = (types[u], types[v]);
        m.set(u, k + tv, m.get(u, k + tv) + COUNT_SCALE);
        m.set(v, k + tu, m.get(v, k + tu) + COUNT_SCALE);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatStack {
    pub layers: Vec<GatLayer>,
}

impl GatStack {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_width: usize,
        hidden: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|i| {
                let w_in = if i == 0 { in_width } else { hidden };
                GatLayer::new(store, &format!("{name}.{i}"), w_in, hidden, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var, edges: &EdgeIndex) -> Result<Var> {
        for layer in &self.layers {
            x = layer.forward(tape, p, x, edges)?;
            x = tape.leaky_relu(x, LEAKY_SLOPE)?;
        }
        Ok(x)
    }
}

/// Nodes regrouped by type: type 0 nodes first (in node order), then type 1,
/// and so on. Heterogeneous layers operate on this row order so that each
/// type's rows form one contiguous block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeLayout {
    pub k: usize,
    /// Original node ids per type.
    pub members: Vec<Vec<usize>>,
    /// Start row of each type block.
    pub offsets: Vec<usize>,
    /// Row of each original node.
    pub position: Vec<usize>,
}

impl TypeLayout {
    pub fn new(types: &[usize], k: usize) -> Self {
        let mut members = vec![Vec::new(); k];
        for (u, &t) in types.iter().enumerate() {
            members[t].push(u);
        }
        let mut offsets = Vec::with_capacity(k);
        let mut position = vec![0; types.len()];
        let mut row = 0;
        for m in &members {
            offsets.push(row);
            for &u in m {
                position[u] = row;
                row += 1;
            }
        }
        Self {
            k,
            members,
            offsets,
            position,
        }
    }

    pub fn n(&self) -> usize {
        self.position.len()
    }

    pub fn count(&self, t: usize) -> usize {
        self.members[t].len()
    }

    /// Original-numbered edges mapped to grouped rows.
    pub fn edge_index(&self, edges: &[(usize, usize)], self_loops: bool) -> EdgeIndex {
        let mapped: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(u, v)| (self.position[u], self.position[v]))
            .collect();
        EdgeIndex::from_undirected(self.n(), &mapped, self_loops)
    }
}

/// Per-type input for a heterogeneous layer: one n_k×d_k block per type,
/// `None` for types with no nodes.
pub type TypedBlocks = Vec<Option<Var>>;

/// Heterogeneous graph transformer layer with a single edge type.
///
/// Keys, queries and values use type-specific maps; the attention and
/// message transforms are shared. Aggregation is a sum over neighbours.
/// Output: A_τ(leaky(agg)) + S_τ(x), with S_τ a type-specific self path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgtLayer {
    pub key: Vec<Dense>,
    pub query: Vec<Dense>,
    pub value: Vec<Dense>,
    pub skip: Vec<Dense>,
    pub out: Vec<Dense>,
    pub w_att: ParamId,
    pub w_msg: ParamId,
    pub latent: usize,
}

impl HgtLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_widths: &[usize],
        latent: usize,
        rng: &mut R,
    ) -> Self {
        let per_type = |store: &mut ParamStore, part: &str, rng: &mut R, in_override: Option<usize>| {
            in_widths
                .iter()
                .enumerate()
                .map(|(t, &d)| {
                    Dense::new(
                        store,
                        &format!("{name}.{part}{t}"),
                        in_override.unwrap_or(d),
                        latent,
                        rng,
                    )
                })
                .collect::<Vec<_>>()
        };
        let key = per_type(store, "key", rng, None);
        let query = per_type(store, "query", rng, None);
        let value = per_type(store, "value", rng, None);
        let skip = per_type(store, "skip", rng, None);
        let out = per_type(store, "out", rng, Some(latent));
        Self {
            key,
            query,
            value,
            skip,
            out,
            w_att: store.add(format!("{name}.w_att"), Matrix::glorot(latent, latent, rng)),
            w_msg: store.add(format!("{name}.w_msg"), Matrix::glorot(latent, latent, rng)),
            latent,
        }
    }

    fn typed_linear(
        maps: &[Dense],
        tape: &mut Tape,
        p: &Bound,
        x: &TypedBlocks,
    ) -> Result<TypedBlocks> {
        maps.iter()
            .zip(x)
            .map(|(m, b)| b.map(|b| m.forward(tape, p, b)).transpose())
            .collect()
    }

    fn stack(tape: &mut Tape, blocks: &TypedBlocks) -> Result<Var> {
        let present: Vec<Var> = blocks.iter().flatten().copied().collect();
        tape.concat_rows(&present)
    }

    fn unstack(tape: &mut Tape, all: Var, layout: &TypeLayout) -> Result<TypedBlocks> {
        (0..layout.k)
            .map(|t| {
                let c = layout.count(t);
                (c > 0)
                    .then(|| tape.slice_rows(all, layout.offsets[t], c))
                    .transpose()
            })
            .collect()
    }

    /// `edges` are in grouped row order, without self pairs.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: &TypedBlocks,
        layout: &TypeLayout,
        edges: &EdgeIndex,
    ) -> Result<TypedBlocks> {
        if x.len() != layout.k || self.key.len() != layout.k {
            return Err(Error::Shape {
                op: "hgt_layer",
                detail: format!("{} blocks for {} types", x.len(), layout.k),
            });
        }
        let skip = Self::typed_linear(&self.skip, tape, p, x)?;
        let agg = if edges.is_empty() {
            None
        } else {
            let k = Self::typed_linear(&self.key, tape, p, x)?;
            let q = Self::typed_linear(&self.query, tape, p, x)?;
            let v = Self::typed_linear(&self.value, tape, p, x)?;
            let (k, q, v) = (
                Self::stack(tape, &k)?,
                Self::stack(tape, &q)?,
                Self::stack(tape, &v)?,
            );
            let k_att = tape.matmul(k, p.get(self.w_att))?;
            let v_msg = tape.matmul(v, p.get(self.w_msg))?;
            let ks = tape.gather_rows(k_att, &edges.sources)?;
            let qt = tape.gather_rows(q, &edges.targets)?;
            let prod = tape.mul(ks, qt)?;
            let scores = tape.row_sum(prod)?;
            let scores = tape.scale(scores, 1.0 / (self.latent as f64).sqrt())?;
            let alpha = tape.segment_softmax(scores, &edges.targets)?;
            let msg = tape.gather_rows(v_msg, &edges.sources)?;
            let msg = tape.mul_col(msg, alpha)?;
            let agg = tape.scatter_add_rows(msg, &edges.targets, edges.n)?;
            Some(Self::unstack(tape, agg, layout)?)
        };
        (0..layout.k)
            .map(|t| {
                let Some(s) = skip[t] else { return Ok(None) };
                let a = match &agg {
                    Some(blocks) => tape.leaky_relu(blocks[t].expect("present type"), LEAKY_SLOPE)?,
                    None => tape.constant(Matrix::zeros(layout.count(t), self.latent)),
                };
                let o = self.out[t].forward(tape, p, a)?;
                tape.add(o, s).map(Some)
            })
            .collect()
    }
}

/// Stack of [`HgtLayer`]s; the first maps per-type widths to the latent
/// width, later layers are latent to latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgtStack {
    pub layers: Vec<HgtLayer>,
}

impl HgtStack {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_widths: &[usize],
        latent: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let k = in_widths.len();
        let layers = (0..depth)
            .map(|i| {
                let widths = if i == 0 {
                    in_widths.to_vec()
                } else {
                    vec![latent; k]
                };
                HgtLayer::new(store, &format!("{name}.{i}"), &widths, latent, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        mut x: TypedBlocks,
        layout: &TypeLayout,
        edges: &EdgeIndex,
    ) -> Result<TypedBlocks> {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, p, &x, layout, edges)?;
            if i + 1 < self.layers.len() {
                x = x
                    .into_iter()
                    .map(|b| b.map(|b| tape.leaky_relu(b, LEAKY_SLOPE)).transpose())
                    .collect::<Result<_>>()?;
            }
        }
        Ok(x)
    }

    pub fn latent(&self) -> usize {
        self.layers.last().map_or(0, |l| l.latent)
    }
}

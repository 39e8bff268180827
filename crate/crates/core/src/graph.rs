//! Typed heterogeneous graphs: the data model shared by every other module.
//!
//! Graphs are simple and undirected. Edges are stored as `(u, v)` pairs with
//! `u < v`, sorted lexicographically, so two structurally equal graphs have
//! equal edge vectors. Constructors normalise edge order but do not reject
//! bad input; [`validate`] reports every violated invariant instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used between two feature vectors of one node type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundMetric {
    Jaccard,
    Euclidean,
}

/// Per-type feature dimensions, ground metrics and display names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeTable {
    dims: Vec<usize>,
    ground_metric: Vec<GroundMetric>,
    type_names: Vec<String>,
}

impl TypeTable {
    pub fn new(
        dims: Vec<usize>,
        ground_metric: Vec<GroundMetric>,
        type_names: Vec<String>,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("type table needs at least one type"));
        }
        if ground_metric.len() != dims.len() || type_names.len() != dims.len() {
            return Err(Error::invalid(format!(
                "type table lengths disagree: dims {}, ground_metric {}, type_names {}",
                dims.len(),
                ground_metric.len(),
                type_names.len()
            )));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::invalid(format!("type {k} has feature dimension 0")));
        }
        Ok(Self {
            dims,
            ground_metric,
            type_names,
        })
    }

    /// Number of node types.
    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, k: usize) -> usize {
        self.dims[k]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn metric(&self, k: usize) -> GroundMetric {
        self.ground_metric[k]
    }

    pub fn metrics(&self) -> &[GroundMetric] {
        &self.ground_metric
    }

    pub fn name(&self, k: usize) -> &str {
        &self.type_names[k]
    }

    pub fn names(&self) -> &[String] {
        &self.type_names
    }
}

/// Read access to the structural part of a graph (types and edges).
pub trait Structure {
    fn node_count(&self) -> usize;
    fn types(&self) -> &[usize];
    fn edges(&self) -> &[(usize, usize)];

    /// Sorted neighbour lists. Out-of-range endpoints are skipped.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in self.edges() {
            if u < n && v < n && u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for &(u, v) in self.edges() {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// Sorts every pair to `(min, max)` and the list lexicographically.
/// Duplicates are kept so that validation can report them.
pub fn canonical_edges(mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for e in &mut edges {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
    }
    edges.sort_unstable();
    edges
}

/// Types and edges, no features. Phase-1 output and Phase-2 input.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkeletonGraph {
    pub n: usize,
    pub types: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl SkeletonGraph {
    pub fn new(types: Vec<usize>, edges: Vec<(usize, usize)>) -> Self {
        Self {
            n: types.len(),
            types,
            edges: canonical_edges(edges),
        }
    }

    pub fn into_graph(self) -> HeteroGraph {
        HeteroGraph {
            n: self.n,
            types: self.types,
            edges: self.edges,
            features: None,
            meta: BTreeMap::new(),
        }
    }
}

impl Structure for SkeletonGraph {
    fn node_count(&self) -> usize {
        self.n
    }
    fn types(&self) -> &[usize] {
        &self.types
    }
    fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// A heterogeneous graph: typed nodes, undirected edges, optional per-node
/// features and free-form string metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeteroGraph {
    pub n: usize,
    pub types: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub features: Option<Vec<Vec<f64>>>,
    pub meta: BTreeMap<String, String>,
}

impl HeteroGraph {
    pub fn new(
        types: Vec<usize>,
        edges: Vec<(usize, usize)>,
        features: Option<Vec<Vec<f64>>>,
    ) -> Self {
        Self {
            n: types.len(),
            types,
            edges: canonical_edges(edges),
            features,
            meta: BTreeMap::new(),
        }
    }

    pub fn skeleton(&self) -> SkeletonGraph {
        SkeletonGraph {
            n: self.n,
            types: self.types.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// Feature vectors of all type-`k` nodes, in node order.
    pub fn features_of_type(&self, k: usize) -> Option<Vec<&[f64]>> {
        let feats = self.features.as_ref()?;
        Some(
            self.types
                .iter()
                .zip(feats)
                .filter(|(&t, _)| t == k)
                .map(|(_, f)| f.as_slice())
                .collect(),
        )
    }
}

impl Structure for HeteroGraph {
    fn node_count(&self) -> usize {
        self.n
    }
    fn types(&self) -> &[usize] {
        &self.types
    }
    fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NodeCountMismatch { n: usize, types: usize },
    TypeOutOfRange { node: usize, ty: usize },
    EndpointOutOfRange { u: usize, v: usize },
    SelfLoop { node: usize },
    DuplicateEdge { u: usize, v: usize },
    FeatureCountMismatch { expected: usize, got: usize },
    DimensionMismatch { node: usize, expected: usize, got: usize },
    NonBinaryJaccard { node: usize, index: usize },
    NonFiniteFeature { node: usize, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeCountMismatch { n, types } => {
                write!(f, "node count {n} but {types} type entries")
            }
            Violation::TypeOutOfRange { node, ty } => {
                write!(f, "type {ty} out of range at node {node}")
            }
            Violation::EndpointOutOfRange { u, v } => {
                write!(f, "edge ({u},{v}) has an endpoint out of range")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::DuplicateEdge { u, v } => write!(f, "duplicate edge ({u},{v})"),
            Violation::FeatureCountMismatch { expected, got } => {
                write!(f, "features present for {got} of {expected} nodes")
            }
            Violation::DimensionMismatch {
                node,
                expected,
                got,
            } => write!(
                f,
                "dimension mismatch at node {node}: expected {expected}, got {got}"
            ),
            Violation::NonBinaryJaccard { node, index } => {
                write!(f, "non-binary jaccard feature at node {node}, index {index}")
            }
            Violation::NonFiniteFeature { node, index } => {
                write!(f, "non-finite feature at node {node}, index {index}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::invalid(self.messages().join("; ")))
        }
    }
}

fn structural_violations<S: Structure + ?Sized>(g: &S, k: usize, out: &mut Vec<Violation>) {
    let n = g.node_count();
    if g.types().len() != n {
        out.push(Violation::NodeCountMismatch {
            n,
            types: g.types().len(),
        });
    }
    for (node, &ty) in g.types().iter().enumerate() {
        if ty >= k {
            out.push(Violation::TypeOutOfRange { node, ty });
        }
    }
    let mut seen = BTreeSet::new();
    for &(a, b) in g.edges() {
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        if v >= n {
            out.push(Violation::EndpointOutOfRange { u, v });
            continue;
        }
        if u == v {
            out.push(Violation::SelfLoop { node: u });
            continue;
        }
        if !seen.insert((u, v)) {
            out.push(Violation::DuplicateEdge { u, v });
        }
    }
}

/// Checks every graph invariant and returns the complete list of violations.
pub fn validate(graph: &HeteroGraph, table: &TypeTable) -> ValidationReport {
    let mut violations = Vec::new();
    structural_violations(graph, table.k(), &mut violations);
    if let Some(feats) = &graph.features {
        if feats.len() != graph.n {
            violations.push(Violation::FeatureCountMismatch {
                expected: graph.n,
                got: feats.len(),
            });
        }
        for (node, (f, &ty)) in feats.iter().zip(&graph.types).enumerate() {
            if ty >= table.k() {
                continue;
            }
            if f.len() != table.dim(ty) {
                violations.push(Violation::DimensionMismatch {
                    node,
                    expected: table.dim(ty),
                    got: f.len(),
                });
            }
            for (index, &x) in f.iter().enumerate() {
                if !x.is_finite() {
                    violations.push(Violation::NonFiniteFeature { node, index });
                } else if table.metric(ty) == GroundMetric::Jaccard && x != 0.0 && x != 1.0 {
                    violations.push(Violation::NonBinaryJaccard { node, index });
                    break;
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Structural validation only (skeletons carry no features).
pub fn validate_skeleton(skeleton: &SkeletonGraph, k: usize) -> ValidationReport {
    let mut violations = Vec::new();
    structural_violations(skeleton, k, &mut violations);
    ValidationReport { violations }
}

/// A node bijection on `[0, n)`: node `u` moves to position `perm[u]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPermutation {
    perm: Vec<usize>,
}

impl LabeledPermutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid(format!(
                    "not a bijection on [0, {}): {perm:?}",
                    perm.len()
                )));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn apply(&self, u: usize) -> usize {
        self.perm[u]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (u, &p) in self.perm.iter().enumerate() {
            inv[p] = u;
        }
        Self { perm: inv }
    }

    /// Moves the entry at index `u` to index `perm[u]`.
    pub fn scatter<T: Clone>(&self, items: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; items.len()];
        for (u, item) in items.iter().enumerate() {
            out[self.perm[u]] = Some(item.clone());
        }
        out.into_iter().map(|x| x.expect("bijection")).collect()
    }

    fn map_edges(&self, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
        canonical_edges(
            edges
                .iter()
                .map(|&(u, v)| (self.perm[u], self.perm[v]))
                .collect(),
        )
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.perm.len() != n {
            return Err(Error::invalid(format!(
                "permutation of length {} applied to graph with {n} nodes",
                self.perm.len()
            )));
        }
        Ok(())
    }
}

/// Graph kinds that can be relabelled by a [`LabeledPermutation`].
pub trait Permute: Sized {
    fn permute(&self, p: &LabeledPermutation) -> Result<Self>;
}

impl Permute for SkeletonGraph {
    fn permute(&self, p: &LabeledPermutation) -> Result<Self> {
        p.check_len(self.n)?;
        Ok(Self {
            n: self.n,
            types: p.scatter(&self.types),
            edges: p.map_edges(&self.edges),
        })
    }
}

impl Permute for HeteroGraph {
    fn permute(&self, p: &LabeledPermutation) -> Result<Self> {
        p.check_len(self.n)?;
        Ok(Self {
            n: self.n,
            types: p.scatter(&self.types),
            edges: p.map_edges(&self.edges),
            features: self.features.as_ref().map(|f| p.scatter(f)),
            meta: self.meta.clone(),
        })
    }
}

/// Node `u`'s type and feature move to position `p(u)`; edge `(u, v)`
/// becomes `(p(u), p(v))`.
pub fn labeled_permute<G: Permute>(graph: &G, p: &LabeledPermutation) -> Result<G> {
    graph.permute(p)
}

/// An edge `(u, v)` carrying a label from a finite label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledEdge {
    pub u: usize,
    pub v: usize,
    pub label: String,
}

/// Replaces every labeled edge `(v, u)` with a fresh node `n_e` and the two
/// unlabeled edges `(v, n_e)`, `(n_e, u)`.
///
/// One new type per distinct label is appended to the table, in sorted label
/// order, with dimension 1 and a jaccard metric. When the input carries
/// features every reified node gets the feature `[1.0]`.
pub fn reify_edge_labels(
    graph: &HeteroGraph,
    table: &TypeTable,
    labeled: &[LabeledEdge],
) -> Result<(TypeTable, HeteroGraph)> {
    if labeled.is_empty() {
        return Ok((table.clone(), graph.clone()));
    }
    let labels: BTreeSet<&str> = labeled.iter().map(|e| e.label.as_str()).collect();
    if let Some(clash) = labels.iter().find(|l| table.names().iter().any(|n| n == *l)) {
        return Err(Error::invalid(format!(
            "edge label {clash:?} collides with an existing node type name"
        )));
    }
    let fresh: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (*l, table.k() + i))
        .collect();

    let mut dims = table.dims().to_vec();
    let mut metrics = table.metrics().to_vec();
    let mut names = table.names().to_vec();
    for label in &labels {
        dims.push(1);
        metrics.push(GroundMetric::Jaccard);
        names.push((*label).to_string());
    }
    let new_table = TypeTable::new(dims, metrics, names)?;

    let mut types = graph.types.clone();
    let mut edges = graph.edges.clone();
    let mut features = graph.features.clone();
    for e in labeled {
        if e.u >= graph.n || e.v >= graph.n || e.u == e.v {
            return Err(Error::invalid(format!(
                "labeled edge ({}, {}) is not a valid edge",
                e.u, e.v
            )));
        }
        let ne = types.len();
        types.push(fresh[e.label.as_str()]);
        edges.push((e.u, ne));
        edges.push((ne, e.v));
        if let Some(f) = features.as_mut() {
            f.push(vec![1.0]);
        }
    }
    let mut out = HeteroGraph::new(types, edges, features);
    out.meta = graph.meta.clone();
    Ok((new_table, out))
}

/// Dense 0/1 encodings of a skeleton: `x` is n×K one-hot types, `e` is the
/// n×n symmetric adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHot {
    pub x: Vec<Vec<u8>>,
    pub e: Vec<Vec<u8>>,
}

pub fn one_hot_encode(s: &SkeletonGraph, table: &TypeTable) -> OneHot {
    let k = table.k();
    let x = s
        .types
        .iter()
        .map(|&t| (0..k).map(|j| u8::from(j == t)).collect())
        .collect();
    let mut e = vec![vec![0u8; s.n]; s.n];
    for &(u, v) in &s.edges {
        e[u][v] = 1;
        e[v][u] = 1;
    }
    OneHot { x, e }
}

/// Inverse of [`one_hot_encode`].
pub fn one_hot_decode(enc: &OneHot) -> Result<SkeletonGraph> {
    let types = enc
        .x
        .iter()
        .enumerate()
        .map(|(u, row)| {
            let hot: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(j, _)| j)
                .collect();
            match hot.as_slice() {
                [t] => Ok(*t),
                _ => Err(Error::invalid(format!("row {u} is not one-hot"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = types.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if enc.e[u][v] != enc.e[v][u] {
                return Err(Error::invalid(format!("adjacency asymmetric at ({u},{v})")));
            }
            if enc.e[u][v] == 1 {
                edges.push((u, v));
            }
        }
    }
    Ok(SkeletonGraph::new(types, edges))
}

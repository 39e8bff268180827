//! Corpus construction: categorical splitting of a large graph, seeded
//! train/val/test partitioning, feature pools and empirical statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate, GroundMetric, HeteroGraph, Structure, TypeTable};
use crate::metrics::distance::ground_distance;

/// Meta key under which a graph's split tag is stored in corpus files.
pub const SPLIT_META_KEY: &str = "split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.72,
            val: 0.08,
            test: 0.20,
        }
    }
}

/// Split sizes for `m` graphs: floor each fraction, then hand leftovers out
/// one at a time in the order val, test, train.
pub fn split_counts(m: usize, fractions: SplitFractions) -> [usize; 3] {
    let floor = |f: f64| ((f * m as f64) + 1e-9).floor() as usize;
    let mut counts = [floor(fractions.train), floor(fractions.val), floor(fractions.test)];
    let mut total: usize = counts.iter().sum();
    // round-robin val -> test -> train
    let order = [1, 2, 0];
    let mut i = 0;
    while total < m {
        counts[order[i % 3]] += 1;
        total += 1;
        i += 1;
    }
    counts
}

/// Graphs plus their split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub table: TypeTable,
    pub graphs: Vec<HeteroGraph>,
    pub split: Vec<Split>,
    pub seed: u64,
}

impl Corpus {
    pub fn graphs_in(&self, which: Split) -> Vec<&HeteroGraph> {
        self.graphs
            .iter()
            .zip(&self.split)
            .filter(|(_, &s)| s == which)
            .map(|(g, _)| g)
            .collect()
    }

    pub fn train(&self) -> Vec<&HeteroGraph> {
        self.graphs_in(Split::Train)
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.split {
            c[*s as usize] += 1;
        }
        c
    }

    /// Graphs with their split tag written into `meta`.
    pub fn tagged_graphs(&self) -> Vec<HeteroGraph> {
        self.graphs
            .iter()
            .zip(&self.split)
            .map(|(g, s)| {
                let mut g = g.clone();
                g.meta.insert(SPLIT_META_KEY.into(), s.as_str().into());
                g
            })
            .collect()
    }

    /// Rebuilds a corpus from graphs whose meta already carries split tags.
    /// Returns `None` when any graph is untagged.
    pub fn from_tagged(table: TypeTable, graphs: Vec<HeteroGraph>) -> Result<Option<Self>> {
        let mut split = Vec::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            match g.meta.get(SPLIT_META_KEY) {
                None => return Ok(None),
                Some(s) => split.push(Split::parse(s).ok_or_else(|| Error::Record {
                    index: i,
                    message: format!("unknown split tag {s:?}"),
                })?),
            }
        }
        Ok(Some(Self {
            table,
            graphs,
            split,
            seed: 0,
        }))
    }
}

/// Seeded shuffle followed by [`split_counts`] partitioning.
pub fn assign_splits(
    table: TypeTable,
    graphs: Vec<HeteroGraph>,
    seed: u64,
    fractions: SplitFractions,
) -> Result<Corpus> {
    if graphs.len() < 5 {
        return Err(Error::invalid(format!(
            "need at least 5 graphs to populate train/val/test, got {}",
            graphs.len()
        )));
    }
    for (index, g) in graphs.iter().enumerate() {
        let report = validate(g, &table);
        if !report.is_valid() {
            return Err(Error::Record {
                index,
                message: report.messages().join("; "),
            });
        }
    }
    let [n_train, n_val, _] = split_counts(graphs.len(), fractions);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = vec![Split::Test; graphs.len()];
    for (rank, &gi) in order.iter().enumerate() {
        split[gi] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(Corpus {
        table,
        graphs,
        split,
        seed,
    })
}

/// Per-node categorical values, keyed by node id of the large graph.
pub type CategoryTable = BTreeMap<usize, BTreeMap<String, String>>;

#[derive(Deserialize)]
struct CategoryLine {
    graph_node: usize,
    values: BTreeMap<String, serde_json::Value>,
}

/// Parses `{"graph_node": id, "values": {...}}` lines. Non-string values are
/// stored in their JSON text form.
pub fn parse_category_table(text: &str) -> Result<CategoryTable> {
    let mut table = CategoryTable::new();
    for (index, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let parsed: CategoryLine = serde_json::from_str(line).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        let values = parsed
            .values
            .into_iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, s)
            })
            .collect();
        table.insert(parsed.graph_node, values);
    }
    Ok(table)
}

/// Splits `big` into one induced subgraph per distinct combination of the
/// values of `keys`.
///
/// Nodes listed in `categories` (the anchors) belong to the component of
/// their own combination. Unlisted nodes inherit the combinations of their
/// anchor neighbours and are replicated into each of them. Components with
/// more than `max_nodes` nodes are dropped. Output order follows the sorted
/// combination; node order within a component follows the original ids.
pub fn split_by_categories(
    big: &HeteroGraph,
    categories: &CategoryTable,
    keys: &[String],
    max_nodes: usize,
) -> Result<Vec<HeteroGraph>> {
    for key in keys {
        if !categories.values().any(|v| v.contains_key(key)) {
            return Err(Error::invalid(format!("unknown category key {key:?}")));
        }
    }
    let own: BTreeMap<usize, Vec<String>> = categories
        .iter()
        .filter(|(&node, _)| node < big.n)
        .filter_map(|(&node, values)| {
            keys.iter()
                .map(|k| values.get(k).cloned())
                .collect::<Option<Vec<_>>>()
                .map(|combo| (node, combo))
        })
        .collect();

    let adj = big.adjacency();
    let mut members: BTreeMap<Vec<String>, BTreeSet<usize>> = BTreeMap::new();
    for u in 0..big.n {
        if categories.contains_key(&u) {
            if let Some(combo) = own.get(&u) {
                members.entry(combo.clone()).or_default().insert(u);
            }
        } else {
            for v in &adj[u] {
                if let Some(combo) = own.get(v) {
                    members.entry(combo.clone()).or_default().insert(u);
                }
            }
        }
    }

    let mut out = Vec::new();
    for (combo, nodes) in members {
        if nodes.len() > max_nodes {
            continue;
        }
        let nodes: Vec<usize> = nodes.into_iter().collect();
        let mut g = induced_subgraph(big, &nodes);
        for (k, v) in keys.iter().zip(combo) {
            g.meta.insert(k.clone(), v);
        }
        out.push(g);
    }
    Ok(out)
}

/// Subgraph induced by `nodes` (sorted, distinct), relabelled `0..len`.
pub fn induced_subgraph(g: &HeteroGraph, nodes: &[usize]) -> HeteroGraph {
    let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let edges = g
        .edges
        .iter()
        .filter_map(|&(u, v)| Some((*index.get(&u)?, *index.get(&v)?)))
        .collect();
    let types = nodes.iter().map(|&u| g.types[u]).collect();
    let features = g
        .features
        .as_ref()
        .map(|f| nodes.iter().map(|&u| f[u].clone()).collect());
    HeteroGraph::new(types, edges, features)
}

/// Unique feature vectors of one node type with their training multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePool {
    pub entries: Vec<Vec<f64>>,
    pub multiplicity: Vec<usize>,
}

impl TypePool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-type candidate feature vectors harvested from training graphs.
///
/// `penalty[k]` is the distance charged by the feature EMD for a type present
/// in only one of two graphs: 1.0 for jaccard types, the pool diameter for
/// euclidean types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePool {
    pub pools: Vec<TypePool>,
    pub penalty: Vec<f64>,
}

fn feature_key(f: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal, so they share a key
    f.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }).collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

impl FeaturePool {
    /// Builds pools from an arbitrary set of featured graphs. Entries are
    /// sorted lexicographically so the result does not depend on graph order.
    pub fn from_graphs<'a>(
        table: &TypeTable,
        graphs: impl IntoIterator<Item = &'a HeteroGraph>,
    ) -> Result<Self> {
        let mut maps: Vec<HashMap<Vec<u64>, (Vec<f64>, usize)>> = vec![HashMap::new(); table.k()];
        for (gi, g) in graphs.into_iter().enumerate() {
            let feats = g.features.as_ref().ok_or_else(|| Error::Record {
                index: gi,
                message: "training graph has no features".into(),
            })?;
            for (f, &t) in feats.iter().zip(&g.types) {
                let entry = maps[t]
                    .entry(feature_key(f))
                    .or_insert_with(|| (f.iter().map(|&x| x + 0.0).collect(), 0));
                entry.1 += 1;
            }
        }
        let mut pools = Vec::with_capacity(table.k());
        for (k, map) in maps.into_iter().enumerate() {
            if map.is_empty() {
                return Err(Error::invalid(format!(
                    "type {k} ({}) has no training nodes; its generator would have empty support",
                    table.name(k)
                )));
            }
            let mut items: Vec<(Vec<f64>, usize)> = map.into_values().collect();
            items.sort_by(|a, b| lex_cmp(&a.0, &b.0));
            let (entries, multiplicity) = items.into_iter().unzip();
            pools.push(TypePool {
                entries,
                multiplicity,
            });
        }
        let penalty = pools
            .iter()
            .enumerate()
            .map(|(k, p)| match table.metric(k) {
                GroundMetric::Jaccard => 1.0,
                GroundMetric::Euclidean => {
                    let d = pool_diameter(p, table.metric(k));
                    if d > 0.0 {
                        d
                    } else {
                        1.0
                    }
                }
            })
            .collect();
        Ok(Self { pools, penalty })
    }

    pub fn k(&self) -> usize {
        self.pools.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.pools.iter().map(TypePool::len).collect()
    }
}

fn pool_diameter(pool: &TypePool, metric: GroundMetric) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in pool.entries.iter().enumerate() {
        for b in &pool.entries[i + 1..] {
            best = best.max(ground_distance(metric, a, b));
        }
    }
    best
}

/// Pools from the training split only.
pub fn build_pools(corpus: &Corpus) -> Result<FeaturePool> {
    FeaturePool::from_graphs(&corpus.table, corpus.train())
}

/// Empirical node-type distribution of one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution(pub Vec<f64>);

pub fn type_distribution<S: Structure + ?Sized>(g: &S, k: usize) -> Result<TypeDistribution> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::invalid("type distribution of an empty graph"));
    }
    let mut counts = vec![0usize; k];
    for &t in g.types() {
        counts[t] += 1;
    }
    Ok(TypeDistribution(
        counts.into_iter().map(|c| c as f64 / n as f64).collect(),
    ))
}

/// Histogram of graph sizes, sampled to pick `n` for generated skeletons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeDistribution {
    /// `(n, count)` pairs sorted by `n`.
    pub counts: Vec<(usize, usize)>,
}

impl SizeDistribution {
    pub fn from_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut hist = BTreeMap::new();
        for n in sizes {
            *hist.entry(n).or_insert(0usize) += 1;
        }
        Self {
            counts: hist.into_iter().collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.1).sum()
    }

    pub fn probability(&self, n: usize) -> f64 {
        let total = self.total();
        self.counts
            .iter()
            .find(|c| c.0 == n)
            .map_or(0.0, |c| c.1 as f64 / total as f64)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let dist = WeightedIndex::new(self.counts.iter().map(|c| c.1))
            .map_err(|e| Error::invalid(format!("size distribution: {e}")))?;
        Ok(self.counts[dist.sample(rng)].0)
    }
}

/// Size histogram over the training split.
pub fn size_distribution(corpus: &Corpus) -> SizeDistribution {
    SizeDistribution::from_sizes(corpus.train().iter().map(|g| g.n))
}

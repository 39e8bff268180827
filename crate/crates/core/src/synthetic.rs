//! Seeded synthetic corpora with known ground truth.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::noise::sample_categorical;
use crate::error::{Error, Result};
use crate::graph::{labeled_permute, GroundMetric, HeteroGraph, LabeledPermutation, TypeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Movie-centric graphs whose features come from small planted pools,
    /// with entry frequencies that depend on local structure.
    PlantedPools,
    /// Two structurally distinct families (stars and wheels), tagged in
    /// `meta["family"]`.
    TwoFamilies,
    /// Movie-anchored stars with sparse random binary features.
    TinyImdbLike,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "planted-pools" => Ok(Self::PlantedPools),
            "two-families" => Ok(Self::TwoFamilies),
            "tiny-imdb-like" => Ok(Self::TinyImdbLike),
            _ => Err(Error::invalid(format!(
                "unknown profile `{s}` (expected planted-pools, two-families or tiny-imdb-like)"
            ))),
        }
    }

    pub fn default_count(self) -> usize {
        match self {
            // 60 training graphs under the default split fractions
            Self::PlantedPools => 84,
            Self::TwoFamilies => 1000,
            Self::TinyImdbLike => 100,
        }
    }
}

pub const PLANTED_DIM: usize = 16;
const PLANTED_POOL_SIZES: [usize; 3] = [4, 6, 3];

fn imdb_table() -> TypeTable {
    TypeTable::new(
        vec![PLANTED_DIM; 3],
        vec![GroundMetric::Jaccard; 3],
        vec!["movie".into(), "actor".into(), "director".into()],
    )
    .expect("static table")
}

/// Distinct binary vectors with 3–6 set bits; no vector is shared between
/// types.
pub fn planted_entries(seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut seen = BTreeSet::new();
    PLANTED_POOL_SIZES
        .iter()
        .map(|&size| {
            let mut entries = Vec::with_capacity(size);
            while entries.len() < size {
                let bits = rng.gen_range(3..=6);
                let mut positions: Vec<usize> = (0..PLANTED_DIM).collect();
                positions.shuffle(&mut rng);
                let mut v = vec![0.0; PLANTED_DIM];
                for &i in &positions[..bits] {
                    v[i] = 1.0;
                }
                let key: Vec<u8> = v.iter().map(|&x| x as u8).collect();
                if seen.insert(key) {
                    entries.push(v);
                }
            }
            entries
        })
        .collect()
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    sample_categorical(weights, rng).expect("static weights")
}

fn planted_graph(entries: &[Vec<Vec<f64>>], rng: &mut ChaCha8Rng) -> HeteroGraph {
    let movies = if rng.gen_bool(0.6) { 1 } else { 2 };
    let mut types = Vec::new();
    let mut edges = Vec::new();
    let mut feats: Vec<Vec<f64>> = Vec::new();
    let push = |types: &mut Vec<usize>, feats: &mut Vec<Vec<f64>>, t: usize, e: usize| {
        types.push(t);
        feats.push(entries[t][e].clone());
        types.len() - 1
    };
    let mut first_cast = Vec::new();
    for m in 0..movies {
        let cast = rng.gen_range(2..=5);
        let big = cast >= 4;
        let movie_entry = if big {
            pick(&[0.7, 0.2, 0.1, 0.0], rng)
        } else {
            pick(&[0.0, 0.1, 0.3, 0.6], rng)
        };
        let movie = push(&mut types, &mut feats, 0, movie_entry);
        let director_entry = if big {
            pick(&[0.8, 0.2, 0.0], rng)
        } else {
            pick(&[0.0, 0.3, 0.7], rng)
        };
        let director = push(&mut types, &mut feats, 2, director_entry);
        edges.push((movie, director));
        for _ in 0..cast {
            let actor_entry = if big {
                1 + pick(&[0.6, 0.3, 0.1], rng)
            } else {
                3 + pick(&[0.2, 0.5, 0.3], rng)
            };
            let actor = push(&mut types, &mut feats, 1, actor_entry);
            edges.push((movie, actor));
            if m == 0 {
                first_cast.push(actor);
            }
        }
        if m == 1 && rng.gen_bool(0.5) {
            // a lead shared by both movies, always the planted entry 0
            let shared = push(&mut types, &mut feats, 1, 0);
            edges.push((0, shared));
            edges.push((movie, shared));
        }
    }
    let g = HeteroGraph::new(types, edges, Some(feats));
    let perm = LabeledPermutation::random(g.n, rng);
    labeled_permute(&g, &perm).expect("matching size")
}

/// Planted-pools corpus and its planted entries per type.
pub fn planted_pools(seed: u64, count: usize) -> (TypeTable, Vec<HeteroGraph>, Vec<Vec<Vec<f64>>>) {
    let entries = planted_entries(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = (0..count).map(|_| planted_graph(&entries, &mut rng)).collect();
    (imdb_table(), graphs, entries)
}

fn family_table() -> TypeTable {
    TypeTable::new(
        vec![1, 1],
        vec![GroundMetric::Jaccard; 2],
        vec!["hub".into(), "spoke".into()],
    )
    .expect("static table")
}

/// Family "a": a type-0 centre with type-1 leaves. Family "b": a type-1 hub
/// joined to a cycle of type-0 rim nodes.
pub fn two_families(seed: u64, per_family: usize) -> (TypeTable, Vec<HeteroGraph>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(2 * per_family);
    for _ in 0..per_family {
        let leaves = rng.gen_range(4..=10);
        let mut types = vec![0];
        types.extend(std::iter::repeat(1).take(leaves));
        let edges = (1..=leaves).map(|v| (0, v)).collect();
        let feats = vec![vec![1.0]; leaves + 1];
        graphs.push(HeteroGraph::new(types, edges, Some(feats)).with_meta("family", "a"));
    }
    for _ in 0..per_family {
        let rim = rng.gen_range(4..=10);
        let mut types = vec![1];
        types.extend(std::iter::repeat(0).take(rim));
        let mut edges: Vec<(usize, usize)> = (1..=rim).map(|v| (0, v)).collect();
        edges.extend((1..=rim).map(|v| (v, if v == rim { 1 } else { v + 1 })));
        let feats = vec![vec![1.0]; rim + 1];
        graphs.push(HeteroGraph::new(types, edges, Some(feats)).with_meta("family", "b"));
    }
    (family_table(), graphs)
}

/// One movie with 3–8 actors and a director; each feature bit is set with
/// probability 0.2. `meta` carries year and country categories.
pub fn tiny_imdb_like(seed: u64, count: usize) -> (TypeTable, Vec<HeteroGraph>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = (0..count)
        .map(|_| {
            let cast = rng.gen_range(3..=8);
            let mut types = vec![0, 2];
            types.extend(std::iter::repeat(1).take(cast));
            let edges = (1..cast + 2).map(|v| (0, v)).collect();
            let feats = types
                .iter()
                .map(|_| {
                    (0..PLANTED_DIM)
                        .map(|_| f64::from(u8::from(rng.gen_bool(0.2))))
                        .collect()
                })
                .collect();
            let year = 2000 + rng.gen_range(0..4);
            let country = ["us", "uk", "fr"][rng.gen_range(0..3)];
            HeteroGraph::new(types, edges, Some(feats))
                .with_meta("year", year.to_string())
                .with_meta("country", country)
        })
        .collect();
    (imdb_table(), graphs)
}

/// The corpus of `profile` with `count` graphs (per family for
/// two-families), or the profile's default size.
pub fn make_synthetic(profile: Profile, seed: u64, count: Option<usize>) -> (TypeTable, Vec<HeteroGraph>) {
    match profile {
        Profile::PlantedPools => {
            let (t, g, _) = planted_pools(seed, count.unwrap_or(profile.default_count()));
            (t, g)
        }
        Profile::TwoFamilies => two_families(seed, count.unwrap_or(profile.default_count() / 2)),
        Profile::TinyImdbLike => tiny_imdb_like(seed, count.unwrap_or(profile.default_count())),
    }
}

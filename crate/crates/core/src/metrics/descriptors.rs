//! Per-graph structural descriptors: degree and type-degree histograms,
//! clustering coefficients and the normalised-Laplacian spectrum.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::graph::Structure;

/// Row `u`, column `i` counts neighbours of `u` having type `i`.
pub fn type_degree_vectors<S: Structure + ?Sized>(g: &S, k: usize) -> Vec<Vec<usize>> {
    let types = g.types();
    let mut out = vec![vec![0usize; k]; g.node_count()];
    for &(u, v) in g.edges() {
        out[u][types[v]] += 1;
        out[v][types[u]] += 1;
    }
    out
}

/// Normalised histogram of `values` over `0..support`.
pub fn count_histogram(values: &[usize], support: usize) -> Vec<f64> {
    let mut h = vec![0.0; support];
    if values.is_empty() {
        return h;
    }
    for &v in values {
        h[v] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Normalised histogram of `values` in `bins` uniform bins over `[lo, hi]`;
/// values at or beyond the edges land in the outer bins.
pub fn binned_histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    if values.is_empty() {
        return h;
    }
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = ((v - lo) / width).floor();
        let b = if b.is_nan() { 0.0 } else { b.clamp(0.0, (bins - 1) as f64) };
        h[b as usize] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Local clustering coefficient per node; 0 for nodes of degree < 2.
pub fn clustering_coefficients<S: Structure + ?Sized>(g: &S) -> Vec<f64> {
    let adj = g.adjacency();
    let n = adj.len();
    let mut mark = vec![false; n];
    (0..n)
        .map(|u| {
            let d = adj[u].len();
            if d < 2 {
                return 0.0;
            }
            for &v in &adj[u] {
                mark[v] = true;
            }
            let mut links = 0usize;
            for &v in &adj[u] {
                links += adj[v].iter().filter(|&&w| mark[w]).count();
            }
            for &v in &adj[u] {
                mark[v] = false;
            }
            // each triangle edge between neighbours was counted twice
            links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Eigenvalues of L = I − D^{-1/2} A D^{-1/2}, with isolated nodes
/// contributing a zero row and column.
pub fn normalized_laplacian_spectrum<S: Structure + ?Sized>(g: &S) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let deg = g.degrees();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        if deg[u] > 0 {
            l[(u, u)] = 1.0;
        }
    }
    for &(u, v) in g.edges() {
        let w = -1.0 / ((deg[u] * deg[v]) as f64).sqrt();
        l[(u, v)] = w;
        l[(v, u)] = w;
    }
    SymmetricEigen::new(l).eigenvalues.iter().copied().collect()
}

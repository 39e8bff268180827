//! Maximum mean discrepancy between descriptor samples, and the graph
//! metrics built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descriptors::{
    binned_histogram, clustering_coefficients, count_histogram, normalized_laplacian_spectrum,
    type_degree_vectors,
};
use crate::graph::Structure;

/// Kernel bandwidth and histogram binning for the structural metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub sigma: f64,
    pub clustering_bins: usize,
    pub spectral_bins: usize,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            clustering_bins: 100,
            spectral_bins: 64,
        }
    }
}

/// exp(−‖x − y‖² / (2σ²)); shorter vectors are zero-padded.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let len = x.len().max(y.len());
    let d2: f64 = (0..len)
        .map(|i| {
            let a = x.get(i).copied().unwrap_or(0.0);
            let b = y.get(i).copied().unwrap_or(0.0);
            (a - b) * (a - b)
        })
        .sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn mean_kernel(xs: &[Vec<f64>], ys: &[Vec<f64>], sigma: f64) -> f64 {
    let total: f64 = xs
        .par_iter()
        .map(|x| ys.iter().map(|y| gaussian_kernel(x, y, sigma)).sum::<f64>())
        .sum();
    total / (xs.len() * ys.len()) as f64
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel, clipped at 0.
pub fn mmd(xs: &[Vec<f64>], ys: &[Vec<f64>], sigma: f64) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return 0.0;
    }
    let v = mean_kernel(xs, xs, sigma) + mean_kernel(ys, ys, sigma) - 2.0 * mean_kernel(xs, ys, sigma);
    v.max(0.0)
}

fn degree_values<S: Structure>(g: &S) -> Vec<usize> {
    g.degrees()
}

fn histograms(values: &[Vec<usize>], support: usize) -> Vec<Vec<f64>> {
    values.iter().map(|v| count_histogram(v, support)).collect()
}

fn support_of(sets: &[&[Vec<usize>]]) -> usize {
    sets.iter()
        .flat_map(|s| s.iter().flatten())
        .copied()
        .max()
        .map_or(1, |m| m + 1)
}

/// MMD between per-graph normalised degree histograms on the shared
/// support 0..=max degree.
pub fn degree_mmd<A, B>(a: &[A], b: &[B], cfg: &MmdConfig) -> f64
where
    A: Structure + Sync,
    B: Structure + Sync,
{
    let da: Vec<Vec<usize>> = a.par_iter().map(degree_values).collect();
    let db: Vec<Vec<usize>> = b.par_iter().map(degree_values).collect();
    let support = support_of(&[&da, &db]);
    mmd(&histograms(&da, support), &histograms(&db, support), cfg.sigma)
}

/// The mean over types of the degree MMD restricted to neighbours of each
/// type.
pub fn type_degree_mmd<A, B>(a: &[A], b: &[B], k: usize, cfg: &MmdConfig) -> f64
where
    A: Structure + Sync,
    B: Structure + Sync,
{
    let ta: Vec<Vec<Vec<usize>>> = a.par_iter().map(|g| type_degree_vectors(g, k)).collect();
    let tb: Vec<Vec<Vec<usize>>> = b.par_iter().map(|g| type_degree_vectors(g, k)).collect();
    let column = |sets: &[Vec<Vec<usize>>], i: usize| -> Vec<Vec<usize>> {
        sets.iter()
            .map(|rows| rows.iter().map(|r| r[i]).collect())
            .collect()
    };
    let total: f64 = (0..k)
        .map(|i| {
            let ca = column(&ta, i);
            let cb = column(&tb, i);
            let support = support_of(&[&ca, &cb]);
            mmd(&histograms(&ca, support), &histograms(&cb, support), cfg.sigma)
        })
        .sum();
    total / k as f64
}

/// MMD between local-clustering histograms (uniform bins on [0, 1]).
pub fn clustering_mmd<A, B>(a: &[A], b: &[B], cfg: &MmdConfig) -> f64
where
    A: Structure + Sync,
    B: Structure + Sync,
{
    let hist = |g: &dyn Fn() -> Vec<f64>| binned_histogram(&g(), cfg.clustering_bins, 0.0, 1.0);
    let ha: Vec<Vec<f64>> = a.par_iter().map(|g| hist(&|| clustering_coefficients(g))).collect();
    let hb: Vec<Vec<f64>> = b.par_iter().map(|g| hist(&|| clustering_coefficients(g))).collect();
    mmd(&ha, &hb, cfg.sigma)
}

fn spectral_histogram<S: Structure + ?Sized>(g: &S, bins: usize) -> Vec<f64> {
    let ev = normalized_laplacian_spectrum(g);
    if ev.is_empty() {
        let mut h = vec![0.0; bins];
        h[0] = 1.0;
        return h;
    }
    binned_histogram(&ev, bins, 0.0, 2.0)
}

/// MMD between normalised-Laplacian eigenvalue histograms (uniform bins on
/// [0, 2]).
pub fn spectral_mmd<A, B>(a: &[A], b: &[B], cfg: &MmdConfig) -> f64
where
    A: Structure + Sync,
    B: Structure + Sync,
{
    let ha: Vec<Vec<f64>> = a
        .par_iter()
        .map(|g| spectral_histogram(g, cfg.spectral_bins))
        .collect();
    let hb: Vec<Vec<f64>> = b
        .par_iter()
        .map(|g| spectral_histogram(g, cfg.spectral_bins))
        .collect();
    mmd(&ha, &hb, cfg.sigma)
}

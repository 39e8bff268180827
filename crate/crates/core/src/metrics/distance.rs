//! Ground distances between feature vectors.

use crate::error::{Error, Result};
use crate::graph::GroundMetric;

fn check_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

/// 1 − |u ∧ v| / |u ∨ v| over binary vectors; 0 when both are all-zero.
pub fn jaccard_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    Ok(jaccard_unchecked(u, v))
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u, v)?;
    Ok(euclidean_unchecked(u, v))
}

fn jaccard_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let (mut both, mut either) = (0usize, 0usize);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a != 0.0, b != 0.0);
        both += usize::from(a && b);
        either += usize::from(a || b);
    }
    if either == 0 {
        0.0
    } else {
        1.0 - both as f64 / either as f64
    }
}

fn euclidean_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Distance under `metric`; lengths must already agree.
pub fn ground_distance(metric: GroundMetric, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    match metric {
        GroundMetric::Jaccard => jaccard_unchecked(u, v),
        GroundMetric::Euclidean => euclidean_unchecked(u, v),
    }
}

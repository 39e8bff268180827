//! Feature-distribution EMD between two graphs and between two graph sets.

use rayon::prelude::*;

use super::distance::ground_distance;
use super::ot::{solve_ot, TransportProblem};
use crate::diffkit::Matrix;
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, TypeTable};

/// EMD between the uniform distributions over two point sets under a
/// ground metric.
pub fn point_set_emd(
    table: &TypeTable,
    ty: usize,
    xs: &[&[f64]],
    ys: &[&[f64]],
) -> Result<f64> {
    let metric = table.metric(ty);
    let mut cost = Matrix::zeros(xs.len(), ys.len());
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            cost.set(i, j, ground_distance(metric, x, y));
        }
    }
    if xs.len() == 1 || ys.len() == 1 {
        // every unit of mass has only one place to go
        let (m, n) = cost.shape();
        return Ok(cost.data.iter().sum::<f64>() / (m * n) as f64);
    }
    Ok(solve_ot(&TransportProblem::uniform(cost)?)?.cost)
}

/// Per type, the EMD between the two graphs' type-k feature sets; the two
/// node-fraction-weighted sums (by `q`'s and by `p`'s type distribution) are
/// averaged. A type present in only one graph costs `penalty[k]`.
pub fn feature_dist_emd(
    p: &HeteroGraph,
    q: &HeteroGraph,
    table: &TypeTable,
    penalty: &[f64],
) -> Result<f64> {
    if p.n == 0 || q.n == 0 {
        return Err(Error::invalid("feature EMD of an empty graph"));
    }
    if p.features.is_none() || q.features.is_none() {
        return Err(Error::invalid("feature EMD needs featured graphs"));
    }
    if penalty.len() != table.k() {
        return Err(Error::invalid(format!(
            "{} penalties for {} types",
            penalty.len(),
            table.k()
        )));
    }
    let (np, nq) = (p.n as f64, q.n as f64);
    let mut weighted_by_q = 0.0;
    let mut weighted_by_p = 0.0;
    for ty in 0..table.k() {
        let xg = p.features_of_type(ty).expect("checked");
        let xr = q.features_of_type(ty).expect("checked");
        let emd = match (xg.is_empty(), xr.is_empty()) {
            (true, true) => continue,
            (false, false) => point_set_emd(table, ty, &xg, &xr)?,
            _ => penalty[ty],
        };
        weighted_by_q += xr.len() as f64 / nq * emd;
        weighted_by_p += xg.len() as f64 / np * emd;
    }
    Ok((weighted_by_q + weighted_by_p) / 2.0)
}

/// Pairwise [`feature_dist_emd`] costs between two graph sets.
pub fn feature_emd_cost_matrix(
    ps: &[HeteroGraph],
    qs: &[HeteroGraph],
    table: &TypeTable,
    penalty: &[f64],
) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = ps
        .par_iter()
        .map(|p| {
            qs.iter()
                .map(|q| feature_dist_emd(p, q, table, penalty))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_rows(&rows))
}

/// EMD between two graph sets with uniform weights, using
/// [`feature_dist_emd`] as the ground cost.
pub fn graph_set_emd(
    ps: &[HeteroGraph],
    qs: &[HeteroGraph],
    table: &TypeTable,
    penalty: &[f64],
) -> Result<f64> {
    if ps.is_empty() || qs.is_empty() {
        return Err(Error::invalid("graph set EMD needs non-empty sets"));
    }
    let cost = feature_emd_cost_matrix(ps, qs, table, penalty)?;
    Ok(solve_ot(&TransportProblem::uniform(cost)?)?.cost)
}

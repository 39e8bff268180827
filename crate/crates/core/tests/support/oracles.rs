//! Brute-force reference implementations, deliberately naive and sharing no
//! code with the library beyond plain data types.

#![allow(dead_code)]

use hetgen::diffkit::Matrix;
use hetgen::graph::{GroundMetric, HeteroGraph, TypeTable};

/// Optimal transport cost by enumerating every basic solution of the
/// transportation LP.
///
/// Each vertex of the transportation polytope is supported on a spanning
/// tree of the complete bipartite graph between sources and sinks; the flow
/// on a tree is forced by the marginals. The minimum over the
/// non-negative tree flows is the LP optimum.
pub fn brute_force_ot(a: &[f64], b: &[f64], cost: &Matrix) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let parent: Vec<usize> = (0..m + n).collect();
    trees(&cells, m, 0, m + n - 1, &mut chosen, parent, &mut |tree| {
        if let Some(flow) = tree_flow(a, b, tree) {
            let c: f64 = tree.iter().zip(&flow).map(|(&(i, j), f)| cost.get(i, j) * f).sum();
            best = best.min(c);
        }
    });
    best
}

fn find(parent: &[usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

/// Every acyclic choice of `size` cells from `cells[from..]`, sources being
/// nodes 0..m and sinks m.. in the union-find.
fn trees(
    cells: &[(usize, usize)],
    m: usize,
    from: usize,
    size: usize,
    chosen: &mut Vec<(usize, usize)>,
    parent: Vec<usize>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if chosen.len() == size {
        visit(chosen);
        return;
    }
    for idx in from..cells.len() {
        if cells.len() - idx < size - chosen.len() {
            break;
        }
        let (i, j) = cells[idx];
        let (ri, rj) = (find(&parent, i), find(&parent, m + j));
        if ri == rj {
            continue;
        }
        let mut next = parent.clone();
        next[ri] = rj;
        chosen.push(cells[idx]);
        trees(cells, m, idx + 1, size, chosen, next, visit);
        chosen.pop();
    }
}

/// The unique flow on a spanning tree meeting the marginals, by peeling
/// leaves; `None` when some forced flow is negative.
fn tree_flow(a: &[f64], b: &[f64], tree: &[(usize, usize)]) -> Option<Vec<f64>> {
    let m = a.len();
    let mut supply: Vec<f64> = a.iter().copied().chain(b.iter().copied()).collect();
    let mut degree = vec![0usize; supply.len()];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flow = vec![f64::NAN; tree.len()];
    let mut done = vec![false; tree.len()];
    for _ in 0..tree.len() {
        let (e, leaf) = tree
            .iter()
            .enumerate()
            .filter(|(e, _)| !done[*e])
            .find_map(|(e, &(i, j))| {
                if degree[i] == 1 {
                    Some((e, i))
                } else if degree[m + j] == 1 {
                    Some((e, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        flow[e] = supply[leaf];
        supply[other] -= supply[leaf];
        supply[leaf] = 0.0;
        degree[i] -= 1;
        degree[m + j] -= 1;
        done[e] = true;
    }
    flow.iter().all(|&f| f >= -1e-12).then_some(flow)
}

pub fn ground(metric: GroundMetric, u: &[f64], v: &[f64]) -> f64 {
    match metric {
        GroundMetric::Jaccard => {
            let inter = u.iter().zip(v).filter(|(&x, &y)| x != 0.0 && y != 0.0).count();
            let union = u.iter().zip(v).filter(|(&x, &y)| x != 0.0 || y != 0.0).count();
            if union == 0 {
                0.0
            } else {
                1.0 - inter as f64 / union as f64
            }
        }
        GroundMetric::Euclidean => u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
    }
}

/// EMD between uniform distributions over two small point sets by
/// exhausting couplings: equal sizes enumerate permutations, otherwise the
/// LP vertices.
pub fn brute_force_point_emd(metric: GroundMetric, xs: &[&[f64]], ys: &[&[f64]]) -> f64 {
    let (m, n) = (xs.len(), ys.len());
    let mut cost = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            cost.set(i, j, ground(metric, xs[i], ys[j]));
        }
    }
    if m == n {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permutations(&mut perm, 0, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum::<f64>() / n as f64;
            best = best.min(c);
        });
        best
    } else {
        brute_force_ot(&vec![1.0 / m as f64; m], &vec![1.0 / n as f64; n], &cost)
    }
}

fn permutations(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Graph-to-graph feature-distribution EMD written directly from its
/// definition: per-type EMDs weighted by each graph's type fractions, the
/// two weightings averaged; a type on one side only costs its penalty.
pub fn brute_force_feature_emd(p: &HeteroGraph, q: &HeteroGraph, table: &TypeTable, penalty: &[f64]) -> f64 {
    let (pf, qf) = (p.features.as_ref().unwrap(), q.features.as_ref().unwrap());
    let mut total = 0.0;
    for k in 0..table.k() {
        let xs: Vec<&[f64]> = (0..p.n).filter(|&u| p.types[u] == k).map(|u| pf[u].as_slice()).collect();
        let ys: Vec<&[f64]> = (0..q.n).filter(|&u| q.types[u] == k).map(|u| qf[u].as_slice()).collect();
        let emd = match (xs.is_empty(), ys.is_empty()) {
            (true, true) => continue,
            (false, false) => brute_force_point_emd(table.metric(k), &xs, &ys),
            _ => penalty[k],
        };
        let wp = xs.len() as f64 / p.n as f64;
        let wq = ys.len() as f64 / q.n as f64;
        total += 0.5 * (wp + wq) * emd;
    }
    total
}

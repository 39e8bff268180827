//! Exact discrete optimal transport by the transportation simplex method.
//!
//! The basis is a spanning tree over the m row nodes and n column nodes.
//! Initialisation uses the north-west corner rule; each iteration prices
//! all non-basic cells with the dual potentials, brings in the most
//! negative reduced cost and pivots around the unique tree cycle.

use crate::diffkit::Matrix;
use crate::error::{Error, Result};

const MARGINAL_TOL: f64 = 1e-12;

/// Source weights `a`, sink weights `b` (each summing to 1) and a
/// non-negative |a|×|b| cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: Matrix,
}

impl TransportProblem {
    pub fn new(a: Vec<f64>, b: Vec<f64>, cost: Matrix) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::invalid("transport problem with empty marginal"));
        }
        if cost.shape() != (a.len(), b.len()) {
            return Err(Error::invalid(format!(
                "cost matrix {:?} does not match marginals {}x{}",
                cost.shape(),
                a.len(),
                b.len()
            )));
        }
        for (name, w) in [("a", &a), ("b", &b)] {
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::invalid(format!("marginal {name} has a negative or non-finite weight")));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > MARGINAL_TOL * (w.len() as f64).max(1.0) {
                return Err(Error::invalid(format!("marginal {name} sums to {s}, not 1")));
            }
        }
        if cost.data.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("cost matrix must be finite and non-negative"));
        }
        Ok(Self { a, b, cost })
    }

    /// Uniform weights over `m` sources and `n` sinks.
    pub fn uniform(cost: Matrix) -> Result<Self> {
        let (m, n) = cost.shape();
        if m == 0 || n == 0 {
            return Err(Error::invalid("transport problem with empty marginal"));
        }
        Self::new(vec![1.0 / m as f64; m], vec![1.0 / n as f64; n], cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtSolution {
    pub plan: Matrix,
    pub cost: f64,
}

struct Basis {
    m: usize,
    n: usize,
    flow: Matrix,
    basic: Vec<bool>,
    /// Tree adjacency over m + n nodes (column j is node m + j).
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn cell(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.m {
            (a, b - self.m)
        } else {
            (b, a - self.m)
        }
    }

    fn insert(&mut self, i: usize, j: usize) {
        self.basic[i * self.n + j] = true;
        self.adj[i].push(self.m + j);
        self.adj[self.m + j].push(i);
    }

    fn remove(&mut self, i: usize, j: usize) {
        self.basic[i * self.n + j] = false;
        let cj = self.m + j;
        self.adj[i].retain(|&x| x != cj);
        self.adj[cj].retain(|&x| x != i);
    }

    fn potentials(&self, cost: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let total = self.m + self.n;
        let mut pot = vec![f64::NAN; total];
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        pot[0] = 0.0;
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &self.adj[x] {
                if !seen[y] {
                    let (i, j) = self.cell(x, y);
                    // u_i + v_j = c_ij
                    pot[y] = cost.get(i, j) - pot[x];
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Tree path from row node `i` to column node `m + j`, as node ids.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let target = self.m + j;
        let mut parent = vec![usize::MAX; total];
        parent[i] = i;
        let mut queue = std::collections::VecDeque::from([i]);
        while let Some(x) = queue.pop_front() {
            if x == target {
                break;
            }
            for &y in &self.adj[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut path = vec![target];
        let mut x = target;
        while x != i {
            x = parent[x];
            path.push(x);
        }
        path.reverse();
        path
    }
}

fn north_west_corner(a: &[f64], b: &[f64]) -> Basis {
    let (m, n) = (a.len(), b.len());
    let mut basis = Basis {
        m,
        n,
        flow: Matrix::zeros(m, n),
        basic: vec![false; m * n],
        adj: vec![Vec::new(); m + n],
    };
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = supply[i].min(demand[j]);
        basis.flow.set(i, j, q);
        basis.insert(i, j);
        supply[i] -= q;
        demand[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Solves the problem exactly. The returned plan has row sums `a` and
/// column sums `b` up to rounding.
pub fn solve_ot(problem: &TransportProblem) -> Result<OtSolution> {
    let (m, n) = problem.cost.shape();
    let cost = &problem.cost;
    let mut basis = north_west_corner(&problem.a, &problem.b);
    let scale = cost.data.iter().copied().fold(0.0f64, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    let max_iter = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;

    for _ in 0..max_iter {
        let (u, v) = basis.potentials(cost);
        // Dantzig pricing; after a long run of degenerate pivots switch to
        // the first improving cell to break potential cycling.
        let bland = degenerate_run > m + n;
        let mut entering = None;
        let mut best = -tol;
        'price: for i in 0..m {
            for j in 0..n {
                if basis.basic[i * n + j] {
                    continue;
                }
                let r = cost.get(i, j) - u[i] - v[j];
                if r < best {
                    best = r;
                    entering = Some((i, j));
                    if bland {
                        break 'price;
                    }
                }
            }
        }
        let Some((p, q)) = entering else {
            let total = (0..m * n).map(|c| basis.flow.data[c] * cost.data[c]).sum();
            return Ok(OtSolution {
                plan: basis.flow,
                cost: total,
            });
        };

        // cycle: entering (+), then the path from column q back to row p
        let path = basis.path(p, q);
        let cells: Vec<(usize, usize)> = path
            .windows(2)
            .rev()
            .map(|w| basis.cell(w[0], w[1]))
            .collect();
        let mut theta = f64::INFINITY;
        let mut leaving = cells[0];
        for (k, &(i, j)) in cells.iter().enumerate() {
            if k % 2 == 0 {
                let x = basis.flow.get(i, j);
                if x < theta {
                    theta = x;
                    leaving = (i, j);
                }
            }
        }
        degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
        basis.flow.set(p, q, theta);
        for (k, &(i, j)) in cells.iter().enumerate() {
            let x = basis.flow.get(i, j);
            let updated = if k % 2 == 0 { x - theta } else { x + theta };
            basis.flow.set(i, j, updated.max(0.0));
        }
        basis.flow.set(leaving.0, leaving.1, 0.0);
        basis.remove(leaving.0, leaving.1);
        basis.insert(p, q);
    }
    Err(Error::NonFinite("transportation simplex iteration limit"))
}

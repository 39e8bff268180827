//! Marginal-target transition matrices for discrete diffusion over node
//! types and edge states.

use serde::{Deserialize, Serialize};

use crate::diffkit::Matrix;
use crate::error::{Error, Result};
use crate::graph::Structure;

/// Offset of the cosine schedule.
pub const COSINE_OFFSET: f64 = 0.008;

/// Per-step transition matrices `Q[t]`, `t = 1..=T`, and their cumulative
/// products `Qbar[t] = Q[1]···Q[t]` (`Qbar[0] = I`). Index 0 of `qx` / `qe` is
/// unused and holds the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSchedule {
    pub steps: usize,
    pub betas: Vec<f64>,
    pub node_marginal: Vec<f64>,
    pub edge_marginal: f64,
    pub qx: Vec<Matrix>,
    pub qe: Vec<Matrix>,
    pub qx_bar: Vec<Matrix>,
    pub qe_bar: Vec<Matrix>,
}

/// The parameters a schedule is rebuilt from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub betas: Vec<f64>,
    pub node_marginal: Vec<f64>,
    pub edge_marginal: f64,
}

fn identity(k: usize) -> Matrix {
    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        m.set(i, i, 1.0);
    }
    m
}

fn interpolate(beta: f64, marginal: &[f64]) -> Matrix {
    let k = marginal.len();
    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let stay = if i == j { 1.0 - beta } else { 0.0 };
            m.set(i, j, stay + beta * marginal[j]);
        }
    }
    m
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("{what} must be a non-negative vector")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// `Q[t] = (1 − β_t)·I + β_t·𝟙·mᵀ` for the node marginal and for the edge
/// marginal `(1 − ρ, ρ)`. `betas[t - 1]` is the weight of step `t`.
pub fn build_schedule(
    node_marginal: &[f64],
    edge_marginal: f64,
    betas: &[f64],
) -> Result<TransitionSchedule> {
    if betas.is_empty() {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    check_distribution(node_marginal, "node marginal")?;
    if !(0.0..=1.0).contains(&edge_marginal) {
        return Err(Error::invalid(format!(
            "edge marginal {edge_marginal} outside [0, 1]"
        )));
    }
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::invalid(format!("beta {b} outside [0, 1]")));
    }
    let k = node_marginal.len();
    let edge = [1.0 - edge_marginal, edge_marginal];
    let mut qx = vec![identity(k)];
    let mut qe = vec![identity(2)];
    let mut qx_bar = vec![identity(k)];
    let mut qe_bar = vec![identity(2)];
    for &b in betas {
        let x = interpolate(b, node_marginal);
        let e = interpolate(b, &edge);
        qx_bar.push(qx_bar.last().expect("seeded").matmul(&x));
        qe_bar.push(qe_bar.last().expect("seeded").matmul(&e));
        qx.push(x);
        qe.push(e);
    }
    Ok(TransitionSchedule {
        steps: betas.len(),
        betas: betas.to_vec(),
        node_marginal: node_marginal.to_vec(),
        edge_marginal,
        qx,
        qe,
        qx_bar,
        qe_bar,
    })
}

impl TransitionSchedule {
    pub fn spec(&self) -> ScheduleSpec {
        ScheduleSpec {
            steps: self.steps,
            betas: self.betas.clone(),
            node_marginal: self.node_marginal.clone(),
            edge_marginal: self.edge_marginal,
        }
    }

    pub fn from_spec(spec: &ScheduleSpec) -> Result<Self> {
        if spec.betas.len() != spec.steps {
            return Err(Error::invalid(format!(
                "{} betas for {} steps",
                spec.betas.len(),
                spec.steps
            )));
        }
        build_schedule(&spec.node_marginal, spec.edge_marginal, &spec.betas)
    }

    pub fn k(&self) -> usize {
        self.node_marginal.len()
    }
}

/// Per-step weights whose survival products follow the cosine curve
/// ᾱ_t = cos²(π/2·(t/T + s)/(1 + s)) / cos²(π/2·s/(1 + s)):
/// β_t = 1 − ᾱ_t / ᾱ_{t−1}, clipped to [0, 1]. The last step reaches β = 1
/// up to rounding, so `Qbar[T]` rows equal the marginal.
pub fn cosine_betas(steps: usize) -> Vec<f64> {
    let s = COSINE_OFFSET;
    let f = |t: usize| {
        let c = (std::f64::consts::FRAC_PI_2 * (t as f64 / steps as f64 + s) / (1.0 + s)).cos();
        c * c
    };
    let f0 = f(0);
    let alpha_bar = |t: usize| f(t) / f0;
    (1..=steps)
        .map(|t| (1.0 - alpha_bar(t) / alpha_bar(t - 1)).clamp(0.0, 1.0))
        .collect()
}

/// Node-type frequencies and edge density (edges over unordered pairs)
/// across a set of graphs.
pub fn corpus_marginals<S: Structure>(graphs: &[&S], k: usize) -> Result<(Vec<f64>, f64)> {
    let mut counts = vec![0usize; k];
    let (mut edges, mut pairs) = (0usize, 0usize);
    for g in graphs {
        for &t in g.types() {
            counts[t] += 1;
        }
        let n = g.node_count();
        pairs += n * n.saturating_sub(1) / 2;
        edges += g.edges().len();
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("marginals of an empty corpus"));
    }
    let node = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let edge = if pairs == 0 { 0.0 } else { edges as f64 / pairs as f64 };
    Ok((node, edge))
}

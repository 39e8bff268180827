//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends a node holding its forward value and a record of
//! its inputs; [`Tape::backward`] walks the tape in reverse. Forward values
//! are checked for NaN/Inf as they are produced.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Probability clamp applied by [`Tape::bce`].
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    CrossEntropy(Var, Vec<usize>),
    Bce(Var, Vec<f64>),
    Sum(Var),
    MeanRows(Var),
    RowSum(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    StraightThrough(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every tape value that requires one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`, zeros if `v` did not influence the output.
    pub fn get(&self, v: Var) -> Matrix {
        self.grads[v.0].clone().unwrap_or_else(|| {
            let (r, c) = self.shapes[v.0];
            Matrix::zeros(r, c)
        })
    }

    pub fn collect(&self, vars: &[Var]) -> Vec<Matrix> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Smallest distance of any differentiable leaky-ReLU input to 0 or
    /// clamp input to its bounds: how far the recorded point is from a kink.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match node.op {
                Op::LeakyRelu(a, _) if self.rg(a) => {
                    for &x in &self.nodes[a.0].value.data {
                        margin = margin.min(x.abs());
                    }
                }
                Op::Clamp(a, lo, hi) if self.rg(a) => {
                    for &x in &self.nodes[a.0].value.data {
                        margin = margin.min((x - lo).abs()).min((x - hi).abs());
                    }
                }
                _ => {}
            }
        }
        margin
    }

    /// A differentiable leaf (parameter or checked input).
    pub fn var(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols != bv.rows {
            return Err(shape_err(
                "matmul",
                format!("{:?} x {:?}", av.shape(), bv.shape()),
            ));
        }
        let out = av.matmul(bv);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul", out, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", format!("{:?} + {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let rg = self.rg(a) || self.rg(b);
        self.push("add", out, Op::Add(a, b), rg)
    }

    /// Adds a 1×c row to every row of an n×c matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows != 1 || rv.cols != av.cols {
            return Err(shape_err(
                "add_row",
                format!("{:?} + row {:?}", av.shape(), rv.shape()),
            ));
        }
        let mut out = av.clone();
        for r in 0..out.rows {
            for (o, &b) in out.row_mut(r).iter_mut().zip(&rv.data) {
                *o += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        self.push("add_row", out, Op::AddRow(a, row), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", format!("{:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Matrix::from_vec(av.rows, av.cols, data);
        let rg = self.rg(a) || self.rg(b);
        self.push("mul", out, Op::Mul(a, b), rg)
    }

    /// Scales row `r` of an n×c matrix by entry `r` of an n×1 column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(col));
        if cv.cols != 1 || cv.rows != av.rows {
            return Err(shape_err(
                "mul_col",
                format!("{:?} * col {:?}", av.shape(), cv.shape()),
            ));
        }
        let mut out = av.clone();
        for r in 0..out.rows {
            let s = cv.data[r];
            out.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        let rg = self.rg(a) || self.rg(col);
        self.push("mul_col", out, Op::MulCol(a, col), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push("scale", out, Op::Scale(a, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x + s);
        let rg = self.rg(a);
        self.push("add_scalar", out, Op::AddScalar(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::invalid(format!("leaky_relu slope {slope} not in (0,1)")));
        }
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push("leaky_relu", out, Op::LeakyRelu(a, slope), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push("sigmoid", out, Op::Sigmoid(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::ln);
        let rg = self.rg(a);
        self.push("log", out, Op::Log(a), rg)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        let rg = self.rg(a);
        self.push("clamp", out, Op::Clamp(a, lo, hi), rg)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        let rg = self.rg(a);
        self.push("softmax", out, Op::SoftmaxRows(a), rg)
    }

    /// Summed softmax cross-entropy: Σ_r (logsumexp(row r) − row r[target r]).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if targets.len() != lv.rows || targets.iter().any(|&t| t >= lv.cols) {
            return Err(shape_err(
                "cross_entropy",
                format!("{} targets for logits {:?}", targets.len(), lv.shape()),
            ));
        }
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let rg = self.rg(logits);
        self.push(
            "cross_entropy",
            Matrix::scalar(total),
            Op::CrossEntropy(logits, targets.to_vec()),
            rg,
        )
    }

    /// Mean binary cross-entropy of probabilities against labels in [0, 1].
    /// Probabilities are clamped to `[BCE_EPS, 1 − BCE_EPS]` first.
    pub fn bce(&mut self, p: Var, labels: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if labels.len() != pv.len() || labels.is_empty() {
            return Err(shape_err(
                "bce",
                format!("{} labels for {:?}", labels.len(), pv.shape()),
            ));
        }
        let n = labels.len() as f64;
        let total: f64 = pv
            .data
            .iter()
            .zip(labels)
            .map(|(&x, &y)| {
                let q = x.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
            })
            .sum();
        let rg = self.rg(p);
        self.push("bce", Matrix::scalar(total / n), Op::Bce(p, labels.to_vec()), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data.iter().sum();
        let rg = self.rg(a);
        self.push("sum", Matrix::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(shape_err("mean", "empty matrix".into()));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Column means: n×c → 1×c.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.rows == 0 {
            return Err(shape_err("mean_rows", "no rows".into()));
        }
        let mut out = Matrix::zeros(1, av.cols);
        for r in 0..av.rows {
            for (o, &x) in out.data.iter_mut().zip(av.row(r)) {
                *o += x;
            }
        }
        let inv = 1.0 / av.rows as f64;
        out.data.iter_mut().for_each(|x| *x *= inv);
        let rg = self.rg(a);
        self.push("mean_rows", out, Op::MeanRows(a), rg)
    }

    /// Row sums: n×c → n×1.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let data = (0..av.rows).map(|r| av.row(r).iter().sum()).collect();
        let out = Matrix::from_vec(av.rows, 1, data);
        let rg = self.rg(a);
        self.push("row_sum", out, Op::RowSum(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows)
            .ok_or_else(|| shape_err("concat_cols", "no inputs".into()))?;
        if parts.iter().any(|&p| self.value(p).rows != rows) {
            return Err(shape_err("concat_cols", "row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let pv = self.value(p);
                out.row_mut(r)[c0..c0 + pv.cols].copy_from_slice(pv.row(r));
                c0 += pv.cols;
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.value(p).cols)
            .ok_or_else(|| shape_err("concat_rows", "no inputs".into()))?;
        if parts.iter().any(|&p| self.value(p).cols != cols) {
            return Err(shape_err("concat_rows", "column counts differ".into()));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            data.extend_from_slice(&pv.data);
            rows += pv.rows;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(
            "concat_rows",
            Matrix::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
            rg,
        )
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if start + len > av.rows {
            return Err(shape_err(
                "slice_rows",
                format!("{start}..{} of {} rows", start + len, av.rows),
            ));
        }
        let data = av.data[start * av.cols..(start + len) * av.cols].to_vec();
        let out = Matrix::from_vec(len, av.cols, data);
        let rg = self.rg(a);
        self.push("slice_rows", out, Op::SliceRows(a, start), rg)
    }

    /// Output row `i` is input row `index[i]`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= av.rows) {
            return Err(shape_err(
                "gather_rows",
                format!("row {bad} of {}", av.rows),
            ));
        }
        let mut data = Vec::with_capacity(index.len() * av.cols);
        for &i in index {
            data.extend_from_slice(av.row(i));
        }
        let out = Matrix::from_vec(index.len(), av.cols, data);
        let rg = self.rg(a);
        self.push("gather_rows", out, Op::GatherRows(a, index.to_vec()), rg)
    }

    /// Output row `j` is the sum of input rows `i` with `index[i] == j`.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var> {
        let av = self.value(a);
        if index.len() != av.rows || index.iter().any(|&i| i >= rows) {
            return Err(shape_err(
                "scatter_add_rows",
                format!("{} indices for {} rows into {rows}", index.len(), av.rows),
            ));
        }
        let mut out = Matrix::zeros(rows, av.cols);
        for (r, &j) in index.iter().enumerate() {
            for (o, &x) in out.row_mut(j).iter_mut().zip(av.row(r)) {
                *o += x;
            }
        }
        let rg = self.rg(a);
        self.push(
            "scatter_add_rows",
            out,
            Op::ScatterAddRows(a, index.to_vec()),
            rg,
        )
    }

    /// Softmax of an E×1 score column within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segment: &[usize]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols != 1 || segment.len() != sv.rows {
            return Err(shape_err(
                "segment_softmax",
                format!("{} segments for {:?}", segment.len(), sv.shape()),
            ));
        }
        let nseg = segment.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; nseg];
        for (&s, &x) in segment.iter().zip(&sv.data) {
            max[s] = max[s].max(x);
        }
        let mut out: Vec<f64> = segment
            .iter()
            .zip(&sv.data)
            .map(|(&s, &x)| (x - max[s]).exp())
            .collect();
        let mut sum = vec![0.0; nseg];
        for (&s, &e) in segment.iter().zip(&out) {
            sum[s] += e;
        }
        for (o, &s) in out.iter_mut().zip(segment) {
            *o /= sum[s];
        }
        let rows = out.len();
        let rg = self.rg(scores);
        self.push(
            "segment_softmax",
            Matrix::from_vec(rows, 1, out),
            Op::SegmentSoftmax(scores, segment.to_vec()),
            rg,
        )
    }

    /// Forward value `hard`; the backward pass routes the incoming gradient
    /// to `soft` unchanged.
    pub fn straight_through(&mut self, soft: Var, hard: Matrix) -> Result<Var> {
        if hard.shape() != self.shape(soft) {
            return Err(shape_err(
                "straight_through",
                format!("{:?} vs {:?}", hard.shape(), self.shape(soft)),
            ));
        }
        let rg = self.rg(soft);
        self.push("straight_through", hard, Op::StraightThrough(soft), rg)
    }

    /// Reverse pass from a 1×1 output.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if self.value(out).len() != 1 {
            return Err(shape_err(
                "backward",
                format!("output must be scalar, got {:?}", self.shape(out)),
            ));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, delta: Matrix| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| &nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if nodes[a.0].requires_grad {
                    acc(*a, g.matmul_t(val(*b)));
                }
                if nodes[b.0].requires_grad {
                    acc(*b, val(*a).t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut rg = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (o, &x) in rg.data.iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*row, rg);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = g.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
                let gb = g.data.iter().zip(&av.data).map(|(x, y)| x * y).collect();
                acc(*a, Matrix::from_vec(g.rows, g.cols, ga));
                acc(*b, Matrix::from_vec(g.rows, g.cols, gb));
            }
            Op::MulCol(a, col) => {
                let (av, cv) = (val(*a), val(*col));
                let mut ga = g.clone();
                let mut gc = Matrix::zeros(cv.rows, 1);
                for r in 0..g.rows {
                    let s = cv.data[r];
                    gc.data[r] = g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum();
                    ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                }
                acc(*a, ga);
                acc(*col, gc);
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::LeakyRelu(a, slope) => {
                let av = val(*a);
                let data = g
                    .data
                    .iter()
                    .zip(&av.data)
                    .map(|(&d, &x)| if x > 0.0 { d } else { d * slope })
                    .collect();
                acc(*a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let data = g
                    .data
                    .iter()
                    .zip(&y.data)
                    .map(|(&d, &s)| d * s * (1.0 - s))
                    .collect();
                acc(*a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Log(a) => {
                let av = val(*a);
                let data = g.data.iter().zip(&av.data).map(|(&d, &x)| d / x).collect();
                acc(*a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Clamp(a, lo, hi) => {
                let av = val(*a);
                let data = g
                    .data
                    .iter()
                    .zip(&av.data)
                    .map(|(&d, &x)| if x < *lo || x > *hi { 0.0 } else { d })
                    .collect();
                acc(*a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut ga = Matrix::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(*a, ga);
            }
            Op::CrossEntropy(logits, targets) => {
                let s = g.item();
                let mut ga = val(*logits).clone();
                for (r, &t) in targets.iter().enumerate() {
                    let row = ga.row_mut(r);
                    softmax_in_place(row);
                    row[t] -= 1.0;
                    row.iter_mut().for_each(|x| *x *= s);
                }
                acc(*logits, ga);
            }
            Op::Bce(p, labels) => {
                let s = g.item() / labels.len() as f64;
                let pv = val(*p);
                let data = pv
                    .data
                    .iter()
                    .zip(labels)
                    .map(|(&x, &y)| {
                        if !(BCE_EPS..=1.0 - BCE_EPS).contains(&x) {
                            0.0
                        } else {
                            s * (-y / x + (1.0 - y) / (1.0 - x))
                        }
                    })
                    .collect();
                acc(*p, Matrix::from_vec(pv.rows, pv.cols, data));
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Matrix::filled(r, c, g.item()));
            }
            Op::MeanRows(a) => {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                let inv = 1.0 / r as f64;
                for i in 0..r {
                    for (o, &x) in ga.row_mut(i).iter_mut().zip(&g.data) {
                        *o = x * inv;
                    }
                }
                acc(*a, ga);
            }
            Op::RowSum(a) => {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    let d = g.data[i];
                    ga.row_mut(i).iter_mut().for_each(|x| *x = d);
                }
                acc(*a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let pc = val(p).cols;
                    let mut gp = Matrix::zeros(g.rows, pc);
                    for r in 0..g.rows {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + pc]);
                    }
                    c0 += pc;
                    acc(p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut r0 = 0;
                for &p in parts {
                    let pr = val(p).rows;
                    let data = g.data[r0 * g.cols..(r0 + pr) * g.cols].to_vec();
                    r0 += pr;
                    acc(p, Matrix::from_vec(pr, g.cols, data));
                }
            }
            Op::SliceRows(a, start) => {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                ga.data[start * c..start * c + g.data.len()].copy_from_slice(&g.data);
                acc(*a, ga);
            }
            Op::GatherRows(a, index) => {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for (i, &src) in index.iter().enumerate() {
                    for (o, &x) in ga.row_mut(src).iter_mut().zip(g.row(i)) {
                        *o += x;
                    }
                }
                acc(*a, ga);
            }
            Op::ScatterAddRows(a, index) => {
                let c = g.cols;
                let mut ga = Matrix::zeros(index.len(), c);
                for (i, &dst) in index.iter().enumerate() {
                    ga.row_mut(i).copy_from_slice(g.row(dst));
                }
                acc(*a, ga);
            }
            Op::SegmentSoftmax(a, segment) => {
                let y = &node.value.data;
                let nseg = segment.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; nseg];
                for ((&s, &yv), &gv) in segment.iter().zip(y).zip(&g.data) {
                    dot[s] += yv * gv;
                }
                let data = segment
                    .iter()
                    .zip(y)
                    .zip(&g.data)
                    .map(|((&s, &yv), &gv)| yv * (gv - dot[s]))
                    .collect();
                acc(*a, Matrix::from_vec(y.len(), 1, data));
            }
            Op::StraightThrough(soft) => acc(*soft, g.clone()),
        }
    }
}

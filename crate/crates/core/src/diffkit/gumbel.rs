//! Gumbel-softmax sampling with an optional straight-through hard mode.

use rand::Rng;

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Standard Gumbel noise −ln(−ln U), U uniform on the open interval (0, 1).
pub fn gumbel_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let u = loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            };
            -(-u.ln()).ln()
        })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// One-hot of each row's argmax (first index on ties).
pub fn row_argmax_one_hot(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        let row = m.row(r);
        let best = (0..row.len())
            .reduce(|a, b| if row[b] > row[a] { b } else { a })
            .unwrap_or(0);
        if !row.is_empty() {
            out.set(r, best, 1.0);
        }
    }
    out
}

/// Row-wise softmax((logits + noise) / temperature).
///
/// With `hard` the forward value is the one-hot argmax of that softmax while
/// gradients flow through the soft relaxation.
pub fn gumbel_softmax(
    tape: &mut Tape,
    logits: Var,
    noise: &Matrix,
    temperature: f64,
    hard: bool,
) -> Result<Var> {
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!(
            "gumbel temperature must be positive, got {temperature}"
        )));
    }
    let noise = tape.constant(noise.clone());
    let perturbed = tape.add(logits, noise)?;
    let scaled = tape.scale(perturbed, 1.0 / temperature)?;
    let soft = tape.softmax(scaled)?;
    if hard {
        let one_hot = row_argmax_one_hot(tape.value(soft));
        tape.straight_through(soft, one_hot)
    } else {
        Ok(soft)
    }
}

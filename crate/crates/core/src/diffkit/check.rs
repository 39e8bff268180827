//! Central finite-difference gradient checking.

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Relative error |a − b| / max(1e-8, |a| + |b|).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

fn evaluate<F>(f: &F, inputs: &[Matrix]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.var(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::Shape {
            op: "grad_check",
            detail: format!("function must return a scalar, got {:?}", v.shape()),
        });
    }
    Ok(v.item())
}

/// Reverse-mode gradient of `reverse` against central differences of
/// `forward`: ‖analytic − numeric‖ / max(1e-8, ‖analytic‖ + ‖numeric‖), the
/// norms taken over every component of every input.
///
/// The two closures normally coincide (see [`grad_check`]); splitting them
/// lets tests verify the harness on a deliberately broken backward rule.
pub fn grad_check_split<F, G>(reverse: G, forward: F, inputs: &[Matrix], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    G: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.var(m.clone())).collect();
    let out = reverse(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut probe = inputs.to_vec();
    let (mut diff, mut norm_a, mut norm_n) = (0.0f64, 0.0f64, 0.0f64);
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        for j in 0..input.len() {
            let x0 = input.data[j];
            let mut at = |dx: f64| -> Result<f64> {
                probe[i].data[j] = x0 + dx;
                let v = evaluate(&forward, &probe);
                probe[i].data[j] = x0;
                v
            };
            let numeric = (at(h)? - at(-h)?) / (2.0 * h);
            let a = analytic.data[j];
            diff += (a - numeric) * (a - numeric);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
    }
    Ok(diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()).max(1e-8))
}

/// [`Tape::kink_margin`] of one forward pass of `f` at `inputs`. Finite
/// differences are only meaningful when this comfortably exceeds the step.
pub fn kink_margin<F>(f: F, inputs: &[Matrix]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.var(m.clone())).collect();
    f(&mut tape, &vars)?;
    Ok(tape.kink_margin())
}

/// Maximum relative error between reverse-mode and central-difference
/// gradients of a scalar function. A NaN/Inf in any forward pass is an error.
pub fn grad_check<F>(f: F, inputs: &[Matrix], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_split(&f, &f, inputs, h)
}

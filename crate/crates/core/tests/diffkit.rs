use hetgen::diffkit::nn::LEAKY_SLOPE;
use hetgen::diffkit::{
    grad_check, kink_margin, Bound, Dense, EdgeIndex, GatLayer, HgtStack, Matrix, ParamStore, Tape, TypeLayout, Var,
};
use hetgen::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100;

/// Random weights contracting an op's output to a scalar, so every output
/// component contributes a distinct amount to the checked gradient.
fn contract(tape: &mut Tape, y: Var) -> Result<Var> {
    let (r, c) = tape.shape(y);
    let w = Matrix::glorot(r, c, &mut ChaCha8Rng::seed_from_u64((r * 31 + c) as u64));
    let w = tape.constant(w);
    let prod = tape.mul(y, w)?;
    tape.sum(prod)
}

fn uniform(r: usize, c: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(r, c);
    m.data.iter_mut().for_each(|x| *x = rng.gen_range(lo..hi));
    m
}

/// Runs `TRIALS` accepted trials of one op. `setup` draws the inputs and any
/// op-specific constants; trials too close to a kink are redrawn.
fn check_op<S, F>(name: &str, tol: f64, mut setup: S)
where
    S: FnMut(&mut ChaCha8Rng) -> (Vec<Matrix>, F),
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.bytes().map(u64::from).sum());
    let mut accepted = 0;
    let mut worst = 0.0f64;
    while accepted < TRIALS {
        let (inputs, f) = setup(&mut rng);
        if kink_margin(&f, &inputs).unwrap() < 1e-3 {
            continue;
        }
        accepted += 1;
        worst = worst.max(grad_check(&f, &inputs, 1e-5).unwrap());
    }
    assert!(worst <= tol, "{name}: worst relative error {worst}");
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.gen_range(1..5), rng.gen_range(1..5))
}

#[test]
fn binary_ops() {
    check_op("matmul", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let inner = rng.gen_range(1..5);
        let inputs = vec![Matrix::glorot(r, inner, rng), Matrix::glorot(inner, c, rng)];
        (inputs, |t: &mut Tape, x: &[Var]| {
            let y = t.matmul(x[0], x[1])?;
            contract(t, y)
        })
    });
    check_op("add", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.add(x[0], x[1])?;
            contract(t, y)
        })
    });
    check_op("add_row", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(1, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.add_row(x[0], x[1])?;
            contract(t, y)
        })
    });
    check_op("mul", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.mul(x[0], x[1])?;
            contract(t, y)
        })
    });
    check_op("mul_col", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, 1, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.mul_col(x[0], x[1])?;
            contract(t, y)
        })
    });
}

#[test]
fn elementwise_ops() {
    check_op("scale", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let s = rng.gen_range(-3.0..3.0);
        (vec![Matrix::glorot(r, c, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.scale(x[0], s)?;
            contract(t, y)
        })
    });
    check_op("add_scalar", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let s = rng.gen_range(-3.0..3.0);
        (vec![Matrix::glorot(r, c, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.add_scalar(x[0], s)?;
            let y = t.mul(y, y)?;
            contract(t, y)
        })
    });
    check_op("leaky_relu", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -2.0, 2.0, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.leaky_relu(x[0], LEAKY_SLOPE)?;
            contract(t, y)
        })
    });
    check_op("sigmoid", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -4.0, 4.0, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.sigmoid(x[0])?;
            contract(t, y)
        })
    });
    check_op("log", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, 0.2, 3.0, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.log(x[0])?;
            contract(t, y)
        })
    });
    check_op("clamp", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -2.0, 2.0, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.clamp(x[0], -1.0, 1.0)?;
            contract(t, y)
        })
    });
}

#[test]
fn normalising_and_loss_ops() {
    check_op("softmax", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -3.0, 3.0, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.softmax(x[0])?;
            contract(t, y)
        })
    });
    check_op("segment_softmax", 1e-6, |rng| {
        let e = rng.gen_range(1..8);
        let segment: Vec<usize> = (0..e).map(|_| rng.gen_range(0..3)).collect();
        (vec![uniform(e, 1, -3.0, 3.0, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.segment_softmax(x[0], &segment)?;
            contract(t, y)
        })
    });
    check_op("cross_entropy", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let targets: Vec<usize> = (0..r).map(|_| rng.gen_range(0..c)).collect();
        (vec![uniform(r, c, -3.0, 3.0, rng)], move |t: &mut Tape, x: &[Var]| t.cross_entropy(x[0], &targets))
    });
    check_op("bce", 1e-6, |rng| {
        let r = rng.gen_range(1..6);
        let labels: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..1.0)).collect();
        (vec![uniform(r, 1, 0.05, 0.95, rng)], move |t: &mut Tape, x: &[Var]| t.bce(x[0], &labels))
    });
}

#[test]
fn reductions_and_reshaping_ops() {
    check_op("sum", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.mul(x[0], x[0])?;
            t.sum(y)
        })
    });
    check_op("mean", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.mul(x[0], x[0])?;
            t.mean(y)
        })
    });
    check_op("mean_rows", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.mean_rows(x[0])?;
            contract(t, y)
        })
    });
    check_op("row_sum", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.row_sum(x[0])?;
            contract(t, y)
        })
    });
    check_op("concat_cols", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, 2, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.concat_cols(&[x[0], x[1], x[0]])?;
            contract(t, y)
        })
    });
    check_op("concat_rows", 1e-6, |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(2, c, rng)], |t: &mut Tape, x: &[Var]| {
            let y = t.concat_rows(&[x[1], x[0]])?;
            contract(t, y)
        })
    });
    check_op("slice_rows", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let start = rng.gen_range(0..r);
        let len = rng.gen_range(1..=r - start);
        (vec![Matrix::glorot(r, c, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.slice_rows(x[0], start, len)?;
            contract(t, y)
        })
    });
    check_op("gather_rows", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let index: Vec<usize> = (0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..r)).collect();
        (vec![Matrix::glorot(r, c, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.gather_rows(x[0], &index)?;
            contract(t, y)
        })
    });
    check_op("scatter_add_rows", 1e-6, |rng| {
        let (r, c) = dims(rng);
        let out_rows = rng.gen_range(1..5);
        let index: Vec<usize> = (0..r).map(|_| rng.gen_range(0..out_rows)).collect();
        (vec![Matrix::glorot(r, c, rng)], move |t: &mut Tape, x: &[Var]| {
            let y = t.scatter_add_rows(x[0], &index, out_rows)?;
            contract(t, y)
        })
    });
}

fn random_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn with_params(store: &ParamStore, extra: Vec<Matrix>) -> Vec<Matrix> {
    let mut v: Vec<Matrix> = store.params.iter().map(|p| p.value.clone()).collect();
    v.extend(extra);
    v
}

#[test]
fn layers() {
    check_op("dense", 1e-6, |rng| {
        let mut store = ParamStore::new();
        let d = Dense::new(&mut store, "d", 3, 4, rng);
        store.params[1].value = Matrix::glorot(1, 4, rng);
        let np = store.len();
        let inputs = with_params(&store, vec![Matrix::glorot(5, 3, rng)]);
        (inputs, move |t: &mut Tape, x: &[Var]| {
            let y = d.forward(t, &Bound(x[..np].to_vec()), x[np])?;
            contract(t, y)
        })
    });
    check_op("gat", 1e-6, |rng| {
        let n = rng.gen_range(1..7);
        let edges = EdgeIndex::from_undirected(n, &random_edges(n, rng), true);
        let mut store = ParamStore::new();
        let layer = GatLayer::new(&mut store, "g", 3, 4, rng);
        let np = store.len();
        let inputs = with_params(&store, vec![Matrix::glorot(n, 3, rng)]);
        (inputs, move |t: &mut Tape, x: &[Var]| {
            let y = layer.forward(t, &Bound(x[..np].to_vec()), x[np], &edges)?;
            contract(t, y)
        })
    });
    check_op("hgt", 1e-6, |rng| {
        let n = rng.gen_range(1..7);
        let types: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let layout = TypeLayout::new(&types, 3);
        let edges = layout.edge_index(&random_edges(n, rng), false);
        let widths = [2, 3, 1];
        let mut store = ParamStore::new();
        let stack = HgtStack::new(&mut store, "h", &widths, 3, 2, rng);
        let np = store.len();
        let present: Vec<usize> = (0..3).filter(|&t| layout.count(t) > 0).collect();
        let blocks: Vec<Matrix> = present.iter().map(|&t| Matrix::glorot(layout.count(t), widths[t], rng)).collect();
        let inputs = with_params(&store, blocks);
        (inputs, move |t: &mut Tape, x: &[Var]| {
            let mut blocks = vec![None; 3];
            for (i, &ty) in present.iter().enumerate() {
                blocks[ty] = Some(x[np + i]);
            }
            let out = stack.forward(t, &Bound(x[..np].to_vec()), blocks, &layout, &edges)?;
            let parts: Vec<Var> = out.into_iter().flatten().collect();
            let pooled = parts.iter().map(|&b| t.mean_rows(b)).collect::<Result<Vec<_>>>()?;
            let y = t.concat_cols(&pooled)?;
            contract(t, y)
        })
    });
}

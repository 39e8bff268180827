//! Randomised property suites shared by the unit-level tests and the
//! acceptance run. Each returns the worst observed gap or error so callers
//! can either assert or report it.

#![allow(dead_code)]

use hetgen::corpus::FeaturePool;
use hetgen::diffkit::nn::LEAKY_SLOPE;
use hetgen::diffkit::{
    grad_check, gumbel_noise, gumbel_softmax, kink_margin, Bound, Dense, EdgeIndex, GatLayer, HgtStack, Matrix,
    ParamStore, Tape, TypeLayout, Var,
};
use hetgen::diffusion::{build_schedule, cosine_betas, forward_noise, Denoiser, DenoiserConfig};
use hetgen::graph::{labeled_permute, GroundMetric, HeteroGraph, LabeledPermutation, SkeletonGraph, TypeTable};
use hetgen::phase2::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use hetgen::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TRIALS: usize = 100;

/// Trials closer than this to a leaky-ReLU or clamp kink are redrawn.
const KINK_MARGIN: f64 = 1e-3;

pub fn table() -> TypeTable {
    TypeTable::new(
        vec![3, 2, 4],
        vec![GroundMetric::Jaccard, GroundMetric::Euclidean, GroundMetric::Jaccard],
        vec!["paper".into(), "venue".into(), "author".into()],
    )
    .unwrap()
}

pub fn random_feature(t: usize, table: &TypeTable, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..table.dim(t))
        .map(|_| match table.metric(t) {
            GroundMetric::Jaccard => f64::from(u8::from(rng.gen_bool(0.5))),
            GroundMetric::Euclidean => rng.gen_range(-1.0..1.0),
        })
        .collect()
}

pub fn random_skeleton(n: usize, k: usize, rng: &mut ChaCha8Rng) -> SkeletonGraph {
    let types = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    SkeletonGraph::new(types, edges)
}

pub fn random_graph(n: usize, table: &TypeTable, rng: &mut ChaCha8Rng) -> HeteroGraph {
    let s = random_skeleton(n, table.k(), rng);
    let feats = s.types.iter().map(|&t| random_feature(t, table, rng)).collect();
    HeteroGraph::new(s.types, s.edges, Some(feats))
}

/// A graph holding one random node of every type.
pub fn one_of_each(table: &TypeTable, rng: &mut ChaCha8Rng) -> HeteroGraph {
    let types: Vec<usize> = (0..table.k()).collect();
    let feats = types.iter().map(|&k| random_feature(k, table, rng)).collect();
    HeteroGraph::new(types, vec![], Some(feats))
}

/// Pools from a random corpus in which every type occurs.
pub fn random_pools(table: &TypeTable, rng: &mut ChaCha8Rng) -> FeaturePool {
    let mut graphs: Vec<HeteroGraph> = (0..6).map(|_| random_graph(6, table, rng)).collect();
    graphs.push(one_of_each(table, rng));
    FeaturePool::from_graphs(table, &graphs).unwrap()
}

/// Replaces every parameter (including zero-initialised heads) by a fresh
/// Glorot draw, so symmetry properties are tested away from the trivial
/// starting point.
pub fn randomise(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for p in &mut store.params {
        p.value = Matrix::glorot(p.value.rows, p.value.cols, rng);
    }
}

pub fn generator(table: &TypeTable, pools: &FeaturePool, config: GeneratorConfig, rng: &mut ChaCha8Rng) -> (Generator, ParamStore) {
    let mut store = ParamStore::new();
    let g = Generator::new(&mut store, table, pools, config, rng).unwrap();
    (g, store)
}

pub fn discriminator(table: &TypeTable, rng: &mut ChaCha8Rng) -> (Discriminator, ParamStore) {
    let mut store = ParamStore::new();
    let d = Discriminator::new(&mut store, table.dims(), DiscriminatorConfig::default(), rng);
    (d, store)
}

fn params_of(store: &ParamStore) -> Vec<Matrix> {
    store.params.iter().map(|p| p.value.clone()).collect()
}

/// Largest |logit(u; s) − logit(π(u); π(s))| over random generators,
/// skeletons and labeled permutations.
pub fn generator_equivariance_gap(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = table();
    let mut worst = 0.0f64;
    for case in 0..TRIALS {
        let pools = random_pools(&t, &mut rng);
        let cfg = GeneratorConfig { no_mp: case % 10 == 0, ..Default::default() };
        let (g, mut store) = generator(&t, &pools, cfg, &mut rng);
        randomise(&mut store, &mut rng);
        let s = random_skeleton(rng.gen_range(1..12), 3, &mut rng);
        let perm = LabeledPermutation::random(s.n, &mut rng);
        let a = g.node_logits(&store, &s).unwrap();
        let b = g.node_logits(&store, &labeled_permute(&s, &perm).unwrap()).unwrap();
        for u in 0..s.n {
            for (x, y) in a[u].iter().zip(&b[perm.apply(u)]) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// Largest |D(g) − D(π(g))| over random discriminators, graphs and
/// labeled permutations.
pub fn discriminator_invariance_gap(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = table();
    let (d, mut store) = discriminator(&t, &mut rng);
    let mut worst = 0.0f64;
    for _ in 0..TRIALS {
        randomise(&mut store, &mut rng);
        let g = random_graph(rng.gen_range(1..12), &t, &mut rng);
        let perm = LabeledPermutation::random(g.n, &mut rng);
        let a = d.discriminate(&store, &g).unwrap();
        let b = d.discriminate(&store, &labeled_permute(&g, &perm).unwrap()).unwrap();
        worst = worst.max((a - b).abs());
    }
    worst
}

/// Worst gradient-check error over `TRIALS` accepted draws of `setup`.
fn worst_error<S, F>(seed: u64, mut setup: S) -> f64
where
    S: FnMut(&mut ChaCha8Rng) -> (Vec<Matrix>, F),
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut worst = 0.0f64;
    while accepted < TRIALS {
        let (inputs, f) = setup(&mut rng);
        if kink_margin(&f, &inputs).unwrap() < KINK_MARGIN {
            continue;
        }
        accepted += 1;
        worst = worst.max(grad_check(&f, &inputs, 1e-5).unwrap());
    }
    worst
}

/// Summed denoiser cross-entropy with respect to every denoiser parameter.
pub fn denoiser_loss_grad_error(seed: u64) -> f64 {
    let s = build_schedule(&[0.5, 0.3, 0.2], 0.3, &cosine_betas(10)).unwrap();
    worst_error(seed, |rng| {
        let mut store = ParamStore::new();
        let d = Denoiser::new(&mut store, 3, 10, DenoiserConfig { hidden: 5, depth: 2 }, rng);
        randomise(&mut store, rng);
        let clean = random_skeleton(rng.gen_range(1..7), 3, rng);
        let t = rng.gen_range(1..=10);
        let noisy = forward_noise(&clean, t, &s, rng).unwrap();
        (params_of(&store), move |tape: &mut Tape, vars: &[Var]| {
            d.loss(tape, &Bound(vars.to_vec()), &clean, &noisy, t)
        })
    })
}

fn small_generator(table: &TypeTable, pools: &FeaturePool, rng: &mut ChaCha8Rng) -> (Generator, ParamStore) {
    let cfg = GeneratorConfig { hidden: 3, head_hidden: 4, ..Default::default() };
    let (g, mut store) = generator(table, pools, cfg, rng);
    randomise(&mut store, rng);
    (g, store)
}

fn small_discriminator(table: &TypeTable, rng: &mut ChaCha8Rng) -> (Discriminator, ParamStore) {
    let mut store = ParamStore::new();
    let cfg = DiscriminatorConfig { latent: 3, depth: 2, hidden: 4 };
    let d = Discriminator::new(&mut store, table.dims(), cfg, rng);
    randomise(&mut store, rng);
    (d, store)
}

/// Discriminator BCE over a small labelled batch, with respect to every
/// discriminator parameter.
pub fn discriminator_bce_grad_error(seed: u64) -> f64 {
    let t = table();
    worst_error(seed, |rng| {
        let (disc, store) = small_discriminator(&t, rng);
        let graphs: Vec<HeteroGraph> = (0..3).map(|_| random_graph(rng.gen_range(1..6), &t, rng)).collect();
        let labels: Vec<f64> = (0..3).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        (params_of(&store), move |tape: &mut Tape, vars: &[Var]| {
            let p = Bound(vars.to_vec());
            let scores = graphs.iter().map(|g| disc.forward_graph(tape, &p, g)).collect::<Result<Vec<_>>>()?;
            let all = tape.concat_rows(&scores)?;
            tape.bce(all, &labels)
        })
    })
}

/// The generator objective log(1 − D) through soft Gumbel mixtures of pool
/// rows at fixed noise, with respect to generator and discriminator
/// parameters together.
pub fn generator_objective_grad_error(seed: u64) -> f64 {
    let t = table();
    worst_error(seed, |rng| {
        let pools = random_pools(&t, rng);
        let (gen, gen_store) = small_generator(&t, &pools, rng);
        let (disc, disc_store) = small_discriminator(&t, rng);
        let s = random_skeleton(rng.gen_range(2..7), 3, rng);
        let layout = TypeLayout::new(&s.types, 3);
        let tau = rng.gen_range(0.5..1.5);
        let noise: Vec<Matrix> = (0..3).map(|k| gumbel_noise(layout.count(k), pools.pools[k].len(), rng)).collect();
        let ng = gen_store.len();
        let mut inputs = params_of(&gen_store);
        inputs.extend(params_of(&disc_store));
        (inputs, move |tape: &mut Tape, vars: &[Var]| {
            let gp = Bound(vars[..ng].to_vec());
            let dp = Bound(vars[ng..].to_vec());
            let logits = gen.head_outputs(tape, &gp, &s, &layout)?;
            let mut blocks = Vec::new();
            for (k, l) in logits.into_iter().enumerate() {
                blocks.push(match l {
                    None => None,
                    Some(l) => {
                        let y = gumbel_softmax(tape, l, &noise[k], tau, false)?;
                        let pool = tape.constant(Matrix::from_rows(&pools.pools[k].entries));
                        Some(tape.matmul(y, pool)?)
                    }
                });
            }
            let d = disc.forward(tape, &dp, blocks, &layout, &s.edges)?;
            // bce against label 0 is −log(1 − D)
            let b = tape.bce(d, &[0.0])?;
            tape.scale(b, -1.0)
        })
    })
}

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

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.gen_range(1..5), rng.gen_range(1..5))
}

fn random_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    random_skeleton(n, 1, rng).edges
}

fn with_params(store: &ParamStore, extra: Vec<Matrix>) -> Vec<Matrix> {
    let mut v = params_of(store);
    v.extend(extra);
    v
}

type Op = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// Worst gradient-check error of every differentiable tape operation and
/// layer, each over `TRIALS` random draws.
pub fn elementary_grad_errors() -> Vec<(&'static str, f64)> {
    let seed = |name: &str| name.bytes().map(u64::from).sum::<u64>();
    let mut out = Vec::new();
    let mut run = |name: &'static str, setup: &mut dyn FnMut(&mut ChaCha8Rng) -> (Vec<Matrix>, Op)| {
        out.push((name, worst_error(seed(name), |rng| setup(rng))));
    };

    run("matmul", &mut |rng| {
        let (r, c) = dims(rng);
        let inner = rng.gen_range(1..5);
        (vec![Matrix::glorot(r, inner, rng), Matrix::glorot(inner, c, rng)], Box::new(|t, x| {
            let y = t.matmul(x[0], x[1])?;
            contract(t, y)
        }))
    });
    run("add", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.add(x[0], x[1])?;
            contract(t, y)
        }))
    });
    run("add_row", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(1, c, rng)], Box::new(|t, x| {
            let y = t.add_row(x[0], x[1])?;
            contract(t, y)
        }))
    });
    run("mul", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.mul(x[0], x[1])?;
            contract(t, y)
        }))
    });
    run("mul_col", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, 1, rng)], Box::new(|t, x| {
            let y = t.mul_col(x[0], x[1])?;
            contract(t, y)
        }))
    });
    run("scale", &mut |rng| {
        let (r, c) = dims(rng);
        let s = rng.gen_range(-3.0..3.0);
        (vec![Matrix::glorot(r, c, rng)], Box::new(move |t, x| {
            let y = t.scale(x[0], s)?;
            contract(t, y)
        }))
    });
    run("add_scalar", &mut |rng| {
        let (r, c) = dims(rng);
        let s = rng.gen_range(-3.0..3.0);
        (vec![Matrix::glorot(r, c, rng)], Box::new(move |t, x| {
            let y = t.add_scalar(x[0], s)?;
            let y = t.mul(y, y)?;
            contract(t, y)
        }))
    });
    run("leaky_relu", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -2.0, 2.0, rng)], Box::new(|t, x| {
            let y = t.leaky_relu(x[0], LEAKY_SLOPE)?;
            contract(t, y)
        }))
    });
    run("sigmoid", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -4.0, 4.0, rng)], Box::new(|t, x| {
            let y = t.sigmoid(x[0])?;
            contract(t, y)
        }))
    });
    run("log", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, 0.2, 3.0, rng)], Box::new(|t, x| {
            let y = t.log(x[0])?;
            contract(t, y)
        }))
    });
    run("clamp", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -2.0, 2.0, rng)], Box::new(|t, x| {
            let y = t.clamp(x[0], -1.0, 1.0)?;
            contract(t, y)
        }))
    });
    run("softmax", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![uniform(r, c, -3.0, 3.0, rng)], Box::new(|t, x| {
            let y = t.softmax(x[0])?;
            contract(t, y)
        }))
    });
    run("segment_softmax", &mut |rng| {
        let e = rng.gen_range(1..8);
        let segment: Vec<usize> = (0..e).map(|_| rng.gen_range(0..3)).collect();
        (vec![uniform(e, 1, -3.0, 3.0, rng)], Box::new(move |t, x| {
            let y = t.segment_softmax(x[0], &segment)?;
            contract(t, y)
        }))
    });
    run("cross_entropy", &mut |rng| {
        let (r, c) = dims(rng);
        let targets: Vec<usize> = (0..r).map(|_| rng.gen_range(0..c)).collect();
        (vec![uniform(r, c, -3.0, 3.0, rng)], Box::new(move |t, x| t.cross_entropy(x[0], &targets)))
    });
    run("bce", &mut |rng| {
        let r = rng.gen_range(1..6);
        let labels: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..1.0)).collect();
        (vec![uniform(r, 1, 0.05, 0.95, rng)], Box::new(move |t, x| t.bce(x[0], &labels)))
    });
    run("sum", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.mul(x[0], x[0])?;
            t.sum(y)
        }))
    });
    run("mean", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.mul(x[0], x[0])?;
            t.mean(y)
        }))
    });
    run("mean_rows", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.mean_rows(x[0])?;
            contract(t, y)
        }))
    });
    run("row_sum", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng)], Box::new(|t, x| {
            let y = t.row_sum(x[0])?;
            contract(t, y)
        }))
    });
    run("concat_cols", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(r, 2, rng)], Box::new(|t, x| {
            let y = t.concat_cols(&[x[0], x[1], x[0]])?;
            contract(t, y)
        }))
    });
    run("concat_rows", &mut |rng| {
        let (r, c) = dims(rng);
        (vec![Matrix::glorot(r, c, rng), Matrix::glorot(2, c, rng)], Box::new(|t, x| {
            let y = t.concat_rows(&[x[1], x[0]])?;
            contract(t, y)
        }))
    });
    run("slice_rows", &mut |rng| {
        let (r, c) = dims(rng);
        let start = rng.gen_range(0..r);
        let len = rng.gen_range(1..=r - start);
        (vec![Matrix::glorot(r, c, rng)], Box::new(move |t, x| {
            let y = t.slice_rows(x[0], start, len)?;
            contract(t, y)
        }))
    });
    run("gather_rows", &mut |rng| {
        let (r, c) = dims(rng);
        let index: Vec<usize> = (0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..r)).collect();
        (vec![Matrix::glorot(r, c, rng)], Box::new(move |t, x| {
            let y = t.gather_rows(x[0], &index)?;
            contract(t, y)
        }))
    });
    run("scatter_add_rows", &mut |rng| {
        let (r, c) = dims(rng);
        let out_rows = rng.gen_range(1..5);
        let index: Vec<usize> = (0..r).map(|_| rng.gen_range(0..out_rows)).collect();
        (vec![Matrix::glorot(r, c, rng)], Box::new(move |t, x| {
            let y = t.scatter_add_rows(x[0], &index, out_rows)?;
            contract(t, y)
        }))
    });
    run("gumbel_softmax", &mut |rng| {
        let (r, c) = dims(rng);
        let noise = gumbel_noise(r, c, rng);
        let tau = rng.gen_range(0.3..2.0);
        (vec![uniform(r, c, -2.0, 2.0, rng)], Box::new(move |t, x| {
            let y = gumbel_softmax(t, x[0], &noise, tau, false)?;
            contract(t, y)
        }))
    });
    run("dense", &mut |rng| {
        let mut store = ParamStore::new();
        let d = Dense::new(&mut store, "d", 3, 4, rng);
        randomise(&mut store, rng);
        let np = store.len();
        (with_params(&store, vec![Matrix::glorot(5, 3, rng)]), Box::new(move |t, x| {
            let y = d.forward(t, &Bound(x[..np].to_vec()), x[np])?;
            contract(t, y)
        }))
    });
    run("gat_layer", &mut |rng| {
        let n = rng.gen_range(1..7);
        let edges = EdgeIndex::from_undirected(n, &random_edges(n, rng), true);
        let mut store = ParamStore::new();
        let layer = GatLayer::new(&mut store, "g", 3, 4, rng);
        randomise(&mut store, rng);
        let np = store.len();
        (with_params(&store, vec![Matrix::glorot(n, 3, rng)]), Box::new(move |t, x| {
            let y = layer.forward(t, &Bound(x[..np].to_vec()), x[np], &edges)?;
            contract(t, y)
        }))
    });
    run("hgt_layer", &mut |rng| {
        let n = rng.gen_range(1..7);
        let types: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let layout = TypeLayout::new(&types, 3);
        let edges = layout.edge_index(&random_edges(n, rng), false);
        let widths = [2, 3, 1];
        let mut store = ParamStore::new();
        let stack = HgtStack::new(&mut store, "h", &widths, 3, 2, rng);
        let np = store.len();
        let present: Vec<usize> = (0..3).filter(|&k| layout.count(k) > 0).collect();
        let blocks: Vec<Matrix> = present.iter().map(|&k| Matrix::glorot(layout.count(k), widths[k], rng)).collect();
        (with_params(&store, blocks), Box::new(move |t, x| {
            let mut blocks = vec![None; 3];
            for (i, &k) in present.iter().enumerate() {
                blocks[k] = Some(x[np + i]);
            }
            let out = stack.forward(t, &Bound(x[..np].to_vec()), blocks, &layout, &edges)?;
            let pooled = out.into_iter().flatten().map(|b| t.mean_rows(b)).collect::<Result<Vec<_>>>()?;
            let y = t.concat_cols(&pooled)?;
            contract(t, y)
        }))
    });
    out
}

//! End-to-end run on the planted-pools profile: skeleton diffusion, then the
//! feature GAN, compared with its no-pool ablation and a uniform-pool
//! baseline by graph-set EMD to the test split.
//!
//! cargo run --release -p hetgen --example planted -- [seed] [gan-steps]

use std::time::Instant;

use hetgen::corpus::{assign_splits, build_pools, FeaturePool, Split, SplitFractions};
use hetgen::diffkit::OptimizerConfig;
use hetgen::diffusion::{build_schedule, corpus_marginals, cosine_betas, sample_skeletons, train_denoiser, DiffusionTrainConfig};
use hetgen::graph::{HeteroGraph, SkeletonGraph};
use hetgen::metrics::graph_set_emd;
use hetgen::phase2::{generate, train_gan, GanConfig, GeneratorConfig};
use hetgen::synthetic::planted_pools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_pool(skeletons: &[SkeletonGraph], pools: &FeaturePool, seed: u64) -> Vec<HeteroGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    skeletons
        .iter()
        .map(|s| {
            let feats = s
                .types
                .iter()
                .map(|&t| {
                    let e = &pools.pools[t].entries;
                    e[rng.gen_range(0..e.len())].clone()
                })
                .collect();
            HeteroGraph::new(s.types.clone(), s.edges.clone(), Some(feats))
        })
        .collect()
}

fn main() -> hetgen::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(0, |s| s.parse().expect("seed"));
    let steps: usize = args.get(2).map_or(1000, |s| s.parse().expect("steps"));

    let (table, graphs, _) = planted_pools(seed, 84);
    let corpus = assign_splits(table.clone(), graphs, seed, SplitFractions::default())?;
    let pools = build_pools(&corpus)?;
    let train: Vec<HeteroGraph> = corpus.train().into_iter().cloned().collect();
    let test: Vec<HeteroGraph> = corpus.graphs_in(Split::Test).into_iter().cloned().collect();
    let skel: Vec<SkeletonGraph> = train.iter().map(HeteroGraph::skeleton).collect();

    let t0 = Instant::now();
    let refs: Vec<&SkeletonGraph> = skel.iter().collect();
    let (m, e) = corpus_marginals(&refs, table.k())?;
    let schedule = build_schedule(&m, e, &cosine_betas(50))?;
    let (model, _) = train_denoiser(&skel, &schedule, &DiffusionTrainConfig::default(), seed)?;
    let sampled = sample_skeletons(&model, 100, seed)?;
    println!("phase 1: {:.1}s", t0.elapsed().as_secs_f64());

    let base = GanConfig {
        steps,
        g_optimizer: OptimizerConfig::adam(2e-4),
        d_optimizer: OptimizerConfig::adam(2e-4),
        select_every: 50,
        ..GanConfig::default()
    };
    let no_pool = GanConfig {
        generator: GeneratorConfig { no_pool: true, ..base.generator },
        ..base.clone()
    };
    for (name, cfg) in [("full", base), ("no-pool", no_pool)] {
        let t = Instant::now();
        let (gm, _) = train_gan(&train, &sampled, &table, &pools, &cfg, seed)?;
        let emd = graph_set_emd(&generate(&gm, &sampled, seed)?, &test, &table, &pools.penalty)?;
        println!("{name}: {emd:.4} ({:.1}s)", t.elapsed().as_secs_f64());
    }
    let uni = uniform_pool(&sampled, &pools, seed);
    println!("uniform: {:.4}", graph_set_emd(&uni, &test, &table, &pools.penalty)?);
    Ok(())
}

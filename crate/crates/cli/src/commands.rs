use std::fmt::Write as _;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use hetgen::corpus::{
    assign_splits, build_pools, parse_category_table, split_by_categories, Corpus, FeaturePool, Split,
    SplitFractions,
};
use hetgen::diffkit::OptimizerConfig;
use hetgen::diffusion::{
    build_schedule, corpus_marginals, cosine_betas, sample_skeletons, train_denoiser, DenoiserConfig,
    DiffusionModel, DiffusionTrainConfig,
};
use hetgen::io::{corpus_from_str, corpus_to_string};
use hetgen::metrics::{evaluate, EvalConfig, Metric, MmdConfig};
use hetgen::phase2::{generate, train_gan, DiscriminatorConfig, GanConfig, GanModel, GeneratorConfig};
use hetgen::synthetic::{make_synthetic, Profile};
use hetgen::{HeteroGraph, SkeletonGraph, TypeTable};
use serde::{Deserialize, Serialize};

use crate::artifact::{sibling, Run};
use crate::args::*;
use crate::UsageError;

/// Version of the model and pool file wrappers.
pub const FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PoolsFile {
    version: u32,
    kind: String,
    run: serde_json::Value,
    table: TypeTable,
    pools: FeaturePool,
}

#[derive(Serialize, Deserialize)]
struct Phase1File {
    version: u32,
    kind: String,
    run: serde_json::Value,
    table: TypeTable,
    model: DiffusionModel,
}

#[derive(Serialize, Deserialize)]
struct Phase2File {
    version: u32,
    kind: String,
    run: serde_json::Value,
    model: GanModel,
}

fn read_corpus(run: &mut Run, path: &Path) -> Result<(TypeTable, Vec<HeteroGraph>)> {
    let text = run.read(path)?;
    corpus_from_str(&text).with_context(|| format!("in corpus {}", path.display()))
}

/// Reads a versioned JSON wrapper and checks its kind.
fn read_file<T: for<'de> Deserialize<'de>>(run: &mut Run, path: &Path, kind: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Probe {
        version: u32,
        kind: String,
    }
    let text = run.read(path)?;
    let probe: Probe = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a hetgen model file", path.display()))?;
    ensure!(
        probe.kind == kind,
        "{} holds a {} file, expected {kind}",
        path.display(),
        probe.kind
    );
    ensure!(
        probe.version == FILE_VERSION,
        "{} has file version {}, this build reads version {FILE_VERSION}",
        path.display(),
        probe.version
    );
    serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))
}

/// Training graphs of a split-tagged corpus; every graph when untagged.
fn training_graphs(table: &TypeTable, graphs: Vec<HeteroGraph>) -> Result<Vec<HeteroGraph>> {
    Ok(match Corpus::from_tagged(table.clone(), graphs.clone())? {
        Some(c) => c.train().into_iter().cloned().collect(),
        None => graphs,
    })
}

fn require_same_table(a: &TypeTable, b: &TypeTable, what: &str) -> Result<()> {
    ensure!(a == b, "{what} uses a different type table from the training corpus");
    Ok(())
}

fn skeleton_corpus(table: &TypeTable, skeletons: &[SkeletonGraph]) -> Result<String> {
    let graphs: Vec<HeteroGraph> = skeletons
        .iter()
        .map(|s| HeteroGraph::new(s.types.clone(), s.edges.clone(), None))
        .collect();
    Ok(corpus_to_string(table, &graphs)?)
}

pub fn make_synthetic_cmd(args: &MakeSyntheticArgs) -> Result<()> {
    let mut run = Run::new("make-synthetic", args)?;
    let profile = Profile::parse(&args.profile).map_err(|e| UsageError(e.to_string()))?;
    let (table, graphs) = make_synthetic(profile, args.seed, args.count);
    run.output(args.out.clone(), corpus_to_string(&table, &graphs)?);
    run.finish()
}

pub fn split_cmd(args: &SplitArgs) -> Result<()> {
    let mut run = Run::new("split", args)?;
    let fractions = SplitFractions {
        train: args.train,
        val: args.val,
        test: args.test,
    };
    let parts = [fractions.train, fractions.val, fractions.test];
    if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(UsageError("--train, --val and --test must be in [0, 1] and sum to 1".into()).into());
    }
    let (table, mut graphs) = read_corpus(&mut run, &args.corpus)?;
    if let Some(path) = &args.categories {
        ensure!(
            graphs.len() == 1,
            "category splitting needs a corpus holding one large graph, {} has {}",
            args.corpus.display(),
            graphs.len()
        );
        let categories = parse_category_table(&run.read(path)?)
            .with_context(|| format!("in category table {}", path.display()))?;
        graphs = split_by_categories(&graphs[0], &categories, &args.keys, args.max_nodes)?;
    }
    let corpus = assign_splits(table, graphs, args.seed, fractions)?;
    run.output(args.out.clone(), corpus_to_string(&corpus.table, &corpus.tagged_graphs())?);
    run.finish()
}

pub fn pools_cmd(args: &PoolsArgs) -> Result<()> {
    let mut run = Run::new("pools", args)?;
    let (table, graphs) = read_corpus(&mut run, &args.corpus)?;
    let corpus = Corpus::from_tagged(table, graphs)?.with_context(|| {
        format!("{} has no split tags; run `hetgen split` first", args.corpus.display())
    })?;
    let file = PoolsFile {
        version: FILE_VERSION,
        kind: "pools".into(),
        run: run.config().clone(),
        pools: build_pools(&corpus)?,
        table: corpus.table,
    };
    run.output_json(args.out.clone(), &file)?;
    run.finish()
}

pub fn train_phase1_cmd(args: &TrainPhase1Args) -> Result<()> {
    let mut run = Run::new("train-phase1", args)?;
    let (table, graphs) = read_corpus(&mut run, &args.corpus)?;
    let skeletons: Vec<SkeletonGraph> = training_graphs(&table, graphs)?.iter().map(HeteroGraph::skeleton).collect();
    ensure!(!skeletons.is_empty(), "no training graphs in {}", args.corpus.display());
    let refs: Vec<&SkeletonGraph> = skeletons.iter().collect();
    let (node_marginal, edge_marginal) = corpus_marginals(&refs, table.k())?;
    let schedule = build_schedule(&node_marginal, edge_marginal, &cosine_betas(args.steps))?;
    let config = DiffusionTrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        optimizer: OptimizerConfig::adam(args.lr),
        denoiser: DenoiserConfig {
            hidden: args.hidden,
            depth: args.depth,
        },
    };
    let (model, trace) = train_denoiser(&skeletons, &schedule, &config, args.seed)?;

    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in trace.epoch_loss.iter().enumerate() {
        writeln!(csv, "{epoch},{loss}")?;
    }
    let file = Phase1File {
        version: FILE_VERSION,
        kind: "diffusion".into(),
        run: run.config().clone(),
        table,
        model,
    };
    run.output_json(args.out.clone(), &file)?;
    run.output(sibling(&args.out, "trace.csv"), csv);
    run.finish()
}

pub fn sample_skeletons_cmd(args: &SampleSkeletonsArgs) -> Result<()> {
    let mut run = Run::new("sample-skeletons", args)?;
    let file: Phase1File = read_file(&mut run, &args.model, "diffusion")?;
    let skeletons = sample_skeletons(&file.model, args.count, args.seed)?;
    run.output(args.out.clone(), skeleton_corpus(&file.table, &skeletons)?);
    run.finish()
}

fn optimizer(kind: OptimizerKind, lr: f64) -> OptimizerConfig {
    match kind {
        OptimizerKind::Sgd => OptimizerConfig::sgd(lr),
        OptimizerKind::Adam => OptimizerConfig::adam(lr),
    }
}

pub fn train_phase2_cmd(args: &TrainPhase2Args) -> Result<()> {
    let mut run = Run::new("train-phase2", args)?;
    let (table, graphs) = read_corpus(&mut run, &args.corpus)?;
    let real = training_graphs(&table, graphs)?;
    let pools = FeaturePool::from_graphs(&table, &real)?;
    let skeletons: Vec<SkeletonGraph> = match &args.skeletons {
        Some(path) => {
            let (skel_table, skel) = read_corpus(&mut run, path)?;
            require_same_table(&table, &skel_table, &path.display().to_string())?;
            skel.iter().map(HeteroGraph::skeleton).collect()
        }
        None => real.iter().map(HeteroGraph::skeleton).collect(),
    };
    let defaults = GanConfig::default();
    let config = GanConfig {
        steps: args.steps,
        d_steps: args.d_steps,
        batch_size: args.batch_size,
        generator: GeneratorConfig {
            no_mp: args.no_mp,
            no_pool: args.no_pool,
            ..defaults.generator
        },
        discriminator: DiscriminatorConfig::default(),
        g_optimizer: optimizer(args.optimizer, args.g_lr),
        d_optimizer: optimizer(args.optimizer, args.d_lr),
        tau_start: args.tau_start,
        tau_end: args.tau_end,
        nonsaturating: args.nonsaturating,
        real_label: args.real_label,
        instance_noise: args.instance_noise,
        select_every: args.select_every,
    };
    let (model, trace) = train_gan(&real, &skeletons, &table, &pools, &config, args.seed)?;

    let mut csv = String::from("step,temperature,d_loss,g_loss,select_emd\n");
    for r in &trace.steps {
        let select = r.select_emd.map(|x| x.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{},{select}", r.step, r.temperature, r.d_loss, r.g_loss)?;
    }
    let file = Phase2File {
        version: FILE_VERSION,
        kind: "gan".into(),
        run: run.config().clone(),
        model,
    };
    run.output_json(args.out.clone(), &file)?;
    run.output(sibling(&args.out, "trace.csv"), csv);
    run.finish()
}

pub fn generate_cmd(args: &GenerateArgs) -> Result<()> {
    let mut run = Run::new("generate", args)?;
    let file: Phase2File = read_file(&mut run, &args.gan, "gan")?;
    let (table, skel) = read_corpus(&mut run, &args.skeletons)?;
    require_same_table(&file.model.table, &table, &args.skeletons.display().to_string())?;
    let count = args.count.unwrap_or(skel.len());
    ensure!(
        count <= skel.len(),
        "--count {count} exceeds the {} skeletons in {}",
        skel.len(),
        args.skeletons.display()
    );
    let skeletons: Vec<SkeletonGraph> = skel[..count].iter().map(HeteroGraph::skeleton).collect();
    let graphs = generate(&file.model, &skeletons, args.seed)?;
    run.output(args.out.clone(), corpus_to_string(&table, &graphs)?);
    run.finish()
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let mut run = Run::new("evaluate", args)?;
    let metrics = args
        .metrics
        .iter()
        .map(|m| Metric::parse(m.trim()).map_err(|e| UsageError(e.to_string())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if metrics.is_empty() {
        return Err(UsageError("--metrics lists no metric".into()).into());
    }
    let (table, graphs) = read_corpus(&mut run, &args.real)?;
    let real = match args.real_split {
        SplitChoice::All => graphs,
        choice => {
            let which = match choice {
                SplitChoice::Train => Split::Train,
                SplitChoice::Val => Split::Val,
                _ => Split::Test,
            };
            let corpus = Corpus::from_tagged(table.clone(), graphs)?
                .with_context(|| format!("{} has no split tags", args.real.display()))?;
            corpus.graphs_in(which).into_iter().cloned().collect()
        }
    };
    let (gen_table, generated) = read_corpus(&mut run, &args.gen)?;
    require_same_table(&table, &gen_table, &args.gen.display().to_string())?;
    let penalty = match &args.pools {
        Some(path) => {
            let file: PoolsFile = read_file(&mut run, path, "pools")?;
            require_same_table(&table, &file.table, &path.display().to_string())?;
            file.pools.penalty
        }
        None if metrics.contains(&Metric::Femd) => FeaturePool::from_graphs(&table, &real)?.penalty,
        None => vec![1.0; table.k()],
    };
    if args.repeats == 0 || args.samples == 0 {
        return Err(UsageError("--samples and --repeats must be positive".into()).into());
    }
    let config = EvalConfig {
        samples: args.samples,
        repeats: args.repeats,
        seed: args.seed,
        mmd: MmdConfig {
            sigma: args.sigma,
            clustering_bins: args.clustering_bins,
            spectral_bins: args.spectral_bins,
        },
        ground_metrics: table.metrics().to_vec(),
        penalty,
    };
    let reports = evaluate(&real, &generated, &table, &metrics, &config)?;

    let mut csv = String::from("metric,value,std,real_size,generated_size\n");
    for r in &reports {
        writeln!(csv, "{},{},{},{},{}", r.metric.as_str(), r.value, r.std, r.real_size, r.generated_size)?;
    }
    run.output_json(args.out.clone(), &reports)?;
    run.output(sibling(&args.out, "csv"), csv);
    run.finish()
}

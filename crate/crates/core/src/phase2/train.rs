use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand_distr::{Distribution, Normal};

use super::discriminator::{feature_blocks, Discriminator, DiscriminatorConfig};
use super::generator::{Generator, GeneratorConfig, Mode};
use crate::corpus::FeaturePool;
use crate::diffkit::{Bound, Matrix, Optimizer, OptimizerConfig, ParamStore, Tape, TypeLayout, TypedBlocks, Var};
use crate::error::{Error, Result};
use crate::metrics::graph_set_emd;
use crate::graph::{validate, HeteroGraph, SkeletonGraph, TypeTable};

pub const GAN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Generator updates.
    pub steps: usize,
    /// Discriminator updates before each generator update.
    pub d_steps: usize,
    pub batch_size: usize,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub g_optimizer: OptimizerConfig,
    pub d_optimizer: OptimizerConfig,
    /// Gumbel temperature, annealed geometrically from start to end.
    pub tau_start: f64,
    pub tau_end: f64,
    /// Generator minimises −log D instead of log(1 − D).
    pub nonsaturating: bool,
    /// Discriminator target for real graphs (one-sided label smoothing).
    pub real_label: f64,
    /// Standard deviation of Gaussian noise added to every feature the
    /// discriminator sees, real or generated; decays linearly to 0.
    pub instance_noise: f64,
    /// Every this many steps, score the generator by graph-set EMD between
    /// its output on the training skeletons and the real training graphs,
    /// and keep the best-scoring generator. 0 keeps the final one.
    #[serde(default)]
    pub select_every: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            d_steps: 1,
            batch_size: 16,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            g_optimizer: OptimizerConfig::sgd(0.05),
            d_optimizer: OptimizerConfig::sgd(0.05),
            tau_start: 1.0,
            tau_end: 0.5,
            nonsaturating: false,
            real_label: 1.0,
            instance_noise: 0.0,
            select_every: 0,
        }
    }
}

impl GanConfig {
    pub fn noise_level(&self, step: usize) -> f64 {
        if self.steps == 0 {
            return self.instance_noise;
        }
        self.instance_noise * (1.0 - step as f64 / self.steps as f64)
    }

    pub fn temperature(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.tau_start;
        }
        let frac = step as f64 / (self.steps - 1) as f64;
        self.tau_start * (self.tau_end / self.tau_start).powf(frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub temperature: f64,
    /// Mean discriminator BCE over this step's discriminator updates.
    pub d_loss: f64,
    /// Generator objective: mean log(1 − D) or mean −log D.
    pub g_loss: f64,
    /// Training-set EMD when this step was scored for selection.
    #[serde(default)]
    pub select_emd: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanTrace {
    pub steps: Vec<StepRecord>,
}

/// Everything needed to assign features to new skeletons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub version: u32,
    pub seed: u64,
    pub config: GanConfig,
    pub table: TypeTable,
    pub pools: FeaturePool,
    pub generator: Generator,
    pub gen_params: ParamStore,
    pub discriminator: Discriminator,
    pub disc_params: ParamStore,
}

impl GanModel {
    pub fn new(table: &TypeTable, pools: &FeaturePool, config: &GanConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen_params = ParamStore::new();
        let generator = Generator::new(&mut gen_params, table, pools, config.generator, &mut rng)?;
        let mut disc_params = ParamStore::new();
        let discriminator =
            Discriminator::new(&mut disc_params, table.dims(), config.discriminator, &mut rng);
        Ok(Self {
            version: GAN_VERSION,
            seed,
            config: config.clone(),
            table: table.clone(),
            pools: pools.clone(),
            generator,
            gen_params,
            discriminator,
            disc_params,
        })
    }

    /// Sample-mode assignment for one skeleton.
    pub fn assign<R: Rng + ?Sized>(&self, s: &SkeletonGraph, rng: &mut R) -> Result<HeteroGraph> {
        let mut tape = Tape::new();
        let p = self.gen_params.bind_frozen(&mut tape);
        let a = self
            .generator
            .assign(&mut tape, &p, s, &self.pools, Mode::Sample, rng)?;
        Ok(a.graph)
    }
}

/// Adds N(0, sigma²) noise to every block; identity when `sigma` is 0.
fn perturb<R: Rng + ?Sized>(tape: &mut Tape, blocks: TypedBlocks, sigma: f64, rng: &mut R) -> Result<TypedBlocks> {
    if sigma == 0.0 {
        return Ok(blocks);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    blocks
        .into_iter()
        .map(|b| {
            b.map(|b| {
                let (r, c) = tape.shape(b);
                let noise = Matrix::from_vec(r, c, (0..r * c).map(|_| normal.sample(rng)).collect());
                let noise = tape.constant(noise);
                tape.add(b, noise)
            })
            .transpose()
        })
        .collect()
}

/// Alternating discriminator / generator updates over fixed real graphs and
/// skeletons.
pub struct GanTrainer<'a> {
    pub model: GanModel,
    real: &'a [HeteroGraph],
    skeletons: &'a [SkeletonGraph],
    g_opt: Optimizer,
    d_opt: Optimizer,
    rng: ChaCha8Rng,
    /// Instance-noise level used by the next updates.
    pub noise: f64,
}

impl<'a> GanTrainer<'a> {
    pub fn new(
        model: GanModel,
        real: &'a [HeteroGraph],
        skeletons: &'a [SkeletonGraph],
    ) -> Result<Self> {
        if real.is_empty() {
            return Err(Error::invalid("no real training graphs"));
        }
        if skeletons.is_empty() {
            return Err(Error::invalid("no skeletons to assign features to"));
        }
        if model.config.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if let Some((i, _)) = real
            .iter()
            .enumerate()
            .find(|(_, g)| !validate(g, &model.table).is_valid() || g.features.is_none())
        {
            return Err(Error::Record {
                index: i,
                message: "real training graph is invalid or unfeatured".into(),
            });
        }
        let model_noise = model.config.instance_noise;
        let g_opt = model.config.g_optimizer.build(&model.gen_params);
        let d_opt = model.config.d_optimizer.build(&model.disc_params);
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(1);
        Ok(Self {
            model,
            real,
            skeletons,
            g_opt,
            d_opt,
            noise: model_noise,
            rng,
        })
    }

    fn batch(&mut self, len: usize) -> Vec<usize> {
        (0..self.model.config.batch_size)
            .map(|_| self.rng.gen_range(0..len))
            .collect()
    }

    /// Generates a batch under `gp` and scores it with the discriminator
    /// under `dp`.
    fn score_fakes(&mut self, tape: &mut Tape, gp: &Bound, dp: &Bound, temperature: f64) -> Result<Vec<Var>> {
        let idx = self.batch(self.skeletons.len());
        let m = &self.model;
        let mut out = Vec::with_capacity(idx.len());
        for i in idx {
            let s = &self.skeletons[i];
            let a = m
                .generator
                .assign(tape, gp, s, &m.pools, Mode::Train { temperature }, &mut self.rng)?;
            let blocks = perturb(tape, a.blocks, self.noise, &mut self.rng)?;
            out.push(m.discriminator.forward(tape, dp, blocks, &a.layout, &s.edges)?);
        }
        Ok(out)
    }

    /// One discriminator update on a balanced real/generated batch; returns
    /// its mean BCE.
    pub fn d_step(&mut self, temperature: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let gp = self.model.gen_params.bind_frozen(&mut tape);
        let dp = self.model.disc_params.bind(&mut tape);
        let idx = self.batch(self.real.len());
        let mut scores = Vec::with_capacity(2 * idx.len());
        for i in idx {
            let g = &self.real[i];
            let layout = TypeLayout::new(&g.types, self.model.table.k());
            let blocks = feature_blocks(&mut tape, g, &layout)?;
            let blocks = perturb(&mut tape, blocks, self.noise, &mut self.rng)?;
            scores.push(self.model.discriminator.forward(&mut tape, &dp, blocks, &layout, &g.edges)?);
        }
        let n_real = scores.len();
        scores.extend(self.score_fakes(&mut tape, &gp, &dp, temperature)?);
        let all = tape.concat_rows(&scores)?;
        let mut labels = vec![self.model.config.real_label; n_real];
        labels.resize(scores.len(), 0.0);
        let loss = tape.bce(all, &labels)?;
        let value = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        self.d_opt.step(&mut self.model.disc_params, &dp.grads(&grads));
        if !self.model.disc_params.all_finite() {
            return Err(Error::NonFinite("discriminator parameters"));
        }
        Ok(value)
    }

    /// The generator objective on a fresh batch, on `tape`.
    pub fn generator_loss(&mut self, tape: &mut Tape, gp: &Bound, dp: &Bound, temperature: f64) -> Result<Var> {
        let fakes = self.score_fakes(tape, gp, dp, temperature)?;
        let all = tape.concat_rows(&fakes)?;
        if self.model.config.nonsaturating {
            tape.bce(all, &vec![1.0; fakes.len()])
        } else {
            // mean log(1 − D) = −BCE against label 0
            let b = tape.bce(all, &vec![0.0; fakes.len()])?;
            tape.scale(b, -1.0)
        }
    }

    /// One generator update; returns the generator objective.
    pub fn g_step(&mut self, temperature: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let gp = self.model.gen_params.bind(&mut tape);
        let dp = self.model.disc_params.bind_frozen(&mut tape);
        let loss = self.generator_loss(&mut tape, &gp, &dp, temperature)?;
        let value = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        self.g_opt.step(&mut self.model.gen_params, &gp.grads(&grads));
        if !self.model.gen_params.all_finite() {
            return Err(Error::NonFinite("generator parameters"));
        }
        Ok(value)
    }

    /// Training-set EMD of the current generator, used for selection.
    pub fn selection_score(&self) -> Result<f64> {
        let out = generate(&self.model, self.skeletons, self.model.seed)?;
        graph_set_emd(&out, self.real, &self.model.table, &self.model.pools.penalty)
    }

    pub fn run(&mut self) -> Result<GanTrace> {
        let mut trace = GanTrace::default();
        let every = self.model.config.select_every;
        let mut best: Option<(f64, ParamStore)> = None;
        for step in 0..self.model.config.steps {
            let temperature = self.model.config.temperature(step);
            self.noise = self.model.config.noise_level(step);
            let mut d_total = 0.0;
            for _ in 0..self.model.config.d_steps {
                d_total += self.d_step(temperature)?;
            }
            let g_loss = self.g_step(temperature)?;
            let mut select_emd = None;
            if every > 0 && (step + 1) % every == 0 {
                let score = self.selection_score()?;
                select_emd = Some(score);
                if best.as_ref().map_or(true, |(b, _)| score < *b) {
                    best = Some((score, self.model.gen_params.clone()));
                }
            }
            trace.steps.push(StepRecord {
                step,
                temperature,
                d_loss: d_total / self.model.config.d_steps.max(1) as f64,
                g_loss,
                select_emd,
            });
        }
        if let Some((_, params)) = best {
            self.model.gen_params = params;
        }
        Ok(trace)
    }
}

/// Trains the feature GAN. `real` are featured training graphs, `skeletons`
/// the structures the generator assigns features to.
pub fn train_gan(
    real: &[HeteroGraph],
    skeletons: &[SkeletonGraph],
    table: &TypeTable,
    pools: &FeaturePool,
    config: &GanConfig,
    seed: u64,
) -> Result<(GanModel, GanTrace)> {
    let model = GanModel::new(table, pools, config, seed)?;
    let mut trainer = GanTrainer::new(model, real, skeletons)?;
    let trace = trainer.run()?;
    Ok((trainer.model, trace))
}

/// Sample-mode assignment for every skeleton; graph `i` uses stream `i` of
/// the seed. Every output is validated against the model's type table.
pub fn generate(model: &GanModel, skeletons: &[SkeletonGraph], seed: u64) -> Result<Vec<HeteroGraph>> {
    skeletons
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let g = model.assign(s, &mut rng)?;
            validate(&g, &model.table)
                .into_result()
                .map_err(|e| Error::Record {
                    index: i,
                    message: e.to_string(),
                })?;
            Ok(g)
        })
        .collect()
}

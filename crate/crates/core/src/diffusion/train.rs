use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::denoiser::{Denoiser, DenoiserConfig};
use super::noise::forward_noise;
use super::schedule::{ScheduleSpec, TransitionSchedule};
use crate::corpus::SizeDistribution;
use crate::diffkit::{OptimizerConfig, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::graph::SkeletonGraph;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub denoiser: DenoiserConfig,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 8,
            optimizer: OptimizerConfig::adam(0.005),
            denoiser: DenoiserConfig::default(),
        }
    }
}

/// Mean per-graph loss of every epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub epoch_loss: Vec<f64>,
}

/// A trained skeleton model: schedule, network and the size distribution
/// that sampling draws `n` from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub version: u32,
    pub seed: u64,
    pub config: DiffusionTrainConfig,
    pub schedule: ScheduleSpec,
    pub sizes: SizeDistribution,
    pub denoiser: Denoiser,
    pub params: ParamStore,
}

impl DiffusionModel {
    pub fn build_schedule(&self) -> Result<TransitionSchedule> {
        TransitionSchedule::from_spec(&self.schedule)
    }
}

/// Minimises the summed cross-entropy of clean types and pair states at a
/// uniformly drawn timestep per graph, in shuffled minibatches.
pub fn train_denoiser(
    graphs: &[SkeletonGraph],
    schedule: &TransitionSchedule,
    config: &DiffusionTrainConfig,
    seed: u64,
) -> Result<(DiffusionModel, LossTrace)> {
    if graphs.is_empty() {
        return Err(Error::invalid("no training skeletons"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let denoiser = Denoiser::new(
        &mut params,
        schedule.k(),
        schedule.steps,
        config.denoiser,
        &mut rng,
    );
    let mut opt = config.optimizer.build(&params);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut trace = LossTrace::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape);
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let clean = &graphs[i];
                let t = rng.gen_range(1..=schedule.steps);
                let noisy = forward_noise(clean, t, schedule, &mut rng)?;
                losses.push(denoiser.loss(&mut tape, &p, clean, &noisy, t)?);
            }
            let mut total = losses[0];
            for &l in &losses[1..] {
                total = tape.add(total, l)?;
            }
            epoch_total += tape.value(total).item();
            let mean = tape.scale(total, 1.0 / batch.len() as f64)?;
            let grads = tape.backward(mean)?;
            opt.step(&mut params, &p.grads(&grads));
            if !params.all_finite() {
                return Err(Error::NonFinite("denoiser parameters"));
            }
        }
        trace.epoch_loss.push(epoch_total / graphs.len() as f64);
    }
    let model = DiffusionModel {
        version: MODEL_VERSION,
        seed,
        config: config.clone(),
        schedule: schedule.spec(),
        sizes: SizeDistribution::from_sizes(graphs.iter().map(|g| g.n)),
        denoiser,
        params,
    };
    Ok((model, trace))
}

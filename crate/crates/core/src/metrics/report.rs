//! Named metrics, resampled evaluation and the report records.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::feature_emd::graph_set_emd;
use super::mmd::{clustering_mmd, degree_mmd, spectral_mmd, type_degree_mmd, MmdConfig};
use crate::error::{Error, Result};
use crate::graph::{GroundMetric, HeteroGraph, TypeTable};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Degree,
    Clust,
    Spectral,
    Typedeg,
    Femd,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Degree,
        Metric::Clust,
        Metric::Spectral,
        Metric::Typedeg,
        Metric::Femd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Degree => "degree",
            Metric::Clust => "clust",
            Metric::Spectral => "spectral",
            Metric::Typedeg => "typedeg",
            Metric::Femd => "femd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown metric `{s}` (expected degree, clust, spectral, typedeg or femd)"
                ))
            })
    }

    /// Evaluates this metric on one pair of sample sets.
    pub fn compute(
        self,
        real: &[HeteroGraph],
        generated: &[HeteroGraph],
        table: &TypeTable,
        mmd: &MmdConfig,
        penalty: &[f64],
    ) -> Result<f64> {
        if real.is_empty() || generated.is_empty() {
            return Err(Error::invalid("metrics need non-empty graph sets"));
        }
        Ok(match self {
            Metric::Degree => degree_mmd(real, generated, mmd),
            Metric::Clust => clustering_mmd(real, generated, mmd),
            Metric::Spectral => spectral_mmd(real, generated, mmd),
            Metric::Typedeg => type_degree_mmd(real, generated, table.k(), mmd),
            Metric::Femd => graph_set_emd(generated, real, table, penalty)?,
        })
    }
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub samples: usize,
    pub repeats: usize,
    pub seed: u64,
    pub mmd: MmdConfig,
    pub ground_metrics: Vec<GroundMetric>,
    pub penalty: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub version: u32,
    pub metric: Metric,
    /// Mean over repeats.
    pub value: f64,
    /// Population standard deviation over repeats; 0 for a single run.
    pub std: f64,
    pub runs: Vec<f64>,
    pub real_size: usize,
    pub generated_size: usize,
    pub config: EvalConfig,
}

/// Draws `samples` graphs with replacement, or returns the whole set when it
/// is no larger than `samples`.
fn resample<'a, R: Rng>(set: &'a [HeteroGraph], samples: usize, rng: &mut R) -> Vec<&'a HeteroGraph> {
    if set.len() <= samples {
        return set.iter().collect();
    }
    (0..samples)
        .map(|_| set.choose(rng).expect("non-empty"))
        .collect()
}

/// Computes each metric `repeats` times on resampled sets. A metric's runs
/// depend only on the seed and the metric, not on the other metrics chosen.
pub fn evaluate(
    real: &[HeteroGraph],
    generated: &[HeteroGraph],
    table: &TypeTable,
    metrics: &[Metric],
    config: &EvalConfig,
) -> Result<Vec<MetricReport>> {
    if config.repeats == 0 || config.samples == 0 {
        return Err(Error::invalid("samples and repeats must be positive"));
    }
    metrics
        .iter()
        .map(|&metric| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(metric as u64);
            let runs = (0..config.repeats)
                .map(|_| {
                    let r: Vec<HeteroGraph> =
                        resample(real, config.samples, &mut rng).into_iter().cloned().collect();
                    let g: Vec<HeteroGraph> = resample(generated, config.samples, &mut rng)
                        .into_iter()
                        .cloned()
                        .collect();
                    metric.compute(&r, &g, table, &config.mmd, &config.penalty)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = runs.iter().sum::<f64>() / runs.len() as f64;
            let var = runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / runs.len() as f64;
            if !mean.is_finite() {
                return Err(Error::NonFinite("metric value"));
            }
            Ok(MetricReport {
                version: REPORT_VERSION,
                metric,
                value: mean,
                std: var.sqrt(),
                runs,
                real_size: real.len(),
                generated_size: generated.len(),
                config: config.clone(),
            })
        })
        .collect()
}

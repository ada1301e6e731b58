//! Disorder-ensemble orchestration.
//!
//! An experiment is any function from a sample index to a fixed-length vector
//! of observables (a trace, or a single number). Samples run concurrently;
//! aggregation happens afterwards in sample-index order with pairwise
//! summation, so the report is bit-identical for any execution order.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{DisorderSpec, DISORDER_STREAM_LAYOUT};
use crate::{Error, Result};

/// Everything needed to regenerate an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedManifest {
    pub seed: u64,
    pub samples: usize,
    pub strength: f64,
    pub stream_layout: &'static str,
}

impl From<&DisorderSpec> for SeedManifest {
    fn from(d: &DisorderSpec) -> Self {
        Self {
            seed: d.seed,
            samples: d.samples,
            strength: d.strength,
            stream_layout: DISORDER_STREAM_LAYOUT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleReport {
    /// Per-sample outputs in sample-index order.
    pub samples: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Standard error of the mean; zero for a single sample.
    pub stderr: Vec<f64>,
    pub manifest: SeedManifest,
}

impl EnsembleReport {
    /// Aggregates `(sample_index, output)` pairs given in any order.
    pub fn from_samples(
        manifest: SeedManifest,
        mut outputs: Vec<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::invalid("samples", "no sample outputs to aggregate"));
        }
        outputs.sort_by_key(|(i, _)| *i);
        let width = outputs[0].1.len();
        if let Some((i, o)) = outputs.iter().find(|(_, o)| o.len() != width) {
            return Err(Error::SampleFailed {
                index: *i,
                source: Box::new(Error::DimensionMismatch {
                    expected: width,
                    found: o.len(),
                }),
            });
        }
        let samples: Vec<Vec<f64>> = outputs.into_iter().map(|(_, o)| o).collect();
        let mut mean = Vec::with_capacity(width);
        let mut stderr = Vec::with_capacity(width);
        let mut column = Vec::with_capacity(samples.len());
        for j in 0..width {
            column.clear();
            column.extend(samples.iter().map(|s| s[j]));
            let (m, e) = mean_and_stderr(&column);
            mean.push(m);
            stderr.push(e);
        }
        Ok(Self {
            samples,
            mean,
            stderr,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1..=8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let first = xs[0];
    if xs.iter().all(|&x| x.to_bits() == first.to_bits()) {
        return (first, 0.0);
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `experiment(sample_index)` for every sample of `disorder` and
/// aggregates pointwise. The first failing sample (lowest index) aborts the
/// ensemble.
pub fn run_ensemble<F>(disorder: &DisorderSpec, experiment: F) -> Result<EnsembleReport>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    disorder.validate()?;
    let outputs: Vec<Result<Vec<f64>>> = (0..disorder.samples)
        .into_par_iter()
        .map(&experiment)
        .collect();
    let mut indexed = Vec::with_capacity(outputs.len());
    for (index, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(v) => indexed.push((index, v)),
            Err(e) => {
                return Err(Error::SampleFailed {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    EnsembleReport::from_samples(SeedManifest::from(disorder), indexed)
}

/// One report per grid point, in grid order.
pub fn sweep<P, F>(grid: &[P], point: F) -> Result<Vec<EnsembleReport>>
where
    P: Sync,
    F: Fn(&P) -> Result<EnsembleReport> + Sync,
{
    if grid.is_empty() {
        return Err(Error::invalid("grid", "sweep grid is empty"));
    }
    grid.par_iter().map(&point).collect()
}

//! Monte Carlo propagation of posterior uncertainty through the forward
//! model.
//!
//! Every sample owns an independent RNG stream keyed by (base_seed,
//! sample_index), so results do not depend on evaluation order or thread
//! count, and the first Q samples of a longer run are exactly the samples
//! of a shorter one.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{ParameterVector, PosteriorSummary};
use crate::numeric::{mean, pairwise_sum, sample_variance};
use crate::qoi::{volume_weighted_mean, QoISeries};

#[derive(Debug, Error)]
pub enum McError {
    #[error("model evaluation failed at sample {sample}: {message}")]
    Model { sample: usize, message: String },
    #[error("bad config: {0}")]
    Config(String),
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv row {row}: {reason}")]
    BadCsvRow { row: usize, reason: String },
}

/// Draw the parameter vector of one Monte Carlo sample. Componentwise
/// Gaussian; zero variance collapses to the mean. Reproducible: the stream
/// is fully determined by (base_seed, sample_index).
pub fn sample_parameters(post: &PosteriorSummary, sample_index: u64, base_seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(sample_index);
    let values = post
        .mu
        .iter()
        .zip(&post.var)
        .map(|(&mu, &var)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mu + var.sqrt() * z
        })
        .collect();
    ParameterVector(values)
}

/// First two moments of the QoI over sampled parameters. Variances use the
/// unbiased divisor Q-1.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// Number of model evaluations behind the estimate.
    pub evals: usize,
    pub mean_global: Vec<f64>,
    pub var_global: Vec<f64>,
    /// [time][region]
    pub mean_regional: Vec<Vec<f64>>,
    pub var_regional: Vec<Vec<f64>>,
}

impl MomentSeries {
    pub fn num_regions(&self) -> usize {
        self.mean_regional.first().map_or(0, |r| r.len())
    }

    /// Volume-weighted mean of regional means, one value per time.
    pub fn vw_mean(&self, region_volumes: &[f64]) -> Vec<f64> {
        self.mean_regional.iter().map(|row| volume_weighted_mean(row, region_volumes)).collect()
    }

    /// Volume-weighted mean of regional variances, one value per time.
    pub fn vw_var(&self, region_volumes: &[f64]) -> Vec<f64> {
        self.var_regional.iter().map(|row| volume_weighted_mean(row, region_volumes)).collect()
    }

    /// CSV rows `time,mean_global,var_global,mean_region_j...,var_region_j...`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), McError> {
        let path = path.as_ref();
        let r = self.num_regions();
        let mut text = String::from("time,mean_global,var_global");
        for j in 1..=r {
            let _ = write!(text, ",mean_region_{j}");
        }
        for j in 1..=r {
            let _ = write!(text, ",var_region_{j}");
        }
        text.push('\n');
        for (t, idx) in self.times.iter().zip(0..) {
            let _ = write!(text, "{t},{},{}", self.mean_global[idx], self.var_global[idx]);
            for v in &self.mean_regional[idx] {
                let _ = write!(text, ",{v}");
            }
            for v in &self.var_regional[idx] {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| McError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, McError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| McError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| McError::BadCsvRow { row: 1, reason: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "time" {
            return Err(McError::BadCsvRow { row: 1, reason: format!("unexpected header {header:?}") });
        }
        let r = (cols.len() - 3) / 2;
        if cols.len() != 3 + 2 * r {
            return Err(McError::BadCsvRow { row: 1, reason: "inconsistent column count".into() });
        }
        let mut out = MomentSeries {
            times: vec![],
            evals: 0,
            mean_global: vec![],
            var_global: vec![],
            mean_regional: vec![],
            var_regional: vec![],
        };
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| McError::BadCsvRow { row: idx + 1, reason: e.to_string() })?;
            if vals.len() != 3 + 2 * r {
                return Err(McError::BadCsvRow { row: idx + 1, reason: "wrong column count".into() });
            }
            out.times.push(vals[0]);
            out.mean_global.push(vals[1]);
            out.var_global.push(vals[2]);
            out.mean_regional.push(vals[3..3 + r].to_vec());
            out.var_regional.push(vals[3 + r..].to_vec());
        }
        Ok(out)
    }
}

fn evaluate_batch<F>(model: F, post: &PosteriorSummary, count: usize, base_seed: u64) -> Result<Vec<QoISeries>, McError>
where
    F: Fn(&ParameterVector) -> Result<QoISeries, crate::model::ModelError> + Sync,
{
    if count == 0 {
        return Err(McError::Config("sample count must be positive".into()));
    }
    let results: Vec<Result<QoISeries, crate::model::ModelError>> = (0..count)
        .into_par_iter()
        .map(|i| model(&sample_parameters(post, i as u64, base_seed)))
        .collect();
    let mut out = Vec::with_capacity(count);
    for (sample, r) in results.into_iter().enumerate() {
        match r {
            Ok(q) => out.push(q),
            Err(e) => return Err(McError::Model { sample, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn moments_over_prefix(samples: &[QoISeries], count: usize) -> MomentSeries {
    let times = samples[0].times.clone();
    let nt = times.len();
    let r = samples[0].num_regions();
    let mut mean_global = Vec::with_capacity(nt);
    let mut var_global = Vec::with_capacity(nt);
    let mut mean_regional = Vec::with_capacity(nt);
    let mut var_regional = Vec::with_capacity(nt);
    let mut column = vec![0.0; count];
    for t in 0..nt {
        for (i, s) in samples[..count].iter().enumerate() {
            column[i] = s.global[t];
        }
        mean_global.push(mean(&column));
        var_global.push(if count >= 2 { sample_variance(&column) } else { 0.0 });
        let mut mrow = Vec::with_capacity(r);
        let mut vrow = Vec::with_capacity(r);
        for j in 0..r {
            for (i, s) in samples[..count].iter().enumerate() {
                column[i] = s.regional[t][j];
            }
            mrow.push(mean(&column));
            vrow.push(if count >= 2 { sample_variance(&column) } else { 0.0 });
        }
        mean_regional.push(mrow);
        var_regional.push(vrow);
    }
    MomentSeries { times, evals: count, mean_global, var_global, mean_regional, var_regional }
}

/// Plain Monte Carlo moment estimate with Q = `count` samples.
pub fn mc_estimate<F>(
    model: F,
    post: &PosteriorSummary,
    count: usize,
    base_seed: u64,
) -> Result<MomentSeries, McError>
where
    F: Fn(&ParameterVector) -> Result<QoISeries, crate::model::ModelError> + Sync,
{
    let samples = evaluate_batch(model, post, count, base_seed)?;
    Ok(moments_over_prefix(&samples, count))
}

/// One row of a Monte Carlo convergence study: errors of the Q-sample
/// estimate against a reference, at one sample time.
#[derive(Debug, Clone)]
pub struct McConvergenceRow {
    pub count: usize,
    pub time: f64,
    pub err_mean_global: f64,
    pub err_var_global: f64,
    pub err_mean_regional: Vec<f64>,
    /// Root-mean-square of the regional mean errors; a scalar that stays
    /// well away from accidental zeros when fitting rates.
    pub rms_mean_regional: f64,
}

#[derive(Debug, Clone)]
pub struct McConvergence {
    pub rows: Vec<McConvergenceRow>,
}

impl McConvergence {
    /// CSV rows `count,time,err_mean_global,err_var_global,rms_mean_regional,err_mean_region_j...`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), McError> {
        let path = path.as_ref();
        let r = self.rows.first().map_or(0, |row| row.err_mean_regional.len());
        let mut text = String::from("count,time,err_mean_global,err_var_global,rms_mean_regional");
        for j in 1..=r {
            let _ = write!(text, ",err_mean_region_{j}");
        }
        text.push('\n');
        for row in &self.rows {
            let _ = write!(
                text,
                "{},{},{},{},{}",
                row.count, row.time, row.err_mean_global, row.err_var_global, row.rms_mean_regional
            );
            for v in &row.err_mean_regional {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| McError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Error table for increasing sample counts against a fixed reference.
/// Counts must be strictly increasing; the run evaluates max(counts)
/// samples once and reuses prefixes, which is exactly what independent
/// runs would produce thanks to the per-sample streams.
pub fn mc_convergence<F>(
    model: F,
    post: &PosteriorSummary,
    counts: &[usize],
    reference: &MomentSeries,
    base_seed: u64,
) -> Result<McConvergence, McError>
where
    F: Fn(&ParameterVector) -> Result<QoISeries, crate::model::ModelError> + Sync,
{
    if counts.is_empty() {
        return Err(McError::Config("need at least one sample count".into()));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(McError::Config("sample counts must be strictly increasing".into()));
    }
    let max = *counts.last().unwrap();
    let samples = evaluate_batch(&model, post, max, base_seed)?;
    if samples[0].times.len() != reference.times.len()
        || samples[0]
            .times
            .iter()
            .zip(&reference.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(McError::Config("reference times do not match model sample times".into()));
    }
    let mut rows = Vec::new();
    for &count in counts {
        let est = moments_over_prefix(&samples, count);
        for (t_idx, &time) in est.times.iter().enumerate() {
            let err_regional: Vec<f64> = est.mean_regional[t_idx]
                .iter()
                .zip(&reference.mean_regional[t_idx])
                .map(|(a, b)| (a - b).abs())
                .collect();
            let rms = (pairwise_sum(&err_regional.iter().map(|e| e * e).collect::<Vec<_>>())
                / err_regional.len() as f64)
                .sqrt();
            rows.push(McConvergenceRow {
                count,
                time,
                err_mean_global: (est.mean_global[t_idx] - reference.mean_global[t_idx]).abs(),
                err_var_global: (est.var_global[t_idx] - reference.var_global[t_idx]).abs(),
                err_mean_regional: err_regional,
                rms_mean_regional: rms,
            });
        }
    }
    Ok(McConvergence { rows })
}

//! Quantities of interest: plain spatial averages and volume-weighted
//! regional averages, optionally restricted by a node mask.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::Connectome;
use crate::field::NodeField;
use crate::numeric::pairwise_sum;
use crate::solver::Trajectory;

#[derive(Debug, Error)]
pub enum QoiError {
    #[error("dimension mismatch: {context} expected {expected}, got {got}")]
    Dimension { context: &'static str, expected: usize, got: usize },
    #[error("region {region} has no unmasked nodes; its average is undefined")]
    FullyMaskedRegion { region: u32 },
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv row {row}: {reason}")]
    BadCsvRow { row: usize, reason: String },
}

/// Denominator convention for regional averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeNormalization {
    /// Each region is divided by its own (unmasked) volume, so a uniform
    /// field c maps every region to c.
    #[default]
    PerRegion,
    /// All regions are divided by the total unmasked volume; regional values
    /// then sum to the global volume-weighted mean.
    TotalVolume,
}

/// Unweighted mean over all nodes.
pub fn spatial_average(c: &NodeField) -> f64 {
    pairwise_sum(c.as_slice()) / c.len() as f64
}

/// Volume-weighted average per region. `mask[k] = false` drops node k from
/// both numerator and denominator; a region losing all its nodes is an
/// error rather than a silent zero.
pub fn regional_averages(
    c: &NodeField,
    conn: &Connectome,
    mask: Option<&[bool]>,
    normalization: VolumeNormalization,
) -> Result<Vec<f64>, QoiError> {
    let m = conn.num_nodes();
    if c.len() != m {
        return Err(QoiError::Dimension { context: "field", expected: m, got: c.len() });
    }
    if let Some(mask) = mask {
        if mask.len() != m {
            return Err(QoiError::Dimension { context: "mask", expected: m, got: mask.len() });
        }
    }
    let r = conn.region_count as usize;
    let mut weighted = vec![0.0; r];
    let mut volume = vec![0.0; r];
    for node in &conn.nodes {
        let k = node.id as usize;
        if mask.map_or(true, |mk| mk[k]) {
            let j = (node.region - 1) as usize;
            weighted[j] += c[k] * node.volume;
            volume[j] += node.volume;
        }
    }
    for (j, &v) in volume.iter().enumerate() {
        if v == 0.0 {
            return Err(QoiError::FullyMaskedRegion { region: j as u32 + 1 });
        }
    }
    let out = match normalization {
        VolumeNormalization::PerRegion => weighted.iter().zip(&volume).map(|(w, v)| w / v).collect(),
        VolumeNormalization::TotalVolume => {
            let vtot: f64 = pairwise_sum(&volume);
            weighted.iter().map(|w| w / vtot).collect()
        }
    };
    Ok(out)
}

/// Unmasked volume per region, in region order.
pub fn region_volumes(conn: &Connectome, mask: Option<&[bool]>) -> Vec<f64> {
    let mut volume = vec![0.0; conn.region_count as usize];
    for node in &conn.nodes {
        if mask.map_or(true, |mk| mk[node.id as usize]) {
            volume[(node.region - 1) as usize] += node.volume;
        }
    }
    volume
}

/// Volume-weighted mean of per-region values.
pub fn volume_weighted_mean(values: &[f64], volumes: &[f64]) -> f64 {
    assert_eq!(values.len(), volumes.len());
    let num: f64 = values.iter().zip(volumes).map(|(q, v)| q * v).sum();
    let den: f64 = volumes.iter().sum();
    num / den
}

/// Global and per-region averages along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoISeries {
    pub times: Vec<f64>,
    pub global: Vec<f64>,
    /// regional[t][j] is the region j+1 average at times[t].
    pub regional: Vec<Vec<f64>>,
}

impl QoISeries {
    pub fn from_trajectory(
        traj: &Trajectory,
        conn: &Connectome,
        mask: Option<&[bool]>,
        normalization: VolumeNormalization,
    ) -> Result<Self, QoiError> {
        let mut global = Vec::with_capacity(traj.states.len());
        let mut regional = Vec::with_capacity(traj.states.len());
        for state in &traj.states {
            global.push(spatial_average(state));
            regional.push(regional_averages(state, conn, mask, normalization)?);
        }
        Ok(QoISeries { times: traj.times.clone(), global, regional })
    }

    pub fn num_regions(&self) -> usize {
        self.regional.first().map_or(0, |r| r.len())
    }

    /// CSV rows `time,global,region_1..region_R`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), QoiError> {
        let path = path.as_ref();
        let r = self.num_regions();
        let mut text = String::from("time,global");
        for j in 1..=r {
            let _ = write!(text, ",region_{j}");
        }
        text.push('\n');
        for (t, (g, row)) in self.times.iter().zip(self.global.iter().zip(&self.regional)) {
            let _ = write!(text, "{t},{g}");
            for v in row {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| QoiError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

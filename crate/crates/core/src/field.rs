//! Node fields, region-wise parameter vectors, prior boxes, and Gaussian
//! posterior summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::Connectome;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("length mismatch: {context} expected {expected}, got {got}")]
    Length { context: &'static str, expected: usize, got: usize },
    #[error("prior bounds must satisfy a < b componentwise; component {index} has a={a}, b={b}")]
    BadBounds { index: usize, a: f64, b: f64 },
    #[error("posterior variance must be finite and nonnegative; component {index} has var={var}")]
    BadVariance { index: usize, var: f64 },
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("non-finite value {value} at component {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("region table must have at least one region")]
    EmptyTable,
}

/// One scalar value per graph node, indexed by node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeField(Vec<f64>);

impl NodeField {
    pub fn from_vec(values: Vec<f64>) -> Self {
        NodeField(values)
    }

    pub fn constant(value: f64, len: usize) -> Self {
        NodeField(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for NodeField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One reaction coefficient per region, component l for region l+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Componentwise uniform prior box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBounds {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PriorBounds {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, FieldError> {
        if a.len() != b.len() {
            return Err(FieldError::Length { context: "prior bounds", expected: a.len(), got: b.len() });
        }
        for (index, (&lo, &hi)) in a.iter().zip(&b).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FieldError::BadBounds { index, a: lo, b: hi });
            }
        }
        Ok(PriorBounds { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn midpoint(&self) -> ParameterVector {
        ParameterVector(self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn contains(&self, p: &ParameterVector) -> bool {
        p.len() == self.len()
            && p.0
                .iter()
                .zip(self.a.iter().zip(&self.b))
                .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }
}

/// Componentwise-independent Gaussian posterior. Zero variance is legal and
/// denotes a point mass; operations that need strictly positive spread
/// (collocation knots, Gaussian densities) reject it at their own boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl PosteriorSummary {
    pub fn new(mu: Vec<f64>, var: Vec<f64>) -> Result<Self, FieldError> {
        if mu.len() != var.len() {
            return Err(FieldError::Length { context: "posterior summary", expected: mu.len(), got: var.len() });
        }
        for (index, &v) in var.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FieldError::BadVariance { index, var: v });
            }
        }
        for (index, &m) in mu.iter().enumerate() {
            if !m.is_finite() {
                return Err(FieldError::NonFinite { index, value: m });
            }
        }
        Ok(PosteriorSummary { mu, var })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// log of the uniform density over the box up to its normalizing constant:
/// 0 inside (bounds inclusive), -inf outside. Length mismatch is -inf as
/// well: such a point is never in the support.
pub fn log_prior(p: &ParameterVector, bounds: &PriorBounds) -> f64 {
    if bounds.contains(p) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// log N(y; mu, sigma^2) with the standard normalization.
pub fn gaussian_logpdf(y: f64, mu: f64, sigma: f64) -> Result<f64, FieldError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(FieldError::BadSigma(sigma));
    }
    let z = (y - mu) / sigma;
    Ok(-0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Per-node reaction coefficients: node k gets the component of its region.
pub fn assemble_reaction_vector(p: &ParameterVector, c: &Connectome) -> Result<Vec<f64>, FieldError> {
    if p.len() != c.region_count as usize {
        return Err(FieldError::Length {
            context: "parameter vector vs region count",
            expected: c.region_count as usize,
            got: p.len(),
        });
    }
    let regions = c.regions_by_id();
    Ok(regions.iter().map(|&r| p.0[(r - 1) as usize]).collect())
}

/// One row of the region table: prior box and posterior marginal for one
/// region, in region-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub var: f64,
}

/// Serialized as `{"regions": [...]}`; the row order defines region indices
/// 1..=R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    pub regions: Vec<RegionEntry>,
}

impl RegionTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FieldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FieldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let t: RegionTable = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FieldError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("region table serializes");
        std::fs::write(path, text).map_err(|source| FieldError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.regions.is_empty() {
            return Err(FieldError::EmptyTable);
        }
        self.bounds()?;
        self.posterior()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn bounds(&self) -> Result<PriorBounds, FieldError> {
        PriorBounds::new(
            self.regions.iter().map(|r| r.a).collect(),
            self.regions.iter().map(|r| r.b).collect(),
        )
    }

    pub fn posterior(&self) -> Result<PosteriorSummary, FieldError> {
        PosteriorSummary::new(
            self.regions.iter().map(|r| r.mu).collect(),
            self.regions.iter().map(|r| r.var).collect(),
        )
    }

    pub fn with_posterior(&self, post: &PosteriorSummary) -> RegionTable {
        let regions = self
            .regions
            .iter()
            .zip(post.mu.iter().zip(&post.var))
            .map(|(r, (&mu, &var))| RegionEntry { mu, var, ..r.clone() })
            .collect();
        RegionTable { regions }
    }

    /// Built-in seven-lobe table used as the default prior box for
    /// calibration and as a realistic default posterior for forward UQ
    /// demos on synthetic networks.
    pub fn seven_lobe_reference() -> RegionTable {
        let rows: [(&str, f64, f64, f64, f64); 7] = [
            ("frontal", -0.07, 0.43, 0.1801, 0.0077),
            ("temporal", -0.11, 0.39, 0.1421, 0.0079),
            ("parietal", -0.19, 0.31, 0.0627, 0.0060),
            ("insular", -0.15, 0.35, 0.1005, 0.0070),
            ("limbic", -0.12, 0.38, 0.1351, 0.0075),
            ("occipital", -0.19, 0.31, 0.0545, 0.0086),
            ("subcortical", -0.15, 0.35, 0.1147, 0.0093),
        ];
        RegionTable {
            regions: rows
                .iter()
                .map(|&(name, a, b, mu, var)| RegionEntry { name: name.to_string(), a, b, mu, var })
                .collect(),
        }
    }

    /// Neutral table for an R-region network: box (-0.15, 0.35) with a mild
    /// default posterior for each region.
    pub fn uniform_default(region_count: u32) -> RegionTable {
        RegionTable {
            regions: (1..=region_count)
                .map(|r| RegionEntry {
                    name: format!("region_{r}"),
                    a: -0.15,
                    b: 0.35,
                    mu: 0.10,
                    var: 0.0075,
                })
                .collect(),
        }
    }
}

//! Sparse grid assembly, interpolation, quadrature, and QoI moments.
//!
//! A grid is the union of the tensor grids of all multi-indices with
//! nonzero combination coefficient. Points are deduplicated through
//! per-dimension canonical knot ids: bit-exact matches for nested Leja
//! sequences, 1e-12 tolerance otherwise. Construction is single-threaded
//! and fully deterministic; model evaluations at grid points may run in
//! parallel, with all reductions in fixed order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::{smolyak_index_set, MultiIndexSet};
use super::knots::{gauss_hermite_knots, leja_quadrature_weights, weighted_leja_sequence, KnotFamily, LevelToKnots};
use super::ScError;
use crate::field::{ParameterVector, PosteriorSummary};
use crate::forward_mc::MomentSeries;
use crate::model::ModelError;
use crate::numeric::pairwise_sum;
use crate::qoi::QoISeries;

const DEDUP_TOL: f64 = 1e-12;
/// Variance estimates this far below zero are quadrature noise on an
/// exact zero; anything lower is reported as an error.
const VARIANCE_ALLOWANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub family: KnotFamily,
    pub growth: LevelToKnots,
    /// Per-dimension Gaussian location.
    pub mu: Vec<f64>,
    /// Per-dimension Gaussian scale, strictly positive.
    pub sigma: Vec<f64>,
}

impl GridConfig {
    pub fn standard(n_dims: usize, family: KnotFamily, growth: LevelToKnots) -> Self {
        GridConfig { family, growth, mu: vec![0.0; n_dims], sigma: vec![1.0; n_dims] }
    }

    /// Collocation grid matched to a componentwise Gaussian posterior.
    /// Zero-variance components are rejected: a degenerate dimension has
    /// no interpolation knots.
    pub fn from_posterior(
        post: &PosteriorSummary,
        family: KnotFamily,
        growth: LevelToKnots,
    ) -> Result<Self, ScError> {
        for (l, &v) in post.var.iter().enumerate() {
            if !(v > 0.0) {
                return Err(ScError::Config(format!(
                    "posterior component {l} has variance {v}; collocation needs sigma > 0"
                )));
            }
        }
        let cfg = GridConfig {
            family,
            growth,
            mu: post.mu.clone(),
            sigma: post.var.iter().map(|v| v.sqrt()).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_dims(&self) -> usize {
        self.mu.len()
    }

    fn validate(&self) -> Result<(), ScError> {
        if self.mu.is_empty() || self.mu.len() != self.sigma.len() {
            return Err(ScError::Config(format!(
                "mu/sigma length mismatch: {} vs {}",
                self.mu.len(),
                self.sigma.len()
            )));
        }
        for (m, s) in self.mu.iter().zip(&self.sigma) {
            if !m.is_finite() || !s.is_finite() || *s <= 0.0 {
                return Err(ScError::Config(format!("bad Gaussian parameters mu={m}, sigma={s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TensorTerm {
    pub index: Vec<usize>,
    pub gamma: i64,
    /// Global point id per tensor point, row-major with the last
    /// dimension fastest.
    pub point_ids: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SparseGrid {
    pub config: GridConfig,
    pub index_set: MultiIndexSet,
    /// Combination coefficients aligned with `index_set.indices()`.
    pub coefficients: Vec<i64>,
    /// Deduplicated points in physical coordinates.
    pub points: Vec<Vec<f64>>,
    /// Global quadrature weight per point; sums to 1.
    pub quadrature_weights: Vec<f64>,
    /// Terms with nonzero coefficient only.
    pub terms: Vec<TensorTerm>,
    /// Standard-normal knots per level (index 0 unused).
    knots_1d: Vec<Vec<f64>>,
    /// Barycentric weights per level, aligned with knots_1d.
    bary_1d: Vec<Vec<f64>>,
}

fn advance(j: &mut [usize], dims: &[usize]) -> bool {
    for d in (0..j.len()).rev() {
        j[d] += 1;
        if j[d] < dims[d] {
            return true;
        }
        j[d] = 0;
    }
    false
}

fn one_dimensional_rule(family: KnotFamily, m: usize) -> Result<(Vec<f64>, Vec<f64>), ScError> {
    match family {
        KnotFamily::GaussHermite => gauss_hermite_knots(m, 0.0, 1.0),
        KnotFamily::WeightedLeja => {
            let pts = weighted_leja_sequence(m)?;
            let w = leja_quadrature_weights(&pts)?;
            Ok((pts, w))
        }
    }
}

pub fn build_sparse_grid(config: &GridConfig, index_set: &MultiIndexSet) -> Result<SparseGrid, ScError> {
    config.validate()?;
    let n = config.n_dims();
    if index_set.n_dims() != n {
        return Err(ScError::Dimension {
            context: "index set dimensions",
            expected: n,
            got: index_set.n_dims(),
        });
    }
    let coefficients = index_set.combination_coefficients();
    let max_level = index_set.max_level();

    let mut knots_1d: Vec<Vec<f64>> = vec![vec![]];
    let mut weights_1d: Vec<Vec<f64>> = vec![vec![]];
    let mut bary_1d: Vec<Vec<f64>> = vec![vec![]];
    let mut ids_1d: Vec<Vec<usize>> = vec![vec![]];
    let mut canon: Vec<f64> = Vec::new();
    for level in 1..=max_level {
        let m = config.growth.knots(level);
        let (pts, w) = one_dimensional_rule(config.family, m)?;
        let mut bary = vec![0.0; m];
        for j in 0..m {
            let mut prod = 1.0;
            for k in 0..m {
                if k != j {
                    prod *= pts[j] - pts[k];
                }
            }
            bary[j] = 1.0 / prod;
        }
        let ids = pts
            .iter()
            .map(|&v| match canon.iter().position(|&c| (c - v).abs() <= DEDUP_TOL) {
                Some(id) => id,
                None => {
                    canon.push(v);
                    canon.len() - 1
                }
            })
            .collect();
        knots_1d.push(pts);
        weights_1d.push(w);
        bary_1d.push(bary);
        ids_1d.push(ids);
    }

    let mut point_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut quadrature_weights: Vec<f64> = Vec::new();
    let mut terms: Vec<TensorTerm> = Vec::new();

    for (idx, &gamma) in index_set.indices().iter().zip(&coefficients) {
        if gamma == 0 {
            continue;
        }
        let dims_m: Vec<usize> = idx.iter().map(|&l| config.growth.knots(l)).collect();
        let total: usize = dims_m.iter().product();
        let mut ids = Vec::with_capacity(total);
        let mut j = vec![0usize; n];
        let mut key = vec![0usize; n];
        loop {
            let mut tensor_weight = gamma as f64;
            for d in 0..n {
                key[d] = ids_1d[idx[d]][j[d]];
                tensor_weight *= weights_1d[idx[d]][j[d]];
            }
            let id = match point_ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = points.len();
                    point_ids.insert(key.clone(), id);
                    points.push(
                        key.iter()
                            .enumerate()
                            .map(|(d, &k)| config.mu[d] + config.sigma[d] * canon[k])
                            .collect(),
                    );
                    quadrature_weights.push(0.0);
                    id
                }
            };
            quadrature_weights[id] += tensor_weight;
            ids.push(id);
            if !advance(&mut j, &dims_m) {
                break;
            }
        }
        terms.push(TensorTerm { index: idx.clone(), gamma, point_ids: ids });
    }

    Ok(SparseGrid {
        config: config.clone(),
        index_set: index_set.clone(),
        coefficients,
        points,
        quadrature_weights,
        terms,
        knots_1d,
        bary_1d,
    })
}

impl SparseGrid {
    /// Grid over the isotropic index set of the given level.
    pub fn smolyak(config: &GridConfig, level: usize) -> Result<Self, ScError> {
        let set = smolyak_index_set(config.n_dims(), level)?;
        build_sparse_grid(config, &set)
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Sparse quadrature of point values against the grid weights.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64, ScError> {
        if values.len() != self.points.len() {
            return Err(ScError::Dimension {
                context: "quadrature values",
                expected: self.points.len(),
                got: values.len(),
            });
        }
        let products: Vec<f64> =
            self.quadrature_weights.iter().zip(values).map(|(w, v)| w * v).collect();
        Ok(pairwise_sum(&products))
    }

    /// Combination-technique interpolant through `values` evaluated at a
    /// physical point p.
    pub fn interpolate(&self, values: &[f64], p: &[f64]) -> Result<f64, ScError> {
        let n = self.config.n_dims();
        if values.len() != self.points.len() {
            return Err(ScError::Dimension {
                context: "interpolation values",
                expected: self.points.len(),
                got: values.len(),
            });
        }
        if p.len() != n {
            return Err(ScError::Dimension { context: "interpolation point", expected: n, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ScError::NonFinite("interpolation point"));
        }
        let y: Vec<f64> = (0..n).map(|d| (p[d] - self.config.mu[d]) / self.config.sigma[d]).collect();

        // 1D basis vectors, cached per (dimension, level) for this query.
        let max_level = self.knots_1d.len() - 1;
        let mut basis: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; max_level + 1]; n];
        let mut total = 0.0;
        let mut j = vec![0usize; n];
        for term in &self.terms {
            let mut dims_m = Vec::with_capacity(n);
            for d in 0..n {
                let level = term.index[d];
                dims_m.push(self.knots_1d[level].len());
                if basis[d][level].is_none() {
                    basis[d][level] =
                        Some(lagrange_basis(&self.knots_1d[level], &self.bary_1d[level], y[d]));
                }
            }
            j.iter_mut().for_each(|v| *v = 0);
            let mut term_sum = 0.0;
            let mut pos = 0usize;
            loop {
                let mut b = 1.0;
                for d in 0..n {
                    b *= basis[d][term.index[d]].as_ref().unwrap()[j[d]];
                }
                term_sum += b * values[term.point_ids[pos]];
                pos += 1;
                if !advance(&mut j, &dims_m) {
                    break;
                }
            }
            total += term.gamma as f64 * term_sum;
        }
        Ok(total)
    }

    /// CSV rows `point_index,p_1..p_N,weight`.
    pub fn save_points_csv(&self, path: impl AsRef<Path>) -> Result<(), ScError> {
        let path = path.as_ref();
        let n = self.config.n_dims();
        let mut text = String::from("point_index");
        for d in 1..=n {
            let _ = write!(text, ",p_{d}");
        }
        text.push_str(",weight\n");
        for (i, (pt, w)) in self.points.iter().zip(&self.quadrature_weights).enumerate() {
            let _ = write!(text, "{i}");
            for v in pt {
                let _ = write!(text, ",{v}");
            }
            let _ = writeln!(text, ",{w}");
        }
        std::fs::write(path, text)
            .map_err(|source| ScError::Io { path: path.display().to_string(), source })
    }
}

/// Second barycentric form; exact hits return the indicator vector.
fn lagrange_basis(knots: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(hit) = knots.iter().position(|&k| k == x) {
        let mut out = vec![0.0; knots.len()];
        out[hit] = 1.0;
        return out;
    }
    let mut out = Vec::with_capacity(knots.len());
    let mut denom = 0.0;
    for (&k, &b) in knots.iter().zip(bary) {
        let s = b / (x - k);
        out.push(s);
        denom += s;
    }
    for v in &mut out {
        *v /= denom;
    }
    out
}

/// Memoized model evaluations keyed by the exact bit pattern of the
/// parameter vector. Nested grids produce bit-identical points across
/// levels, so a shared cache turns a level sweep into incremental work.
#[derive(Debug, Default)]
pub struct EvalCache {
    map: Mutex<HashMap<Vec<u64>, Arc<QoISeries>>>,
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(p: &[f64]) -> Vec<u64> {
        p.iter().map(|v| v.to_bits()).collect()
    }

    fn get(&self, p: &[f64]) -> Option<Arc<QoISeries>> {
        self.map.lock().unwrap().get(&Self::key(p)).cloned()
    }

    fn insert(&self, p: &[f64], q: QoISeries) -> Arc<QoISeries> {
        let arc = Arc::new(q);
        self.map.lock().unwrap().insert(Self::key(p), arc.clone());
        arc
    }
}

fn clamp_variance(v: f64, time: f64) -> Result<f64, ScError> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_ALLOWANCE {
        Ok(0.0)
    } else {
        Err(ScError::NegativeVariance { value: v, time })
    }
}

/// Sparse-grid collocation estimate of QoI mean and variance: one model
/// evaluation per unique grid point, variance via the quadrature of Q^2
/// minus the squared mean. A shared cache skips points evaluated by
/// earlier grids.
pub fn sc_moments<F>(
    model: F,
    grid: &SparseGrid,
    cache: Option<&EvalCache>,
) -> Result<MomentSeries, ScError>
where
    F: Fn(&ParameterVector) -> Result<QoISeries, ModelError> + Sync,
{
    let npts = grid.points.len();
    let mut values: Vec<Option<Arc<QoISeries>>> = vec![None; npts];
    if let Some(c) = cache {
        for (i, p) in grid.points.iter().enumerate() {
            values[i] = c.get(p);
        }
    }
    let misses: Vec<usize> = (0..npts).filter(|&i| values[i].is_none()).collect();
    let fresh: Vec<(usize, Result<QoISeries, ModelError>)> = misses
        .par_iter()
        .map(|&i| (i, model(&ParameterVector(grid.points[i].clone()))))
        .collect();
    for (i, r) in fresh {
        match r {
            Ok(q) => {
                let arc = match cache {
                    Some(c) => c.insert(&grid.points[i], q),
                    None => Arc::new(q),
                };
                values[i] = Some(arc);
            }
            Err(e) => {
                return Err(ScError::Model {
                    point: i,
                    parameters: grid.points[i].clone(),
                    message: e.to_string(),
                })
            }
        }
    }
    let values: Vec<Arc<QoISeries>> = values.into_iter().map(|v| v.unwrap()).collect();

    let first = &values[0];
    let times = first.times.clone();
    let nt = times.len();
    let r = first.num_regions();
    for (i, v) in values.iter().enumerate() {
        if v.times.len() != nt || v.num_regions() != r {
            return Err(ScError::Config(format!(
                "model output shape differs at grid point {i}: {} times x {} regions vs {nt} x {r}",
                v.times.len(),
                v.num_regions()
            )));
        }
    }

    let mut column = vec![0.0; npts];
    let mut square = vec![0.0; npts];
    let mut mean_global = Vec::with_capacity(nt);
    let mut var_global = Vec::with_capacity(nt);
    let mut mean_regional = Vec::with_capacity(nt);
    let mut var_regional = Vec::with_capacity(nt);
    for t in 0..nt {
        for (i, v) in values.iter().enumerate() {
            column[i] = v.global[t];
            square[i] = v.global[t] * v.global[t];
        }
        let m = grid.quadrature(&column)?;
        mean_global.push(m);
        var_global.push(clamp_variance(grid.quadrature(&square)? - m * m, times[t])?);
        let mut mrow = Vec::with_capacity(r);
        let mut vrow = Vec::with_capacity(r);
        for reg in 0..r {
            for (i, v) in values.iter().enumerate() {
                column[i] = v.regional[t][reg];
                square[i] = v.regional[t][reg] * v.regional[t][reg];
            }
            let m = grid.quadrature(&column)?;
            mrow.push(m);
            vrow.push(clamp_variance(grid.quadrature(&square)? - m * m, times[t])?);
        }
        mean_regional.push(mrow);
        var_regional.push(vrow);
    }
    Ok(MomentSeries { times, evals: npts, mean_global, var_global, mean_regional, var_regional })
}

#[derive(Debug, Clone)]
pub struct ScConvergenceRow {
    pub level: usize,
    pub num_points: usize,
    pub time: f64,
    pub err_mean_global: f64,
    pub err_var_global: f64,
    /// Volume-weighted regional mean error.
    pub err_vw_mean: f64,
    /// Volume-weighted regional variance error.
    pub err_vw_var: f64,
}

#[derive(Debug, Clone)]
pub struct ScConvergence {
    pub rows: Vec<ScConvergenceRow>,
}

impl ScConvergence {
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), ScError> {
        let path = path.as_ref();
        let mut text =
            String::from("level,points,time,err_mean_global,err_var_global,err_vw_mean,err_vw_var\n");
        for row in &self.rows {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                row.level,
                row.num_points,
                row.time,
                row.err_mean_global,
                row.err_var_global,
                row.err_vw_mean,
                row.err_vw_var
            );
        }
        std::fs::write(path, text)
            .map_err(|source| ScError::Io { path: path.display().to_string(), source })
    }
}

fn times_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Collocation error sweep over Smolyak levels against a fixed reference.
pub fn sc_convergence<F>(
    model: F,
    config: &GridConfig,
    levels: &[usize],
    reference: &MomentSeries,
    region_volumes: &[f64],
    cache: Option<&EvalCache>,
) -> Result<ScConvergence, ScError>
where
    F: Fn(&ParameterVector) -> Result<QoISeries, ModelError> + Sync,
{
    if levels.is_empty() {
        return Err(ScError::Config("need at least one level".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ScError::Config("levels must be strictly increasing".into()));
    }
    if region_volumes.len() != reference.num_regions() {
        return Err(ScError::Dimension {
            context: "region volumes",
            expected: reference.num_regions(),
            got: region_volumes.len(),
        });
    }
    let ref_vw_mean = reference.vw_mean(region_volumes);
    let ref_vw_var = reference.vw_var(region_volumes);
    let mut rows = Vec::new();
    for &level in levels {
        let grid = SparseGrid::smolyak(config, level)?;
        let est = sc_moments(&model, &grid, cache)?;
        if !times_match(&est.times, &reference.times) {
            return Err(ScError::Config("reference times do not match model sample times".into()));
        }
        let est_vw_mean = est.vw_mean(region_volumes);
        let est_vw_var = est.vw_var(region_volumes);
        for (t, &time) in est.times.iter().enumerate() {
            rows.push(ScConvergenceRow {
                level,
                num_points: grid.num_points(),
                time,
                err_mean_global: (est.mean_global[t] - reference.mean_global[t]).abs(),
                err_var_global: (est.var_global[t] - reference.var_global[t]).abs(),
                err_vw_mean: (est_vw_mean[t] - ref_vw_mean[t]).abs(),
                err_vw_var: (est_vw_var[t] - ref_vw_var[t]).abs(),
            });
        }
    }
    Ok(ScConvergence { rows })
}

//! One-dimensional knot families for Gaussian parameters.
//!
//! Both families are defined for the standard normal and mapped affinely
//! by (mu, sigma). Gauss-Hermite knots come from the Golub-Welsch
//! eigenvalue method. Weighted Leja knots are built greedily, are nested
//! by construction, and get interpolatory quadrature weights (exact
//! integrals of the Lagrange basis against the normal density).

use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ScError;

/// Interpolatory Leja weights become unreliable past this many knots.
pub const MAX_KNOTS: usize = 40;

const LEJA_HALF_WIDTH: f64 = 20.0;
const LEJA_GRID_CELLS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnotFamily {
    GaussHermite,
    WeightedLeja,
}

/// Level-to-knot map m. m(0) = 0, m(1) = 1, strictly increasing above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelToKnots {
    /// m(i) = i
    Linear,
    /// m(i) = 2i - 1
    TwoStep,
}

impl LevelToKnots {
    pub fn knots(self, level: usize) -> usize {
        match self {
            LevelToKnots::Linear => level,
            LevelToKnots::TwoStep => {
                if level == 0 {
                    0
                } else {
                    2 * level - 1
                }
            }
        }
    }
}

/// n-point Gaussian quadrature for N(mu, sigma^2). Exact for polynomials
/// up to degree 2n-1. Weights are positive and sum to 1.
pub fn gauss_hermite_knots(n: usize, mu: f64, sigma: f64) -> Result<(Vec<f64>, Vec<f64>), ScError> {
    if n == 0 {
        return Err(ScError::Config("need at least one quadrature point".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(ScError::Config(format!("bad Gaussian parameters mu={mu}, sigma={sigma}")));
    }
    // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
    // off-diagonal sqrt(k).
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let points = pairs.iter().map(|p| mu + sigma * p.0).collect();
    let weights = pairs.iter().map(|p| p.1 / total).collect();
    Ok((points, weights))
}

fn leja_cache() -> &'static Mutex<Vec<f64>> {
    static CACHE: OnceLock<Mutex<Vec<f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(vec![0.0]))
}

/// log of exp(-y^2/4) * prod |y - y_j|; -inf at existing knots.
fn leja_log_objective(y: f64, knots: &[f64]) -> f64 {
    let mut v = -y * y / 4.0;
    for &k in knots {
        let d = (y - k).abs();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        v += d.ln();
    }
    v
}

fn golden_section_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..80 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn next_leja_point(knots: &[f64]) -> f64 {
    let h = 2.0 * LEJA_HALF_WIDTH / LEJA_GRID_CELLS as f64;
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=LEJA_GRID_CELLS {
        let y = -LEJA_HALF_WIDTH + i as f64 * h;
        let v = leja_log_objective(y, knots);
        // >= so grid ties resolve to the rightmost candidate.
        if v >= best {
            best = v;
            best_i = i;
        }
    }
    let center = -LEJA_HALF_WIDTH + best_i as f64 * h;
    golden_section_max(center - h, center + h, |y| leja_log_objective(y, knots))
}

/// First n standard weighted Leja points. y_1 = 0; each further point
/// maximizes exp(-y^2/4) * prod |y - y_j| over [-20, 20]. Deterministic;
/// the sequence is cached process-wide, so prefixes are shared bitwise.
pub fn weighted_leja_sequence(n: usize) -> Result<Vec<f64>, ScError> {
    if n == 0 {
        return Err(ScError::Config("need at least one knot".into()));
    }
    if n > MAX_KNOTS {
        return Err(ScError::TooManyKnots { requested: n, max: MAX_KNOTS });
    }
    let mut seq = leja_cache().lock().unwrap();
    while seq.len() < n {
        let next = next_leja_point(&seq);
        seq.push(next);
    }
    Ok(seq[..n].to_vec())
}

/// Weighted Leja points mapped by mu + sigma * y.
pub fn weighted_leja_knots(n: usize, mu: f64, sigma: f64) -> Result<Vec<f64>, ScError> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(ScError::Config(format!("bad Gaussian parameters mu={mu}, sigma={sigma}")));
    }
    Ok(weighted_leja_sequence(n)?.into_iter().map(|y| mu + sigma * y).collect())
}

/// Interpolatory quadrature weights for arbitrary distinct points in
/// standard-normal coordinates: w_i is the integral of the i-th Lagrange
/// basis polynomial against N(0,1), evaluated with a Gauss rule wide
/// enough to make the degree-(n-1) integrands exact. Equivalent to
/// solving the moment system sum_j w_j y_j^k = E[y^k], k < n, but stable.
pub fn leja_quadrature_weights(points: &[f64]) -> Result<Vec<f64>, ScError> {
    let n = points.len();
    if n == 0 {
        return Err(ScError::Config("need at least one point".into()));
    }
    if n > MAX_KNOTS {
        return Err(ScError::TooManyKnots { requested: n, max: MAX_KNOTS });
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).abs() < 1e-12 {
                return Err(ScError::Config(format!(
                    "coincident interpolation points {} and {}",
                    points[i], points[j]
                )));
            }
        }
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let (gx, gw) = gauss_hermite_knots(n + 8, 0.0, 1.0)?;
    let mut weights = vec![0.0; n];
    for (&x, &wk) in gx.iter().zip(&gw) {
        for i in 0..n {
            let mut basis = 1.0;
            for j in 0..n {
                if j != i {
                    basis *= (x - points[j]) / (points[i] - points[j]);
                }
            }
            weights[i] += wk * basis;
        }
    }
    Ok(weights)
}

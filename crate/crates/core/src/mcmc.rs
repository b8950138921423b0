//! Metropolis-Hastings calibration of the reaction parameters from two
//! scan snapshots.
//!
//! The chain is sequential by nature. Proposals are componentwise
//! Gaussian around the current state; proposals leaving the prior box are
//! rejected outright (the box prior enters the acceptance ratio as 0/-inf
//! in log space). One uniform variate is drawn on every step whether or
//! not the model runs, so the random stream stays aligned across runs
//! that reject at different places. All probability arithmetic is in log
//! space.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{log_prior, FieldError, ParameterVector, PosteriorSummary, PriorBounds};
use crate::numeric::{mean, sample_variance};

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("model failed at the chain start: {0}")]
    InitialModelFailure(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Proposal standard deviation (isotropic).
    pub proposal_sigma: f64,
    /// Measurement-noise standard deviation of the Gaussian likelihood.
    pub likelihood_sigma: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub bounds: PriorBounds,
    /// Years between the two snapshots; the model is read off here.
    pub horizon: f64,
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if !(self.proposal_sigma > 0.0) || !self.proposal_sigma.is_finite() {
            return Err(McmcError::Config(format!("proposal sigma {} must be > 0", self.proposal_sigma)));
        }
        if !(self.likelihood_sigma > 0.0) || !self.likelihood_sigma.is_finite() {
            return Err(McmcError::Config(format!(
                "likelihood sigma {} must be > 0",
                self.likelihood_sigma
            )));
        }
        if self.steps == 0 {
            return Err(McmcError::Config("chain length must be positive".into()));
        }
        if self.burn_in >= self.steps {
            return Err(McmcError::Config(format!(
                "burn-in {} must be below the chain length {}",
                self.burn_in, self.steps
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(McmcError::Config(format!("horizon {} must be > 0", self.horizon)));
        }
        if self.bounds.a.iter().zip(&self.bounds.b).any(|(a, b)| !(a < b)) {
            return Err(McmcError::Config("prior bounds must satisfy a < b".into()));
        }
        Ok(())
    }
}

/// Gaussian log likelihood up to additive constants; they cancel in the
/// acceptance ratio.
pub fn log_likelihood(q_model: &[f64], q_data: &[f64], sigma: f64) -> Result<f64, McmcError> {
    if q_model.len() != q_data.len() {
        return Err(McmcError::Config(format!(
            "QoI length mismatch: model {} vs data {}",
            q_model.len(),
            q_data.len()
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(McmcError::Config(format!("likelihood sigma {sigma} must be > 0")));
    }
    let mut ss = 0.0;
    for (m, d) in q_model.iter().zip(q_data) {
        if !m.is_finite() || !d.is_finite() {
            return Err(McmcError::NonFinite("log-likelihood input"));
        }
        let r = m - d;
        ss += r * r;
    }
    Ok(-ss / (2.0 * sigma * sigma))
}

/// log of the Metropolis ratio. -inf whenever the proposal leaves the
/// prior box; the previous state must be inside it.
pub fn acceptance_log_ratio(
    p_star: &ParameterVector,
    p_prev: &ParameterVector,
    q_star: &[f64],
    q_prev: &[f64],
    q_data: &[f64],
    cfg: &McmcConfig,
) -> Result<f64, McmcError> {
    let lp_star = log_prior(p_star, &cfg.bounds);
    let lp_prev = log_prior(p_prev, &cfg.bounds);
    if !lp_prev.is_finite() {
        return Err(McmcError::Config("previous state lies outside the prior box".into()));
    }
    if lp_star == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let ll_star = log_likelihood(q_star, q_data, cfg.likelihood_sigma)?;
    let ll_prev = log_likelihood(q_prev, q_data, cfg.likelihood_sigma)?;
    Ok(ll_star - ll_prev + lp_star - lp_prev)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chain {
    pub initial: ParameterVector,
    pub samples: Vec<ParameterVector>,
    /// Per-step acceptance flags, aligned with `samples`.
    pub accepted_flags: Vec<bool>,
    pub accepted: usize,
    /// Proposals rejected because the forward model failed there.
    pub model_failures: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.samples.len() as f64
    }

    /// Post-burn-in view.
    pub fn tail(&self, burn_in: usize) -> &[ParameterVector] {
        &self.samples[burn_in.min(self.samples.len())..]
    }

    /// One post-burn-in component as a plain series.
    pub fn component(&self, l: usize, burn_in: usize) -> Vec<f64> {
        self.tail(burn_in).iter().map(|p| p.0[l]).collect()
    }

    /// CSV rows `step,p_1..p_R,accepted`, steps starting at 1.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), McmcError> {
        let path = path.as_ref();
        let r = self.initial.len();
        let mut text = String::from("step");
        for l in 1..=r {
            let _ = write!(text, ",p_{l}");
        }
        text.push_str(",accepted\n");
        for (i, (p, acc)) in self.samples.iter().zip(&self.accepted_flags).enumerate() {
            let _ = write!(text, "{}", i + 1);
            for v in &p.0 {
                let _ = write!(text, ",{v}");
            }
            let _ = writeln!(text, ",{}", if *acc { 1 } else { 0 });
        }
        std::fs::write(path, text)
            .map_err(|source| McmcError::Io { path: path.display().to_string(), source })
    }
}

/// Metropolis-Hastings chain for the calibration model. `model` maps a
/// parameter vector to the regional QoI vector at the horizon; failures
/// at proposals count as rejections (the chain stays put), failure at the
/// starting point is fatal.
pub fn run_mcmc<F, E>(mut model: F, q_data: &[f64], cfg: &McmcConfig) -> Result<Chain, McmcError>
where
    F: FnMut(&ParameterVector) -> Result<Vec<f64>, E>,
    E: std::fmt::Display,
{
    cfg.validate()?;
    let initial = cfg.bounds.midpoint();
    let q0 = model(&initial).map_err(|e| McmcError::InitialModelFailure(e.to_string()))?;
    if q0.len() != q_data.len() {
        return Err(McmcError::Config(format!(
            "data vector has {} entries but the model returns {}",
            q_data.len(),
            q0.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = initial.len();
    let mut current = initial.clone();
    let mut q_current = q0;
    let mut samples = Vec::with_capacity(cfg.steps);
    let mut accepted_flags = Vec::with_capacity(cfg.steps);
    let mut accepted = 0usize;
    let mut model_failures = 0usize;

    for _ in 0..cfg.steps {
        let mut proposal = current.clone();
        for v in &mut proposal.0[..dim] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += cfg.proposal_sigma * z;
        }
        let u: f64 = rng.gen();
        let mut took_step = false;
        if cfg.bounds.contains(&proposal) {
            match model(&proposal) {
                Err(_) => model_failures += 1,
                Ok(q_star) => {
                    let log_rho =
                        acceptance_log_ratio(&proposal, &current, &q_star, &q_current, q_data, cfg)?;
                    if u.ln() < log_rho {
                        current = proposal;
                        q_current = q_star;
                        accepted += 1;
                        took_step = true;
                    }
                }
            }
        }
        samples.push(current.clone());
        accepted_flags.push(took_step);
    }
    Ok(Chain { initial, samples, accepted_flags, accepted, model_failures })
}

/// Componentwise mean and unbiased variance of the post-burn-in chain.
pub fn posterior_summary(chain: &Chain, burn_in: usize) -> Result<PosteriorSummary, McmcError> {
    let tail = chain.tail(burn_in);
    if tail.len() < 2 {
        return Err(McmcError::Config(format!(
            "need at least 2 post-burn-in samples, have {}",
            tail.len()
        )));
    }
    let dim = chain.initial.len();
    let mut mu = Vec::with_capacity(dim);
    let mut var = Vec::with_capacity(dim);
    let mut column = vec![0.0; tail.len()];
    for l in 0..dim {
        for (i, p) in tail.iter().enumerate() {
            column[i] = p.0[l];
        }
        mu.push(mean(&column));
        var.push(sample_variance(&column));
    }
    Ok(PosteriorSummary::new(mu, var)?)
}

/// Chain-quality estimates used by the statistical tests: autocorrelation
/// based effective sample size and a Kolmogorov-Smirnov distance.
pub mod diagnostics {
    /// Integrated autocorrelation time by Geyer's initial positive
    /// sequence: sum paired autocorrelations until a pair goes
    /// non-positive. 1 for white noise, n for a constant series.
    pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
        let n = series.len();
        if n < 4 {
            return 1.0;
        }
        let mu = crate::numeric::mean(series);
        let centered: Vec<f64> = series.iter().map(|x| x - mu).collect();
        let c0: f64 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
        if c0 <= 0.0 {
            return n as f64;
        }
        let rho = |k: usize| -> f64 {
            let mut s = 0.0;
            for i in 0..n - k {
                s += centered[i] * centered[i + k];
            }
            s / (n as f64 * c0)
        };
        let mut tau = 1.0;
        let mut k = 1;
        while k + 1 < n / 2 {
            let pair = rho(k) + rho(k + 1);
            if pair <= 0.0 {
                break;
            }
            tau += 2.0 * pair;
            k += 2;
        }
        tau.clamp(1.0, n as f64)
    }

    pub fn effective_sample_size(series: &[f64]) -> f64 {
        let n = series.len() as f64;
        (n / integrated_autocorrelation_time(series)).clamp(1.0, n)
    }

    /// Kolmogorov-Smirnov statistic of `series` against U(a, b).
    pub fn ks_statistic_uniform(series: &[f64], a: f64, b: f64) -> f64 {
        assert!(b > a && !series.is_empty());
        let mut sorted = series.to_vec();
        sorted.sort_by(|x, y| x.total_cmp(y));
        let n = sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (i, x) in sorted.iter().enumerate() {
            let f = ((x - a) / (b - a)).clamp(0.0, 1.0);
            d = d.max((f - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    /// Asymptotic 1% critical value for the one-sample KS test at the
    /// given (effective) sample size.
    pub fn ks_critical_value_1pct(n_eff: f64) -> f64 {
        let s = n_eff.max(1.0).sqrt();
        1.628 / (s + 0.12 + 0.11 / s)
    }
}

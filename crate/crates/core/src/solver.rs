//! Crank-Nicolson time stepping for the graph reaction-diffusion system
//!
//!   dc/dt = -L c + alpha .* c .* (1 - c)
//!
//! The diffusion term is averaged between time levels; the logistic reaction
//! is linearized semi-implicitly with a second-order extrapolation of the
//! saturation factor,
//!
//!   e = 1 - (3/2) c_k + (1/2) c_{k-1},
//!
//! so each step solves the symmetric linear system
//!
//!   [ (1/dt) I + (1/2) L - (1/2) diag(alpha .* e) ] c_{k+1}
//!     = (1/dt) c_k - (1/2) L c_k + (1/2) (alpha .* e) .* c_k.
//!
//! The first step bootstraps with c_{-1} = c_0, which costs one locally
//! first-order step and leaves the global order at two. States are never
//! clipped; transient excursions outside [0,1] are legitimate dynamics.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::connectome::Laplacian;
use crate::field::NodeField;

/// Relative residual demanded of every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Target relative residual for the conjugate-gradient path; tighter than
/// the contract so the post-check has slack.
const CG_TOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 10_000;
/// Auto strategy: dense direct factorization up to this many nodes.
const DIRECT_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {context} expected {expected}, got {got}")]
    Dimension { context: &'static str, expected: usize, got: usize },
    #[error("bad config: {0}")]
    Config(String),
    #[error("sample time {t} is not on the step grid (dt = {dt})")]
    OffGrid { t: f64, dt: f64 },
    #[error("near-singular system: relative residual {residual:.3e} exceeds {tol:.0e} (diagonal range [{diag_min:.3e}, {diag_max:.3e}])")]
    NearSingular { residual: f64, tol: f64, diag_min: f64, diag_max: f64 },
    #[error("conjugate gradient stalled after {iters} iterations at relative residual {residual:.3e}; the system may be indefinite, try the direct solver")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("state became non-finite at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolver {
    /// Direct below [`DIRECT_LIMIT`] nodes, conjugate gradient above.
    Auto,
    /// Dense Cholesky with an LU fallback; right at desk scale.
    Direct,
    /// Jacobi-preconditioned conjugate gradient on the matrix-free operator.
    ConjugateGradient,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Instants to record, each required to sit on the step grid.
    pub sample_times: Vec<f64>,
    pub linear_solver: LinearSolver,
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64, sample_times: Vec<f64>) -> Self {
        SolverConfig { dt, t_final, sample_times, linear_solver: LinearSolver::Auto }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<NodeField>,
}

/// One Crank-Nicolson step. Convenience wrapper over the trajectory
/// machinery; picks the automatic linear-solver strategy.
pub fn step(
    l: &Laplacian,
    alpha: &[f64],
    c_k: &[f64],
    c_km1: &[f64],
    dt: f64,
) -> Result<Vec<f64>, SolverError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::Config(format!("dt must be positive and finite, got {dt}")));
    }
    let mut stepper = Stepper::new(l, alpha, dt, LinearSolver::Auto)?;
    let mut out = vec![0.0; l.n()];
    stepper.advance(c_k, c_km1, &mut out)?;
    Ok(out)
}

pub fn solve_trajectory(
    l: &Laplacian,
    alpha: &[f64],
    c0: &NodeField,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if c0.len() != l.n() {
        return Err(SolverError::Dimension { context: "initial state", expected: l.n(), got: c0.len() });
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(SolverError::Config(format!("dt must be positive and finite, got {}", cfg.dt)));
    }
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return Err(SolverError::Config(format!("t_final must be nonnegative, got {}", cfg.t_final)));
    }
    let steps_f = cfg.t_final / cfg.dt;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(SolverError::Config(format!(
            "t_final {} is not an integer multiple of dt {}",
            cfg.t_final, cfg.dt
        )));
    }
    let steps = steps as usize;

    let mut sample_steps = Vec::with_capacity(cfg.sample_times.len());
    let mut last: Option<usize> = None;
    for &t in &cfg.sample_times {
        if !(0.0..=cfg.t_final + 1e-9 * cfg.t_final.max(1.0)).contains(&t) {
            return Err(SolverError::Config(format!("sample time {t} outside [0, {}]", cfg.t_final)));
        }
        let idx_f = t / cfg.dt;
        let idx = idx_f.round();
        if (idx_f - idx).abs() > 1e-9 * idx_f.max(1.0) {
            return Err(SolverError::OffGrid { t, dt: cfg.dt });
        }
        let idx = idx as usize;
        if let Some(prev) = last {
            if idx <= prev {
                return Err(SolverError::Config("sample times must be strictly increasing".into()));
            }
        }
        last = Some(idx);
        sample_steps.push(idx);
    }

    let mut stepper = Stepper::new(l, alpha, cfg.dt, cfg.linear_solver)?;
    let n = l.n();
    let mut c_prev = c0.as_slice().to_vec(); // c_{-1} = c_0 bootstrap
    let mut c_curr = c0.as_slice().to_vec();
    let mut c_next = vec![0.0; n];

    let mut times = Vec::with_capacity(sample_steps.len());
    let mut states = Vec::with_capacity(sample_steps.len());
    let mut cursor = 0;
    if cursor < sample_steps.len() && sample_steps[cursor] == 0 {
        times.push(0.0);
        states.push(NodeField::from_vec(c_curr.clone()));
        cursor += 1;
    }
    for k in 1..=steps {
        stepper.advance(&c_curr, &c_prev, &mut c_next)?;
        if c_next.iter().any(|x| !x.is_finite()) {
            return Err(SolverError::NonFinite { step: k, t: k as f64 * cfg.dt });
        }
        std::mem::swap(&mut c_prev, &mut c_curr);
        std::mem::swap(&mut c_curr, &mut c_next);
        if cursor < sample_steps.len() && sample_steps[cursor] == k {
            times.push(k as f64 * cfg.dt);
            states.push(NodeField::from_vec(c_curr.clone()));
            cursor += 1;
        }
    }
    Ok(Trajectory { times, states })
}

struct Stepper<'a> {
    l: &'a Laplacian,
    alpha: &'a [f64],
    dt: f64,
    direct: bool,
    /// (1/dt) I + (1/2) L, reused across steps; the reaction only perturbs
    /// the diagonal.
    base: Option<DMatrix<f64>>,
    g: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(l: &'a Laplacian, alpha: &'a [f64], dt: f64, kind: LinearSolver) -> Result<Self, SolverError> {
        let n = l.n();
        if alpha.len() != n {
            return Err(SolverError::Dimension { context: "reaction vector", expected: n, got: alpha.len() });
        }
        let direct = match kind {
            LinearSolver::Direct => true,
            LinearSolver::ConjugateGradient => false,
            LinearSolver::Auto => n <= DIRECT_LIMIT,
        };
        let base = direct.then(|| {
            let mut m = l.to_dense();
            m *= 0.5;
            for i in 0..n {
                m[(i, i)] += 1.0 / dt;
            }
            m
        });
        Ok(Stepper { l, alpha, dt, direct, base, g: vec![0.0; n], rhs: vec![0.0; n], scratch: vec![0.0; n] })
    }

    /// System operator: out = x/dt + (1/2) L x - g .* x. The adjacency form
    /// of L annihilates constants exactly, so both uniform fixed points are
    /// reproduced to round-off.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.l.matvec(x, out);
        for i in 0..x.len() {
            out[i] = x[i] / self.dt + 0.5 * out[i] - self.g[i] * x[i];
        }
    }

    fn advance(&mut self, c_k: &[f64], c_km1: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        let n = self.l.n();
        if c_k.len() != n || c_km1.len() != n {
            return Err(SolverError::Dimension { context: "state", expected: n, got: c_k.len().min(c_km1.len()) });
        }
        for i in 0..n {
            let e = 1.0 - 1.5 * c_k[i] + 0.5 * c_km1[i];
            self.g[i] = 0.5 * self.alpha[i] * e;
        }
        self.l.matvec(c_k, &mut self.scratch);
        let mut rhs_norm2 = 0.0;
        for i in 0..n {
            let r = c_k[i] / self.dt - 0.5 * self.scratch[i] + self.g[i] * c_k[i];
            self.rhs[i] = r;
            rhs_norm2 += r * r;
        }
        let rhs_norm = rhs_norm2.sqrt();
        if rhs_norm == 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        if self.direct {
            self.solve_direct(out)?;
        } else {
            self.solve_cg(c_k, out)?;
        }
        // Residual contract, checked with the matrix-free operator.
        let mut scratch = std::mem::take(&mut self.scratch);
        self.apply(out, &mut scratch);
        let mut res2 = 0.0;
        for i in 0..n {
            let d = self.rhs[i] - scratch[i];
            res2 += d * d;
        }
        self.scratch = scratch;
        let rel = res2.sqrt() / rhs_norm;
        if rel > RESIDUAL_TOL {
            let (dmin, dmax) = self.diag_range();
            return Err(SolverError::NearSingular { residual: rel, tol: RESIDUAL_TOL, diag_min: dmin, diag_max: dmax });
        }
        Ok(())
    }

    fn diag_range(&self) -> (f64, f64) {
        let deg = self.l.degree();
        let mut dmin = f64::INFINITY;
        let mut dmax = f64::NEG_INFINITY;
        for i in 0..self.l.n() {
            let d = 1.0 / self.dt + 0.5 * deg[i] - self.g[i];
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        (dmin, dmax)
    }

    fn solve_direct(&mut self, out: &mut [f64]) -> Result<(), SolverError> {
        let n = self.l.n();
        let mut a = self.base.as_ref().expect("direct stepper has base matrix").clone();
        for i in 0..n {
            a[(i, i)] -= self.g[i];
        }
        let b = DVector::from_column_slice(&self.rhs);
        let solution = match a.clone().cholesky() {
            Some(chol) => chol.solve(&b),
            // Strong negative reaction can push the matrix indefinite;
            // partial-pivot LU still applies.
            None => match a.lu().solve(&b) {
                Some(x) => x,
                None => {
                    let (dmin, dmax) = self.diag_range();
                    return Err(SolverError::NearSingular {
                        residual: f64::INFINITY,
                        tol: RESIDUAL_TOL,
                        diag_min: dmin,
                        diag_max: dmax,
                    });
                }
            },
        };
        out.copy_from_slice(solution.as_slice());
        Ok(())
    }

    fn solve_cg(&mut self, warm: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        let n = self.l.n();
        let deg = self.l.degree();
        let mut precond = vec![0.0; n];
        for i in 0..n {
            let d = 1.0 / self.dt + 0.5 * deg[i] - self.g[i];
            if d <= 0.0 {
                return Err(SolverError::NoConvergence { iters: 0, residual: f64::INFINITY });
            }
            precond[i] = 1.0 / d;
        }
        out.copy_from_slice(warm);
        let mut r = vec![0.0; n];
        self.apply(out, &mut r);
        let mut rhs_norm2 = 0.0;
        for i in 0..n {
            r[i] = self.rhs[i] - r[i];
            rhs_norm2 += self.rhs[i] * self.rhs[i];
        }
        let target2 = CG_TOL * CG_TOL * rhs_norm2;
        let mut z: Vec<f64> = (0..n).map(|i| precond[i] * r[i]).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let mut res2: f64 = r.iter().map(|x| x * x).sum();
        let mut iters = 0;
        while res2 > target2 && iters < CG_MAX_ITER {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 || !pap.is_finite() {
                return Err(SolverError::NoConvergence {
                    iters,
                    residual: (res2 / rhs_norm2).sqrt(),
                });
            }
            let alpha = rz / pap;
            res2 = 0.0;
            for i in 0..n {
                out[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                res2 += r[i] * r[i];
            }
            if res2 <= target2 {
                break;
            }
            for i in 0..n {
                z[i] = precond[i] * r[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iters += 1;
        }
        if res2 > target2 {
            return Err(SolverError::NoConvergence { iters, residual: (res2 / rhs_norm2).sqrt() });
        }
        Ok(())
    }
}

/// Closed-form logistic solution for a decoupled node: the exact limit the
/// scheme must approach at second order.
pub fn logistic_exact(c0: f64, alpha: f64, t: f64) -> f64 {
    c0 / (c0 + (1.0 - c0) * (-alpha * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{Connectome, Edge, Node, SyntheticConfig, generate_synthetic};
    use approx::assert_abs_diff_eq;

    fn single_node() -> Connectome {
        Connectome::new(1, vec![Node { id: 0, region: 1, volume: 1.0, pos: None }], vec![]).unwrap()
    }

    fn two_node(w: f64) -> Connectome {
        Connectome::new(
            1,
            vec![
                Node { id: 0, region: 1, volume: 1.0, pos: None },
                Node { id: 1, region: 1, volume: 1.0, pos: None },
            ],
            vec![Edge { i: 0, j: 1, weight: w }],
        )
        .unwrap()
    }

    #[test]
    fn scalar_step_matches_hand_solve() {
        // Decoupled node, alpha = 0.2, dt = 0.2, c_k = c_{k-1} = 0.1:
        //   e = 1 - 0.15 + 0.05 = 0.9
        //   (1/0.2 - 0.1*0.9) c = (1/0.2 + 0.1*0.9) * 0.1
        // so c = 0.509 / 4.91.
        let l = single_node().laplacian();
        let got = step(&l, &[0.2], &[0.1], &[0.1], 0.2).unwrap();
        let e: f64 = 1.0 - 1.5 * 0.1 + 0.5 * 0.1;
        let expected = ((1.0 / 0.2 + 0.5 * 0.2 * e) * 0.1) / (1.0 / 0.2 - 0.5 * 0.2 * e);
        assert_abs_diff_eq!(got[0], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(got[0], 0.10366598778004073, epsilon = 1e-15);
    }

    #[test]
    fn zero_reaction_zero_graph_is_identity() {
        let l = single_node().laplacian();
        let got = step(&l, &[0.0], &[0.37], &[0.21], 0.05).unwrap();
        assert_abs_diff_eq!(got[0], 0.37, epsilon = 1e-14);
    }

    #[test]
    fn uniform_states_are_fixed_points() {
        let c = generate_synthetic(&SyntheticConfig::default(), 17).unwrap();
        let l = c.laplacian();
        let n = l.n();
        // Mixed-sign reaction vector; fixed points hold for any alpha.
        let alpha: Vec<f64> = (0..n).map(|i| 0.3 * ((i as f64 * 0.7).sin()) - 0.05).collect();
        let zeros = vec![0.0; n];
        let got0 = step(&l, &alpha, &zeros, &zeros, 0.1).unwrap();
        for v in &got0 {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
        let ones = vec![1.0; n];
        let got1 = step(&l, &alpha, &ones, &ones, 0.1).unwrap();
        for v in &got1 {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn fixed_points_hold_under_cg_too() {
        let c = generate_synthetic(&SyntheticConfig::default(), 18).unwrap();
        let l = c.laplacian();
        let n = l.n();
        let alpha = vec![0.2; n];
        let mut stepper = Stepper::new(&l, &alpha, 0.1, LinearSolver::ConjugateGradient).unwrap();
        let ones = vec![1.0; n];
        let mut out = vec![0.0; n];
        stepper.advance(&ones, &ones, &mut out).unwrap();
        // Warm start plus exact constant annihilation: bitwise fixed point.
        assert_eq!(out, ones);
    }

    #[test]
    fn mass_conserved_without_reaction() {
        let cfg = SyntheticConfig { regions: 5, nodes_per_region: 10, ..SyntheticConfig::default() };
        let c = generate_synthetic(&cfg, 23).unwrap();
        let l = c.laplacian();
        let n = l.n();
        let c0: Vec<f64> = (0..n).map(|i| 0.5 + 0.4 * ((i as f64) * 1.3).sin()).collect();
        let mass0: f64 = c0.iter().sum();
        let traj = solve_trajectory(
            &l,
            &vec![0.0; n],
            &NodeField::from_vec(c0),
            &SolverConfig::new(0.1, 20.0, vec![20.0]),
        )
        .unwrap();
        let mass: f64 = traj.states[0].iter().sum();
        assert!(((mass - mass0) / mass0).abs() <= 1e-12, "drift {}", (mass - mass0) / mass0);
    }

    #[test]
    fn logistic_second_order_convergence() {
        let l = single_node().laplacian();
        let (alpha, c0, t) = (0.18, 0.1, 20.0);
        let exact = logistic_exact(c0, alpha, t);
        let mut errs = Vec::new();
        for dt in [0.2, 0.1, 0.05, 0.025] {
            let traj = solve_trajectory(
                &l,
                &[alpha],
                &NodeField::from_vec(vec![c0]),
                &SolverConfig::new(dt, t, vec![t]),
            )
            .unwrap();
            errs.push((traj.states[0][0] - exact).abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "observed order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn two_node_decay_oracle() {
        // alpha = 0: the difference mode decays exactly like exp(-2 w t).
        let w = 0.8;
        let l = two_node(w).laplacian();
        let t = 2.0;
        let exact = (-2.0 * w * t).exp();
        let mut errs = Vec::new();
        for dt in [0.02, 0.01] {
            let traj = solve_trajectory(
                &l,
                &[0.0, 0.0],
                &NodeField::from_vec(vec![1.0, 0.0]),
                &SolverConfig::new(dt, t, vec![t]),
            )
            .unwrap();
            let s = &traj.states[0];
            errs.push(((s[0] - s[1]) - exact).abs());
            // Mean of the two nodes is conserved.
            assert_abs_diff_eq!(s[0] + s[1], 1.0, epsilon = 1e-12);
        }
        assert!(errs[0] <= 1e-4, "error {}", errs[0]);
        let ratio = errs[0] / errs[1];
        assert!((3.4..=4.6).contains(&ratio), "halving ratio {ratio}");
    }

    #[test]
    fn direct_and_cg_agree() {
        let c = generate_synthetic(&SyntheticConfig::default(), 31).unwrap();
        let l = c.laplacian();
        let n = l.n();
        let alpha: Vec<f64> = (0..n).map(|i| 0.15 + 0.1 * ((i * i) as f64 % 7.0) / 7.0).collect();
        let c0 = NodeField::from_vec((0..n).map(|i| 0.1 + 0.05 * ((i as f64).cos().abs())).collect());
        let mut cfg = SolverConfig::new(0.1, 5.0, vec![5.0]);
        cfg.linear_solver = LinearSolver::Direct;
        let a = solve_trajectory(&l, &alpha, &c0, &cfg).unwrap();
        cfg.linear_solver = LinearSolver::ConjugateGradient;
        let b = solve_trajectory(&l, &alpha, &c0, &cfg).unwrap();
        for (x, y) in a.states[0].iter().zip(b.states[0].iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn trajectory_is_deterministic() {
        let c = generate_synthetic(&SyntheticConfig::default(), 57).unwrap();
        let l = c.laplacian();
        let n = l.n();
        let alpha = vec![0.18; n];
        let c0 = NodeField::from_vec((0..n).map(|i| (i as f64 * 0.37).fract() * 0.3).collect());
        let cfg = SolverConfig::new(0.05, 3.0, vec![1.0, 3.0]);
        let a = solve_trajectory(&l, &alpha, &c0, &cfg).unwrap();
        let b = solve_trajectory(&l, &alpha, &c0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_validation() {
        let l = single_node().laplacian();
        let f = NodeField::from_vec(vec![0.1]);
        // t=0 recorded as the initial state.
        let t0 = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(0.1, 1.0, vec![0.0, 1.0])).unwrap();
        assert_eq!(t0.times, vec![0.0, 1.0]);
        assert_abs_diff_eq!(t0.states[0][0], 0.1, epsilon = 0.0);
        let off = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(0.1, 1.0, vec![0.15]));
        assert!(matches!(off, Err(SolverError::OffGrid { .. })));
        let frac = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(0.3, 1.0, vec![]));
        assert!(matches!(frac, Err(SolverError::Config(_))));
        let unsorted = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(0.1, 1.0, vec![0.5, 0.2]));
        assert!(matches!(unsorted, Err(SolverError::Config(_))));
        let beyond = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(0.1, 1.0, vec![1.5]));
        assert!(matches!(beyond, Err(SolverError::Config(_))));
        let bad_dt = solve_trajectory(&l, &[0.1], &f, &SolverConfig::new(-0.1, 1.0, vec![]));
        assert!(matches!(bad_dt, Err(SolverError::Config(_))));
    }

    #[test]
    fn singular_system_is_reported() {
        // Decoupled node with the reaction tuned so the system matrix is 0.
        let l = single_node().laplacian();
        let e: f64 = 1.0 - 1.5 * 0.1 + 0.5 * 0.1;
        let alpha = 2.0 / e; // (1/dt) - 0.5*alpha*e = 0 at dt = 1
        let got = step(&l, &[alpha], &[0.1], &[0.1], 1.0);
        assert!(matches!(got, Err(SolverError::NearSingular { .. })), "got {got:?}");
    }

    #[test]
    fn logistic_approaches_exact_value() {
        // dt = 0.02 run lands within 5e-4 of the frozen reference 0.80279.
        let l = single_node().laplacian();
        let traj = solve_trajectory(
            &l,
            &[0.18],
            &NodeField::from_vec(vec![0.1]),
            &SolverConfig::new(0.02, 20.0, vec![20.0]),
        )
        .unwrap();
        let exact = logistic_exact(0.1, 0.18, 20.0);
        assert!((traj.states[0][0] - exact).abs() <= 1e-4);
        assert!((traj.states[0][0] - 0.80279).abs() <= 5e-4);
    }
}

//! Forward-model wrappers: a parameter vector in, quantities of interest
//! out. These are the closures handed to the calibration and UQ drivers;
//! they own their graph data so sample evaluations can run in parallel.

use thiserror::Error;

use crate::connectome::{Connectome, Laplacian};
use crate::field::{assemble_reaction_vector, FieldError, NodeField, ParameterVector};
use crate::qoi::{regional_averages, QoISeries, QoiError, VolumeNormalization};
use crate::solver::{solve_trajectory, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Qoi(#[from] QoiError),
}

impl ModelError {
    /// Numerical breakdowns (as opposed to misuse of the interface).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ModelError::Solver(
                SolverError::NearSingular { .. }
                    | SolverError::NoConvergence { .. }
                    | SolverError::NonFinite { .. }
            )
        )
    }
}

/// Evolves the first scan over the calibration horizon and reports regional
/// averages at the horizon, restricted to the calibration mask.
pub struct CalibrationModel {
    conn: Connectome,
    lap: Laplacian,
    c0: NodeField,
    mask: Option<Vec<bool>>,
    cfg: SolverConfig,
    normalization: VolumeNormalization,
}

impl CalibrationModel {
    pub fn new(
        conn: Connectome,
        c0: NodeField,
        mask: Option<Vec<bool>>,
        horizon: f64,
        dt: f64,
        normalization: VolumeNormalization,
    ) -> Self {
        let lap = conn.laplacian();
        let cfg = SolverConfig::new(dt, horizon, vec![horizon]);
        CalibrationModel { conn, lap, c0, mask, cfg, normalization }
    }

    pub fn connectome(&self) -> &Connectome {
        &self.conn
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Regional averages of the evolved field at the horizon.
    pub fn evaluate(&self, p: &ParameterVector) -> Result<Vec<f64>, ModelError> {
        let alpha = assemble_reaction_vector(p, &self.conn)?;
        let traj = solve_trajectory(&self.lap, &alpha, &self.c0, &self.cfg)?;
        let q = regional_averages(&traj.states[0], &self.conn, self.mask.as_deref(), self.normalization)?;
        Ok(q)
    }

    /// Regional averages of the data scan under the same mask and
    /// normalization the model output uses.
    pub fn data_vector(&self, scan: &NodeField) -> Result<Vec<f64>, ModelError> {
        Ok(regional_averages(scan, &self.conn, self.mask.as_deref(), self.normalization)?)
    }
}

/// Evolves a baseline scan over the forecast window and reports the QoI
/// series at the requested times. No mask: forward propagation uses the
/// whole graph.
pub struct ForwardModel {
    conn: Connectome,
    lap: Laplacian,
    c0: NodeField,
    cfg: SolverConfig,
    normalization: VolumeNormalization,
}

impl ForwardModel {
    pub fn new(conn: Connectome, c0: NodeField, cfg: SolverConfig, normalization: VolumeNormalization) -> Self {
        let lap = conn.laplacian();
        ForwardModel { conn, lap, c0, cfg, normalization }
    }

    pub fn connectome(&self) -> &Connectome {
        &self.conn
    }

    pub fn times(&self) -> &[f64] {
        &self.cfg.sample_times
    }

    pub fn evaluate(&self, p: &ParameterVector) -> Result<QoISeries, ModelError> {
        let alpha = assemble_reaction_vector(p, &self.conn)?;
        let traj = solve_trajectory(&self.lap, &alpha, &self.c0, &self.cfg)?;
        Ok(QoISeries::from_trajectory(&traj, &self.conn, None, self.normalization)?)
    }

    pub fn evaluate_slice(&self, p: &[f64]) -> Result<QoISeries, ModelError> {
        self.evaluate(&ParameterVector(p.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{generate_synthetic, SyntheticConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn forward_model_grows_from_uniform_seed() {
        let conn = generate_synthetic(&SyntheticConfig::default(), 2).unwrap();
        let n = conn.num_nodes();
        let model = ForwardModel::new(
            conn,
            NodeField::constant(0.1, n),
            SolverConfig::new(0.1, 10.0, vec![5.0, 10.0]),
            VolumeNormalization::PerRegion,
        );
        let p = ParameterVector(vec![0.2; 7]);
        let q = model.evaluate(&p).unwrap();
        // Uniform seed and uniform alpha keep the field uniform, so every
        // region tracks the logistic solution exactly in space.
        for row in &q.regional {
            for v in row {
                assert_abs_diff_eq!(*v, row[0], epsilon = 1e-10);
            }
        }
        assert!(q.global[1] > q.global[0]);
        assert!(q.global[0] > 0.1);
    }

    #[test]
    fn calibration_model_matches_forward_at_horizon() {
        let conn = generate_synthetic(&SyntheticConfig::default(), 3).unwrap();
        let n = conn.num_nodes();
        let c0 = NodeField::from_vec((0..n).map(|i| 0.05 + 0.2 * ((i as f64 * 0.61).fract())).collect());
        let p = ParameterVector(vec![0.18, 0.14, 0.06, 0.10, 0.14, 0.05, 0.11]);
        let cal = CalibrationModel::new(conn.clone(), c0.clone(), None, 7.0, 0.2, VolumeNormalization::PerRegion);
        let fwd = ForwardModel::new(
            conn,
            c0,
            SolverConfig::new(0.2, 7.0, vec![7.0]),
            VolumeNormalization::PerRegion,
        );
        let a = cal.evaluate(&p).unwrap();
        let b = fwd.evaluate(&p).unwrap();
        for (x, y) in a.iter().zip(&b.regional[0]) {
            assert_abs_diff_eq!(x, y, epsilon = 0.0);
        }
    }
}

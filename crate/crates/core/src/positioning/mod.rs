//! Range models, their Jacobian, and the Fisher-information position error
//! bound. Estimators live in [`solve`].
//!
//! Each anchor carries its own range model: plain Euclidean distance, or the
//! window-edge diffraction length with the edge placed `w/2` above the
//! candidate receiver.

mod solve;

use nalgebra::{Matrix3, Matrix3xX, SymmetricEigen};
use thiserror::Error;

use crate::fap::{range_sigma_m, FapError};
use crate::geometry::{approx_diffraction_solution, GeometryError, Point3, Vec3, WindowEdge};

pub use solve::{dnls_solve, initial_guess, lls_solve, DnlsOptions, PositionEstimate};

/// Relative eigenvalue floor below which a 3x3 information matrix is singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositioningError {
    #[error("need at least {required} anchors, got {found}")]
    TooFewAnchors { found: usize, required: usize },
    #[error("singular geometry: {0}")]
    SingularGeometry(String),
    #[error("Fisher information is singular (condition number {condition:e}); position error bound is unbounded")]
    SingularFim { condition: f64 },
    #[error("Gauss-Newton iterate became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid measurement: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fap(#[from] FapError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RangeModel {
    Euclidean,
    /// Diffraction over `edge` under the window-height approximation.
    Diffraction {
        edge: WindowEdge,
        w: f64,
    },
}

impl RangeModel {
    pub fn diffraction(edge: WindowEdge) -> Self {
        let w = edge.w;
        RangeModel::Diffraction { edge, w }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorMeasurement {
    pub anchor_id: usize,
    pub position: Point3,
    pub range: f64,
    pub sigma: f64,
    pub model: RangeModel,
}

impl AnchorMeasurement {
    /// Model range from this anchor to a candidate receiver position.
    pub fn predict(&self, alpha: &Point3) -> Result<f64, PositioningError> {
        match &self.model {
            RangeModel::Euclidean => Ok((alpha - self.position).norm()),
            RangeModel::Diffraction { edge, w } => {
                Ok(approx_diffraction_solution(&self.position, alpha, edge, *w)?.path_length)
            }
        }
    }

    /// Gradient of [`predict`](Self::predict) with respect to the receiver.
    ///
    /// For diffraction the diffraction point is held fixed: the path is
    /// stationary in it, so its motion does not contribute to first order.
    pub fn gradient(&self, alpha: &Point3) -> Result<Vec3, PositioningError> {
        match &self.model {
            RangeModel::Euclidean => {
                let d = alpha - self.position;
                let n = d.norm();
                if n == 0.0 {
                    return Err(PositioningError::SingularGeometry(
                        "receiver coincides with an anchor".into(),
                    ));
                }
                Ok(d / n)
            }
            RangeModel::Diffraction { edge, w } => {
                let sol = approx_diffraction_solution(&self.position, alpha, edge, *w)?;
                let a = edge.to_local(&self.position);
                let n = edge.to_local(alpha);
                let z_e = n.z + 0.5 * w;
                let q = sol.q_x;
                let d1 = ((a.x - q).powi(2) + a.y * a.y + (z_e - a.z).powi(2)).sqrt();
                let d2 = ((n.x - q).powi(2) + n.y * n.y + 0.25 * w * w).sqrt();
                if d1 == 0.0 || d2 == 0.0 {
                    return Err(PositioningError::SingularGeometry(
                        "point lies on the diffracting edge".into(),
                    ));
                }
                // z_n enters only through z_e on the anchor leg; the receiver
                // leg keeps a constant w/2 vertical offset.
                let local = Vec3::new((n.x - q) / d2, n.y / d2, (z_e - a.z) / d1);
                Ok(edge.to_world_vector(&local))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    pub anchors: Vec<AnchorMeasurement>,
}

impl MeasurementSet {
    pub fn new(anchors: Vec<AnchorMeasurement>) -> Self {
        Self { anchors }
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn validate(&self, required: usize) -> Result<(), PositioningError> {
        if self.anchors.len() < required {
            return Err(PositioningError::TooFewAnchors {
                found: self.anchors.len(),
                required,
            });
        }
        for a in &self.anchors {
            let finite = a.position.iter().all(|v| v.is_finite()) && a.range.is_finite();
            if !finite || !(a.sigma > 0.0) {
                return Err(PositioningError::InvalidInput(format!(
                    "anchor {}: range {} sigma {}",
                    a.anchor_id, a.range, a.sigma
                )));
            }
        }
        Ok(())
    }
}

pub fn predicted_ranges(alpha: &Point3, meas: &MeasurementSet) -> Result<Vec<f64>, PositioningError> {
    meas.anchors.iter().map(|a| a.predict(alpha)).collect()
}

/// `3 x M` matrix whose column `j` is the gradient of anchor `j`'s model range.
pub fn diffraction_jacobian(alpha: &Point3, meas: &MeasurementSet) -> Result<Matrix3xX<f64>, PositioningError> {
    let cols = meas
        .anchors
        .iter()
        .map(|a| a.gradient(alpha))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix3xX::from_columns(&cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimResult {
    /// Information matrix in m^-2.
    pub fim: Matrix3<f64>,
    pub fim_inv: Matrix3<f64>,
    /// Position error bound in metres.
    pub peb: f64,
    /// Ratio of the largest to the smallest eigenvalue.
    pub condition: f64,
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= SINGULAR_RCOND * max || max <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Fisher information `sum_j g_j g_j^T / sigma_j^2` at `alpha`, using each
/// measurement's `sigma`.
pub fn fisher_information(alpha: &Point3, meas: &MeasurementSet) -> Result<FimResult, PositioningError> {
    let mut fim = Matrix3::zeros();
    for a in &meas.anchors {
        if !(a.sigma > 0.0) {
            return Err(PositioningError::InvalidInput(format!(
                "anchor {} sigma {}",
                a.anchor_id, a.sigma
            )));
        }
        let g = a.gradient(alpha)?;
        fim += g * g.transpose() / (a.sigma * a.sigma);
    }
    let condition = condition_number(&fim);
    if !condition.is_finite() {
        return Err(PositioningError::SingularFim { condition });
    }
    let fim_inv = fim.try_inverse().ok_or(PositioningError::SingularFim { condition })?;
    Ok(FimResult {
        fim,
        fim_inv,
        peb: fim_inv.trace().sqrt(),
        condition,
    })
}

/// Position error bound at `alpha` with per-anchor SNRs (dB): each anchor
/// contributes information `8 pi^2 beta^2 SNR_j / c^2` along its gradient.
pub fn peb(alpha: &Point3, meas: &MeasurementSet, snr_db: &[f64], beta_sq: f64) -> Result<FimResult, PositioningError> {
    if snr_db.len() != meas.len() {
        return Err(PositioningError::InvalidInput(format!(
            "{} SNRs for {} anchors",
            snr_db.len(),
            meas.len()
        )));
    }
    let mut weighted = meas.clone();
    for (a, &s) in weighted.anchors.iter_mut().zip(snr_db) {
        a.sigma = range_sigma_m(beta_sq, s)?;
    }
    fisher_information(alpha, &weighted)
}

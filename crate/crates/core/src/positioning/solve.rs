//! D-NLS (Gauss-Newton on the per-anchor range models) and the one-shot
//! linearised least-squares estimator.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{diffraction_jacobian, predicted_ranges, MeasurementSet, PositioningError, SINGULAR_RCOND};
use crate::geometry::Point3;

/// Minimum anchor count for a 3D fix.
const MIN_ANCHORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnlsOptions {
    pub max_iters: usize,
    /// Stop when the update norm drops below this (metres).
    pub tol: f64,
    /// Weight residuals by `1 / sigma_j^2`.
    pub weighted: bool,
    /// Tikhonov damping added to the normal matrix. Zero disables it.
    pub damping: f64,
}

impl Default for DnlsOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            weighted: false,
            damping: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub alpha_hat: Point3,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of `r - p(alpha_hat)` in metres.
    pub residual_norm: f64,
}

fn residual_norm(alpha: &Point3, meas: &MeasurementSet) -> Result<f64, PositioningError> {
    let p = predicted_ranges(alpha, meas)?;
    Ok(meas
        .anchors
        .iter()
        .zip(p)
        .map(|(a, p)| (a.range - p).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Gauss-Newton iteration `alpha += (J W J^T)^-1 J W (r - p(alpha))`.
///
/// A run that exhausts `max_iters` returns with `converged = false`.
pub fn dnls_solve(
    meas: &MeasurementSet,
    init: &Point3,
    opts: &DnlsOptions,
) -> Result<PositionEstimate, PositioningError> {
    meas.validate(MIN_ANCHORS)?;
    if !init.iter().all(|v| v.is_finite()) {
        return Err(PositioningError::InvalidInput("initial point is not finite".into()));
    }
    let weights: Vec<f64> = meas
        .anchors
        .iter()
        .map(|a| if opts.weighted { 1.0 / (a.sigma * a.sigma) } else { 1.0 })
        .collect();
    let mut alpha = *init;
    for iter in 0..opts.max_iters {
        let jac = diffraction_jacobian(&alpha, meas)?;
        let pred = predicted_ranges(&alpha, meas)?;
        let mut normal = Matrix3::<f64>::identity() * opts.damping;
        let mut rhs = Vector3::zeros();
        for (j, a) in meas.anchors.iter().enumerate() {
            let g = jac.column(j);
            normal += g * g.transpose() * weights[j];
            rhs += g * (weights[j] * (a.range - pred[j]));
        }
        let eig = SymmetricEigen::new(normal).eigenvalues;
        if eig.min() <= SINGULAR_RCOND * eig.max() {
            return Err(PositioningError::SingularGeometry(format!(
                "Gauss-Newton normal matrix is rank deficient at iteration {iter}"
            )));
        }
        let step = normal
            .cholesky()
            .ok_or_else(|| PositioningError::SingularGeometry("normal matrix not positive definite".into()))?
            .solve(&rhs);
        alpha += step;
        if !alpha.iter().all(|v| v.is_finite()) {
            return Err(PositioningError::Diverged { iteration: iter + 1 });
        }
        if step.norm() < opts.tol {
            return Ok(PositionEstimate {
                alpha_hat: alpha,
                iterations: iter + 1,
                converged: true,
                residual_norm: residual_norm(&alpha, meas)?,
            });
        }
    }
    Ok(PositionEstimate {
        alpha_hat: alpha,
        iterations: opts.max_iters,
        converged: false,
        residual_norm: residual_norm(&alpha, meas)?,
    })
}

/// Squared-range linearisation against the first anchor, solved in the
/// least-squares sense. Every range is treated as Euclidean.
pub fn lls_solve(meas: &MeasurementSet) -> Result<PositionEstimate, PositioningError> {
    meas.validate(MIN_ANCHORS)?;
    let a0 = meas.anchors[0].position;
    let r0 = meas.anchors[0].range;
    let m = meas.len() - 1;
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (row, am) in meas.anchors[1..].iter().enumerate() {
        let d = am.position - a0;
        for k in 0..3 {
            a[(row, k)] = 2.0 * d[k];
        }
        b[row] = d.norm_squared() - am.range * am.range + r0 * r0;
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    if sv.len() < 3 || sv.min() <= 1e-10 * max || max == 0.0 {
        return Err(PositioningError::SingularGeometry(
            "anchors are coplanar or repeated; linearised system is rank deficient".into(),
        ));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| PositioningError::SingularGeometry(e.to_string()))?;
    let alpha = a0 + Vector3::new(x[0], x[1], x[2]);
    let residual = meas
        .anchors
        .iter()
        .map(|am| (am.range - (alpha - am.position).norm()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(PositionEstimate {
        alpha_hat: alpha,
        iterations: 0,
        converged: true,
        residual_norm: residual,
    })
}

/// D-NLS starting point: the LLS fix clamped into `bounds`, or the centre of
/// `bounds` when LLS is singular.
pub fn initial_guess(meas: &MeasurementSet, bounds: &(Point3, Point3)) -> Point3 {
    let (lo, hi) = bounds;
    match lls_solve(meas) {
        Ok(est) if est.alpha_hat.iter().all(|v| v.is_finite()) => Point3::from(est.alpha_hat.coords.zip_zip_map(
            &lo.coords,
            &hi.coords,
            |v, l, h| v.clamp(l, h),
        )),
        _ => nalgebra::center(lo, hi),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AnchorMeasurement, RangeModel};
    use super::*;
    use crate::geometry::{EdgeKind, WindowEdge};

    fn set(anchors: &[[f64; 3]], truth: &Point3) -> MeasurementSet {
        MeasurementSet::new(
            anchors
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let position = Point3::new(p[0], p[1], p[2]);
                    AnchorMeasurement {
                        anchor_id: i,
                        position,
                        range: (truth - position).norm(),
                        sigma: 0.1,
                        model: RangeModel::Euclidean,
                    }
                })
                .collect(),
        )
    }

    const TETRA: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]];

    #[test]
    fn lls_exact_on_euclidean_ranges() {
        let truth = Point3::new(3.0, 4.0, 5.0);
        let est = lls_solve(&set(&TETRA, &truth)).unwrap();
        assert!((est.alpha_hat - truth).norm() < 1e-9);
    }

    #[test]
    fn lls_rank_deficiency() {
        let truth = Point3::new(3.0, 4.0, 5.0);
        let dup = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 0.0, 0.0]];
        assert!(matches!(
            lls_solve(&set(&dup, &truth)),
            Err(PositioningError::SingularGeometry(_))
        ));
        let flat = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [7.0, 3.0, 0.0]];
        assert!(lls_solve(&set(&flat, &truth)).is_err());
        assert!(matches!(
            lls_solve(&set(&TETRA[..3], &truth)),
            Err(PositioningError::TooFewAnchors { found: 3, required: 4 })
        ));
    }

    #[test]
    fn dnls_fixed_point_and_recovery() {
        let truth = Point3::new(3.0, 4.0, 5.0);
        let meas = set(&TETRA, &truth);
        let at_truth = dnls_solve(&meas, &truth, &DnlsOptions::default()).unwrap();
        assert!(at_truth.converged && at_truth.iterations == 1);
        assert!((at_truth.alpha_hat - truth).norm() < 1e-12);
        let est = dnls_solve(&meas, &Point3::new(4.0, 3.0, 6.0), &DnlsOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.alpha_hat - truth).norm() < 1e-6);
    }

    #[test]
    fn dnls_on_diffraction_model() {
        let edges: Vec<WindowEdge> = [
            ([0.0, 0.0, 4.0], [10.0, 0.0, 4.0]),
            ([10.0, 0.0, 2.0], [10.0, 10.0, 2.0]),
            ([10.0, 10.0, 4.0], [0.0, 10.0, 4.0]),
            ([0.0, 10.0, 2.0], [0.0, 0.0, 2.0]),
        ]
        .iter()
        .enumerate()
        .map(|(i, (s, e))| {
            let kind = if i % 2 == 0 { EdgeKind::Top } else { EdgeKind::Bottom };
            WindowEdge::from_world(&Point3::from(*s), &Point3::from(*e), 2.0, kind).unwrap()
        })
        .collect();
        let anchors = [[5.0, -12.0, 5.0], [22.0, 4.0, 3.0], [6.0, 25.0, 6.0], [-15.0, 7.0, 4.0]];
        let truth = Point3::new(4.5, 5.5, 3.0);
        let mut meas = MeasurementSet::default();
        for (i, (a, e)) in anchors.iter().zip(&edges).enumerate() {
            let mut am = AnchorMeasurement {
                anchor_id: i,
                position: Point3::from(*a),
                range: 0.0,
                sigma: 0.1,
                model: RangeModel::diffraction(e.clone()),
            };
            am.range = am.predict(&truth).unwrap();
            meas.anchors.push(am);
        }
        let est = dnls_solve(&meas, &Point3::new(5.5, 4.5, 3.5), &DnlsOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.alpha_hat - truth).norm() < 1e-6, "{:?}", est);
        // LLS on the same ranges is biased.
        let lls = lls_solve(&meas).unwrap();
        assert!((lls.alpha_hat - truth).norm() > 1e-3);
    }

    #[test]
    fn degenerate_geometry_is_reported() {
        // All anchors on the z-axis: no lateral information.
        let truth = Point3::new(1.0, 1.0, 1.0);
        let col = [[0.0, 0.0, 0.0], [0.0, 0.0, 5.0], [0.0, 0.0, 10.0], [0.0, 0.0, 20.0]];
        let meas = set(&col, &truth);
        let r = dnls_solve(&meas, &Point3::new(0.0, 0.0, 3.0), &DnlsOptions::default());
        assert!(matches!(r, Err(PositioningError::SingularGeometry(_))), "{r:?}");
    }

    #[test]
    fn initial_guess_clamps_and_falls_back() {
        let truth = Point3::new(3.0, 4.0, 5.0);
        let bounds = (Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 2.0, 2.0));
        assert_eq!(initial_guess(&set(&TETRA, &truth), &bounds), Point3::new(2.0, 2.0, 2.0));
        let flat = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [7.0, 3.0, 0.0]];
        assert_eq!(initial_guess(&set(&flat, &truth), &bounds), Point3::new(1.0, 1.0, 1.0));
    }
}

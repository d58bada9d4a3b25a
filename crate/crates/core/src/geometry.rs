//! Geometric kernel: direct, specular and edge-diffracted path lengths.
//!
//! Diffraction is solved in an edge-local frame in which the edge lies on the
//! line `{y = 0, z = z_e}` between abscissae `x1` and `x2`. A [`WindowEdge`]
//! carries the rigid transform from world coordinates into that frame, so all
//! callers work in world coordinates.
//!
//! Along the edge, the two-leg length through `Q = (q, 0, z_e)`
//!
//! ```text
//! p(q) = sqrt((x_a - q)^2 + k_a) + sqrt((x_n - q)^2 + k_n)
//! k_a  = y_a^2 + (z_e - z_a)^2,   k_n = y_n^2 + (z_e - z_n)^2
//! ```
//!
//! is convex in `q`. Squaring its stationarity condition gives a quadratic in
//! the convex weight `lambda` (with `q = lambda*x1 + (1-lambda)*x2`), which
//! admits one spurious root. The minimiser over the finite edge is therefore
//! taken among the in-range roots and the two edge endpoints.

use nalgebra::{Isometry3, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative threshold on the leading coefficient below which the diffraction
/// quadratic is treated as degenerate.
pub const QUADRATIC_DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("transmitter and receiver are not strictly on the same side of the reflector")]
    OppositeSides,
    #[error("reflector normal must have unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("edge endpoints coincide (x1 = x2 = {0})")]
    ZeroLengthEdge(f64),
    #[error("window height must be positive, got {0}")]
    NonPositiveWindowHeight(f64),
    #[error("edge must be horizontal (endpoint heights {0} and {1})")]
    NonHorizontalEdge(f64, f64),
    #[error("transmitter and receiver both lie on the edge line")]
    BothOnEdgeLine,
    #[error("non-finite coordinate")]
    NonFinite,
}

pub fn euclidean_distance(a: &Point3, b: &Point3) -> f64 {
    (a - b).norm()
}

/// Infinite plane `normal · x = offset`, optionally bounded by an in-plane
/// polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorPlane {
    normal: Vec3,
    offset: f64,
    facet: Option<Vec<Point3>>,
}

impl ReflectorPlane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(GeometryError::NonUnitNormal(n));
        }
        Ok(Self {
            normal,
            offset,
            facet: None,
        })
    }

    /// Plane through `point` with the given (not necessarily unit) normal.
    pub fn through(point: &Point3, normal: &Vec3) -> Self {
        let n = Unit::new_normalize(*normal).into_inner();
        Self {
            normal: n,
            offset: n.dot(&point.coords),
            facet: None,
        }
    }

    /// Restricts valid specular points to a polygon lying in the plane.
    pub fn with_facet(mut self, vertices: Vec<Point3>) -> Self {
        self.facet = Some(vertices);
        self
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn facet(&self) -> Option<&[Point3]> {
        self.facet.as_deref()
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Even-odd containment of an in-plane point in the facet polygon; always
    /// true for unbounded planes.
    pub fn facet_contains(&self, p: &Point3) -> bool {
        let Some(poly) = &self.facet else {
            return true;
        };
        if poly.len() < 3 {
            return false;
        }
        let (u, v) = plane_basis(&self.normal);
        let project = |x: &Point3| (u.dot(&x.coords), v.dot(&x.coords));
        let (px, py) = project(p);
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let (xi, yi) = project(&poly[i]);
            let (xj, yj) = project(&poly[j]);
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Mirror image of `p` across the plane.
pub fn reflect_point(p: &Point3, plane: &ReflectorPlane) -> Point3 {
    let d = plane.signed_distance(p);
    p - plane.normal * (2.0 * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPath {
    pub length: f64,
    pub specular_point: Point3,
    /// False when the plane is bounded and the specular point misses the facet.
    pub valid: bool,
}

/// Single specular bounce via the image (virtual transmitter) method.
pub fn reflection_path_length(
    tx: &Point3,
    rx: &Point3,
    plane: &ReflectorPlane,
) -> Result<ReflectionPath, GeometryError> {
    let st = plane.signed_distance(tx);
    let sr = plane.signed_distance(rx);
    if !(st * sr > 0.0) {
        return Err(GeometryError::OppositeSides);
    }
    let image = reflect_point(tx, plane);
    let length = euclidean_distance(&image, rx);
    // image sits at -st, rx at sr: the segment crosses the plane at t below.
    let t = st / (st + sr);
    let specular_point = image + (rx - image) * t;
    Ok(ReflectionPath {
        length,
        specular_point,
        valid: plane.facet_contains(&specular_point),
    })
}

/// Which side of the window opening a horizontal edge bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// Lintel: the opening lies below the edge.
    Top,
    /// Sill: the opening lies above the edge.
    Bottom,
}

/// Horizontal diffracting edge of a window of height `w`.
///
/// In the edge-local frame the edge runs from `(x1, 0, z_e)` to `(x2, 0, z_e)`.
/// The local `+z` axis points from the edge into the window opening, so that
/// "the receiver sits half a window height below the edge" reads the same for
/// lintels and sills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEdge {
    pub x1: f64,
    pub x2: f64,
    pub z_e: f64,
    pub w: f64,
    frame: Isometry3<f64>,
}

impl WindowEdge {
    /// Edge given directly in local coordinates; `frame` maps world to local.
    pub fn new(x1: f64, x2: f64, z_e: f64, w: f64, frame: Isometry3<f64>) -> Result<Self, GeometryError> {
        if !(x1.is_finite() && x2.is_finite() && z_e.is_finite() && w.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if x1 == x2 {
            return Err(GeometryError::ZeroLengthEdge(x1));
        }
        if w <= 0.0 {
            return Err(GeometryError::NonPositiveWindowHeight(w));
        }
        Ok(Self { x1, x2, z_e, w, frame })
    }

    /// Edge whose local frame coincides with the world frame.
    pub fn canonical(x1: f64, x2: f64, z_e: f64, w: f64) -> Result<Self, GeometryError> {
        Self::new(x1, x2, z_e, w, Isometry3::identity())
    }

    /// Horizontal edge between two world points.
    pub fn from_world(start: &Point3, end: &Point3, w: f64, kind: EdgeKind) -> Result<Self, GeometryError> {
        if (start.z - end.z).abs() > 1e-9 {
            return Err(GeometryError::NonHorizontalEdge(start.z, end.z));
        }
        let along = end - start;
        let len = along.norm();
        if len == 0.0 {
            return Err(GeometryError::ZeroLengthEdge(start.x));
        }
        let ex = along / len;
        let ez = match kind {
            EdgeKind::Top => Vec3::z(),
            EdgeKind::Bottom => -Vec3::z(),
        };
        let ey = ez.cross(&ex);
        // Rows of the world->local rotation are the local axes.
        let rot = nalgebra::Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()]);
        let rotation = nalgebra::UnitQuaternion::from_matrix(&rot);
        let origin = Vec3::new(start.x, start.y, 0.0);
        let translation = nalgebra::Translation3::from(-(rotation * origin));
        let frame = Isometry3::from_parts(translation, rotation);
        let z_e = frame.transform_point(start).z;
        Self::new(0.0, len, z_e, w, frame)
    }

    /// Same edge with an additional rigid motion applied to the world.
    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        Self {
            frame: self.frame * motion.inverse(),
            ..self.clone()
        }
    }

    pub fn frame(&self) -> &Isometry3<f64> {
        &self.frame
    }

    pub fn to_local(&self, p: &Point3) -> Point3 {
        self.frame.transform_point(p)
    }

    pub fn to_world(&self, p: &Point3) -> Point3 {
        self.frame.inverse_transform_point(p)
    }

    pub fn to_world_vector(&self, v: &Vec3) -> Vec3 {
        self.frame.inverse_transform_vector(v)
    }

    /// World-space endpoints `X1`, `X2`.
    pub fn endpoints(&self) -> (Point3, Point3) {
        (
            self.to_world(&Point3::new(self.x1, 0.0, self.z_e)),
            self.to_world(&Point3::new(self.x2, 0.0, self.z_e)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffractionMethod {
    /// Root of the closed-form quadratic (or an endpoint chosen against it).
    Quadratic,
    /// Degenerate quadratic: bracketed 1D minimisation along the edge.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionSolution {
    /// Convex weight of `X1`; `q = lambda*X1 + (1-lambda)*X2`.
    pub lambda: f64,
    /// Diffraction point in world coordinates.
    pub q: Point3,
    /// Abscissa of the diffraction point along the edge (local frame).
    pub q_x: f64,
    pub path_length: f64,
    /// Set when the stationary point lies off the finite edge and the path
    /// diffracts at a corner instead.
    pub endpoint: bool,
    pub method: DiffractionMethod,
}

/// Local-frame scalars defining the one-dimensional problem along the edge.
#[derive(Debug, Clone, Copy)]
struct EdgeProblem {
    x1: f64,
    x2: f64,
    xa: f64,
    ka: f64,
    xn: f64,
    kn: f64,
}

impl EdgeProblem {
    fn new(tx: &Point3, rx: &Point3, x1: f64, x2: f64, z_e: f64) -> Self {
        Self {
            x1,
            x2,
            xa: tx.x,
            ka: tx.y * tx.y + (z_e - tx.z) * (z_e - tx.z),
            xn: rx.x,
            kn: rx.y * rx.y + (z_e - rx.z) * (z_e - rx.z),
        }
    }

    fn length(&self, q: f64) -> f64 {
        ((self.xa - q).powi(2) + self.ka).sqrt() + ((self.xn - q).powi(2) + self.kn).sqrt()
    }

    fn q_of(&self, lambda: f64) -> f64 {
        lambda * self.x1 + (1.0 - lambda) * self.x2
    }

    fn lambda_of(&self, q: f64) -> f64 {
        (q - self.x2) / (self.x1 - self.x2)
    }

    /// dp/dq; zero-length legs contribute their subgradient 0.
    fn slope(&self, q: f64) -> f64 {
        leg_slope(q, self.xa, self.ka) + leg_slope(q, self.xn, self.kn)
    }

    fn curvature(&self, q: f64) -> f64 {
        let d1 = ((self.xa - q).powi(2) + self.ka).sqrt();
        let d2 = ((self.xn - q).powi(2) + self.kn).sqrt();
        self.ka / d1.powi(3) + self.kn / d2.powi(3)
    }

    /// Coefficients of the stationarity quadratic in `lambda`.
    fn coefficients(&self) -> (f64, f64, f64) {
        let d = self.x1 - self.x2;
        let ua = self.x2 - self.xa;
        let un = self.x2 - self.xn;
        let a = d * d * (self.kn - self.ka);
        let b = 2.0 * d * (ua * self.kn - un * self.ka);
        let c = ua * ua * self.kn - un * un * self.ka;
        (a, b, c)
    }

    fn solve(&self) -> (f64, bool, DiffractionMethod) {
        let (a, b, c) = self.coefficients();
        let scale = a.abs().max(b.abs()).max(c.abs());
        let disc = b * b - 4.0 * a * c;
        if scale == 0.0 || a.abs() < QUADRATIC_DEGENERACY_TOL * scale || disc < 0.0 {
            let (q, endpoint) = self.minimise_numeric();
            return (q, endpoint, DiffractionMethod::Numeric);
        }
        // Cancellation-free form of (-b ± sqrt(disc)) / 2a.
        let t = -0.5 * (b + b.signum() * disc.sqrt());
        let roots = [t / a, if t != 0.0 { c / t } else { t / a }];

        const SLACK: f64 = 1e-12;
        let lo = self.x1.min(self.x2);
        let hi = self.x1.max(self.x2);
        let mut best = (f64::INFINITY, 0.0, true);
        let mut best_slope = f64::INFINITY;
        for root in roots {
            if (-SLACK..=1.0 + SLACK).contains(&root) {
                let q = self.polish(self.q_of(root.clamp(0.0, 1.0)), lo, hi);
                let len = self.length(q);
                let slope = self.slope(q).abs();
                // Both roots can polish towards the minimum, where lengths tie
                // to rounding; the smaller slope is then the better point.
                let better = if (len - best.0).abs() <= 4.0 * f64::EPSILON * len {
                    slope < best_slope
                } else {
                    len < best.0
                };
                if better {
                    best = (len, q, false);
                    best_slope = slope;
                }
            }
        }
        for q in [self.x1, self.x2] {
            let len = self.length(q);
            if len < best.0 {
                best = (len, q, true);
            }
        }
        (best.1, best.2, DiffractionMethod::Quadratic)
    }

    /// Newton refinement on dp/dq, kept while it reduces |dp/dq|. The length
    /// itself is too flat near the minimum to discriminate steps.
    fn polish(&self, mut q: f64, lo: f64, hi: f64) -> f64 {
        for _ in 0..20 {
            let h = self.curvature(q);
            if !(h.is_finite() && h > 0.0) {
                break;
            }
            let next = (q - self.slope(q) / h).clamp(lo, hi);
            if self.slope(next).abs() < self.slope(q).abs() {
                q = next;
            } else {
                break;
            }
        }
        q
    }

    /// Bisection on the monotone slope over the edge.
    fn minimise_numeric(&self) -> (f64, bool) {
        let mut lo = self.x1.min(self.x2);
        let mut hi = self.x1.max(self.x2);
        if self.slope(lo) >= 0.0 {
            return (lo, true);
        }
        if self.slope(hi) <= 0.0 {
            return (hi, true);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q = if self.length(lo) <= self.length(hi) { lo } else { hi };
        (q, false)
    }
}

fn leg_slope(q: f64, x: f64, k: f64) -> f64 {
    let d = ((q - x).powi(2) + k).sqrt();
    if d == 0.0 {
        0.0
    } else {
        (q - x) / d
    }
}

fn solve_local(
    tx_local: &Point3,
    rx_local: &Point3,
    edge: &WindowEdge,
    z_e: f64,
) -> Result<DiffractionSolution, GeometryError> {
    if !(tx_local
        .coords
        .iter()
        .chain(rx_local.coords.iter())
        .all(|v| v.is_finite())
        && z_e.is_finite())
    {
        return Err(GeometryError::NonFinite);
    }
    let prob = EdgeProblem::new(tx_local, rx_local, edge.x1, edge.x2, z_e);
    if prob.ka == 0.0 && prob.kn == 0.0 {
        return Err(GeometryError::BothOnEdgeLine);
    }
    let (q_x, endpoint, method) = prob.solve();
    Ok(DiffractionSolution {
        lambda: prob.lambda_of(q_x),
        q: edge.to_world(&Point3::new(q_x, 0.0, z_e)),
        q_x,
        path_length: prob.length(q_x),
        endpoint,
        method,
    })
}

/// Fermat-stationary diffraction point on a finite edge.
pub fn diffraction_point(tx: &Point3, rx: &Point3, edge: &WindowEdge) -> Result<DiffractionSolution, GeometryError> {
    solve_local(&edge.to_local(tx), &edge.to_local(rx), edge, edge.z_e)
}

pub fn exact_diffraction_path_length(tx: &Point3, rx: &Point3, edge: &WindowEdge) -> Result<f64, GeometryError> {
    diffraction_point(tx, rx, edge).map(|s| s.path_length)
}

/// Diffraction solution under the window-height approximation: the edge
/// height is placed `w/2` above the receiver in the edge-local frame, and the
/// stored `z_e` of `edge` is ignored.
///
/// `w = 0` is accepted as the limiting case of an edge at receiver height.
pub fn approx_diffraction_solution(
    tx: &Point3,
    rx_candidate: &Point3,
    edge: &WindowEdge,
    w: f64,
) -> Result<DiffractionSolution, GeometryError> {
    if !(w >= 0.0) {
        return Err(GeometryError::NonPositiveWindowHeight(w));
    }
    let rx_local = edge.to_local(rx_candidate);
    solve_local(&edge.to_local(tx), &rx_local, edge, rx_local.z + 0.5 * w)
}

/// Model path length `p_j(alpha)` used by diffraction-model positioning.
pub fn approx_diffraction_path_length(
    tx: &Point3,
    rx_candidate: &Point3,
    edge: &WindowEdge,
    w: f64,
) -> Result<f64, GeometryError> {
    approx_diffraction_solution(tx, rx_candidate, edge, w).map(|s| s.path_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&p(0., 0., 0.), &p(3., 4., 0.)), 5.0);
        assert_eq!(euclidean_distance(&p(1., 2., 3.), &p(1., 2., 3.)), 0.0);
    }

    #[test]
    fn reflect_examples() {
        let plane = ReflectorPlane::new(Vec3::y(), 0.0).unwrap();
        assert_eq!(reflect_point(&p(0., 5., 0.), &plane), p(0., -5., 0.));
        assert_eq!(reflect_point(&p(2., 0., 7.), &plane), p(2., 0., 7.));
        assert!(ReflectorPlane::new(Vec3::new(1.0, 1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn reflection_examples() {
        let plane = ReflectorPlane::new(Vec3::y(), 0.0).unwrap();
        let r = reflection_path_length(&p(0., 5., 0.), &p(0., 3., 0.), &plane).unwrap();
        assert_relative_eq!(r.length, 8.0, epsilon = 1e-12);
        assert_relative_eq!(r.specular_point.coords.norm(), 0.0, epsilon = 1e-12);
        assert!(r.valid);
        let r = reflection_path_length(&p(0., 1., 0.), &p(0., 1., 0.), &plane).unwrap();
        assert_relative_eq!(r.length, 2.0, epsilon = 1e-12);
        assert_eq!(
            reflection_path_length(&p(0., 1., 0.), &p(0., -1., 0.), &plane),
            Err(GeometryError::OppositeSides)
        );
    }

    #[test]
    fn bounded_facet_rejects_outside_specular_point() {
        let square = vec![p(-1., 0., -1.), p(1., 0., -1.), p(1., 0., 1.), p(-1., 0., 1.)];
        let plane = ReflectorPlane::new(Vec3::y(), 0.0).unwrap().with_facet(square);
        let hit = reflection_path_length(&p(0., 2., 0.), &p(0.5, 2., 0.), &plane).unwrap();
        assert!(hit.valid);
        let miss = reflection_path_length(&p(3., 2., 0.), &p(5., 2., 0.), &plane).unwrap();
        assert!(!miss.valid);
    }

    #[test]
    fn symmetric_diffraction_example() {
        let edge = WindowEdge::canonical(-5.0, 5.0, 10.0, 2.0).unwrap();
        let s = diffraction_point(&p(0., 20., 10.), &p(0., -4., 10.), &edge).unwrap();
        assert_relative_eq!(s.q_x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.lambda, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.path_length, 24.0, epsilon = 1e-12);
        assert!(!s.endpoint);
    }

    #[test]
    fn common_abscissa_is_stationary() {
        let edge = WindowEdge::canonical(-3.0, 7.0, 2.0, 1.0).unwrap();
        let s = diffraction_point(&p(1.7, 12., 2.), &p(1.7, -3., 2.), &edge).unwrap();
        assert_relative_eq!(s.q_x, 1.7, epsilon = 1e-10);
    }

    #[test]
    fn coincident_endpoints_fold_onto_nearest_edge_point() {
        let edge = WindowEdge::canonical(0.0, 4.0, 3.0, 1.0).unwrap();
        let t = p(1.0, 2.0, 5.0);
        let s = diffraction_point(&t, &t, &edge).unwrap();
        assert_relative_eq!(s.path_length, 2.0 * (4.0f64 + 4.0).sqrt(), epsilon = 1e-12);
        assert_eq!(s.method, DiffractionMethod::Numeric);
        // Nearest point is off the finite edge: clamp to x = 4.
        let t = p(6.0, 2.0, 3.0);
        let s = diffraction_point(&t, &t, &edge).unwrap();
        assert!(s.endpoint);
        assert_relative_eq!(s.path_length, 2.0 * (8.0f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn stationary_point_off_edge_clamps_to_endpoint() {
        let edge = WindowEdge::canonical(0.0, 1.0, 0.0, 1.0).unwrap();
        let s = diffraction_point(&p(10., 3., 1.), &p(12., -2., -1.), &edge).unwrap();
        assert!(s.endpoint);
        assert_relative_eq!(s.q_x, 1.0);
        assert_relative_eq!(s.lambda, 0.0);
    }

    #[test]
    fn both_on_edge_line_is_rejected() {
        let edge = WindowEdge::canonical(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(
            diffraction_point(&p(3., 0., 0.), &p(-2., 0., 0.), &edge),
            Err(GeometryError::BothOnEdgeLine)
        );
    }

    #[test]
    fn approx_matches_exact_when_offset_is_half_window() {
        let w = 2.0;
        let edge = WindowEdge::canonical(-4.0, 6.0, 8.5, w).unwrap();
        let tx = p(-7.0, 25.0, 3.0);
        let rx = p(2.5, -6.0, 7.5);
        let exact = exact_diffraction_path_length(&tx, &rx, &edge).unwrap();
        let approx = approx_diffraction_path_length(&tx, &rx, &edge, w).unwrap();
        assert_relative_eq!(exact, approx, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn approx_zero_window_in_edge_plane_is_unfolded_chain() {
        let edge = WindowEdge::canonical(-10.0, 10.0, 0.0, 1.0).unwrap();
        let tx = p(-3.0, 8.0, 1.0);
        let rx = p(4.0, -5.0, 1.0);
        let got = approx_diffraction_path_length(&tx, &rx, &edge, 0.0).unwrap();
        // Edge at receiver height: straight line in the unfolded (x, |y|) plane.
        let unfolded = ((4.0f64 + 3.0).powi(2) + (8.0f64 + 5.0).powi(2)).sqrt();
        assert_relative_eq!(got, unfolded, epsilon = 1e-12);
        let near = approx_diffraction_path_length(&tx, &rx, &edge, 1e-9).unwrap();
        assert_relative_eq!(near, unfolded, epsilon = 1e-9);
    }

    #[test]
    fn world_edge_frames() {
        // Sill along +x on the wall y = 0, opening above z = 1.5.
        let sill = WindowEdge::from_world(&p(2., 0., 1.5), &p(4., 0., 1.5), 2.0, EdgeKind::Bottom).unwrap();
        let (a, b) = sill.endpoints();
        assert_relative_eq!(a.coords, p(2., 0., 1.5).coords, epsilon = 1e-12);
        assert_relative_eq!(b.coords, p(4., 0., 1.5).coords, epsilon = 1e-12);
        // A receiver at mid-window height satisfies the approximation exactly.
        let tx = p(3.3, 15.0, 0.5);
        let rx = p(2.7, -4.0, 2.5);
        let exact = exact_diffraction_path_length(&tx, &rx, &sill).unwrap();
        let approx = approx_diffraction_path_length(&tx, &rx, &sill, 2.0).unwrap();
        assert_relative_eq!(exact, approx, max_relative = 1e-12);
        let s = diffraction_point(&tx, &rx, &sill).unwrap();
        assert_relative_eq!(s.q.z, 1.5, epsilon = 1e-12);
        assert_relative_eq!(s.q.y, 0.0, epsilon = 1e-12);
        assert!(WindowEdge::from_world(&p(0., 0., 0.), &p(1., 0., 0.1), 1.0, EdgeKind::Top).is_err());
    }

    #[test]
    fn window_edge_invariants() {
        assert!(WindowEdge::canonical(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(WindowEdge::canonical(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(WindowEdge::canonical(0.0, 1.0, f64::NAN, 1.0).is_err());
    }
}

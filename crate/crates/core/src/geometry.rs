//! Pose space, correspondences, the projection pair (F, G) and the frame distance.

use crate::error::{Error, Result};
use crate::planar::{rect_ranges, RectRanges, XyRect};

/// Denominators below this magnitude are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// A matched scene point `(w1, w2, w3)` and its image coordinates `(xi, eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub xi: f64,
    pub eta: f64,
}

impl Correspondence {
    pub fn new(w1: f64, w2: f64, w3: f64, xi: f64, eta: f64) -> Self {
        Self { w1, w2, w3, xi, eta }
    }

    pub fn scene_point(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }

    /// The correspondence a camera at `v` would observe for scene point `w`.
    pub fn observed_from(v: &Pose, w: [f64; 3]) -> Result<Self> {
        let (xi, eta) = project(v, w)?;
        Ok(Self::new(w[0], w[1], w[2], xi, eta))
    }

    pub fn is_finite(&self) -> bool {
        [self.w1, self.w2, self.w3, self.xi, self.eta].iter().all(|c| c.is_finite())
    }

    pub fn within_image_bound(&self, bound: f64) -> bool {
        self.xi.abs() <= bound && self.eta.abs() <= bound
    }

    pub fn in_unit_cube(&self) -> bool {
        self.scene_point().iter().all(|c| (0.0..=1.0).contains(c))
    }
}

/// Camera pose `(x, y, z, kappa)` with `kappa = tan(yaw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub kappa: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, kappa: f64) -> Self {
        Self { x, y, z, kappa }
    }

    pub fn from_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new(x, y, z, kappa_from_yaw(yaw))
    }

    pub fn yaw(&self) -> f64 {
        yaw_from_kappa(self.kappa)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.kappa]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Membership in the primal domain `[0,1]^3 x [-1,1]`.
    pub fn in_domain(&self) -> bool {
        (0.0..=1.0).contains(&self.x)
            && (0.0..=1.0).contains(&self.y)
            && (0.0..=1.0).contains(&self.z)
            && (-1.0..=1.0).contains(&self.kappa)
    }

    /// Componentwise absolute difference.
    pub fn abs_diff(&self, other: &Pose) -> [f64; 4] {
        let a = self.to_array();
        let b = other.to_array();
        [(a[0] - b[0]).abs(), (a[1] - b[1]).abs(), (a[2] - b[2]).abs(), (a[3] - b[3]).abs()]
    }
}

pub fn kappa_from_yaw(yaw: f64) -> f64 {
    yaw.tan()
}

pub fn yaw_from_kappa(kappa: f64) -> f64 {
    kappa.atan()
}

/// Tunable constants of the correctness analysis.
///
/// `beta`, `c_kappa` and `alpha` are envelopes rather than proven values; the
/// test suites measure the actual quantities against them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConstants {
    /// Separation threshold of the three admissibility conditions.
    pub a: f64,
    /// Gradient bound of the surface family.
    pub c1: f64,
    /// Lipschitz bound of the gradients.
    pub c2: f64,
    /// Worst-case kappa stretch, `2 / a^2`.
    pub c_kappa: f64,
    /// Kappa stretch actually used for cell dimensions.
    pub c_grid: f64,
    /// Residual bound factor of the dual mapping (used when not measured).
    pub gamma: f64,
    /// Accepted inflation factor of counted pairs.
    pub alpha: f64,
    /// Lipschitz constant of the projection pair.
    pub beta: f64,
    /// Bound on `|xi|` and `|eta|`.
    pub image_bound: f64,
}

impl Default for AnalyticConstants {
    fn default() -> Self {
        Self::with_a(0.2)
    }
}

impl AnalyticConstants {
    pub fn with_a(a: f64) -> Self {
        Self {
            a,
            c1: 12.0,
            c2: 12.0,
            c_kappa: 2.0 / (a * a),
            c_grid: 2.0,
            gamma: 1.0,
            alpha: 6.0,
            beta: 12.0,
            image_bound: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c_kappa", self.c_kappa),
            ("c_grid", self.c_grid),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("image_bound", self.image_bound),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.alpha <= 1.0 {
            return Err(Error::InvalidConfig(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Image coordinates `(xi, eta)` of scene point `w` seen from pose `v`.
pub fn project(v: &Pose, w: [f64; 3]) -> Result<(f64, f64)> {
    let dx = w[0] - v.x;
    let dy = w[1] - v.y;
    let den = dx + v.kappa * dy;
    if den.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateGeometry("point on the camera's lateral axis"));
    }
    let r2 = dx * dx + dy * dy;
    if r2 < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateGeometry("point above or below the camera center"));
    }
    Ok(((dy - v.kappa * dx) / den, (w[2] - v.z) / r2.sqrt()))
}

/// The unique `(z, kappa)` over `(x, y)` on the surface of `corr`.
pub fn surface_parametric(corr: &Correspondence, x: f64, y: f64) -> Result<(f64, f64)> {
    let dx = corr.w1 - x;
    let dy = corr.w2 - y;
    let den = dx + corr.xi * dy;
    if den.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateGeometry("surface has a pole over this point"));
    }
    let z = corr.w3 - corr.eta * (dx * dx + dy * dy).sqrt();
    Ok((z, (dy - corr.xi * dx) / den))
}

/// L-infinity distance in the image between the observed and predicted coordinates.
pub fn frame_distance(v: &Pose, corr: &Correspondence) -> Result<f64> {
    let (xi, eta) = project(v, corr.scene_point())?;
    Ok((xi - corr.xi).abs().max((eta - corr.eta).abs()))
}

/// Values of the three admissibility expressions for a pose and a correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionValues {
    /// `|(w1-x) + kappa (w2-y)|`
    pub pose_denominator: f64,
    /// `(w1-x)^2 + (w2-y)^2`
    pub planar_distance_sq: f64,
    /// `|(w1-x) + xi (w2-y)|`
    pub image_denominator: f64,
}

impl ConditionValues {
    pub fn of(v: &Pose, corr: &Correspondence) -> Self {
        let dx = corr.w1 - v.x;
        let dy = corr.w2 - v.y;
        Self {
            pose_denominator: (dx + v.kappa * dy).abs(),
            planar_distance_sq: dx * dx + dy * dy,
            image_denominator: (dx + corr.xi * dy).abs(),
        }
    }

    pub fn all_at_least(&self, a: f64) -> bool {
        self.pose_denominator >= a && self.planar_distance_sq >= a && self.image_denominator >= a
    }
}

pub fn check_conditions(v: &Pose, corr: &Correspondence, consts: &AnalyticConstants) -> bool {
    ConditionValues::of(v, corr).all_at_least(consts.a)
}

/// Gradients of `F` and `G` with respect to `(x, y, z, kappa)`.
pub fn pose_gradients(v: &Pose, w: [f64; 3]) -> Result<([f64; 4], [f64; 4])> {
    let dx = w[0] - v.x;
    let dy = w[1] - v.y;
    let k = v.kappa;
    let den = dx + k * dy;
    let r2 = dx * dx + dy * dy;
    if den.abs() < DEGENERACY_THRESHOLD || r2 < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateGeometry("gradient undefined"));
    }
    let num = dy - k * dx;
    let d2 = den * den;
    let df = [(k * den + num) / d2, (-den + num * k) / d2, 0.0, (-dx * den - num * dy) / d2];
    let r = r2.sqrt();
    let r3 = r2 * r;
    let h = w[2] - v.z;
    let dg = [h * dx / r3, h * dy / r3, -1.0 / r, 0.0];
    Ok((df, dg))
}

/// The two-dimensional pose-space surface of one correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSigma {
    pub corr: Correspondence,
}

impl SurfaceSigma {
    pub fn new(corr: Correspondence) -> Self {
        Self { corr }
    }

    /// The pose on the surface above `(x, y)`.
    pub fn point_at(&self, x: f64, y: f64) -> Result<Pose> {
        let (z, kappa) = surface_parametric(&self.corr, x, y)?;
        Ok(Pose::new(x, y, z, kappa))
    }

    /// Enclosures of planar distance and kappa over an xy-rectangle.
    pub fn rect_ranges(&self, rect: &XyRect, kappa_bound: f64) -> RectRanges {
        rect_ranges(self.corr.w1, self.corr.w2, self.corr.xi, rect, kappa_bound)
    }

    /// Range of `z = w3 - eta r` when `r` ranges over `[r_lo, r_hi]`.
    pub fn z_range(&self, r_lo: f64, r_hi: f64) -> (f64, f64) {
        z_range(self.corr.w3, self.corr.eta, r_lo, r_hi)
    }
}

pub(crate) fn z_range(w3: f64, eta: f64, r_lo: f64, r_hi: f64) -> (f64, f64) {
    if eta >= 0.0 {
        (w3 - eta * r_hi, w3 - eta * r_lo)
    } else {
        (w3 - eta * r_lo, w3 - eta * r_hi)
    }
}

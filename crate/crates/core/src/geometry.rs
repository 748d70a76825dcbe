//! Rigid-body poses and the rectified stereo pinhole model.
//!
//! Image coordinates: `u` grows rightward, `v` grows downward, origin at the
//! top-left pixel. Camera frame: `x` right, `y` down, `z` forward. The right
//! camera sits `baseline` metres along `+x` of the left one.
//!
//! Quaternions are Hamilton, stored and serialized w-first.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;

/// Minimum accepted disparity for triangulation, in pixels.
pub const DEFAULT_DISPARITY_FLOOR: f64 = 0.5;

const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Rigid transform. When used as a camera pose it maps camera coordinates to
/// world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    /// Builds a pose from a w-first quaternion that must already be unit
    /// length to within 1e-6.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Result<Self> {
        let raw = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        let norm = raw.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(Self::new(
            UnitQuaternion::new_normalize(raw),
            Vector3::new(t[0], t[1], t[2]),
        ))
    }

    /// Rotation by `scaled_axis` (radians) followed by `translation`.
    pub fn from_scaled_axis(scaled_axis: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::from_scaled_axis(scaled_axis), translation)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rotation = self.rotation.inverse();
        PoseSE3 {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.rotation * p + self.translation
    }

    /// `self⁻¹ ∘ other`.
    pub fn between(&self, other: &PoseSE3) -> PoseSE3 {
        self.inverse().compose(other)
    }

    /// Right-multiplicative update `self ∘ (Exp(φ), ρ)` with `delta = (ρ, φ)`.
    pub fn retract(&self, delta: &Vector6<f64>) -> PoseSE3 {
        let rho = Vector3::new(delta[0], delta[1], delta[2]);
        let phi = Vector3::new(delta[3], delta[4], delta[5]);
        self.compose(&PoseSE3::from_scaled_axis(phi, rho))
    }

    /// `(t, log(R))`: a 6-vector with translation first.
    pub fn log_approx(&self) -> Vector6<f64> {
        let phi = self.rotation.scaled_axis();
        Vector6::new(
            self.translation.x,
            self.translation.y,
            self.translation.z,
            phi.x,
            phi.y,
            phi.z,
        )
    }

    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|x| x.is_finite())
            && self.rotation.coords.iter().all(|x| x.is_finite())
    }
}

/// Serialized form of a pose: `translation` in metres, `rotation_wxyz` unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub translation: [f64; 3],
    pub rotation_wxyz: [f64; 4],
}

impl From<&PoseSE3> for PoseRecord {
    fn from(p: &PoseSE3) -> Self {
        PoseRecord {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation_wxyz: p.wxyz(),
        }
    }
}

impl TryFrom<PoseRecord> for PoseSE3 {
    type Error = Error;

    fn try_from(r: PoseRecord) -> Result<Self> {
        PoseSE3::from_wxyz(r.rotation_wxyz, r.translation)
    }
}

/// Rectified stereo pair with identical pinhole intrinsics on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for StereoCamera {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            baseline: 0.1,
            width: 640,
            height: 480,
        }
    }
}

impl StereoCamera {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("camera.{name}"), "must be > 0"))
            }
        };
        positive("fx", self.fx)?;
        positive("fy", self.fy)?;
        positive("baseline", self.baseline)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("camera.width/height", "must be > 0"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) {
            return Err(Error::config("camera.cx", "must lie inside the image"));
        }
        if !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::config("camera.cy", "must lie inside the image"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ImagePoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < self.width as f64 && p.v < self.height as f64
    }

    /// Disparity `fx·baseline / z` of a point at depth `z`.
    pub fn disparity_at(&self, z: f64) -> f64 {
        self.fx * self.baseline / z
    }
}

/// Pinhole projection of a camera-frame point onto one side of the pair.
pub fn project(p: &Point, cam: &StereoCamera, side: Side) -> Result<ImagePoint> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    let mut u = cam.fx * p.x / p.z + cam.cx;
    let v = cam.fy * p.y / p.z + cam.cy;
    if side == Side::Right {
        u -= cam.disparity_at(p.z);
    }
    Ok(ImagePoint { u, v })
}

/// Triangulates a rectified stereo correspondence with the default disparity floor.
pub fn triangulate(left: &ImagePoint, right: &ImagePoint, cam: &StereoCamera) -> Result<Point> {
    triangulate_with_floor(left, right, cam, DEFAULT_DISPARITY_FLOOR)
}

pub fn triangulate_with_floor(
    left: &ImagePoint,
    right: &ImagePoint,
    cam: &StereoCamera,
    disparity_floor: f64,
) -> Result<Point> {
    let d = left.u - right.u;
    if !(d > disparity_floor) {
        return Err(Error::NonPositiveDisparity {
            disparity: d,
            floor: disparity_floor,
        });
    }
    let z = cam.fx * cam.baseline / d;
    Ok(Point::new(
        (left.u - cam.cx) * z / cam.fx,
        (left.v - cam.cy) * z / cam.fy,
        z,
    ))
}

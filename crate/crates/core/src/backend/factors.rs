use nalgebra::{Matrix3, Matrix4x3, Matrix6, SMatrix, Vector3, Vector4, Vector6};

use crate::geometry::{ImagePoint, Point, PoseSE3, StereoCamera};

pub type Matrix4x6 = SMatrix<f64, 4, 6>;

/// Depth below which a landmark counts as behind the camera.
const MIN_DEPTH: f64 = 1e-6;

/// Whitened residual assigned to a landmark behind the camera.
const CHEIRALITY_RESIDUAL: f64 = 1e4;

/// Stereo observation of a landmark from one pose: residual
/// `(u_l, v_l, u_r, v_r)_predicted − observed`, divided by `sigma_px`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoFactor {
    pub frame: usize,
    pub landmark: usize,
    pub left: ImagePoint,
    pub right: ImagePoint,
    pub sigma_px: f64,
}

/// Linearization of a stereo factor.
#[derive(Debug, Clone, Copy)]
pub struct StereoLinearization {
    pub residual: Vector4<f64>,
    /// With respect to the right-multiplied pose increment `(ρ, φ)`.
    pub d_pose: Matrix4x6,
    pub d_landmark: Matrix4x3<f64>,
    pub in_front: bool,
}

impl StereoFactor {
    pub fn residual(&self, pose: &PoseSE3, landmark: &Point, cam: &StereoCamera) -> Vector4<f64> {
        self.linearize(pose, landmark, cam).residual
    }

    pub fn linearize(&self, pose: &PoseSE3, landmark: &Point, cam: &StereoCamera) -> StereoLinearization {
        let r_t = pose.rotation.inverse();
        let pc = (r_t * (landmark - pose.translation)).coords;
        let (x, y, z) = (pc.x, pc.y, pc.z);
        if z <= MIN_DEPTH {
            return StereoLinearization {
                residual: Vector4::repeat(CHEIRALITY_RESIDUAL),
                d_pose: Matrix4x6::zeros(),
                d_landmark: Matrix4x3::zeros(),
                in_front: false,
            };
        }
        let s = 1.0 / self.sigma_px;
        let inv_z = 1.0 / z;
        let u_l = cam.fx * x * inv_z + cam.cx;
        let v = cam.fy * y * inv_z + cam.cy;
        let u_r = cam.fx * (x - cam.baseline) * inv_z + cam.cx;
        let residual = Vector4::new(u_l - self.left.u, v - self.left.v, u_r - self.right.u, v - self.right.v) * s;

        let inv_z2 = inv_z * inv_z;
        #[rustfmt::skip]
        let d_proj = Matrix4x3::new(
            cam.fx * inv_z, 0.0,            -cam.fx * x * inv_z2,
            0.0,            cam.fy * inv_z, -cam.fy * y * inv_z2,
            cam.fx * inv_z, 0.0,            -cam.fx * (x - cam.baseline) * inv_z2,
            0.0,            cam.fy * inv_z, -cam.fy * y * inv_z2,
        ) * s;

        // p_c(δ) ≈ p_c − ρ + [p_c]× φ
        let mut d_pc_pose = SMatrix::<f64, 3, 6>::zeros();
        d_pc_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-Matrix3::identity()));
        d_pc_pose.fixed_view_mut::<3, 3>(0, 3).copy_from(&pc.cross_matrix());

        StereoLinearization {
            residual,
            d_pose: d_proj * d_pc_pose,
            d_landmark: d_proj * r_t.to_rotation_matrix().matrix(),
            in_front: true,
        }
    }
}

/// Whitening for 6-dof pose residuals `(translation, rotation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseNoise {
    pub sigma_translation: f64,
    pub sigma_rotation: f64,
}

impl PoseNoise {
    fn whiten(&self, e: Vector6<f64>) -> Vector6<f64> {
        let (st, sr) = (1.0 / self.sigma_translation, 1.0 / self.sigma_rotation);
        Vector6::new(e[0] * st, e[1] * st, e[2] * st, e[3] * sr, e[4] * sr, e[5] * sr)
    }
}

/// Relative-motion constraint `measured ≈ from⁻¹ ∘ to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryFactor {
    pub from: usize,
    pub to: usize,
    pub measured: PoseSE3,
    pub noise: PoseNoise,
}

impl OdometryFactor {
    pub fn residual(&self, from: &PoseSE3, to: &PoseSE3) -> Vector6<f64> {
        self.noise
            .whiten(self.measured.inverse().compose(&from.between(to)).log_approx())
    }

    /// Residual and Jacobians with respect to `(from, to)` increments, by
    /// central differences.
    pub fn linearize(&self, from: &PoseSE3, to: &PoseSE3) -> (Vector6<f64>, Matrix6<f64>, Matrix6<f64>) {
        let r = self.residual(from, to);
        let d_from = numeric_pose_jacobian(|p| self.residual(&p, to), from);
        let d_to = numeric_pose_jacobian(|p| self.residual(from, &p), to);
        (r, d_from, d_to)
    }
}

/// Absolute pose constraint, anchors the gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorFactor {
    pub frame: usize,
    pub pose: PoseSE3,
    pub noise: PoseNoise,
}

impl PriorFactor {
    pub fn residual(&self, pose: &PoseSE3) -> Vector6<f64> {
        self.noise.whiten(self.pose.between(pose).log_approx())
    }

    pub fn linearize(&self, pose: &PoseSE3) -> (Vector6<f64>, Matrix6<f64>) {
        (self.residual(pose), numeric_pose_jacobian(|p| self.residual(&p), pose))
    }
}

fn numeric_pose_jacobian(f: impl Fn(PoseSE3) -> Vector6<f64>, at: &PoseSE3) -> Matrix6<f64> {
    const H: f64 = 1e-6;
    let mut jac = Matrix6::zeros();
    for k in 0..6 {
        let mut d = Vector6::zeros();
        d[k] = H;
        let plus = f(at.retract(&d));
        let minus = f(at.retract(&(-d)));
        jac.set_column(k, &((plus - minus) / (2.0 * H)));
    }
    jac
}

/// Camera-frame coordinates of a world point.
pub fn to_camera(pose: &PoseSE3, p: &Point) -> Vector3<f64> {
    (pose.rotation.inverse() * (p - pose.translation)).coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> (PoseSE3, Point) {
        let pose = PoseSE3::from_scaled_axis(
            Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        );
        let pc = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.5..3.0));
        (pose, pose.apply(&pc))
    }

    #[test]
    fn zero_residual_at_truth() {
        let cam = StereoCamera::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pose, lm) = random_state(&mut rng);
        let pc = Point::from(to_camera(&pose, &lm));
        let f = StereoFactor {
            frame: 0,
            landmark: 0,
            left: project(&pc, &cam, Side::Left).unwrap(),
            right: project(&pc, &cam, Side::Right).unwrap(),
            sigma_px: 1.0,
        };
        assert!(f.residual(&pose, &lm, &cam).norm() < 1e-9);
    }

    #[test]
    fn behind_camera_is_flagged() {
        let cam = StereoCamera::default();
        let f = StereoFactor {
            frame: 0,
            landmark: 0,
            left: ImagePoint::new(1.0, 1.0),
            right: ImagePoint::new(0.0, 1.0),
            sigma_px: 1.0,
        };
        let lin = f.linearize(&PoseSE3::identity(), &Point::new(0.0, 0.0, -1.0), &cam);
        assert!(!lin.in_front);
        assert_eq!(lin.d_pose, Matrix4x6::zeros());
    }

    #[test]
    fn pose_factors_vanish_at_measurement() {
        let noise = PoseNoise {
            sigma_translation: 0.02,
            sigma_rotation: 1f64.to_radians(),
        };
        let a = PoseSE3::from_scaled_axis(Vector3::new(0.1, -0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        let b = PoseSE3::from_scaled_axis(Vector3::new(-0.3, 0.1, 0.0), Vector3::new(0.5, 2.5, 3.0));
        let odo = OdometryFactor { from: 0, to: 1, measured: a.between(&b), noise };
        assert!(odo.residual(&a, &b).norm() < 1e-9);
        let prior = PriorFactor { frame: 0, pose: a, noise };
        assert!(prior.residual(&a).norm() < 1e-12);
        let (_, j) = prior.linearize(&a);
        // at the prior, d(log)/dδ is the whitening matrix
        for k in 0..6 {
            let w = if k < 3 { 1.0 / noise.sigma_translation } else { 1.0 / noise.sigma_rotation };
            assert!((j[(k, k)] - w).abs() / w < 1e-6);
        }
    }
}

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StereoCamera;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Stereo rig driving along a row of panicles.
    #[default]
    Range,
    /// Arm-mounted stereo camera circling a single panicle.
    Orbit,
}

/// Seed placement on a panicle's ellipsoid shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Shell semi-axes in the panicle frame (x, y, z), z vertical. Meters.
    pub semi_axes: [f64; 3],
    /// Spacing between neighbouring seeds along the shell. Derived from
    /// `seeds_per_panicle` and the shell area when absent.
    pub seed_pitch: Option<f64>,
    /// Static placement jitter as a fraction of the pitch.
    pub jitter: f64,
    /// Radius of a single seed, used for cloud sampling and box sizes.
    pub seed_radius: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            semi_axes: [0.06, 0.06, 0.15],
            seed_pitch: None,
            jitter: 0.15,
            seed_radius: 0.003,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Forward travel per frame, meters.
    pub speed: f64,
    /// Distance from the camera path to the panicle row, meters.
    pub standoff: f64,
    /// Amplitude of a vertical sinusoid on the camera height, meters.
    pub vertical_bounce: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            speed: 0.1,
            standoff: 0.7,
            vertical_bounce: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian noise on detected keypoint coordinates, pixels.
    pub pixel_sigma: f64,
    /// Probability that a visible seed is missed in one image.
    pub dropout: f64,
    /// Expected spurious detections per true detection in an image.
    pub false_positive_rate: f64,
    /// Per-frame common-mode displacement of each panicle (wind), meters.
    pub seed_jitter: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pixel_sigma: 1.0,
            dropout: 0.1,
            false_positive_rate: 0.05,
            seed_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    /// Camera distance from the panicle axis, meters.
    pub radius: f64,
    pub arc_degrees: f64,
    pub step_degrees: f64,
    /// Per-axis forward-kinematics noise on each captured pose.
    pub fk_translation_sigma: f64,
    pub fk_rotation_sigma_degrees: f64,
    /// Non-seed surface points on the shell, per square meter.
    pub clutter_density: f64,
    /// Surface samples per seed sphere.
    pub points_per_seed: usize,
    /// Disparity noise of the dense cloud, pixels.
    pub cloud_disparity_sigma: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            radius: 0.4,
            arc_degrees: 90.0,
            step_degrees: 5.0,
            fk_translation_sigma: 0.005,
            fk_rotation_sigma_degrees: 0.5,
            clutter_density: 20000.0,
            points_per_seed: 12,
            cloud_disparity_sigma: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub kind: SceneKind,
    pub rng_seed: u64,
    /// Length of the traversed row, meters.
    pub range_length: f64,
    pub panicle_count: usize,
    pub seeds_per_panicle: usize,
    pub panicle_spacing: f64,
    pub seed_lattice: LatticeConfig,
    pub camera: StereoCamera,
    pub trajectory: TrajectoryConfig,
    pub noise: NoiseConfig,
    pub orbit: OrbitConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            kind: SceneKind::Range,
            rng_seed: 42,
            range_length: 4.0,
            panicle_count: 14,
            seeds_per_panicle: 300,
            panicle_spacing: 0.3,
            seed_lattice: LatticeConfig::default(),
            camera: StereoCamera::default(),
            trajectory: TrajectoryConfig::default(),
            noise: NoiseConfig::default(),
            orbit: OrbitConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

fn rate(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl SceneConfig {
    pub fn orbit() -> Self {
        Self {
            kind: SceneKind::Orbit,
            panicle_count: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("range_length", self.range_length)?;
        positive("panicle_spacing", self.panicle_spacing)?;
        if self.panicle_count == 0 {
            return Err(Error::config("panicle_count", "must be at least 1"));
        }
        if self.seeds_per_panicle == 0 {
            return Err(Error::config("seeds_per_panicle", "must be at least 1"));
        }
        let l = &self.seed_lattice;
        for (i, a) in l.semi_axes.iter().enumerate() {
            positive(&format!("seed_lattice.semi_axes[{i}]"), *a)?;
        }
        if let Some(p) = l.seed_pitch {
            positive("seed_lattice.seed_pitch", p)?;
        }
        non_negative("seed_lattice.jitter", l.jitter)?;
        positive("seed_lattice.seed_radius", l.seed_radius)?;
        self.camera.validate()?;
        positive("trajectory.speed", self.trajectory.speed)?;
        positive("trajectory.standoff", self.trajectory.standoff)?;
        non_negative("trajectory.vertical_bounce", self.trajectory.vertical_bounce)?;
        non_negative("noise.pixel_sigma", self.noise.pixel_sigma)?;
        rate("noise.dropout", self.noise.dropout)?;
        rate("noise.false_positive_rate", self.noise.false_positive_rate)?;
        non_negative("noise.seed_jitter", self.noise.seed_jitter)?;
        let o = &self.orbit;
        positive("orbit.radius", o.radius)?;
        positive("orbit.step_degrees", o.step_degrees)?;
        if !(o.arc_degrees > 0.0 && o.arc_degrees <= 360.0) {
            return Err(Error::config("orbit.arc_degrees", "must lie in (0, 360]"));
        }
        non_negative("orbit.fk_translation_sigma", o.fk_translation_sigma)?;
        non_negative("orbit.fk_rotation_sigma_degrees", o.fk_rotation_sigma_degrees)?;
        non_negative("orbit.clutter_density", o.clutter_density)?;
        non_negative("orbit.cloud_disparity_sigma", o.cloud_disparity_sigma)?;
        if self.kind == SceneKind::Orbit && o.radius <= l.semi_axes[0].max(l.semi_axes[1]) {
            return Err(Error::config("orbit.radius", "camera would sit inside the panicle"));
        }
        Ok(())
    }

    /// Number of frames the scene produces.
    pub fn frame_count(&self) -> usize {
        let steps = match self.kind {
            SceneKind::Range => self.range_length / self.trajectory.speed,
            SceneKind::Orbit => self.orbit.arc_degrees / self.orbit.step_degrees,
        };
        (steps + 1e-9).floor() as usize + 1
    }

    /// Length of the camera path, meters.
    pub fn path_length(&self) -> f64 {
        match self.kind {
            SceneKind::Range => self.trajectory.speed * (self.frame_count() - 1) as f64,
            SceneKind::Orbit => {
                self.orbit.radius * ((self.frame_count() - 1) as f64 * self.orbit.step_degrees).to_radians()
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SceneConfig = toml::from_str(text).map_err(|e| Error::parse("scene config", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config is always serializable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

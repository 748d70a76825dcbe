//! Semantic keypoints and mapped seed landmarks.

use serde::{Deserialize, Serialize};

use crate::geometry::{ImagePoint, Point, Side};

/// Axis-aligned detection box, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn contains(&self, p: &ImagePoint) -> bool {
        (self.x_min..=self.x_max).contains(&p.u) && (self.y_min..=self.y_max).contains(&p.v)
    }

    pub fn around(center: ImagePoint, half_width: f64, half_height: f64) -> Self {
        BBox {
            x_min: center.u - half_width,
            y_min: center.v - half_height,
            x_max: center.u + half_width,
            y_max: center.v + half_height,
        }
    }
}

/// Ellipse center of one detected seed: the node type of the matching graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedKeypoint {
    pub center: ImagePoint,
    pub bbox: Option<BBox>,
    pub frame_id: usize,
    pub side: Side,
}

impl SeedKeypoint {
    pub fn new(center: ImagePoint, frame_id: usize, side: Side) -> Self {
        Self {
            center,
            bbox: None,
            frame_id,
            side,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.center.u.is_finite()
            && self.center.v.is_finite()
            && self
                .bbox
                .is_none_or(|b| b.is_valid() && b.contains(&self.center))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame_id: usize,
    pub side: Side,
    pub keypoint: SeedKeypoint,
}

/// A mapped seed center in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub position: Point,
    pub observations: Vec<Observation>,
}

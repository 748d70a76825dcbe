//! Moment-based ellipse fitting on segmented seed masks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagePoint;

/// Row-major binary image; pixel `(x, y)` is at `data[y * width + x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    /// Builds a mask by evaluating `pred(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, pred: impl Fn(usize, usize) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                mask.data[y * width + x] = pred(x, y);
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: ImagePoint,
    /// `(major, minor)` semi-axis lengths in pixels.
    pub semi_axes: (f64, f64),
    /// Major-axis angle from `+u` towards `+v`, in `[0, π)`.
    pub rotation: f64,
}

/// Fits the ellipse with the same first and second moments as the mask.
///
/// For a uniformly filled ellipse with semi-axis `a` the variance along that
/// axis is `a²/4`, so semi-axes are recovered as `2·sqrt(eigenvalue)`.
pub fn fit_ellipse(mask: &BinaryMask) -> Result<Ellipse> {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in mask.foreground() {
        n += 1;
        sx += x as f64;
        sy += y as f64;
    }
    if n < 5 {
        return Err(Error::DegenerateMask("fewer than 5 foreground pixels"));
    }
    let count = n as f64;
    let (cu, cv) = (sx / count, sy / count);

    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for (x, y) in mask.foreground() {
        let dx = x as f64 - cu;
        let dy = y as f64 - cv;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    m20 /= count;
    m02 /= count;
    m11 /= count;

    let trace = m20 + m02;
    let det = m20 * m02 - m11 * m11;
    if det <= 1e-12 * trace * trace {
        return Err(Error::DegenerateMask("foreground pixels are collinear"));
    }
    let half_gap = (0.25 * (m20 - m02).powi(2) + m11 * m11).sqrt();
    let major = 0.5 * trace + half_gap;
    let minor = 0.5 * trace - half_gap;

    let mut rotation = 0.5 * (2.0 * m11).atan2(m20 - m02);
    if rotation < 0.0 {
        rotation += PI;
    }
    if rotation >= PI {
        rotation -= PI;
    }

    Ok(Ellipse {
        center: ImagePoint::new(cu, cv),
        semi_axes: (2.0 * major.sqrt(), 2.0 * minor.sqrt()),
        rotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disk() {
        let mask = BinaryMask::from_fn(100, 100, |x, y| {
            let (dx, dy) = (x as f64 - 50.0, y as f64 - 50.0);
            dx * dx + dy * dy <= 100.0
        });
        let e = fit_ellipse(&mask).unwrap();
        assert!((e.center.u - 50.0).abs() < 1e-12);
        assert!((e.center.v - 50.0).abs() < 1e-12);
        assert!((e.semi_axes.0 - 10.0).abs() < 0.5, "{:?}", e.semi_axes);
        assert!((e.semi_axes.1 - 10.0).abs() < 0.5, "{:?}", e.semi_axes);
        assert!(e.semi_axes.0 >= e.semi_axes.1);
    }

    #[test]
    fn single_pixel_is_degenerate() {
        let mut mask = BinaryMask::new(10, 10);
        mask.set(3, 4, true);
        assert!(matches!(fit_ellipse(&mask), Err(Error::DegenerateMask(_))));
    }

    #[test]
    fn collinear_is_degenerate() {
        let mask = BinaryMask::from_fn(20, 20, |x, y| x == y);
        assert!(matches!(fit_ellipse(&mask), Err(Error::DegenerateMask(_))));
        let mask = BinaryMask::from_fn(20, 20, |_, y| y == 7);
        assert!(matches!(fit_ellipse(&mask), Err(Error::DegenerateMask(_))));
    }

    #[test]
    fn rectangle() {
        // 21x11 pixel block: a 20x10 extent between pixel centres around (30, 40)
        let mask = BinaryMask::from_fn(64, 64, |x, y| (20..=40).contains(&x) && (35..=45).contains(&y));
        let e = fit_ellipse(&mask).unwrap();

        // brute-force pixel summation
        let pts: Vec<(f64, f64)> = (20..=40)
            .flat_map(|x| (35..=45).map(move |y| (x as f64, y as f64)))
            .collect();
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let vx = pts.iter().map(|p| (p.0 - cx).powi(2)).sum::<f64>() / n;
        let vy = pts.iter().map(|p| (p.1 - cy).powi(2)).sum::<f64>() / n;
        assert_eq!((cx, cy), (30.0, 40.0));
        assert_eq!(e.center, ImagePoint::new(cx, cy));
        assert!(e.rotation.abs() < 1e-6);
        assert!((e.semi_axes.0 - 2.0 * vx.sqrt()).abs() < 1e-9);
        assert!((e.semi_axes.1 - 2.0 * vy.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rotated_ellipse_angle() {
        let theta: f64 = 0.6;
        let (c, s) = (theta.cos(), theta.sin());
        let mask = BinaryMask::from_fn(120, 120, |x, y| {
            let (dx, dy) = (x as f64 - 60.0, y as f64 - 60.0);
            let a = c * dx + s * dy;
            let b = -s * dx + c * dy;
            (a / 30.0).powi(2) + (b / 12.0).powi(2) <= 1.0
        });
        let e = fit_ellipse(&mask).unwrap();
        assert!((e.rotation - theta).abs() < 0.02, "{}", e.rotation);
        assert!((e.semi_axes.0 - 30.0).abs() < 0.6);
        assert!((e.semi_axes.1 - 12.0).abs() < 0.6);
    }

    proptest! {
        #[test]
        fn center_is_pixel_centroid(bits in prop::collection::vec(any::<bool>(), 16 * 16)) {
            let mask = BinaryMask::from_fn(16, 16, |x, y| bits[y * 16 + x]);
            let pts: Vec<(usize, usize)> = mask.foreground().collect();
            match fit_ellipse(&mask) {
                Ok(e) => {
                    let n = pts.len() as f64;
                    let cx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
                    let cy = pts.iter().map(|p| p.1 as f64).sum::<f64>() / n;
                    prop_assert_eq!(e.center, ImagePoint::new(cx, cy));
                    prop_assert!(e.semi_axes.0 >= e.semi_axes.1 && e.semi_axes.1 > 0.0);
                    prop_assert!((0.0..std::f64::consts::PI).contains(&e.rotation));
                }
                Err(_) => {
                    let collinear = pts.len() >= 2 && pts.iter().all(|p| {
                        let (o, q) = (pts[0], pts[1]);
                        let (ax, ay) = (q.0 as i64 - o.0 as i64, q.1 as i64 - o.1 as i64);
                        let (bx, by) = (p.0 as i64 - o.0 as i64, p.1 as i64 - o.1 as i64);
                        ax * by - ay * bx == 0
                    });
                    prop_assert!(pts.len() < 5 || collinear);
                }
            }
        }
    }
}

//! Ellipsoidal panicle shells and the seed lattice placed on them.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Point,
    /// Panicle frame to world.
    pub orientation: UnitQuaternion<f64>,
    pub semi_axes: Vector3<f64>,
}

impl Ellipsoid {
    pub fn to_body(&self, p: &Point) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.center)
    }

    pub fn to_world(&self, q: &Vector3<f64>) -> Point {
        self.center + self.orientation * q
    }

    /// Pulls a body-frame direction onto the shell surface.
    pub fn onto_surface(&self, q: &Vector3<f64>) -> Vector3<f64> {
        let s = q.component_div(&self.semi_axes).norm();
        q / s
    }

    /// Outward unit normal at a world point on the shell.
    pub fn normal_at(&self, p: &Point) -> Vector3<f64> {
        let q = self.to_body(p);
        let a2 = self.semi_axes.component_mul(&self.semi_axes);
        (self.orientation * q.component_div(&a2)).normalize()
    }

    /// Whether a surface point faces the viewer. On a convex shell this is
    /// exactly line-of-sight visibility against the shell itself.
    pub fn faces(&self, p: &Point, viewer: &Point) -> bool {
        self.normal_at(p).dot(&(viewer - p)) > 0.0
    }

    /// Ray parameters where `origin + t·dir` crosses the shell, ascending.
    pub fn ray_hits(&self, origin: &Point, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let o = self.to_body(origin).component_div(&self.semi_axes);
        let d = (self.orientation.inverse() * dir).component_div(&self.semi_axes);
        let a = d.norm_squared();
        let b = 2.0 * o.dot(&d);
        let c = o.norm_squared() - 1.0;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 || a == 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
    }

    /// Whether the open segment from `from` to `to` passes through the shell
    /// interior (touching endpoints excluded).
    pub fn blocks(&self, from: &Point, to: &Point) -> bool {
        let dir = to - from;
        match self.ray_hits(from, &dir) {
            Some((t0, t1)) => t1 > 1e-9 && t0 < 1.0 - 1e-9 && t1 - t0 > 1e-9,
            None => false,
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.semi_axes.max()
    }

    /// Approximate surface area (Knud Thomsen's formula, <1.1 % error).
    pub fn area(&self) -> f64 {
        const P: f64 = 1.6075;
        let [a, b, c] = [self.semi_axes.x, self.semi_axes.y, self.semi_axes.z];
        let m = ((a * b).powf(P) + (a * c).powf(P) + (b * c).powf(P)) / 3.0;
        4.0 * PI * m.powf(1.0 / P)
    }
}

/// Body-frame seed positions on rings of constant height spaced `pitch`
/// apart along the meridian, each ring filled at the same pitch. Alternate
/// rings are staggered by half a step.
pub fn ring_lattice(semi_axes: &Vector3<f64>, pitch: f64) -> Vec<Vector3<f64>> {
    let (a, b, c) = (semi_axes.x, semi_axes.y, semi_axes.z);
    // meridian arc length as a function of polar angle, on the x-z section
    const STEPS: usize = 2000;
    let mut arc = Vec::with_capacity(STEPS + 1);
    arc.push(0.0);
    let mut s = 0.0;
    for k in 1..=STEPS {
        let t0 = PI * (k - 1) as f64 / STEPS as f64;
        let t1 = PI * k as f64 / STEPS as f64;
        let p0 = (a * t0.sin(), c * t0.cos());
        let p1 = (a * t1.sin(), c * t1.cos());
        s += ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
        arc.push(s);
    }
    let total = s;
    let rings = ((total / pitch).round() as usize).max(1);
    let ring_step = total / rings as f64;
    let mut out = Vec::new();
    for ring in 0..rings {
        let target = ring_step * (ring as f64 + 0.5);
        let k = arc.partition_point(|&x| x < target).clamp(1, STEPS);
        let frac = (target - arc[k - 1]) / (arc[k] - arc[k - 1]);
        let theta = PI * (k as f64 - 1.0 + frac) / STEPS as f64;
        let circumference = {
            // Ramanujan's approximation for the ring ellipse
            let (ra, rb) = (a * theta.sin(), b * theta.sin());
            let h = ((ra - rb) / (ra + rb)).powi(2);
            PI * (ra + rb) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
        };
        let count = ((circumference / pitch).round() as usize).max(1);
        let offset = if ring % 2 == 0 { 0.0 } else { 0.5 };
        for j in 0..count {
            let phi = 2.0 * PI * (j as f64 + offset) / count as f64;
            out.push(Vector3::new(
                a * theta.sin() * phi.cos(),
                b * theta.sin() * phi.sin(),
                c * theta.cos(),
            ));
        }
    }
    out
}

/// Pitch that places roughly `count` seeds on the shell.
pub fn pitch_for_count(shell: &Ellipsoid, count: usize) -> f64 {
    (shell.area() / count as f64).sqrt()
}

/// Displaces lattice points tangentially by `sigma` and re-projects them onto
/// the shell.
pub fn jitter_on_shell<R: Rng + ?Sized>(
    shell: &Ellipsoid,
    body_points: &[Vector3<f64>],
    sigma: f64,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    body_points
        .iter()
        .map(|q| {
            let n: Vector3<f64> = Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            shell.onto_surface(&(q + n * sigma))
        })
        .collect()
}

/// Uniform samples on a sphere, quasi-regular (Fibonacci spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Area-uniform samples on the shell, by rejection on the normal-scaled
/// sphere parametrization.
pub fn uniform_on_shell<R: Rng + ?Sized>(shell: &Ellipsoid, n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    let a = shell.semi_axes;
    let g_max = a.x.max(a.y).max(a.z).powi(2);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d: Vector3<f64> = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let Some(u) = d.try_normalize(1e-12) else {
            continue;
        };
        // local area scale of the map u -> diag(a)·u
        let g = ((a.y * a.z * u.x).powi(2) + (a.x * a.z * u.y).powi(2) + (a.x * a.y * u.z).powi(2)).sqrt();
        if rng.random::<f64>() * g_max <= g {
            out.push(u.component_mul(&a));
        }
    }
    out
}

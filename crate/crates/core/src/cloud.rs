//! Point clouds, voxel-grid downsampling and ASCII PLY I/O.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point, PoseSE3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Per-point RGB, same length as `points` when present.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            colors: None,
        }
    }

    pub fn with_colors(points: Vec<Point>, colors: Vec<[u8; 3]>) -> Self {
        assert_eq!(points.len(), colors.len(), "one color per point");
        Self {
            points,
            colors: Some(colors),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite())
    }

    pub fn transformed(&self, pose: &PoseSE3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
            colors: self.colors.clone(),
        }
    }

    /// Appends `other`; colors survive only if both clouds carry them.
    pub fn extend(&mut self, other: &PointCloud) {
        let was_empty = self.points.is_empty();
        self.points.extend_from_slice(&other.points);
        self.colors = match (self.colors.take(), &other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if was_empty => Some(b.clone()),
            _ => None,
        };
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point::from(sum / self.points.len() as f64))
    }
}

fn voxel_key(p: &Point, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Replaces the points of every occupied `cell`-sized voxel by their centroid
/// (and mean color). Output is ordered by voxel index.
pub fn voxel_downsample(cloud: &PointCloud, cell: f64) -> PointCloud {
    assert!(cell > 0.0, "voxel cell must be positive");
    struct Acc {
        sum: nalgebra::Vector3<f64>,
        rgb: [u64; 3],
        n: usize,
    }
    let mut cells: BTreeMap<(i64, i64, i64), Acc> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let acc = cells.entry(voxel_key(p, cell)).or_insert(Acc {
            sum: nalgebra::Vector3::zeros(),
            rgb: [0; 3],
            n: 0,
        });
        acc.sum += p.coords;
        acc.n += 1;
        if let Some(colors) = &cloud.colors {
            for (c, v) in acc.rgb.iter_mut().zip(colors[i]) {
                *c += v as u64;
            }
        }
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut colors = cloud.colors.as_ref().map(|_| Vec::with_capacity(cells.len()));
    for acc in cells.values() {
        if acc.n == 1 {
            points.push(Point::from(acc.sum));
        } else {
            points.push(Point::from(acc.sum / acc.n as f64));
        }
        if let Some(out) = colors.as_mut() {
            let n = acc.n as u64;
            out.push(acc.rgb.map(|c| ((c + n / 2) / n) as u8));
        }
    }
    PointCloud { points, colors }
}

const DEFAULT_RGB: [u8; 3] = [200, 200, 200];

/// Serializes to ASCII PLY with `x y z red green blue` vertex properties.
/// Coordinates are printed in shortest round-trip form.
pub fn to_ply_string(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(64 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str(
        "property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (i, p) in cloud.points.iter().enumerate() {
        let rgb = cloud.colors.as_ref().map_or(DEFAULT_RGB, |c| c[i]);
        let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, rgb[0], rgb[1], rgb[2]);
    }
    out
}

/// Writes ASCII PLY, creating parent directories as needed.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    crate::io::write_file(path, &to_ply_string(cloud))
}

/// Parses ASCII PLY vertices. Requires `x y z`; picks up `red green blue`
/// when declared; other vertex properties are skipped.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let bad = |reason: &str| Error::parse("PLY", reason);
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing `ply` magic"));
    }
    let mut vertex_count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        let line = lines.next().ok_or_else(|| bad("missing end_header"))?.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(bad("only ascii PLY is supported"));
                }
            }
            Some("element") => {
                in_vertex = tok.next() == Some("vertex");
                if in_vertex {
                    let n = tok
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| bad("bad vertex count"))?;
                    vertex_count = Some(n);
                }
            }
            Some("property") if in_vertex => {
                let name = tok.last().ok_or_else(|| bad("bad property line"))?;
                props.push(name.to_string());
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let n = vertex_count.ok_or_else(|| bad("no vertex element"))?;
    let idx = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(bad("vertex element lacks x/y/z")),
    };
    let rgb_idx = match (idx("red"), idx("green"), idx("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let mut points = Vec::with_capacity(n);
    let mut colors = rgb_idx.map(|_| Vec::with_capacity(n));
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| bad(&format!("expected {n} vertices, got {row}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() < props.len() {
            return Err(bad(&format!("vertex {row} has too few values")));
        }
        let f = |i: usize| {
            vals[i]
                .parse::<f64>()
                .map_err(|e| bad(&format!("vertex {row}: {e}")))
        };
        let p = Point::new(f(ix)?, f(iy)?, f(iz)?);
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(bad(&format!("vertex {row} is not finite")));
        }
        points.push(p);
        if let (Some(out), Some(ids)) = (colors.as_mut(), rgb_idx) {
            let mut c = [0u8; 3];
            for (k, &i) in ids.iter().enumerate() {
                c[k] = vals[i]
                    .parse::<u8>()
                    .map_err(|e| bad(&format!("vertex {row}: {e}")))?;
            }
            out.push(c);
        }
    }
    Ok(PointCloud { points, colors })
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text)
}

//! Small file-format helpers shared by the scene, pipeline and report code.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PoseSE3;

/// Rounds to `digits` significant decimal digits. Reports pass every float
/// through this so that output files are stable across platforms.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

pub fn round9(x: f64) -> f64 {
    round_sig(x, 9)
}

/// Trajectory text: one `frame tx ty tz qx qy qz qw` line per pose.
pub fn trajectory_to_string(poses: &[(usize, PoseSE3)]) -> String {
    let mut s = String::new();
    for (frame, p) in poses {
        let [w, x, y, z] = p.wxyz();
        let t = p.translation;
        writeln!(s, "{frame} {} {} {} {x} {y} {z} {w}", t.x, t.y, t.z).expect("write to string");
    }
    s
}

pub fn parse_trajectory(text: &str) -> Result<Vec<(usize, PoseSE3)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::parse(format!("trajectory line {}", lineno + 1), reason);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", fields.len())));
        }
        let frame: usize = fields[0].parse().map_err(|e| bad(format!("frame id: {e}")))?;
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|e| bad(format!("`{f}`: {e}")))?;
        }
        let pose = PoseSE3::from_wxyz([v[6], v[3], v[4], v[5]], [v[0], v[1], v[2]])
            .map_err(|e| bad(e.to_string()))?;
        out.push((frame, pose));
    }
    Ok(out)
}

pub fn write_trajectory(path: &Path, poses: &[(usize, PoseSE3)]) -> Result<()> {
    write_file(path, &trajectory_to_string(poses))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(usize, PoseSE3)>> {
    parse_trajectory(&read_file(path)?)
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, what: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{what} line {}", i + 1), e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn rounding_keeps_nine_digits() {
        assert_eq!(round9(0.78), 0.78);
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
        assert_eq!(round9(123456789012.0), 123456789000.0);
        assert_eq!(round9(0.0), 0.0);
    }

    #[test]
    fn trajectory_rejects_short_lines() {
        assert!(parse_trajectory("0 1 2 3\n").is_err());
        assert!(parse_trajectory("0 0 0 0 0 0 0 2\n").is_err());
        assert!(parse_trajectory("# header\n\n").unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn trajectory_round_trip(
            axis in prop::array::uniform3(-3.0f64..3.0),
            t in prop::array::uniform3(-100.0f64..100.0),
            frame in 0usize..100000,
        ) {
            let p = PoseSE3::from_scaled_axis(Vector3::from(axis), Vector3::from(t));
            let back = parse_trajectory(&trajectory_to_string(&[(frame, p)])).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].0, frame);
            prop_assert!((back[0].1.translation - p.translation).norm() < 1e-12);
            prop_assert!(back[0].1.rotation.angle_to(&p.rotation) < 1e-7);
        }
    }
}

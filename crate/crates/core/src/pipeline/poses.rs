//! Pose files: one light-field centre pose per frame, 16 numbers per line
//! giving a row-major 4×4 rigid transform. Blank lines and `#` comments are
//! ignored.

use std::path::Path;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::rays::check_rigid;

pub fn parse_poses(text: &str) -> Result<Vec<Matrix4<f64>>> {
    let mut poses = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Poses(format!("line {}: {s:?} is not a number", n + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 16 {
            return Err(Error::Poses(format!(
                "line {}: expected 16 values, found {}",
                n + 1,
                vals.len()
            )));
        }
        let m = Matrix4::from_row_slice(&vals);
        check_rigid(&m).map_err(|_| Error::Poses(format!("line {}: pose is not rigid", n + 1)))?;
        poses.push(m);
    }
    if poses.is_empty() {
        return Err(Error::Poses("no poses found".into()));
    }
    Ok(poses)
}

pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<Matrix4<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_poses(&text)
}

pub fn format_pose(m: &Matrix4<f64>) -> String {
    let mut vals = Vec::with_capacity(16);
    for r in 0..4 {
        for c in 0..4 {
            vals.push(format!("{}", m[(r, c)]));
        }
    }
    vals.join(" ")
}

/// Camera at `distance` on the +z axis looking at the origin, orbited by
/// `yaw` radians about the vertical (x) axis.
pub fn orbit_pose(distance: f64, yaw: f64) -> Matrix4<f64> {
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::x_axis(), yaw);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
    m.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(rot * nalgebra::Vector3::new(0.0, 0.0, distance)));
    m
}

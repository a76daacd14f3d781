//! Look-at camera and pinhole projection.

use serde::{Deserialize, Serialize};

use super::geometry::{add, cross, dot, normalize, scale, sub, Vec3};
use super::RendererError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_dir: Vec3,
    pub up: Vec3,
    pub focal_length: f64,
    pub sensor_width: f64,
    pub image_dims: [u32; 2],
}

impl CameraPose {
    pub fn right(&self) -> Vec3 {
        cross(self.look_dir, self.up)
    }

    /// Focal length in pixels; the sensor width spans the image width.
    pub fn focal_px(&self) -> f64 {
        self.focal_length / self.sensor_width * f64::from(self.image_dims[0])
    }

    /// (right, up, forward) coordinates of a world point.
    pub fn to_camera(&self, point: Vec3) -> Vec3 {
        let d = sub(point, self.position);
        [dot(d, self.right()), dot(d, self.up), dot(d, self.look_dir)]
    }
}

/// Places the camera at `center + dir·distance` looking back at `center`,
/// with roll fixed by world +Z.
pub fn compute_camera_pose(
    center: Vec3,
    offset_direction: Vec3,
    distance: f64,
    focal_length: f64,
    sensor_width: f64,
    image_dims: [u32; 2],
) -> Result<CameraPose, RendererError> {
    let dir = normalize(offset_direction).ok_or(RendererError::ZeroDirection)?;
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(RendererError::InvalidRanges(format!("camera distance {distance} must be positive")));
    }
    let look_dir = scale(dir, -1.0);
    let world_up = [0.0, 0.0, 1.0];
    // Looking straight up or down leaves +Z degenerate; fall back to +Y.
    let up = normalize(sub(world_up, scale(look_dir, dot(world_up, look_dir))))
        .filter(|_| look_dir[2].abs() < 1.0 - 1e-12)
        .unwrap_or_else(|| {
            let y = [0.0, 1.0, 0.0];
            normalize(sub(y, scale(look_dir, dot(y, look_dir)))).expect("+Y is orthogonal to a vertical look")
        });
    Ok(CameraPose {
        position: add(center, scale(dir, distance)),
        look_dir,
        up,
        focal_length,
        sensor_width,
        image_dims,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    Behind,
}

pub fn project_point(pose: &CameraPose, point: Vec3) -> Projection {
    let [x, y, z] = pose.to_camera(point);
    if z <= 0.0 {
        return Projection::Behind;
    }
    let f = pose.focal_px();
    Projection::Pixel {
        u: f64::from(pose.image_dims[0]) / 2.0 + f * x / z,
        v: f64::from(pose.image_dims[1]) / 2.0 - f * y / z,
    }
}

/// True when every corner lies in front of the camera and strictly inside
/// the frame.
pub fn check_full_visibility(pose: &CameraPose, corners: &[Vec3]) -> bool {
    let (w, h) = (f64::from(pose.image_dims[0]), f64::from(pose.image_dims[1]));
    corners.iter().all(|c| match project_point(pose, *c) {
        Projection::Pixel { u, v } => u > 0.0 && u < w && v > 0.0 && v < h,
        Projection::Behind => false,
    })
}

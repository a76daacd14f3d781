//! Sampling intervals for scene parameters.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::geometry::{Axis, Vec3};
use super::RendererError;
use crate::rng::Rng;

/// Closed interval written as `[lo, hi]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Uniform draw; returns `lo` exactly for a degenerate interval.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let t: f64 = rng.gen();
        (self.lo + (self.hi - self.lo) * t).min(self.hi)
    }
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Integer interval for pixel lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct IntInterval {
    pub lo: u32,
    pub hi: u32,
}

impl From<[u32; 2]> for IntInterval {
    fn from([lo, hi]: [u32; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<IntInterval> for [u32; 2] {
    fn from(i: IntInterval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderRanges {
    /// Camera distance in multiples of the device's largest extent.
    pub distance_multiplier: Interval,
    pub rotation_x: Interval,
    pub rotation_y: Interval,
    pub rotation_z: Interval,
    pub focal_length: Interval,
    pub sensor_width: f64,
    pub resolution: [u32; 2],
    /// Direction from the object centre towards the camera.
    pub camera_direction: Vec3,
    /// Light offset per axis, in multiples of the largest extent.
    pub light_offset: [Interval; 3],
    pub light_color: Interval,
    pub light_energy: Interval,
    pub falloff: Interval,
    pub radius: Interval,
    pub blur_probability: f64,
    pub blur_length: IntInterval,
    /// Depth normalisation range in multiples of the largest extent.
    pub depth_bounds: Interval,
}

impl Default for RenderRanges {
    fn default() -> Self {
        Self {
            distance_multiplier: Interval::new(8.0, 10.0),
            rotation_x: Interval::new(-30.0, 30.0),
            rotation_y: Interval::new(-30.0, 30.0),
            rotation_z: Interval::new(-30.0, 30.0),
            focal_length: Interval::new(35.0, 70.0),
            sensor_width: 36.0,
            resolution: [1024, 1024],
            camera_direction: [0.0, -1.0, 0.25],
            light_offset: [Interval::new(-1.5, 1.5), Interval::new(-3.0, -1.0), Interval::new(1.0, 3.0)],
            light_color: Interval::new(0.85, 1.0),
            light_energy: Interval::new(50.0, 500.0),
            falloff: Interval::new(0.0, 1.0),
            radius: Interval::new(0.05, 0.5),
            blur_probability: 0.2,
            blur_length: IntInterval { lo: 5, hi: 25 },
            depth_bounds: Interval::new(0.0, 20.0),
        }
    }
}

impl RenderRanges {
    pub fn rotation(&self, axis: Axis) -> Interval {
        match axis {
            Axis::X => self.rotation_x,
            Axis::Y => self.rotation_y,
            Axis::Z => self.rotation_z,
        }
    }

    pub fn validate(&self) -> Result<(), RendererError> {
        let bad = |field: &str, why: &str| Err(RendererError::InvalidRanges(format!("{field}: {why}")));
        let intervals = [
            ("distance_multiplier", self.distance_multiplier),
            ("rotation_x", self.rotation_x),
            ("rotation_y", self.rotation_y),
            ("rotation_z", self.rotation_z),
            ("focal_length", self.focal_length),
            ("light_offset[0]", self.light_offset[0]),
            ("light_offset[1]", self.light_offset[1]),
            ("light_offset[2]", self.light_offset[2]),
            ("light_color", self.light_color),
            ("light_energy", self.light_energy),
            ("falloff", self.falloff),
            ("radius", self.radius),
            ("depth_bounds", self.depth_bounds),
        ];
        for (field, i) in intervals {
            if !i.is_valid() {
                return bad(field, "expected finite lo <= hi");
            }
        }
        if self.distance_multiplier.lo <= 0.0 {
            return bad("distance_multiplier", "must be positive");
        }
        if self.focal_length.lo <= 0.0 {
            return bad("focal_length", "must be positive");
        }
        if !(self.sensor_width.is_finite() && self.sensor_width > 0.0) {
            return bad("sensor_width", "must be positive");
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return bad("resolution", "must be non-zero");
        }
        if self.light_color.lo < 0.0 {
            return bad("light_color", "must be non-negative");
        }
        if self.depth_bounds.lo == self.depth_bounds.hi {
            return bad("depth_bounds", "near and far must differ");
        }
        if !(0.0..=1.0).contains(&self.blur_probability) {
            return bad("blur_probability", "must lie in [0, 1]");
        }
        if self.blur_length.lo == 0 || self.blur_length.lo > self.blur_length.hi {
            return bad("blur_length", "expected 1 <= lo <= hi");
        }
        if !self.camera_direction.iter().all(|c| c.is_finite()) || self.camera_direction == [0.0; 3] {
            return bad("camera_direction", "must be a finite non-zero vector");
        }
        Ok(())
    }
}

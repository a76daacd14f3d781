//! Random scene parameters and the visibility-driven rejection loop.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::camera::{check_full_visibility, compute_camera_pose, CameraPose};
use super::device::DeviceModel;
use super::geometry::{scale, Axis, AxisRotation, Vec3};
use super::ranges::RenderRanges;
use super::RendererError;
use crate::rng::Rng;

pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

/// Near-grey body colours (sRGB).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Palette(pub Vec<[u8; 3]>);

impl Default for Palette {
    fn default() -> Self {
        Self(vec![
            [40, 40, 42],
            [58, 58, 60],
            [80, 80, 78],
            [105, 106, 108],
            [128, 128, 128],
            [150, 148, 145],
            [175, 175, 178],
            [200, 200, 196],
            [222, 222, 220],
        ])
    }
}

impl Palette {
    pub fn load(path: &Path) -> Result<Self, RendererError> {
        let text = fs::read_to_string(path).map_err(|e| RendererError::io(path, e))?;
        let palette: Palette = serde_json::from_str(&text).map_err(|e| RendererError::json(path, e))?;
        if palette.0.is_empty() {
            return Err(RendererError::InvalidRanges(format!("{}: palette is empty", path.display())));
        }
        Ok(palette)
    }

    pub fn choose(&self, rng: &mut Rng) -> [u8; 3] {
        self.0[rng.gen_range(0..self.0.len())]
    }
}

/// The independent draws behind one scene. Everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParameters {
    pub distance_multiplier: f64,
    pub rotation: AxisRotation,
    pub focal_length: f64,
    /// In multiples of the device's largest extent.
    pub light_offset: Vec3,
    pub light_color: [f64; 3],
    pub light_energy: f64,
    pub falloff: f64,
    pub radius: f64,
    pub body_color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSample {
    pub params: SceneParameters,
    pub camera: CameraPose,
    /// World position; the device's bounds centre sits at the origin.
    pub light_position: Vec3,
}

impl SceneSample {
    pub fn resolve(params: SceneParameters, ranges: &RenderRanges, device: &DeviceModel) -> Result<Self, RendererError> {
        let max_dim = device.max_dim();
        let camera = compute_camera_pose(
            [0.0; 3],
            ranges.camera_direction,
            params.distance_multiplier * max_dim,
            params.focal_length,
            ranges.sensor_width,
            ranges.resolution,
        )?;
        Ok(Self {
            params,
            camera,
            light_position: scale(params.light_offset, max_dim),
        })
    }

    pub fn is_fully_visible(&self, device: &DeviceModel) -> bool {
        check_full_visibility(&self.camera, &device.bounds.rotated_corners(&self.params.rotation))
    }
}

pub fn sample_parameters(ranges: &RenderRanges, palette: &Palette, rng: &mut Rng) -> SceneParameters {
    let axis = Axis::ALL[rng.gen_range(0..3)];
    let degrees = ranges.rotation(axis).sample(rng);
    let distance_multiplier = ranges.distance_multiplier.sample(rng);
    let focal_length = ranges.focal_length.sample(rng);
    let light_offset = [
        ranges.light_offset[0].sample(rng),
        ranges.light_offset[1].sample(rng),
        ranges.light_offset[2].sample(rng),
    ];
    let light_color = [
        ranges.light_color.sample(rng),
        ranges.light_color.sample(rng),
        ranges.light_color.sample(rng),
    ];
    SceneParameters {
        distance_multiplier,
        rotation: AxisRotation { axis, degrees },
        focal_length,
        light_offset,
        light_color,
        light_energy: ranges.light_energy.sample(rng),
        falloff: ranges.falloff.sample(rng),
        radius: ranges.radius.sample(rng),
        body_color: palette.choose(rng),
    }
}

pub fn sample_scene(
    ranges: &RenderRanges,
    device: &DeviceModel,
    palette: &Palette,
    rng: &mut Rng,
) -> Result<SceneSample, RendererError> {
    SceneSample::resolve(sample_parameters(ranges, palette, rng), ranges, device)
}

/// Draws scenes until one keeps the whole device in frame. Returns the
/// accepted sample and the number of attempts it took.
pub fn resample_until_visible(
    ranges: &RenderRanges,
    device: &DeviceModel,
    palette: &Palette,
    rng: &mut Rng,
    max_attempts: usize,
) -> Result<(SceneSample, usize), RendererError> {
    for attempt in 1..=max_attempts {
        let sample = sample_scene(ranges, device, palette, rng)?;
        if sample.is_fully_visible(device) {
            log::debug!("{}: visible scene after {attempt} attempt(s)", device.name);
            return Ok((sample, attempt));
        }
    }
    Err(RendererError::VisibilityExhausted {
        device: device.name.clone(),
        attempts: max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::geometry::Aabb;
    use crate::renderer::ranges::Interval;
    use crate::rng::seeded;

    fn device(size: f64) -> DeviceModel {
        DeviceModel::new(
            "meter",
            "meter.obj",
            Some(0),
            0,
            Aabb {
                min: [0.0, 0.0, 0.0],
                max: [size * 0.5, size * 0.3, size],
            },
        )
        .unwrap()
    }

    #[test]
    fn degenerate_ranges_fix_everything_but_the_axis() {
        let mut r = RenderRanges::default();
        for i in [
            &mut r.distance_multiplier,
            &mut r.rotation_x,
            &mut r.rotation_y,
            &mut r.rotation_z,
            &mut r.focal_length,
            &mut r.light_color,
            &mut r.light_energy,
            &mut r.falloff,
            &mut r.radius,
        ] {
            *i = Interval::point(i.lo);
        }
        r.light_offset = [Interval::point(0.5); 3];
        let palette = Palette(vec![[9, 9, 9]]);
        let d = device(0.2);
        let mut rng = seeded(1);
        let first = sample_scene(&r, &d, &palette, &mut rng).unwrap();
        for _ in 0..50 {
            let s = sample_scene(&r, &d, &palette, &mut rng).unwrap();
            assert_eq!(s.camera, first.camera);
            assert_eq!(s.params.rotation.degrees, -30.0);
            assert_eq!(s.params.body_color, [9, 9, 9]);
            assert_eq!(s.light_position, [0.1; 3]);
        }
    }

    #[test]
    fn impossible_ranges_exhaust() {
        let r = RenderRanges {
            distance_multiplier: Interval::new(0.01, 0.01),
            ..RenderRanges::default()
        };
        let err = resample_until_visible(&r, &device(1.0), &Palette::default(), &mut seeded(2), 7).unwrap_err();
        assert!(matches!(err, RendererError::VisibilityExhausted { attempts: 7, .. }));
    }

    #[test]
    fn default_ranges_accept_first_try() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let (_, attempts) =
                resample_until_visible(&RenderRanges::default(), &device(0.3), &Palette::default(), &mut rng, 100)
                    .unwrap();
            assert_eq!(attempts, 1);
        }
    }
}

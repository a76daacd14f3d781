//! Engine-agnostic scene description handed to a render backend.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::camera::CameraPose;
use super::device::DeviceModel;
use super::geometry::{Aabb, AxisRotation, Vec3};
use super::ranges::RenderRanges;
use super::sampling::SceneSample;
use super::RendererError;

pub const DIRECTIVE_VERSION: u32 = 1;

const BASE_UV: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// Image corner `i` (counter-clockwise from bottom-left) goes to face UV
/// corner `(i + rotation) % 4`.
pub fn uv_corner_mapping(rotation: u8) -> Result<[usize; 4], RendererError> {
    if rotation > 3 {
        return Err(RendererError::InvalidRotation(rotation));
    }
    Ok(std::array::from_fn(|i| (i + usize::from(rotation)) % 4))
}

/// UV coordinates for the four loop corners of the display face.
pub fn compute_uv_transform(rotation: u8) -> Result<[[f64; 2]; 4], RendererError> {
    Ok(uv_corner_mapping(rotation)?.map(|j| BASE_UV[j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDirectives {
    pub version: u32,
    pub id: String,
    pub model: ModelDirective,
    pub display: DisplayDirective,
    pub camera: CameraPose,
    pub light: LightDirective,
    pub render: RenderDirective,
    pub outputs: OutputDirective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDirective {
    pub mesh: String,
    pub face_index: u32,
    /// Mesh-space bounds; the engine recentres the mesh on their centre.
    pub bounds: Aabb,
    pub rotation: AxisRotation,
    pub body_color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayDirective {
    pub texture: String,
    pub rotation: u8,
    pub uv: [[f64; 2]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightDirective {
    pub position: Vec3,
    pub color: [f64; 3],
    pub energy: f64,
    pub falloff: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderDirective {
    pub resolution: [u32; 2],
    /// Camera-space depth in meters mapped to 0 and 1.
    pub depth_bounds: [f64; 2],
    pub passes: Passes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Passes {
    pub rgb: bool,
    pub depth: bool,
    #[serde(default)]
    pub albedo: bool,
    #[serde(default)]
    pub shading: bool,
    #[serde(default)]
    pub normal: bool,
}

impl Default for Passes {
    fn default() -> Self {
        Self {
            rgb: true,
            depth: true,
            albedo: false,
            shading: false,
            normal: false,
        }
    }
}

/// Output files, relative to the output root given to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDirective {
    pub rgb: String,
    pub depth: String,
}

impl OutputDirective {
    pub fn for_id(id: &str) -> Self {
        Self {
            rgb: format!("renders/{id}.png"),
            depth: format!("renders/{id}_depth.png"),
        }
    }
}

/// Path as written into documents: forward slashes on every platform.
pub fn portable_path(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

pub fn build_scene_directives(
    id: &str,
    sample: &SceneSample,
    device: &DeviceModel,
    texture: &str,
    ranges: &RenderRanges,
    passes: Passes,
) -> Result<SceneDirectives, RendererError> {
    let face_index = device.face_index()?;
    let p = &sample.params;
    let max_dim = device.max_dim();
    Ok(SceneDirectives {
        version: DIRECTIVE_VERSION,
        id: id.to_owned(),
        model: ModelDirective {
            mesh: portable_path(&device.mesh_path),
            face_index,
            bounds: device.bounds,
            rotation: p.rotation,
            body_color: p.body_color,
        },
        display: DisplayDirective {
            texture: texture.to_owned(),
            rotation: device.initial_display_rotation,
            uv: compute_uv_transform(device.initial_display_rotation)?,
        },
        camera: sample.camera,
        light: LightDirective {
            position: sample.light_position,
            color: p.light_color,
            energy: p.light_energy,
            falloff: p.falloff,
            radius: p.radius,
        },
        render: RenderDirective {
            resolution: ranges.resolution,
            depth_bounds: [ranges.depth_bounds.lo * max_dim, ranges.depth_bounds.hi * max_dim],
            passes,
        },
        outputs: OutputDirective::for_id(id),
    })
}

impl SceneDirectives {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("directives serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RendererError> {
        let d: Self = serde_json::from_str(text).map_err(|e| RendererError::json(Path::new("<directives>"), e))?;
        if d.version != DIRECTIVE_VERSION {
            return Err(RendererError::UnsupportedDirectiveVersion(d.version));
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uv_rotation_group() {
        assert_eq!(uv_corner_mapping(0).unwrap(), [0, 1, 2, 3]);
        assert_eq!(compute_uv_transform(0).unwrap(), BASE_UV);
        assert_eq!(uv_corner_mapping(2).unwrap(), [2, 3, 0, 1]);
        let once = uv_corner_mapping(1).unwrap();
        let mut composed = [0, 1, 2, 3];
        for _ in 0..4 {
            composed = composed.map(|i| once[i]);
        }
        assert_eq!(composed, [0, 1, 2, 3]);
        assert!(matches!(compute_uv_transform(4), Err(RendererError::InvalidRotation(4))));
    }

    #[test]
    fn version_is_checked() {
        let text = r#"{"version": 2}"#;
        assert!(SceneDirectives::from_json(text).is_err());
    }
}

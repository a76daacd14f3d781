//! Device models and the registry file that lists them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::geometry::Aabb;
use super::RendererError;

/// One registry entry as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub name: String,
    pub mesh: PathBuf,
    #[serde(default)]
    pub face_index: Option<u32>,
    #[serde(default)]
    pub display_rotation: u8,
    /// Overrides bounds read from the mesh; required for non-OBJ meshes.
    #[serde(default)]
    pub bounds: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub mesh_path: PathBuf,
    pub display_face_index: Option<u32>,
    pub initial_display_rotation: u8,
    pub bounds: Aabb,
}

impl DeviceModel {
    pub fn new(
        name: impl Into<String>,
        mesh_path: impl Into<PathBuf>,
        display_face_index: Option<u32>,
        initial_display_rotation: u8,
        bounds: Aabb,
    ) -> Result<Self, RendererError> {
        let name = name.into();
        if initial_display_rotation > 3 {
            return Err(RendererError::InvalidRotation(initial_display_rotation));
        }
        let extents = bounds.extents();
        if !extents.iter().all(|e| e.is_finite() && *e >= 0.0) || bounds.max_dim() <= 0.0 {
            return Err(RendererError::InvalidDevice {
                name,
                reason: format!("degenerate bounds {bounds:?}"),
            });
        }
        Ok(Self {
            name,
            mesh_path: mesh_path.into(),
            display_face_index,
            initial_display_rotation,
            bounds,
        })
    }

    pub fn max_dim(&self) -> f64 {
        self.bounds.max_dim()
    }

    pub fn face_index(&self) -> Result<u32, RendererError> {
        self.display_face_index
            .ok_or_else(|| RendererError::MissingFaceIndex(self.name.clone()))
    }
}

/// Axis-aligned bounds of the `v` records in a Wavefront OBJ file.
pub fn obj_bounds(path: &Path) -> Result<Aabb, RendererError> {
    let text = fs::read_to_string(path).map_err(|e| RendererError::io(path, e))?;
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut seen = false;
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("v") {
            continue;
        }
        let coords: Vec<f64> = parts.take(3).map(str::parse).collect::<Result<_, _>>().map_err(|_| {
            RendererError::InvalidDevice {
                name: path.display().to_string(),
                reason: format!("bad vertex on line {}", n + 1),
            }
        })?;
        if coords.len() != 3 {
            return Err(RendererError::InvalidDevice {
                name: path.display().to_string(),
                reason: format!("vertex on line {} has {} coordinates", n + 1, coords.len()),
            });
        }
        for i in 0..3 {
            min[i] = min[i].min(coords[i]);
            max[i] = max[i].max(coords[i]);
        }
        seen = true;
    }
    if !seen {
        return Err(RendererError::InvalidDevice {
            name: path.display().to_string(),
            reason: "mesh has no vertices".into(),
        });
    }
    Ok(Aabb { min, max })
}

/// Reads a registry: a JSON array of entries (a single object is also
/// accepted). Mesh paths are resolved against the registry's directory.
pub fn load_device_registry(path: &Path) -> Result<Vec<DeviceModel>, RendererError> {
    let text = fs::read_to_string(path).map_err(|e| RendererError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| RendererError::json(path, e))?;
    let entries: Vec<DeviceEntry> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        _ => serde_json::from_value(value).map(|e| vec![e]),
    }
    .map_err(|e| RendererError::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut devices: Vec<DeviceModel> = Vec::with_capacity(entries.len());
    for entry in entries {
        if devices.iter().any(|d| d.name == entry.name) {
            return Err(RendererError::InvalidDevice {
                name: entry.name,
                reason: "listed twice".into(),
            });
        }
        let mesh_path = base.join(&entry.mesh);
        let bounds = match entry.bounds {
            Some(b) => b,
            None if mesh_path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")) => obj_bounds(&mesh_path)?,
            None => {
                return Err(RendererError::InvalidDevice {
                    name: entry.name,
                    reason: "bounds are required for non-OBJ meshes".into(),
                })
            }
        };
        devices.push(DeviceModel::new(
            entry.name,
            mesh_path,
            entry.face_index,
            entry.display_rotation,
            bounds,
        )?);
    }
    Ok(devices)
}

//! Batch rendering and the render record CSV.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::RenderBackend;
use super::device::DeviceModel;
use super::directives::{build_scene_directives, portable_path, Passes, SceneDirectives};
use super::geometry::{Axis, AxisRotation};
use super::postprocess::{apply_motion_blur, depth_to_mask, make_motion_kernel, save_depth_png, DEFAULT_MASK_EPSILON};
use super::ranges::RenderRanges;
use super::sampling::{resample_until_visible, Palette, SceneParameters, SceneSample};
use super::RendererError;
use crate::display::DisplayIndexEntry;
use crate::imageio::save_png;
use crate::rng::{stage, stream};

pub const RENDER_RECORDS_FILE: &str = "renders.csv";

/// Serializes a field as a JSON string inside one CSV cell.
pub(crate) mod json_cell {
    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Serialize, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&serde_json::to_string(value).map_err(serde::ser::Error::custom)?)
    }

    pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let text = String::deserialize(d)?;
        serde_json::from_str(&text).map_err(serde::de::Error::custom)
    }
}

/// One accepted render. Paths are relative to the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub id: String,
    pub device: String,
    pub mode: String,
    /// Display texture path.
    pub display_image: String,
    #[serde(with = "json_cell")]
    pub values: Vec<String>,
    #[serde(with = "json_cell")]
    pub units: Vec<String>,
    pub dist_mult: f64,
    pub rot_axis: Axis,
    pub rot_deg: f64,
    pub focal_mm: f64,
    pub light_x: f64,
    pub light_y: f64,
    pub light_z: f64,
    #[serde(with = "json_cell")]
    pub light_rgb: [f64; 3],
    pub light_energy: f64,
    pub falloff: f64,
    pub radius: f64,
    #[serde(with = "json_cell")]
    pub body_rgb: [u8; 3],
    pub blur: bool,
    pub blur_len: u32,
    pub blur_deg: f64,
    pub rgb_path: String,
    pub depth_path: String,
    pub mask_path: String,
    #[serde(with = "json_cell")]
    pub measurement_types: Vec<String>,
}

impl RenderRecord {
    pub fn parameters(&self) -> SceneParameters {
        SceneParameters {
            distance_multiplier: self.dist_mult,
            rotation: AxisRotation {
                axis: self.rot_axis,
                degrees: self.rot_deg,
            },
            focal_length: self.focal_mm,
            light_offset: [self.light_x, self.light_y, self.light_z],
            light_color: self.light_rgb,
            light_energy: self.light_energy,
            falloff: self.falloff,
            radius: self.radius,
            body_color: self.body_rgb,
        }
    }

    /// Rebuilds the scene directives this record was rendered from.
    pub fn directives(
        &self,
        device: &DeviceModel,
        ranges: &RenderRanges,
        passes: Passes,
    ) -> Result<SceneDirectives, RendererError> {
        let sample = SceneSample::resolve(self.parameters(), ranges, device)?;
        build_scene_directives(&self.id, &sample, device, &self.display_image, ranges, passes)
    }
}

pub fn write_render_records(path: &Path, records: &[RenderRecord]) -> Result<(), RendererError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RendererError::csv(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| RendererError::csv(path, e))?;
    }
    w.flush().map_err(|e| RendererError::io(path, e))
}

pub fn read_render_records(path: &Path) -> Result<Vec<RenderRecord>, RendererError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| RendererError::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| RendererError::csv(path, e))).collect()
}

/// Case-insensitive match against an exclusion list.
pub fn is_excluded(device: &str, exclude: &[String]) -> bool {
    exclude.iter().any(|e| e.trim().eq_ignore_ascii_case(device.trim()))
}

pub struct RenderBatch<'a> {
    pub devices: &'a [DeviceModel],
    pub displays: &'a [DisplayIndexEntry],
    /// Directory holding the display images named in `displays`.
    pub displays_dir: &'a Path,
    pub ranges: &'a RenderRanges,
    pub palette: &'a Palette,
    pub exclude: &'a [String],
    pub count: usize,
    pub seed: u64,
    pub workers: usize,
    pub max_attempts: usize,
    pub passes: Passes,
}

#[derive(Debug, Clone, Default)]
pub struct RenderSummary {
    pub records: Vec<RenderRecord>,
    /// Items dropped because no visible scene was found.
    pub skipped: usize,
}

impl RenderSummary {
    pub fn blurred(&self) -> usize {
        self.records.iter().filter(|r| r.blur).count()
    }
}

struct Candidate<'a> {
    device: &'a DeviceModel,
    displays: Vec<&'a DisplayIndexEntry>,
}

fn relative_to(path: &Path, root: &Path) -> PathBuf {
    path.strip_prefix(root).map_or_else(|_| path.to_path_buf(), Path::to_path_buf)
}

/// Renders `count` foregrounds into `out_root` and writes
/// `out_root/renders.csv`. Item `i` draws from its own random stream, so the
/// output does not depend on `workers`.
pub fn render_batch(
    batch: &RenderBatch,
    backend: &dyn RenderBackend,
    out_root: &Path,
) -> Result<RenderSummary, RendererError> {
    batch.ranges.validate()?;
    let candidates: Vec<Candidate> = batch
        .devices
        .iter()
        .filter(|d| {
            if is_excluded(&d.name, batch.exclude) {
                log::info!("excluding device {}", d.name);
                return false;
            }
            if d.display_face_index.is_none() {
                log::warn!("device {} has no display face index; skipped", d.name);
                return false;
            }
            true
        })
        .filter_map(|device| {
            let displays: Vec<_> = batch.displays.iter().filter(|e| e.device == device.name).collect();
            if displays.is_empty() {
                log::warn!("device {} has no displays; skipped", device.name);
                return None;
            }
            Some(Candidate { device, displays })
        })
        .collect();
    if candidates.is_empty() {
        return Err(RendererError::NoRenderableDevices);
    }
    for dir in ["renders", "directives"] {
        let p = out_root.join(dir);
        fs::create_dir_all(&p).map_err(|e| RendererError::io(&p, e))?;
    }
    let texture_dir = relative_to(batch.displays_dir, out_root);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch.workers.max(1))
        .build()
        .map_err(|e| RendererError::Worker(e.to_string()))?;
    let mut summary = RenderSummary::default();
    // Skipped items are replaced by further indices, up to a cap.
    let index_cap = batch.count.saturating_mul(4).saturating_add(16);
    let mut next = 0usize;
    while summary.records.len() < batch.count && next < index_cap {
        let want = (batch.count - summary.records.len()).min(index_cap - next);
        let results: Vec<Result<Option<RenderRecord>, RendererError>> = pool.install(|| {
            (next..next + want)
                .into_par_iter()
                .map(|i| render_item(batch, &candidates, &texture_dir, backend, out_root, i))
                .collect()
        });
        next += want;
        for r in results {
            match r? {
                Some(record) => summary.records.push(record),
                None => summary.skipped += 1,
            }
        }
    }
    if summary.records.len() < batch.count {
        log::warn!(
            "only {} of {} renders accepted after {} attempts",
            summary.records.len(),
            batch.count,
            next
        );
    }
    let csv_path = out_root.join(RENDER_RECORDS_FILE);
    write_render_records(&csv_path, &summary.records)?;
    log::info!(
        "render: {} accepted, {} skipped, {} blurred",
        summary.records.len(),
        summary.skipped,
        summary.blurred()
    );
    Ok(summary)
}

fn render_item(
    batch: &RenderBatch,
    candidates: &[Candidate],
    texture_dir: &Path,
    backend: &dyn RenderBackend,
    out_root: &Path,
    index: usize,
) -> Result<Option<RenderRecord>, RendererError> {
    let mut rng = stream(batch.seed, &[stage::RENDER, index as u64]);
    let candidate = &candidates[rng.gen_range(0..candidates.len())];
    let display = candidate.displays[rng.gen_range(0..candidate.displays.len())];
    let device = candidate.device;
    let sample = match resample_until_visible(batch.ranges, device, batch.palette, &mut rng, batch.max_attempts) {
        Ok((sample, _)) => sample,
        Err(e @ RendererError::VisibilityExhausted { .. }) => {
            log::warn!("item {index}: {e}; skipped");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let blur = rng.gen_bool(batch.ranges.blur_probability);
    let (blur_len, blur_deg) = if blur {
        let len = batch.ranges.blur_length;
        (rng.gen_range(len.lo..=len.hi), rng.gen_range(0.0..180.0))
    } else {
        (0, 0.0)
    };

    let id = format!("r{index:06}");
    let texture = portable_path(&texture_dir.join(&display.image));
    let directives = build_scene_directives(&id, &sample, device, &texture, batch.ranges, batch.passes)?;
    let directive_path = out_root.join("directives").join(format!("{id}.json"));
    fs::write(&directive_path, directives.to_json()).map_err(|e| RendererError::io(&directive_path, e))?;

    let output = backend.render(&directives, out_root)?;
    let mask = depth_to_mask(&output.depth, 1.0, DEFAULT_MASK_EPSILON);
    if !mask.pixels().any(|p| p[0] == 255) {
        log::warn!("item {index}: device {} not visible in depth pass; skipped", device.name);
        return Ok(None);
    }
    let rgb = if blur {
        apply_motion_blur(&output.rgb, &make_motion_kernel(blur_len, f64::to_radians(blur_deg)))
    } else {
        output.rgb
    };
    let mask_rel = format!("renders/{id}_mask.png");
    for (rel, result) in [
        (&directives.outputs.rgb, save_png(&rgb, &out_root.join(&directives.outputs.rgb))),
        (&mask_rel, save_png(&mask, &out_root.join(&mask_rel))),
    ] {
        result.map_err(|e| RendererError::image(&out_root.join(rel), e))?;
    }
    save_depth_png(&output.depth, &out_root.join(&directives.outputs.depth))?;

    let p = &sample.params;
    Ok(Some(RenderRecord {
        id,
        device: device.name.clone(),
        mode: display.mode.clone(),
        display_image: texture,
        values: display.values.clone(),
        units: display.units.clone(),
        dist_mult: p.distance_multiplier,
        rot_axis: p.rotation.axis,
        rot_deg: p.rotation.degrees,
        focal_mm: p.focal_length,
        light_x: p.light_offset[0],
        light_y: p.light_offset[1],
        light_z: p.light_offset[2],
        light_rgb: p.light_color,
        light_energy: p.light_energy,
        falloff: p.falloff,
        radius: p.radius,
        body_rgb: p.body_color,
        blur,
        blur_len,
        blur_deg,
        rgb_path: directives.outputs.rgb.clone(),
        depth_path: directives.outputs.depth.clone(),
        mask_path: mask_rel,
        measurement_types: display.measurement_types.clone(),
    }))
}

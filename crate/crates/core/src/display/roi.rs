//! Regions of interest on a display template.

use std::io::{BufRead, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::template::ModeMetadata;
use super::DisplayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x: u32,
    pub y: u32,
    #[serde(rename = "w")]
    pub width: u32,
    #[serde(rename = "h")]
    pub height: u32,
    pub label_index: usize,
}

impl RegionOfInterest {
    pub fn new(x: u32, y: u32, width: u32, height: u32, label_index: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
            label_index,
        }
    }

    pub fn right(&self) -> u64 {
        u64::from(self.x) + u64::from(self.width)
    }

    pub fn bottom(&self) -> u64 {
        u64::from(self.y) + u64::from(self.height)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && u64::from(x) < self.right() && y >= self.y && u64::from(y) < self.bottom()
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.width > 0 && self.height > 0 && self.right() <= u64::from(width) && self.bottom() <= u64::from(height)
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        u64::from(self.x) < other.right()
            && u64::from(other.x) < self.right()
            && u64::from(self.y) < other.bottom()
            && u64::from(other.y) < self.bottom()
    }
}

/// Checks bounds, pairwise disjointness, and that label indices cover
/// `0..roi_count` exactly once.
pub fn validate_rois(
    rois: &[RegionOfInterest],
    roi_count: usize,
    width: u32,
    height: u32,
) -> Result<(), DisplayError> {
    if rois.len() != roi_count {
        return Err(DisplayError::RoiCountMismatch {
            expected: roi_count,
            found: rois.len(),
        });
    }
    let mut used = vec![false; roi_count];
    for (i, r) in rois.iter().enumerate() {
        if !r.fits_in(width, height) {
            return Err(DisplayError::RoiOutOfBounds {
                roi: *r,
                width,
                height,
            });
        }
        if r.label_index >= roi_count || std::mem::replace(&mut used[r.label_index], true) {
            return Err(DisplayError::RoiLabel(r.label_index));
        }
        if let Some(other) = rois[..i].iter().find(|o| o.overlaps(r)) {
            return Err(DisplayError::RoiOverlap(*other, *r));
        }
    }
    Ok(())
}

/// Source of ROI rectangles when a template has none stored yet.
pub trait RoiPicker {
    fn pick(&mut self, image: &RgbImage, metadata: &ModeMetadata) -> Result<Vec<RegionOfInterest>, DisplayError>;
}

/// Returns a fixed list; used by tests and batch tooling.
pub struct ScriptedPicker {
    pub rois: Vec<RegionOfInterest>,
    pub calls: usize,
}

impl ScriptedPicker {
    pub fn new(rois: Vec<RegionOfInterest>) -> Self {
        Self { rois, calls: 0 }
    }
}

impl RoiPicker for ScriptedPicker {
    fn pick(&mut self, _: &RgbImage, _: &ModeMetadata) -> Result<Vec<RegionOfInterest>, DisplayError> {
        self.calls += 1;
        Ok(self.rois.clone())
    }
}

/// Prompts for `x y w h` per label on a text stream.
pub struct PromptPicker<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> PromptPicker<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }
}

impl<R: BufRead, W: Write> RoiPicker for PromptPicker<R, W> {
    fn pick(&mut self, image: &RgbImage, metadata: &ModeMetadata) -> Result<Vec<RegionOfInterest>, DisplayError> {
        let io_err = |e| DisplayError::io(Path::new("<prompt>"), e);
        let mut rois = Vec::with_capacity(metadata.roi_count);
        for (i, label) in metadata.labels.iter().enumerate() {
            loop {
                write!(
                    self.output,
                    "ROI {}/{} for {} [{}] on {}x{} image, as `x y w h`: ",
                    i + 1,
                    metadata.roi_count,
                    label.measurement_type,
                    label.unit,
                    image.width(),
                    image.height()
                )
                .map_err(io_err)?;
                self.output.flush().map_err(io_err)?;
                let mut line = String::new();
                if self.input.read_line(&mut line).map_err(io_err)? == 0 {
                    return Err(DisplayError::RoiCountMismatch {
                        expected: metadata.roi_count,
                        found: rois.len(),
                    });
                }
                let nums: Vec<u32> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                if let [x, y, w, h] = nums[..] {
                    rois.push(RegionOfInterest::new(x, y, w, h, i));
                    break;
                }
                writeln!(self.output, "expected four non-negative integers").map_err(io_err)?;
            }
        }
        Ok(rois)
    }
}

/// Returns the stored ROIs, or asks `picker` for new ones, validates them,
/// and records them in `metadata`.
pub fn define_rois(
    image: &RgbImage,
    metadata: &mut ModeMetadata,
    picker: &mut dyn RoiPicker,
) -> Result<Vec<RegionOfInterest>, DisplayError> {
    if let Some(rois) = &metadata.rois {
        validate_rois(rois, metadata.roi_count, image.width(), image.height())?;
        return Ok(rois.clone());
    }
    let rois = picker.pick(image, metadata)?;
    validate_rois(&rois, metadata.roi_count, image.width(), image.height())?;
    metadata.rois = Some(rois.clone());
    Ok(rois)
}

/// [`define_rois`] against a metadata file, persisting new ROIs into it.
pub fn define_rois_in_file(
    json_path: &Path,
    picker: &mut dyn RoiPicker,
) -> Result<Vec<RegionOfInterest>, DisplayError> {
    let mut metadata = ModeMetadata::load(json_path)?;
    let had_rois = metadata.rois.is_some();
    let image_path = metadata.image_path(json_path);
    let image = image::open(&image_path)
        .map_err(|e| DisplayError::image(&image_path, e))?
        .to_rgb8();
    let rois = define_rois(&image, &mut metadata, picker)?;
    if !had_rois {
        metadata.save(json_path)?;
    }
    Ok(rois)
}

/// Paints the whole ROI with `bg`.
pub fn clear_roi(image: &mut RgbImage, roi: &RegionOfInterest, bg: Rgb<u8>) -> Result<(), DisplayError> {
    if !roi.fits_in(image.width(), image.height()) {
        return Err(DisplayError::RoiOutOfBounds {
            roi: *roi,
            width: image.width(),
            height: image.height(),
        });
    }
    for y in roi.y..roi.y + roi.height {
        for x in roi.x..roi.x + roi.width {
            image.put_pixel(x, y, bg);
        }
    }
    Ok(())
}

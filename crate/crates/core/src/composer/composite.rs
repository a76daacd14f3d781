//! Copy-paste compositing and the optional harmonization hook.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use image::imageops::{self, FilterType};
use image::{GrayImage, RgbImage};

use super::placement::{mask_bbox, PlacementBox};
use super::ComposerError;
use crate::imageio::save_png;

fn check_sizes(fg: &RgbImage, mask: &GrayImage) -> Result<(), ComposerError> {
    if fg.dimensions() != mask.dimensions() {
        return Err(ComposerError::SizeMismatch {
            fg: fg.dimensions(),
            mask: mask.dimensions(),
        });
    }
    Ok(())
}

/// Crops a foreground and its mask to the mask's tight bounding box.
pub fn crop_to_mask(fg: &RgbImage, mask: &GrayImage) -> Result<(RgbImage, GrayImage), ComposerError> {
    check_sizes(fg, mask)?;
    let (x, y, w, h) = mask_bbox(mask).ok_or(ComposerError::EmptyMask)?;
    Ok((
        imageops::crop_imm(fg, x, y, w, h).to_image(),
        imageops::crop_imm(mask, x, y, w, h).to_image(),
    ))
}

/// Resizes `fg` (bilinear) and `mask` (nearest) to the box and copies the
/// foreground pixels (mask > 127) over `bg`.
pub fn composite(
    fg: &RgbImage,
    mask: &GrayImage,
    bg: &RgbImage,
    placement: &PlacementBox,
) -> Result<RgbImage, ComposerError> {
    check_sizes(fg, mask)?;
    if !placement.inside(bg.width(), bg.height()) {
        return Err(ComposerError::BoxOutOfFrame {
            x: placement.x,
            y: placement.y,
            width: placement.width,
            height: placement.height,
            frame_width: bg.width(),
            frame_height: bg.height(),
        });
    }
    let (w, h) = (placement.width, placement.height);
    let fg = if fg.dimensions() == (w, h) {
        fg.clone()
    } else {
        imageops::resize(fg, w, h, FilterType::Triangle)
    };
    let mask = if mask.dimensions() == (w, h) {
        mask.clone()
    } else {
        imageops::resize(mask, w, h, FilterType::Nearest)
    };
    let (ox, oy) = (placement.x as u32, placement.y as u32);
    let mut out = bg.clone();
    for (x, y, m) in mask.enumerate_pixels() {
        if m[0] > 127 {
            out.put_pixel(ox + x, oy + y, *fg.get_pixel(x, y));
        }
    }
    Ok(out)
}

/// The pasted mask in background coordinates.
pub fn placed_mask(mask: &GrayImage, placement: &PlacementBox, frame: (u32, u32)) -> GrayImage {
    let resized = imageops::resize(mask, placement.width, placement.height, FilterType::Nearest);
    let mut out = GrayImage::new(frame.0, frame.1);
    imageops::replace(&mut out, &resized, placement.x, placement.y);
    out
}

/// Post-composition adapter; `mask` is the pasted foreground in background
/// coordinates.
pub trait Harmonizer: Send + Sync {
    fn harmonize(&self, composite: &RgbImage, mask: &GrayImage) -> Result<RgbImage, ComposerError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityHarmonizer;

impl Harmonizer for IdentityHarmonizer {
    fn harmonize(&self, composite: &RgbImage, _mask: &GrayImage) -> Result<RgbImage, ComposerError> {
        Ok(composite.clone())
    }
}

/// Runs `program [args..] <composite> <mask> <output>` and reads back the
/// output PNG, which must keep the composite's size.
#[derive(Debug, Clone)]
pub struct CommandHarmonizer {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Harmonizer for CommandHarmonizer {
    fn harmonize(&self, composite: &RgbImage, mask: &GrayImage) -> Result<RgbImage, ComposerError> {
        let fail = |m: String| ComposerError::HarmonizerFailure(m);
        let dir = tempfile::tempdir().map_err(|e| fail(format!("temp dir: {e}")))?;
        let [input, mask_path, output] = ["composite.png", "mask.png", "out.png"].map(|n| dir.path().join(n));
        save_png(composite, &input)
            .and_then(|_| save_png(mask, &mask_path))
            .map_err(|e| fail(format!("writing inputs: {e}")))?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .args([&input, &mask_path, &output])
            .status()
            .map_err(|e| fail(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(fail(format!("{} exited with {status}", self.program.display())));
        }
        let img = image::open(&output)
            .map_err(|e| fail(format!("reading {}: {e}", output.display())))?
            .to_rgb8();
        if img.dimensions() != composite.dimensions() {
            return Err(fail(format!(
                "output is {:?}, expected {:?}",
                img.dimensions(),
                composite.dimensions()
            )));
        }
        Ok(img)
    }
}

#[derive(Clone, Default)]
pub enum HarmonizeHook {
    #[default]
    Disabled,
    Enabled(Option<Arc<dyn Harmonizer>>),
}

impl HarmonizeHook {
    pub fn is_enabled(&self) -> bool {
        matches!(self, HarmonizeHook::Enabled(_))
    }
}

pub fn harmonize(hook: &HarmonizeHook, composite: RgbImage, mask: &GrayImage) -> Result<RgbImage, ComposerError> {
    match hook {
        HarmonizeHook::Disabled => Ok(composite),
        HarmonizeHook::Enabled(None) => Err(ComposerError::AdapterUnavailable),
        HarmonizeHook::Enabled(Some(adapter)) => adapter.harmonize(&composite, mask),
    }
}

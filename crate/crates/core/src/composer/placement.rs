//! Placement boxes and their geometric corrections.

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::ComposerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementSource {
    Scored,
    Random,
}

impl PlacementSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlacementSource::Scored => "scored",
            PlacementSource::Random => "random",
        }
    }
}

/// Top-left corner plus size in background pixels. `x`/`y` may be negative
/// between correction steps; [`clamp_to_frame`] brings the box back inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacementBox {
    pub x: i64,
    pub y: i64,
    pub width: u32,
    pub height: u32,
    pub source: PlacementSource,
    pub corrected: bool,
    /// Set when the frame forced the box to shrink.
    pub clamped: bool,
}

impl PlacementBox {
    pub fn new(x: i64, y: i64, width: u32, height: u32, source: PlacementSource) -> Self {
        Self {
            x,
            y,
            width,
            height,
            source,
            corrected: false,
            clamped: false,
        }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn center_x(&self) -> f64 {
        self.x as f64 + f64::from(self.width) / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.y as f64 + f64::from(self.height) / 2.0
    }

    pub fn inside(&self, width: u32, height: u32) -> bool {
        self.width > 0
            && self.height > 0
            && self.x >= 0
            && self.y >= 0
            && self.x + i64::from(self.width) <= i64::from(width)
            && self.y + i64::from(self.height) <= i64::from(height)
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        let (px, py) = (i64::from(px), i64::from(py));
        px >= self.x && py >= self.y && px < self.x + i64::from(self.width) && py < self.y + i64::from(self.height)
    }
}

/// Round half away from zero, saturating into `u32` with a floor of 1.
fn round_size(v: f64) -> u32 {
    v.round().clamp(1.0, f64::from(u32::MAX)) as u32
}

/// Shifts the box into the frame, first shrinking it uniformly about its
/// centre if it is larger than the frame.
pub fn clamp_to_frame(mut b: PlacementBox, width: u32, height: u32) -> PlacementBox {
    if b.width > width || b.height > height {
        let (cx, cy) = (b.center_x(), b.center_y());
        let factor = (f64::from(width) / f64::from(b.width)).min(f64::from(height) / f64::from(b.height));
        b.width = ((f64::from(b.width) * factor).floor() as u32).clamp(1, width);
        b.height = ((f64::from(b.height) * factor).floor() as u32).clamp(1, height);
        b.x = (cx - f64::from(b.width) / 2.0).round() as i64;
        b.y = (cy - f64::from(b.height) / 2.0).round() as i64;
        b.clamped = true;
    }
    b.x = b.x.clamp(0, i64::from(width - b.width));
    b.y = b.y.clamp(0, i64::from(height - b.height));
    b
}

/// Maps a box found on the downscaled background back to full resolution.
pub fn rescale_box(b: PlacementBox, scale: f64, frame: (u32, u32)) -> PlacementBox {
    let scaled = PlacementBox {
        x: (b.x as f64 * scale).round() as i64,
        y: (b.y as f64 * scale).round() as i64,
        width: round_size(f64::from(b.width) * scale),
        height: round_size(f64::from(b.height) * scale),
        ..b
    };
    clamp_to_frame(scaled, frame.0, frame.1)
}

/// Tight bounding box `(x, y, width, height)` of mask pixels above 127.
pub fn mask_bbox(mask: &GrayImage) -> Option<(u32, u32, u32, u32)> {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for (x, y, p) in mask.enumerate_pixels() {
        if p[0] > 127 {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    (x0 != u32::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// Sets the width to `height · r`, where `r` is the mask's tight-box aspect
/// ratio, keeping the height and the horizontal centre.
pub fn correct_aspect_ratio(b: PlacementBox, mask: &GrayImage) -> Result<PlacementBox, ComposerError> {
    let (_, _, mw, mh) = mask_bbox(mask).ok_or(ComposerError::EmptyMask)?;
    let ratio = f64::from(mw) / f64::from(mh);
    let width = round_size(f64::from(b.height) * ratio);
    Ok(PlacementBox {
        x: (b.center_x() - f64::from(width) / 2.0).round() as i64,
        width,
        corrected: true,
        ..b
    })
}

/// Grows a box covering less than `min_fraction` of the frame uniformly
/// about its centre, then clamps it into the frame.
pub fn enforce_min_area(b: PlacementBox, frame: (u32, u32), min_fraction: f64) -> PlacementBox {
    let frame_area = f64::from(frame.0) * f64::from(frame.1);
    let target = min_fraction * frame_area;
    if b.area() as f64 >= target {
        return clamp_to_frame(b, frame.0, frame.1);
    }
    let s = (target / b.area() as f64).sqrt();
    let mut width = (f64::from(b.width) * s).ceil() as u32;
    let mut height = (f64::from(b.height) * s).ceil() as u32;
    // Guard against the product landing just under the target.
    while (f64::from(width) * f64::from(height)) < target {
        if f64::from(width) / f64::from(height) < f64::from(b.width) / f64::from(b.height) {
            width += 1;
        } else {
            height += 1;
        }
    }
    let grown = PlacementBox {
        x: (b.center_x() - f64::from(width) / 2.0).round() as i64,
        y: (b.center_y() - f64::from(height) / 2.0).round() as i64,
        width,
        height,
        ..b
    };
    clamp_to_frame(grown, frame.0, frame.1)
}

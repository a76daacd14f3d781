//! Display templates: one real screen photo per device mode plus metadata.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::otsu::{grey_histogram, otsu_threshold};
use super::roi::{validate_rois, RegionOfInterest};
use super::DisplayError;

/// One measurement shown simultaneously in a mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLabel {
    pub measurement_type: String,
    pub unit: String,
    /// Dictionary bound to this reading; defaults to the dictionary named
    /// after `unit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<String>,
}

impl ModeLabel {
    pub fn dictionary_key(&self) -> &str {
        self.dictionary.as_deref().unwrap_or(&self.unit)
    }
}

/// Which Otsu class holds the digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Digits cover less area than the background: the smaller class.
    #[default]
    Auto,
    /// Digits are brighter than the threshold.
    Light,
    /// Digits are darker than the threshold.
    Dark,
}

/// Per-template metadata JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeMetadata {
    pub image_filename: String,
    pub roi_count: usize,
    pub mode: String,
    pub labels: Vec<ModeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rois: Option<Vec<RegionOfInterest>>,
    /// Owning device; the pipeline falls back to the template's parent
    /// directory name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "is_auto")]
    pub polarity: Polarity,
}

fn is_auto(p: &Polarity) -> bool {
    *p == Polarity::Auto
}

impl ModeMetadata {
    pub fn load(path: &Path) -> Result<Self, DisplayError> {
        let text = fs::read_to_string(path).map_err(|e| DisplayError::io(path, e))?;
        let meta: Self =
            serde_json::from_str(&text).map_err(|e| DisplayError::json(path, e))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn save(&self, path: &Path) -> Result<(), DisplayError> {
        let mut text = serde_json::to_string_pretty(self).expect("metadata serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| DisplayError::io(path, e))
    }

    pub fn validate(&self) -> Result<(), DisplayError> {
        if self.roi_count == 0 {
            return Err(DisplayError::RoiCountMismatch {
                expected: 1,
                found: 0,
            });
        }
        if self.labels.len() != self.roi_count {
            return Err(DisplayError::RoiCountMismatch {
                expected: self.roi_count,
                found: self.labels.len(),
            });
        }
        if let Some(rois) = &self.rois {
            if rois.len() != self.roi_count {
                return Err(DisplayError::RoiCountMismatch {
                    expected: self.roi_count,
                    found: rois.len(),
                });
            }
        }
        Ok(())
    }

    /// Resolves the owning device name.
    pub fn device_name(&self, json_path: &Path) -> String {
        self.device.clone().unwrap_or_else(|| {
            json_path
                .parent()
                .and_then(Path::file_name)
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    pub fn image_path(&self, json_path: &Path) -> PathBuf {
        json_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&self.image_filename)
    }
}

/// ITU-R BT.601 luma, rounded.
pub fn to_grey(image: &RgbImage) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        image::Luma([luma(image.get_pixel(x, y))])
    })
}

pub fn luma(p: &Rgb<u8>) -> u8 {
    let [r, g, b] = p.0;
    // Integer form of 0.299, 0.587, 0.114 with round-half-up.
    ((299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000) as u8
}

/// A binarized template ready for value rendering.
#[derive(Debug, Clone)]
pub struct DisplayTemplate {
    pub image: RgbImage,
    pub metadata: ModeMetadata,
    pub threshold: u8,
    pub fg_color: Rgb<u8>,
    pub bg_color: Rgb<u8>,
    /// `true` where `grey > threshold`.
    pub binary_map: Vec<bool>,
}

impl DisplayTemplate {
    pub fn load(json_path: &Path) -> Result<Self, DisplayError> {
        let metadata = ModeMetadata::load(json_path)?;
        let image_path = metadata.image_path(json_path);
        let image = image::open(&image_path)
            .map_err(|e| DisplayError::image(&image_path, e))?
            .to_rgb8();
        binarize_template(image, metadata)
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn rois(&self) -> Option<&[RegionOfInterest]> {
        self.metadata.rois.as_deref()
    }
}

/// Greyscale, Otsu threshold, and per-class mean colours.
pub fn binarize_template(
    image: RgbImage,
    metadata: ModeMetadata,
) -> Result<DisplayTemplate, DisplayError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(DisplayError::DegenerateImage("empty image".into()));
    }
    metadata.validate()?;
    if let Some(rois) = &metadata.rois {
        validate_rois(rois, metadata.roi_count, image.width(), image.height())?;
    }
    let grey = to_grey(&image);
    let threshold = otsu_threshold(&grey_histogram(&grey))?;
    let binary_map: Vec<bool> = grey.as_raw().iter().map(|&g| g > threshold).collect();

    let mut sums = [[0u64; 3]; 2];
    let mut counts = [0u64; 2];
    for (p, &above) in image.pixels().zip(&binary_map) {
        let class = usize::from(above);
        counts[class] += 1;
        for (sum, &v) in sums[class].iter_mut().zip(&p.0) {
            *sum += u64::from(v);
        }
    }
    let mean = |class: usize| {
        let n = counts[class];
        Rgb(std::array::from_fn(|c| ((sums[class][c] + n / 2) / n) as u8))
    };
    let (light, dark) = (mean(1), mean(0));
    let digits_light = match metadata.polarity {
        Polarity::Light => true,
        Polarity::Dark => false,
        Polarity::Auto => counts[1] <= counts[0],
    };
    let (fg_color, bg_color) = if digits_light { (light, dark) } else { (dark, light) };
    if fg_color == bg_color {
        return Err(DisplayError::DegenerateImage(
            "foreground and background colours coincide".into(),
        ));
    }
    Ok(DisplayTemplate {
        image,
        metadata,
        threshold,
        fg_color,
        bg_color,
        binary_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(roi_count: usize) -> ModeMetadata {
        ModeMetadata {
            image_filename: "screen.png".into(),
            roi_count,
            mode: "pulse".into(),
            labels: (0..roi_count)
                .map(|i| ModeLabel {
                    measurement_type: format!("m{i}"),
                    unit: "u".into(),
                    dictionary: None,
                })
                .collect(),
            rois: None,
            device: None,
            polarity: Polarity::Auto,
        }
    }

    fn two_colour(bg: [u8; 3], fg: [u8; 3]) -> RgbImage {
        RgbImage::from_fn(60, 40, |x, y| {
            let stroke = (10..14).contains(&x) || ((20..50).contains(&x) && (18..22).contains(&y));
            Rgb(if stroke { fg } else { bg })
        })
    }

    #[test]
    fn light_digits_on_dark_background() {
        let bg = [20, 30, 25];
        let fg = [210, 240, 200];
        let t = binarize_template(two_colour(bg, fg), meta(1)).unwrap();
        for c in 0..3 {
            assert!(t.fg_color.0[c].abs_diff(fg[c]) <= 2);
            assert!(t.bg_color.0[c].abs_diff(bg[c]) <= 2);
        }
        for (p, &b) in t.image.pixels().zip(&t.binary_map) {
            assert_eq!(b, luma(p) > t.threshold);
        }
    }

    #[test]
    fn dark_digits_on_lcd_grey() {
        let bg = [170, 180, 160];
        let fg = [30, 35, 30];
        let t = binarize_template(two_colour(bg, fg), meta(1)).unwrap();
        assert_eq!(t.fg_color, Rgb(fg));
        assert_eq!(t.bg_color, Rgb(bg));

        let mut forced = meta(1);
        forced.polarity = Polarity::Light;
        let t = binarize_template(two_colour(bg, fg), forced).unwrap();
        assert_eq!(t.fg_color, Rgb(bg));
    }

    #[test]
    fn uniform_images_are_degenerate() {
        let black = RgbImage::new(8, 8);
        assert!(matches!(
            binarize_template(black, meta(1)),
            Err(DisplayError::DegenerateImage(_))
        ));
    }

    #[test]
    fn label_count_must_match() {
        let mut m = meta(2);
        m.labels.pop();
        assert!(matches!(m.validate(), Err(DisplayError::RoiCountMismatch { .. })));
    }

    #[test]
    fn metadata_json_shape() {
        let json = r#"{"image_filename": "oxi.png", "roi_count": 2, "mode": "default",
            "labels": [{"measurement_type": "SpO2", "unit": "%"},
                       {"measurement_type": "Pulse Rate", "unit": "BPM"}],
            "rois": [{"x": 1, "y": 2, "w": 30, "h": 20, "label_index": 0},
                     {"x": 40, "y": 2, "w": 30, "h": 20, "label_index": 1}]}"#;
        let m: ModeMetadata = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        assert_eq!(m.rois.as_ref().unwrap()[1].width, 30);
        let back: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(back["rois"][0]["w"], 30);
        assert!(back.get("polarity").is_none());
    }
}

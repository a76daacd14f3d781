//! Background photo selection and downscaling.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::RgbImage;

use super::ComposerError;

/// Longest side of the raster handed to placement scorers.
pub const SCORING_SIDE: u32 = 256;

pub const MIN_SHORT_SIDE: u32 = 600;
pub const MIN_LONG_SIDE: u32 = 800;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Background {
    /// File name inside the background directory.
    pub id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

/// True when the image is at least 600×800 in either orientation.
pub fn large_enough(width: u32, height: u32) -> bool {
    let (short, long) = (width.min(height), width.max(height));
    short >= MIN_SHORT_SIDE && long >= MIN_LONG_SIDE
}

/// Lists usable backgrounds in `dir`, sorted by file name. Unreadable or
/// too-small images are skipped with a log line.
pub fn curate_backgrounds(dir: &Path) -> Result<Vec<Background>, ComposerError> {
    let entries = fs::read_dir(dir).map_err(|e| ComposerError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    let mut kept = Vec::new();
    for path in paths {
        match image::image_dimensions(&path) {
            Ok((w, h)) if large_enough(w, h) => kept.push(Background {
                id: path.file_name().expect("listed files have names").to_string_lossy().into_owned(),
                path,
                width: w,
                height: h,
            }),
            Ok((w, h)) => log::debug!("{}: {w}x{h} is below 600x800; skipped", path.display()),
            Err(e) => log::warn!("{}: {e}; skipped", path.display()),
        }
    }
    if kept.is_empty() {
        return Err(ComposerError::NoBackgrounds(dir.to_owned()));
    }
    Ok(kept)
}

/// Size with the longest side at [`SCORING_SIDE`], rounding the other side
/// half away from zero. Images already that small are left alone.
pub fn scoring_dims(width: u32, height: u32) -> (u32, u32) {
    let long = width.max(height);
    if long <= SCORING_SIDE {
        return (width, height);
    }
    let scale_side = |side: u32| {
        let v = (2 * u64::from(side) * u64::from(SCORING_SIDE) + u64::from(long)) / (2 * u64::from(long));
        (v as u32).max(1)
    };
    if width >= height {
        (SCORING_SIDE, scale_side(height))
    } else {
        (scale_side(width), SCORING_SIDE)
    }
}

/// Returns the downscaled raster and `original_longest / 256` (1 when no
/// scaling was needed).
pub fn downscale_background(bg: &RgbImage) -> (RgbImage, f64) {
    let (w, h) = scoring_dims(bg.width(), bg.height());
    if (w, h) == bg.dimensions() {
        return (bg.clone(), 1.0);
    }
    let scale = f64::from(bg.width().max(bg.height())) / f64::from(SCORING_SIDE);
    (imageops::resize(bg, w, h, FilterType::Triangle), scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_filter() {
        assert!(!large_enough(640, 480));
        assert!(large_enough(1200, 900));
        assert!(large_enough(600, 800));
        assert!(large_enough(800, 600));
        assert!(!large_enough(599, 1000));
    }

    #[test]
    fn downscale_examples() {
        assert_eq!(scoring_dims(1024, 768), (256, 192));
        assert_eq!(scoring_dims(256, 100), (256, 100));
        assert_eq!(scoring_dims(800, 1200), (171, 256));
        let (small, scale) = downscale_background(&RgbImage::new(1024, 768));
        assert_eq!((small.dimensions(), scale), ((256, 192), 4.0));
        let (same, scale) = downscale_background(&RgbImage::new(256, 100));
        assert_eq!((same.dimensions(), scale), ((256, 100), 1.0));
        assert_eq!(downscale_background(&RgbImage::new(800, 1200)).1, 4.6875);
    }

    #[test]
    fn curation_lists_sorted_large_images() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(curate_backgrounds(dir.path()), Err(ComposerError::NoBackgrounds(_))));
        RgbImage::new(640, 480).save(dir.path().join("a_small.png")).unwrap();
        RgbImage::new(1200, 900).save(dir.path().join("c.png")).unwrap();
        RgbImage::new(800, 1000).save(dir.path().join("b.jpg")).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        fs::write(dir.path().join("broken.png"), "not a png").unwrap();
        let ids: Vec<String> = curate_backgrounds(dir.path()).unwrap().into_iter().map(|b| b.id).collect();
        assert_eq!(ids, ["b.jpg", "c.png"]);
    }
}

//! Placement scorers: a uniform random baseline and an external FOPA model.

use std::fmt;
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;

use image::{GrayImage, RgbImage};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::placement::{mask_bbox, PlacementBox, PlacementSource};
use super::ComposerError;
use crate::imageio::save_png;
use crate::rng::Rng;

/// Picks a placement for a foreground on a downscaled background. The
/// returned box must lie inside the background frame.
pub trait PlacementScorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, fg: &RgbImage, mask: &GrayImage, bg: &RgbImage, rng: &mut Rng)
        -> Result<PlacementBox, ComposerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Fopa,
    #[default]
    Random,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Fopa => "fopa",
            ScorerKind::Random => "random",
        })
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fopa" => Ok(ScorerKind::Fopa),
            "random" => Ok(ScorerKind::Random),
            other => Err(format!("unknown scorer {other:?}; expected fopa or random")),
        }
    }
}

/// Height drawn uniformly as a fraction of the frame height, width from the
/// foreground's aspect ratio, position uniform over every spot where the box
/// fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomScorer {
    pub min_height_fraction: f64,
    pub max_height_fraction: f64,
}

impl Default for RandomScorer {
    fn default() -> Self {
        Self {
            min_height_fraction: 0.25,
            max_height_fraction: 0.75,
        }
    }
}

impl PlacementScorer for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn score(
        &self,
        _fg: &RgbImage,
        mask: &GrayImage,
        bg: &RgbImage,
        rng: &mut Rng,
    ) -> Result<PlacementBox, ComposerError> {
        let (_, _, mw, mh) = mask_bbox(mask).ok_or(ComposerError::EmptyMask)?;
        let (bw, bh) = (f64::from(bg.width()), f64::from(bg.height()));
        let fraction = rng.gen_range(self.min_height_fraction..=self.max_height_fraction);
        let mut height = fraction * bh;
        let mut width = height * f64::from(mw) / f64::from(mh);
        if width > bw {
            height *= bw / width;
            width = bw;
        }
        let width = (width.round() as u32).clamp(1, bg.width());
        let height = (height.round() as u32).clamp(1, bg.height());
        let x = rng.gen_range(0..=bg.width() - width);
        let y = rng.gen_range(0..=bg.height() - height);
        Ok(PlacementBox::new(i64::from(x), i64::from(y), width, height, PlacementSource::Random))
    }
}

/// Runs an external placement model as `program [args..] <fg> <mask> <bg>`.
/// The model reads the three PNGs and prints its best box as JSON
/// `{"x":..,"y":..,"w":..,"h":..}` on stdout.
#[derive(Debug, Clone)]
pub struct FopaScorer {
    pub program: PathBuf,
    pub args: Vec<String>,
}

#[derive(Deserialize)]
struct ScoredBox {
    x: i64,
    y: i64,
    w: u32,
    h: u32,
}

impl FopaScorer {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }
}

impl PlacementScorer for FopaScorer {
    fn name(&self) -> &str {
        "fopa"
    }

    fn score(
        &self,
        fg: &RgbImage,
        mask: &GrayImage,
        bg: &RgbImage,
        _rng: &mut Rng,
    ) -> Result<PlacementBox, ComposerError> {
        let fail = |m: String| ComposerError::ScorerFailure(m);
        let dir = tempfile::tempdir().map_err(|e| fail(format!("temp dir: {e}")))?;
        let paths = ["fg.png", "mask.png", "bg.png"].map(|n| dir.path().join(n));
        save_png(fg, &paths[0])
            .and_then(|_| save_png(mask, &paths[1]))
            .and_then(|_| save_png(bg, &paths[2]))
            .map_err(|e| fail(format!("writing scorer inputs: {e}")))?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .args(&paths)
            .output()
            .map_err(|e| fail(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(fail(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let line = stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        let b: ScoredBox =
            serde_json::from_str(line).map_err(|e| fail(format!("unreadable box {line:?}: {e}")))?;
        let placed = PlacementBox::new(b.x, b.y, b.w, b.h, PlacementSource::Scored);
        if !placed.inside(bg.width(), bg.height()) {
            return Err(fail(format!(
                "box {},{} {}x{} is outside the {}x{} frame",
                b.x,
                b.y,
                b.w,
                b.h,
                bg.width(),
                bg.height()
            )));
        }
        Ok(placed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn random_boxes_fit_and_follow_the_mask_ratio() {
        let mask = GrayImage::from_pixel(60, 20, image::Luma([255]));
        let fg = RgbImage::new(60, 20);
        let bg = RgbImage::new(256, 192);
        let mut rng = seeded(5);
        for _ in 0..2000 {
            let b = RandomScorer::default().score(&fg, &mask, &bg, &mut rng).unwrap();
            assert!(b.inside(256, 192));
            assert_eq!(b.source, PlacementSource::Random);
            // A 3:1 foreground at 75% of 192 px would be 432 wide; it shrinks to fit.
            assert!(b.width <= 256);
            let ratio = f64::from(b.width) / f64::from(b.height);
            assert!((ratio - 3.0).abs() / 3.0 < 0.05, "{b:?}");
        }
    }

    #[test]
    fn scorer_kind_parses() {
        assert_eq!("FOPA".parse::<ScorerKind>(), Ok(ScorerKind::Fopa));
        assert_eq!(ScorerKind::Random.to_string(), "random");
        assert!("best".parse::<ScorerKind>().is_err());
    }
}

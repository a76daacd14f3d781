//! Pasting rendered foregrounds onto background photos.

pub mod background;
pub mod composite;
pub mod dataset;
pub mod dedup;
pub mod placement;
pub mod scorer;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use background::{curate_backgrounds, downscale_background, Background};
pub use composite::{
    composite, crop_to_mask, harmonize, placed_mask, CommandHarmonizer, HarmonizeHook, Harmonizer, IdentityHarmonizer,
};
pub use dataset::{
    generate_dataset, load_foregrounds, read_manifest, ComposeJob, CompositeRecord, Foreground, MANIFEST_FILE,
};
pub use dedup::{Triplet, TripletRegistry};
pub use placement::{
    clamp_to_frame, correct_aspect_ratio, enforce_min_area, mask_bbox, rescale_box, PlacementBox, PlacementSource,
};
pub use scorer::{FopaScorer, PlacementScorer, RandomScorer, ScorerKind};

#[derive(Debug, Error)]
pub enum ComposerError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("placement {x},{y} {width}x{height} does not fit a {frame_width}x{frame_height} background")]
    BoxOutOfFrame {
        x: i64,
        y: i64,
        width: u32,
        height: u32,
        frame_width: u32,
        frame_height: u32,
    },
    #[error("foreground and mask sizes differ: {fg:?} vs {mask:?}")]
    SizeMismatch { fg: (u32, u32), mask: (u32, u32) },
    #[error("no background of at least 600x800 in {0}")]
    NoBackgrounds(PathBuf),
    #[error("no foregrounds listed in {0}")]
    NoForegrounds(PathBuf),
    #[error("item {index}: every placement was a duplicate after {attempts} attempts")]
    RetriesExhausted { index: usize, attempts: usize },
    #[error("harmonization is enabled but no adapter is configured")]
    AdapterUnavailable,
    #[error("scorer: {0}")]
    ScorerFailure(String),
    #[error("harmonizer: {0}")]
    HarmonizerFailure(String),
    #[error("worker pool: {0}")]
    Worker(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl ComposerError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn image(path: &Path, source: image::ImageError) -> Self {
        Self::Image {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv {
            path: path.to_owned(),
            source,
        }
    }
}

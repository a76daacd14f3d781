//! Synthetic display images from one real screen photo per device mode.

pub mod font;
pub mod generate;
pub mod otsu;
pub mod roi;
pub mod template;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use font::{Face, FontSet, SegmentFace};
pub use generate::{
    generate_display_images, render_value, write_display_batch, DisplayIndexEntry, SyntheticDisplay,
    DISPLAY_INDEX_FILE,
};
pub use otsu::otsu_threshold;
pub use roi::{clear_roi, define_rois, define_rois_in_file, RegionOfInterest, RoiPicker, ScriptedPicker};
pub use template::{binarize_template, DisplayTemplate, ModeLabel, ModeMetadata, Polarity};

#[derive(Debug, Error)]
pub enum DisplayError {
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
    #[error("ROI {roi:?} does not fit in a {width}x{height} image")]
    RoiOutOfBounds {
        roi: RegionOfInterest,
        width: u32,
        height: u32,
    },
    #[error("ROIs overlap: {0:?} and {1:?}")]
    RoiOverlap(RegionOfInterest, RegionOfInterest),
    #[error("expected {expected} ROIs/labels, found {found}")]
    RoiCountMismatch { expected: usize, found: usize },
    #[error("label index {0} is out of range or used twice")]
    RoiLabel(usize),
    #[error("template has no ROIs defined")]
    MissingRois,
    #[error("value {value:?} does not fit a {width}x{height} ROI even at the minimum size")]
    ValueTooLong { value: String, width: u32, height: u32 },
    #[error("empty value")]
    EmptyValue,
    #[error("font {font} cannot draw {ch:?}")]
    UnsupportedCharacter { ch: char, font: String },
    #[error("unknown font {0:?}")]
    UnknownFont(String),
    #[error("font error: {0}")]
    Font(String),
    #[error("no dictionary bound to {0:?}")]
    MissingDictionary(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl DisplayError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        Self::Json {
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
}

//! Scene sampling, engine directives, and render post-processing.

pub mod backend;
pub mod batch;
pub mod camera;
pub mod device;
pub mod directives;
pub mod geometry;
pub mod postprocess;
pub mod ranges;
pub mod sampling;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use backend::{BackendKind, BlenderBackend, MockBackend, RenderBackend, RenderOutput};
pub use batch::{
    read_render_records, render_batch, write_render_records, RenderBatch, RenderRecord, RenderSummary,
    RENDER_RECORDS_FILE,
};
pub use camera::{check_full_visibility, compute_camera_pose, project_point, CameraPose, Projection};
pub use device::{load_device_registry, DeviceModel};
pub use directives::{build_scene_directives, compute_uv_transform, Passes, SceneDirectives};
pub use geometry::{Aabb, Axis, AxisRotation};
pub use postprocess::{apply_motion_blur, depth_to_mask, make_motion_kernel, DepthMap, MotionKernel};
pub use ranges::{Interval, RenderRanges};
pub use sampling::{resample_until_visible, sample_scene, Palette, SceneSample, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, Error)]
pub enum RendererError {
    #[error("camera offset direction is zero")]
    ZeroDirection,
    #[error("invalid render ranges: {0}")]
    InvalidRanges(String),
    #[error("display rotation {0} is not a quarter-turn count in 0..=3")]
    InvalidRotation(u8),
    #[error("device {name}: {reason}")]
    InvalidDevice { name: String, reason: String },
    #[error("device {0} has no exported display face index")]
    MissingFaceIndex(String),
    #[error("no fully visible scene for {device} after {attempts} attempts; check the ranges")]
    VisibilityExhausted { device: String, attempts: usize },
    #[error("no device has both a display face and generated displays")]
    NoRenderableDevices,
    #[error("unsupported directive version {0}")]
    UnsupportedDirectiveVersion(u32),
    #[error("render backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("render of {id} failed: {message}")]
    BackendFailure { id: String, message: String, log: String },
    #[error("worker pool: {0}")]
    Worker(String),
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
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl RendererError {
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

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv {
            path: path.to_owned(),
            source,
        }
    }
}

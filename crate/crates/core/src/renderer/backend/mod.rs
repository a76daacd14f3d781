//! Render engine adapters.

mod blender;
mod mock;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

pub use blender::{BlenderBackend, BLENDER_ENV};
pub use mock::MockBackend;

use super::directives::SceneDirectives;
use super::postprocess::DepthMap;
use super::RendererError;

pub struct RenderOutput {
    pub rgb: RgbImage,
    pub depth: DepthMap,
}

pub trait RenderBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Renders one scene. Relative paths in `directives` resolve against
    /// `root`.
    fn render(&self, directives: &SceneDirectives, root: &Path) -> Result<RenderOutput, RendererError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Blender,
    #[default]
    Mock,
}

impl BackendKind {
    pub fn create(self) -> Result<Box<dyn RenderBackend>, RendererError> {
        Ok(match self {
            BackendKind::Mock => Box::new(MockBackend::default()),
            BackendKind::Blender => Box::new(BlenderBackend::from_env()?),
        })
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Blender => "blender",
            BackendKind::Mock => "mock",
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blender" => Ok(Self::Blender),
            "mock" => Ok(Self::Mock),
            other => Err(format!("unknown backend {other:?} (expected blender or mock)")),
        }
    }
}

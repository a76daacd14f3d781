//! Drives a headless Blender process with a generated driver script.

use std::env;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::{RenderBackend, RenderOutput};
use crate::renderer::directives::SceneDirectives;
use crate::renderer::postprocess::load_depth_png;
use crate::renderer::RendererError;

/// Environment variable naming the Blender executable.
pub const BLENDER_ENV: &str = "DMDFORGE_BLENDER";

const DRIVER: &str = include_str!("driver.py");

#[derive(Debug, Clone)]
pub struct BlenderBackend {
    binary: PathBuf,
}

impl BlenderBackend {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        Self { binary: binary.into() }
    }

    /// Uses `$DMDFORGE_BLENDER`, else `blender` from `PATH`, and checks that
    /// it starts.
    pub fn from_env() -> Result<Self, RendererError> {
        let binary = env::var_os(BLENDER_ENV).map_or_else(|| PathBuf::from("blender"), PathBuf::from);
        let backend = Self::new(binary);
        let probe = Command::new(&backend.binary)
            .arg("--version")
            .output()
            .map_err(|e| backend.spawn_error(e))?;
        if !probe.status.success() {
            return Err(RendererError::BackendUnavailable(format!(
                "{} --version exited with {}",
                backend.binary.display(),
                probe.status
            )));
        }
        Ok(backend)
    }

    pub fn binary(&self) -> &Path {
        &self.binary
    }

    fn spawn_error(&self, e: io::Error) -> RendererError {
        RendererError::BackendUnavailable(format!("cannot run {}: {e}", self.binary.display()))
    }
}

impl RenderBackend for BlenderBackend {
    fn name(&self) -> &str {
        "blender"
    }

    fn render(&self, directives: &SceneDirectives, root: &Path) -> Result<RenderOutput, RendererError> {
        let work = tempfile::tempdir().map_err(|e| RendererError::io(&env::temp_dir(), e))?;
        let driver = work.path().join("driver.py");
        fs::write(&driver, DRIVER).map_err(|e| RendererError::io(&driver, e))?;
        let doc = work.path().join("directives.json");
        fs::write(&doc, directives.to_json()).map_err(|e| RendererError::io(&doc, e))?;

        let output = Command::new(&self.binary)
            .args(["--background", "--factory-startup", "-noaudio", "--python-exit-code", "1", "--python"])
            .arg(&driver)
            .arg("--")
            .arg(&doc)
            .arg(root)
            .output()
            .map_err(|e| self.spawn_error(e))?;
        let log = format!(
            "{}{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        let failure = |message: String| RendererError::BackendFailure {
            id: directives.id.clone(),
            message,
            log: log.clone(),
        };
        if !output.status.success() {
            return Err(failure(format!("engine exited with {}", output.status)));
        }

        let rgb_path = root.join(&directives.outputs.rgb);
        let rgb = image::open(&rgb_path)
            .map_err(|e| failure(format!("reading {}: {e}", rgb_path.display())))?
            .to_rgb8();
        let depth_path = root.join(&directives.outputs.depth);
        let depth = load_depth_png(&depth_path).map_err(|e| failure(e.to_string()))?;
        let want = (directives.render.resolution[0], directives.render.resolution[1]);
        if rgb.dimensions() != want || depth.dimensions() != want {
            return Err(failure(format!(
                "expected {}x{} passes, got rgb {:?} and depth {:?}",
                want.0,
                want.1,
                rgb.dimensions(),
                depth.dimensions()
            )));
        }
        Ok(RenderOutput { rgb, depth })
    }
}

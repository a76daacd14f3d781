//! Stage orchestration: dict → display → render → compose → label.

pub mod config;
mod stages;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{validate_config, PipelineConfig};

use crate::composer::ComposerError;
use crate::dictionaries::DictionaryError;
use crate::display::DisplayError;
use crate::labeling::LabelingError;
use crate::renderer::{BackendKind, RendererError};

/// Output locations under the configured output root.
pub mod layout {
    pub const DICTIONARIES: &str = "dictionaries";
    pub const DISPLAYS: &str = "displays";
    pub const RENDERS: &str = "renders";
    pub const DIRECTIVES: &str = "directives";
    pub const COMPOSITES: &str = "composites";
    pub const VQA: &str = "vqa.jsonl";
    pub const STAMPS: &str = ".stamps";
}

/// A config problem. `field` is the dotted path of the offending key, empty
/// when the whole file is at fault.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{message}", if field.is_empty() { String::new() } else { format!("{field}: ") })]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Display(#[from] DisplayError),
    #[error(transparent)]
    Renderer(#[from] RendererError),
    #[error(transparent)]
    Composer(#[from] ComposerError),
    #[error(transparent)]
    Labeling(#[from] LabelingError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl StageError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: required input {} is missing; run the earlier stages first", path.display())]
    DependencyMissing { stage: Stage, path: PathBuf },
    #[error("{stage} stage failed: {source}")]
    StageFailure {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Dict,
    Display,
    Render,
    Compose,
    Label,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Dict, Stage::Display, Stage::Render, Stage::Compose, Stage::Label];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Dict => "dict",
            Stage::Display => "display",
            Stage::Render => "render",
            Stage::Compose => "compose",
            Stage::Label => "label",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}; expected dict, display, render, compose or label"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stages to run; all of them when empty. Always executed in pipeline order.
    pub stages: Vec<Stage>,
    /// Skip stages whose stamp matches the current config and whose outputs exist.
    pub resume: bool,
    /// Overrides `render.backend`.
    pub backend: Option<BackendKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSummary {
    pub stage: Stage,
    pub skipped: bool,
    /// Counts produced by the stage, e.g. `20 accepted, 0 skipped`.
    pub detail: String,
}

impl fmt::Display for StageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.skipped {
            write!(f, "{}: up to date ({})", self.stage, self.detail)
        } else {
            write!(f, "{}: {}", self.stage, self.detail)
        }
    }
}

fn digest(parts: &[&dyn erased::Json]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.json().as_bytes());
        h.update([0]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

mod erased {
    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).expect("config sections serialize")
        }
    }
}

/// Stamp keys chain: each stage hashes the config it reads plus the key of
/// the stage before it, so a change upstream invalidates everything after.
/// `workers` is left out because outputs do not depend on it.
pub fn stage_keys(config: &PipelineConfig, backend: BackendKind) -> [(Stage, String); 5] {
    #[derive(Serialize)]
    struct Render<'a> {
        devices: &'a Path,
        palette: &'a Option<PathBuf>,
        backend: BackendKind,
        section: &'a config::RenderConfig,
    }
    let p = &config.paths;
    let dict = digest(&[&"dict", &p.dictionaries]);
    let display = digest(&[&"display", &dict, &config.seed, &p.templates, &p.fonts, &config.display]);
    let render = digest(&[
        &"render",
        &display,
        &config.seed,
        &Render {
            devices: &p.devices,
            palette: &p.palette,
            backend,
            section: &config.render,
        },
    ]);
    let compose = digest(&[&"compose", &render, &config.seed, &p.backgrounds, &config.compose]);
    let label = digest(&[&"label", &compose, &config.seed, &config.label]);
    [
        (Stage::Dict, dict),
        (Stage::Display, display),
        (Stage::Render, render),
        (Stage::Compose, compose),
        (Stage::Label, label),
    ]
}

fn stamp_path(out: &Path, stage: Stage) -> PathBuf {
    out.join(layout::STAMPS).join(format!("{stage}.stamp"))
}

/// Stamp file body: the key on the first line, the summary detail on the
/// second.
fn read_stamp(out: &Path, stage: Stage) -> Option<(String, String)> {
    let text = fs::read_to_string(stamp_path(out, stage)).ok()?;
    let mut lines = text.lines();
    Some((lines.next()?.to_owned(), lines.next().unwrap_or("").to_owned()))
}

fn write_stamp(out: &Path, stage: Stage, key: &str, detail: &str) -> Result<(), StageError> {
    let path = stamp_path(out, stage);
    let dir = path.parent().expect("stamp has a parent");
    fs::create_dir_all(dir).map_err(|e| StageError::io(dir, e))?;
    fs::write(&path, format!("{key}\n{detail}\n")).map_err(|e| StageError::io(&path, e))
}

/// Runs the selected stages in order. Fails on the first stage error.
pub fn run_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<Vec<StageSummary>, PipelineError> {
    let out = &config.paths.output;
    fs::create_dir_all(out).map_err(|e| PipelineError::StageFailure {
        stage: opts.stages.first().copied().unwrap_or(Stage::Dict),
        source: StageError::io(out, e),
    })?;
    let backend = opts.backend.unwrap_or(config.render.backend);
    let mut selected = if opts.stages.is_empty() {
        Stage::ALL.to_vec()
    } else {
        opts.stages.clone()
    };
    selected.sort();
    selected.dedup();
    let keys = stage_keys(config, backend);
    let mut summaries = Vec::with_capacity(selected.len());
    for stage in selected {
        for dep in stages::inputs(stage, config) {
            if !dep.exists() {
                return Err(PipelineError::DependencyMissing { stage, path: dep });
            }
        }
        let key = &keys.iter().find(|(s, _)| *s == stage).expect("every stage has a key").1;
        if opts.resume {
            if let Some((stamped, detail)) = read_stamp(out, stage) {
                if &stamped == key && stages::outputs(stage, config).iter().all(|p| p.exists()) {
                    log::info!("{stage}: outputs are up to date; skipped");
                    summaries.push(StageSummary {
                        stage,
                        skipped: true,
                        detail,
                    });
                    continue;
                }
            }
        }
        // A stale stamp must not survive a failed rerun.
        let _ = fs::remove_file(stamp_path(out, stage));
        let fail = |source| PipelineError::StageFailure { stage, source };
        let detail = stages::run(stage, config, backend).map_err(fail)?;
        write_stamp(out, stage, key, &detail).map_err(fail)?;
        log::info!("{stage}: {detail}");
        summaries.push(StageSummary {
            stage,
            skipped: false,
            detail,
        });
    }
    Ok(summaries)
}

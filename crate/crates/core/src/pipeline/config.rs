//! Pipeline configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::composer::dataset::DEFAULT_MIN_AREA_FRACTION;
use crate::composer::ScorerKind;
use crate::evaluation::DEFAULT_TAU;
use crate::labeling::PairFormat;
use crate::renderer::{BackendKind, Passes, RenderRanges, DEFAULT_MAX_ATTEMPTS};

/// Input and output locations. Relative paths resolve against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Dictionary specs (`*.json`) and/or ready dictionaries (`*.txt`).
    pub dictionaries: PathBuf,
    /// Template metadata files, searched recursively.
    pub templates: PathBuf,
    /// Device registry JSON.
    pub devices: PathBuf,
    pub backgrounds: PathBuf,
    pub output: PathBuf,
    /// TTF directory; the built-in seven-segment faces when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fonts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayConfig {
    /// Synthetic displays generated per template.
    pub per_template: usize,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self { per_template: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub count: usize,
    pub backend: BackendKind,
    pub max_attempts: usize,
    /// Device names left out of the render stage (case-insensitive).
    pub exclude: Vec<String>,
    pub passes: Passes,
    pub ranges: RenderRanges,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            count: 100,
            backend: BackendKind::Mock,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            exclude: Vec::new(),
            passes: Passes::default(),
            ranges: RenderRanges::default(),
        }
    }
}

/// An external program plus leading arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandConfig {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeConfig {
    pub count: usize,
    pub scorer: ScorerKind,
    /// Placement model command; required with the `fopa` scorer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fopa: Option<CommandConfig>,
    pub min_fraction: f64,
    pub harmonize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonizer: Option<CommandConfig>,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            count: 100,
            scorer: ScorerKind::Random,
            fopa: None,
            min_fraction: DEFAULT_MIN_AREA_FRACTION,
            harmonize: false,
            harmonizer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub format: PairFormat,
    pub pairs_per_image: usize,
    /// Custom question templates; the built-in pool when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            format: PairFormat::Full,
            pairs_per_image: 1,
            templates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub tau: f64,
    pub multi_truth: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            multi_truth: false,
        }
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub paths: PathsConfig,
    #[serde(default)]
    pub display: DisplayConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub compose: ComposeConfig,
    #[serde(default)]
    pub label: LabelConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    /// Parses without touching the filesystem beyond `text`; paths stay as
    /// written.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(if field == "." { String::new() } else { field }, e.into_inner().to_string())
        })
    }

    /// Resolves relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.dictionaries,
            &mut paths.templates,
            &mut paths.devices,
            &mut paths.backgrounds,
            &mut paths.output,
        ] {
            join(p);
        }
        for p in [&mut paths.fonts, &mut paths.palette, &mut self.label.templates]
            .into_iter()
            .flatten()
        {
            join(p);
        }
        for cmd in [&mut self.compose.fopa, &mut self.compose.harmonizer].into_iter().flatten() {
            // Bare program names are looked up on PATH.
            if cmd.program.components().count() > 1 {
                join(&mut cmd.program);
            }
        }
    }

    /// Semantic checks after parsing; reports the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |field: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("{} does not exist", p.display())))
            }
        };
        must_exist("paths.dictionaries", &self.paths.dictionaries)?;
        must_exist("paths.templates", &self.paths.templates)?;
        must_exist("paths.devices", &self.paths.devices)?;
        must_exist("paths.backgrounds", &self.paths.backgrounds)?;
        if let Some(p) = &self.paths.fonts {
            must_exist("paths.fonts", p)?;
        }
        if let Some(p) = &self.paths.palette {
            must_exist("paths.palette", p)?;
        }
        if let Some(p) = &self.label.templates {
            must_exist("label.templates", p)?;
        }
        if self.workers == 0 {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        self.render
            .ranges
            .validate()
            .map_err(|e| ConfigError::new("render.ranges", e.to_string()))?;
        if self.render.max_attempts == 0 {
            return Err(ConfigError::new("render.max_attempts", "must be at least 1"));
        }
        if !(self.compose.min_fraction > 0.0 && self.compose.min_fraction <= 1.0) {
            return Err(ConfigError::new("compose.min_fraction", "must be in (0, 1]"));
        }
        if self.compose.scorer == ScorerKind::Fopa && self.compose.fopa.is_none() {
            return Err(ConfigError::new("compose.fopa", "the fopa scorer needs a command"));
        }
        if self.label.pairs_per_image == 0 {
            return Err(ConfigError::new("label.pairs_per_image", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.eval.tau) {
            return Err(ConfigError::new("eval.tau", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Reads, resolves and validates a config file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
    let mut config = PipelineConfig::parse(&text)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    config.validate()?;
    Ok(config)
}

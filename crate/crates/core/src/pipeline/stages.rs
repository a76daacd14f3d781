use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use walkdir::WalkDir;

use super::layout;
use super::{PipelineConfig, Stage, StageError};
use crate::composer::{
    curate_backgrounds, generate_dataset, load_foregrounds, read_manifest, CommandHarmonizer, ComposeJob,
    FopaScorer, HarmonizeHook, Harmonizer, IdentityHarmonizer, PlacementScorer, RandomScorer, ScorerKind,
    MANIFEST_FILE,
};
use crate::dictionaries::{load_dictionary, load_dictionary_dir, save_dictionary, DictionarySpec};
use crate::display::{write_display_batch, DisplayIndexEntry, DisplayTemplate, FontSet, DISPLAY_INDEX_FILE};
use crate::labeling::{label_dataset, write_pairs, TemplateSet};
use crate::renderer::batch::{read_render_records, render_batch, RenderBatch, RENDER_RECORDS_FILE};
use crate::renderer::{load_device_registry, BackendKind, Palette};
use crate::rng::{stage, stream};

/// Files or directories a stage reads; missing ones stop the run.
pub(super) fn inputs(stage: Stage, c: &PipelineConfig) -> Vec<PathBuf> {
    let out = &c.paths.output;
    match stage {
        Stage::Dict => vec![c.paths.dictionaries.clone()],
        Stage::Display => vec![c.paths.templates.clone(), out.join(layout::DICTIONARIES)],
        Stage::Render => vec![c.paths.devices.clone(), out.join(layout::DISPLAYS).join(DISPLAY_INDEX_FILE)],
        Stage::Compose => vec![out.join(RENDER_RECORDS_FILE), c.paths.backgrounds.clone()],
        Stage::Label => vec![out.join(MANIFEST_FILE), out.join(RENDER_RECORDS_FILE)],
    }
}

/// The files whose presence marks a stage as complete.
pub(super) fn outputs(stage: Stage, c: &PipelineConfig) -> Vec<PathBuf> {
    let out = &c.paths.output;
    match stage {
        Stage::Dict => vec![out.join(layout::DICTIONARIES)],
        Stage::Display => vec![out.join(layout::DISPLAYS).join(DISPLAY_INDEX_FILE)],
        Stage::Render => vec![out.join(RENDER_RECORDS_FILE), out.join(layout::RENDERS)],
        Stage::Compose => vec![out.join(MANIFEST_FILE), out.join(layout::COMPOSITES)],
        Stage::Label => vec![out.join(layout::VQA)],
    }
}

fn clear(paths: &[PathBuf]) -> Result<(), StageError> {
    for p in paths {
        let res = if p.is_dir() {
            fs::remove_dir_all(p)
        } else if p.exists() {
            fs::remove_file(p)
        } else {
            continue;
        };
        res.map_err(|e| StageError::io(p, e))?;
    }
    Ok(())
}

fn stale_outputs(stage: Stage, out: &Path) -> Vec<PathBuf> {
    match stage {
        Stage::Dict => vec![out.join(layout::DICTIONARIES)],
        Stage::Display => vec![out.join(layout::DISPLAYS)],
        Stage::Render => vec![
            out.join(layout::RENDERS),
            out.join(layout::DIRECTIVES),
            out.join(RENDER_RECORDS_FILE),
        ],
        Stage::Compose => vec![out.join(layout::COMPOSITES), out.join(MANIFEST_FILE)],
        Stage::Label => vec![out.join(layout::VQA)],
    }
}

/// Runs one stage from scratch and returns its summary line.
pub(super) fn run(stage: Stage, c: &PipelineConfig, backend: BackendKind) -> Result<String, StageError> {
    clear(&stale_outputs(stage, &c.paths.output))?;
    match stage {
        Stage::Dict => dict(c),
        Stage::Display => display(c),
        Stage::Render => render(c, backend),
        Stage::Compose => compose(c),
        Stage::Label => label(c),
    }
}

fn sorted_files(dir: &Path, ext: &str, recursive: bool) -> Result<Vec<PathBuf>, StageError> {
    let walk = WalkDir::new(dir).max_depth(if recursive { usize::MAX } else { 1 }).sort_by_file_name();
    let mut files = Vec::new();
    for entry in walk {
        let entry = entry.map_err(|e| StageError::Invalid(format!("{}: {e}", dir.display())))?;
        let p = entry.path();
        if entry.file_type().is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            files.push(p.to_path_buf());
        }
    }
    Ok(files)
}

/// Generates `*.json` specs and validates ready-made `*.txt` lists into
/// `out/dictionaries`.
fn dict(c: &PipelineConfig) -> Result<String, StageError> {
    let src = &c.paths.dictionaries;
    let dst = c.paths.output.join(layout::DICTIONARIES);
    fs::create_dir_all(&dst).map_err(|e| StageError::io(&dst, e))?;
    let mut names = BTreeSet::new();
    let mut entries = 0usize;
    let specs = sorted_files(src, "json", false)?;
    let lists = sorted_files(src, "txt", false)?;
    for path in &specs {
        let dict = DictionarySpec::load(path)?.generate()?;
        if !names.insert(dict.name().to_owned()) {
            return Err(StageError::Invalid(format!("dictionary {} is defined twice", dict.name())));
        }
        entries += dict.len();
        save_dictionary(&dict, &dst.join(format!("{}.txt", dict.name())))?;
    }
    for path in &lists {
        let dict = load_dictionary(path)?;
        if !names.insert(dict.name().to_owned()) {
            return Err(StageError::Invalid(format!("dictionary {} is defined twice", dict.name())));
        }
        entries += dict.len();
        save_dictionary(&dict, &dst.join(format!("{}.txt", dict.name())))?;
    }
    if names.is_empty() {
        return Err(StageError::Invalid(format!("no *.json or *.txt dictionaries in {}", src.display())));
    }
    Ok(format!("{} dictionaries, {entries} entries", names.len()))
}

fn display(c: &PipelineConfig) -> Result<String, StageError> {
    let out = &c.paths.output;
    let dictionaries = load_dictionary_dir(&out.join(layout::DICTIONARIES))?;
    let fonts = match &c.paths.fonts {
        Some(dir) => FontSet::from_dir(dir)?,
        None => FontSet::builtin(),
    };
    let dst = out.join(layout::DISPLAYS);
    let templates = sorted_files(&c.paths.templates, "json", true)?;
    if templates.is_empty() {
        return Err(StageError::Invalid(format!("no templates under {}", c.paths.templates.display())));
    }
    let mut seen = BTreeSet::new();
    let mut total = 0usize;
    for (ti, path) in templates.iter().enumerate() {
        let template = DisplayTemplate::load(path)?;
        let device = template.metadata.device_name(path);
        if !seen.insert((device.clone(), template.metadata.mode.clone())) {
            return Err(StageError::Invalid(format!(
                "{}: device {device:?} already has a template for mode {:?}",
                path.display(),
                template.metadata.mode
            )));
        }
        let mut rng = stream(c.seed, &[stage::DISPLAY, ti as u64]);
        total += write_display_batch(
            &template,
            &device,
            &dictionaries,
            &fonts,
            c.display.per_template,
            &mut rng,
            &dst,
        )?
        .len();
    }
    Ok(format!("{total} displays from {} templates", templates.len()))
}

fn render(c: &PipelineConfig, backend: BackendKind) -> Result<String, StageError> {
    let out = &c.paths.output;
    let devices = load_device_registry(&c.paths.devices)?;
    let displays_dir = out.join(layout::DISPLAYS);
    let displays = DisplayIndexEntry::read_all(&displays_dir.join(DISPLAY_INDEX_FILE))?;
    let palette = match &c.paths.palette {
        Some(p) => Palette::load(p)?,
        None => Palette::default(),
    };
    let engine = backend.create()?;
    let batch = RenderBatch {
        devices: &devices,
        displays: &displays,
        displays_dir: &displays_dir,
        ranges: &c.render.ranges,
        palette: &palette,
        exclude: &c.render.exclude,
        count: c.render.count,
        seed: c.seed,
        workers: c.workers,
        max_attempts: c.render.max_attempts,
        passes: c.render.passes,
    };
    let summary = render_batch(&batch, engine.as_ref(), out)?;
    Ok(format!(
        "{} accepted, {} skipped, {} blurred",
        summary.records.len(),
        summary.skipped,
        summary.blurred()
    ))
}

fn compose(c: &PipelineConfig) -> Result<String, StageError> {
    let out = &c.paths.output;
    let foregrounds = load_foregrounds(out)?;
    let backgrounds = curate_backgrounds(&c.paths.backgrounds)?;
    let scorer: Box<dyn PlacementScorer> = match c.compose.scorer {
        ScorerKind::Random => Box::new(RandomScorer::default()),
        ScorerKind::Fopa => {
            let cmd = c
                .compose
                .fopa
                .as_ref()
                .ok_or_else(|| StageError::Invalid("the fopa scorer needs compose.fopa".into()))?;
            Box::new(FopaScorer::new(&cmd.program, cmd.args.clone()))
        }
    };
    let harmonize = if c.compose.harmonize {
        let adapter: Arc<dyn Harmonizer> = match &c.compose.harmonizer {
            Some(cmd) => Arc::new(CommandHarmonizer {
                program: cmd.program.clone(),
                args: cmd.args.clone(),
            }),
            None => Arc::new(IdentityHarmonizer),
        };
        HarmonizeHook::Enabled(Some(adapter))
    } else {
        HarmonizeHook::Disabled
    };
    let job = ComposeJob {
        foregrounds: &foregrounds,
        backgrounds: &backgrounds,
        scorer: scorer.as_ref(),
        count: c.compose.count,
        seed: c.seed,
        workers: c.workers,
        min_area_fraction: c.compose.min_fraction,
        harmonize,
    };
    let records = generate_dataset(&job, out)?;
    let clamped = records.iter().filter(|r| r.clamped).count();
    Ok(format!(
        "{} composites from {} foregrounds on {} backgrounds, {clamped} clamped",
        records.len(),
        foregrounds.len(),
        backgrounds.len()
    ))
}

fn label(c: &PipelineConfig) -> Result<String, StageError> {
    let out = &c.paths.output;
    let templates = match &c.label.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::builtin(),
    };
    let manifest = read_manifest(&out.join(MANIFEST_FILE))?;
    let renders = read_render_records(&out.join(RENDER_RECORDS_FILE))?;
    let pairs = label_dataset(
        &templates,
        &manifest,
        &renders,
        c.label.format,
        c.label.pairs_per_image,
        c.seed,
    )?;
    write_pairs(&out.join(layout::VQA), &pairs)?;
    Ok(format!("{} pairs for {} images", pairs.len(), manifest.len()))
}

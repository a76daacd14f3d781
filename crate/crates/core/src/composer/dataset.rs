//! Dataset generation and the composite manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use image::{GrayImage, RgbImage};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::{downscale_background, Background};
use super::composite::{composite, crop_to_mask, harmonize, placed_mask, HarmonizeHook};
use super::dedup::{Triplet, TripletRegistry};
use super::placement::{correct_aspect_ratio, enforce_min_area, rescale_box, PlacementBox, PlacementSource};
use super::scorer::PlacementScorer;
use super::ComposerError;
use crate::imageio::save_png;
use crate::rng::{stage, stream};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const COMPOSITES_DIR: &str = "composites";
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.10;
/// Placements tried for one foreground/background pair before drawing a new pair.
pub const DEDUP_RETRIES: usize = 20;
/// Pairs tried for one item before giving up on it.
pub const MAX_PAIRS: usize = 10;

const RENDERS_CSV: &str = "renders.csv";

/// A rendered foreground with its mask. `id` and `mask_id` are paths relative
/// to the foreground root, as written in the render records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Foreground {
    pub id: String,
    pub mask_id: String,
    pub rgb: PathBuf,
    pub mask: PathBuf,
}

#[derive(Deserialize)]
struct RenderPaths {
    rgb_path: String,
    mask_path: String,
}

/// Reads the foreground list from `root/renders.csv`.
pub fn load_foregrounds(root: &Path) -> Result<Vec<Foreground>, ComposerError> {
    let csv_path = root.join(RENDERS_CSV);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| ComposerError::csv(&csv_path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RenderPaths>() {
        let row = row.map_err(|e| ComposerError::csv(&csv_path, e))?;
        out.push(Foreground {
            rgb: root.join(&row.rgb_path),
            mask: root.join(&row.mask_path),
            id: row.rgb_path,
            mask_id: row.mask_path,
        });
    }
    if out.is_empty() {
        return Err(ComposerError::NoForegrounds(csv_path));
    }
    Ok(out)
}

/// One manifest row. `composite` is relative to the dataset root,
/// `foreground` and `mask` to the foreground root, `background` is the file
/// name in the background directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeRecord {
    pub composite: String,
    pub foreground: String,
    pub mask: String,
    pub background: String,
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
    pub source: PlacementSource,
    pub corrected: bool,
    pub clamped: bool,
}

impl CompositeRecord {
    pub fn placement(&self) -> PlacementBox {
        PlacementBox {
            x: self.x,
            y: self.y,
            width: self.w,
            height: self.h,
            source: self.source,
            corrected: self.corrected,
            clamped: self.clamped,
        }
    }

    pub fn triplet(&self) -> Triplet {
        Triplet {
            foreground: self.foreground.clone(),
            background: self.background.clone(),
            x: self.x,
            y: self.y,
            width: self.w,
            height: self.h,
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<CompositeRecord>, ComposerError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| ComposerError::csv(path, e))?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| ComposerError::csv(path, e))
}

pub struct ComposeJob<'a> {
    pub foregrounds: &'a [Foreground],
    pub backgrounds: &'a [Background],
    pub scorer: &'a dyn PlacementScorer,
    pub count: usize,
    pub seed: u64,
    pub workers: usize,
    pub min_area_fraction: f64,
    pub harmonize: HarmonizeHook,
}

struct Plan {
    index: usize,
    foreground: usize,
    background: usize,
    fg: RgbImage,
    mask: GrayImage,
    placement: PlacementBox,
}

impl Plan {
    fn triplet(&self, job: &ComposeJob) -> Triplet {
        Triplet {
            foreground: job.foregrounds[self.foreground].id.clone(),
            background: job.backgrounds[self.background].id.clone(),
            x: self.placement.x,
            y: self.placement.y,
            width: self.placement.width,
            height: self.placement.height,
        }
    }
}

type SmallBackground = Arc<(RgbImage, f64)>;

struct Planner<'a> {
    job: &'a ComposeJob<'a>,
    small: Mutex<HashMap<usize, SmallBackground>>,
}

fn load_rgb(path: &Path) -> Result<RgbImage, ComposerError> {
    Ok(image::open(path).map_err(|e| ComposerError::image(path, e))?.to_rgb8())
}

fn load_gray(path: &Path) -> Result<GrayImage, ComposerError> {
    Ok(image::open(path).map_err(|e| ComposerError::image(path, e))?.to_luma8())
}

impl Planner<'_> {
    fn small_background(&self, index: usize) -> Result<SmallBackground, ComposerError> {
        if let Some(hit) = self.small.lock().expect("cache lock").get(&index) {
            return Ok(Arc::clone(hit));
        }
        let full = load_rgb(&self.job.backgrounds[index].path)?;
        let small = Arc::new(downscale_background(&full));
        self.small.lock().expect("cache lock").insert(index, Arc::clone(&small));
        Ok(small)
    }

    /// Candidate placement for item `index`: `pair` selects the
    /// foreground/background draw, `retry` the placement draw on that pair.
    fn plan(&self, index: usize, pair: usize, retry: usize) -> Result<Plan, ComposerError> {
        let job = self.job;
        let item = [stage::COMPOSE, index as u64, pair as u64];
        let mut pair_rng = stream(job.seed, &item);
        let foreground = pair_rng.gen_range(0..job.foregrounds.len());
        let background = pair_rng.gen_range(0..job.backgrounds.len());
        let fg_entry = &job.foregrounds[foreground];
        let (fg, mask) = crop_to_mask(&load_rgb(&fg_entry.rgb)?, &load_gray(&fg_entry.mask)?)?;
        let small = self.small_background(background)?;
        let (bg_small, scale) = (&small.0, small.1);
        let mut rng = stream(job.seed, &[item[0], item[1], item[2], retry as u64]);
        let scored = job.scorer.score(&fg, &mask, bg_small, &mut rng)?;
        let bg = &job.backgrounds[background];
        let frame = (bg.width, bg.height);
        let placement = rescale_box(scored, scale, frame);
        let placement = correct_aspect_ratio(placement, &mask)?;
        let placement = enforce_min_area(placement, frame, job.min_area_fraction);
        Ok(Plan {
            index,
            foreground,
            background,
            fg,
            mask,
            placement,
        })
    }
}

/// Writes `count` composites under `out_root/composites/` and the manifest
/// to `out_root/manifest.csv`, returning the rows in item order.
///
/// Item `i` draws from its own random streams and duplicates are resolved in
/// item order, so the dataset is identical for any worker count.
pub fn generate_dataset(job: &ComposeJob, out_root: &Path) -> Result<Vec<CompositeRecord>, ComposerError> {
    if job.backgrounds.is_empty() {
        return Err(ComposerError::NoBackgrounds(out_root.to_owned()));
    }
    if job.foregrounds.is_empty() {
        return Err(ComposerError::NoForegrounds(out_root.to_owned()));
    }
    let comp_dir = out_root.join(COMPOSITES_DIR);
    fs::create_dir_all(&comp_dir).map_err(|e| ComposerError::io(&comp_dir, e))?;
    let manifest_path = out_root.join(MANIFEST_FILE);
    let mut writer = csv::Writer::from_path(&manifest_path).map_err(|e| ComposerError::csv(&manifest_path, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.workers.max(1))
        .build()
        .map_err(|e| ComposerError::Worker(e.to_string()))?;
    let planner = Planner {
        job,
        small: Mutex::new(HashMap::new()),
    };
    let registry = TripletRegistry::new();
    let wave = (job.workers.max(1) * 4).max(8);
    let mut records = Vec::with_capacity(job.count);
    let mut next = 0;
    while next < job.count {
        let end = (next + wave).min(job.count);
        let first: Vec<Result<Plan, ComposerError>> =
            pool.install(|| (next..end).into_par_iter().map(|i| planner.plan(i, 0, 0)).collect());
        let mut accepted = Vec::with_capacity(first.len());
        for (index, plan) in (next..end).zip(first) {
            accepted.push(admit(&planner, &registry, index, plan?)?);
        }
        let written: Vec<Result<CompositeRecord, ComposerError>> =
            pool.install(|| accepted.into_par_iter().map(|p| write_composite(job, p, out_root)).collect());
        for record in written {
            let record = record?;
            writer.serialize(&record).map_err(|e| ComposerError::csv(&manifest_path, e))?;
            records.push(record);
        }
        next = end;
        log::debug!("compose: {next}/{}", job.count);
    }
    writer
        .flush()
        .map_err(|e| ComposerError::io(&manifest_path, e))?;
    log::info!("compose: {} composites, {} triplets", records.len(), registry.len());
    Ok(records)
}

/// Walks the candidate sequence of one item until a triplet is new.
fn admit(planner: &Planner, registry: &TripletRegistry, index: usize, first: Plan) -> Result<Plan, ComposerError> {
    let mut candidate = first;
    let mut attempts = 0;
    for pair in 0..MAX_PAIRS {
        for retry in 0..=DEDUP_RETRIES {
            if pair > 0 || retry > 0 {
                candidate = planner.plan(index, pair, retry)?;
            }
            attempts += 1;
            if !registry.check_insert(candidate.triplet(planner.job)) {
                return Ok(candidate);
            }
        }
        log::debug!("item {index}: pair {pair} exhausted its dedup retries; drawing a new pair");
    }
    Err(ComposerError::RetriesExhausted { index, attempts })
}

fn write_composite(job: &ComposeJob, plan: Plan, out_root: &Path) -> Result<CompositeRecord, ComposerError> {
    let bg_entry = &job.backgrounds[plan.background];
    let bg = load_rgb(&bg_entry.path)?;
    let mut out = composite(&plan.fg, &plan.mask, &bg, &plan.placement)?;
    if job.harmonize.is_enabled() {
        let full_mask = placed_mask(&plan.mask, &plan.placement, bg.dimensions());
        out = harmonize(&job.harmonize, out, &full_mask)?;
    }
    let rel = format!("{COMPOSITES_DIR}/c{:06}.png", plan.index);
    let path = out_root.join(&rel);
    save_png(&out, &path).map_err(|e| ComposerError::image(&path, e))?;
    let fg = &job.foregrounds[plan.foreground];
    let p = plan.placement;
    Ok(CompositeRecord {
        composite: rel,
        foreground: fg.id.clone(),
        mask: fg.mask_id.clone(),
        background: bg_entry.id.clone(),
        x: p.x,
        y: p.y,
        w: p.width,
        h: p.height,
        source: p.source,
        corrected: p.corrected,
        clamped: p.clamped,
    })
}

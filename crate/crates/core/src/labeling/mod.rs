//! Question/answer pairs for composites and annotated real photos.

pub mod annotate;
pub mod templates;

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::CompositeRecord;
use crate::renderer::RenderRecord;
use crate::rng::{stage, stream, Rng};

pub use annotate::{annotate_interactive, annotate_real, read_annotations, write_annotations};
pub use templates::{FullTemplate, OneWordTemplates, TemplateSet};

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error("reading index {index} is out of range for {len} readings")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("template index {index} is out of range for {len} templates")]
    TemplateOutOfRange { index: usize, len: usize },
    #[error("manifest foreground {0} has no render record")]
    DanglingForeground(String),
    #[error("line {line}: missing {field}")]
    MissingField { line: usize, field: String },
    #[error("line {line}: {field} differs from earlier rows for {image}")]
    ConflictingField { line: usize, field: String, image: String },
    #[error("image {0} has no readings")]
    NoReadings(String),
    #[error("one-word answer {0:?} contains whitespace")]
    NotOneWord(String),
    #[error("invalid templates: {0}")]
    InvalidTemplates(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl LabelingError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairFormat {
    #[default]
    Full,
    OneWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairTarget {
    Measurement,
    Unit,
    DeviceSummary,
}

/// One JSONL line of the VQA output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaPair {
    pub image: String,
    pub question: String,
    pub answer: String,
    pub format: PairFormat,
    pub target: PairTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub measurement_type: String,
    pub value: String,
    pub unit: String,
}

/// What is visible in one image. Values are kept exactly as displayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image: String,
    pub device: String,
    pub mode: String,
    pub readings: Vec<Reading>,
}

impl AnnotationRecord {
    fn reading(&self, index: usize) -> Result<&Reading, LabelingError> {
        self.readings.get(index).ok_or(LabelingError::IndexOutOfRange {
            index,
            len: self.readings.len(),
        })
    }

    /// The annotation implied by a render record, attached to `image`.
    pub fn from_render(image: &str, record: &RenderRecord) -> Self {
        let readings = record
            .measurement_types
            .iter()
            .zip(&record.values)
            .zip(&record.units)
            .map(|((mt, value), unit)| Reading {
                measurement_type: mt.clone(),
                value: value.clone(),
                unit: unit.clone(),
            })
            .collect();
        Self {
            image: image.to_owned(),
            device: record.device.clone(),
            mode: record.mode.clone(),
            readings,
        }
    }
}

pub fn make_full_pair(
    templates: &TemplateSet,
    annotation: &AnnotationRecord,
    reading_index: usize,
    template_index: usize,
) -> Result<VqaPair, LabelingError> {
    let reading = annotation.reading(reading_index)?;
    let template = templates.full.get(template_index).ok_or(LabelingError::TemplateOutOfRange {
        index: template_index,
        len: templates.full.len(),
    })?;
    Ok(VqaPair {
        image: annotation.image.clone(),
        question: templates::fill(&template.question, annotation, reading),
        answer: templates::fill(&template.answer, annotation, reading),
        format: PairFormat::Full,
        target: template.target,
    })
}

/// `target` must be [`PairTarget::Measurement`] or [`PairTarget::Unit`].
pub fn make_one_word_pair(
    templates: &TemplateSet,
    annotation: &AnnotationRecord,
    reading_index: usize,
    target: PairTarget,
) -> Result<VqaPair, LabelingError> {
    let reading = annotation.reading(reading_index)?;
    let (question, answer) = match target {
        PairTarget::Measurement => (&templates.one_word.measurement, &reading.value),
        PairTarget::Unit => (&templates.one_word.unit, &reading.unit),
        PairTarget::DeviceSummary => {
            return Err(LabelingError::InvalidTemplates(
                "device summaries have no one-word form".into(),
            ))
        }
    };
    if answer.is_empty() || answer.chars().any(char::is_whitespace) {
        return Err(LabelingError::NotOneWord(answer.clone()));
    }
    Ok(VqaPair {
        image: annotation.image.clone(),
        question: format!(
            "{} {}",
            templates::fill(question, annotation, reading),
            templates.one_word.instruction
        ),
        answer: answer.clone(),
        format: PairFormat::OneWord,
        target,
    })
}

/// Draws `per_image` distinct pairs for one annotation. When fewer distinct
/// pairs exist, all of them are returned.
pub fn pairs_for(
    templates: &TemplateSet,
    annotation: &AnnotationRecord,
    format: PairFormat,
    per_image: usize,
    rng: &mut Rng,
) -> Result<Vec<VqaPair>, LabelingError> {
    if annotation.readings.is_empty() {
        return Err(LabelingError::NoReadings(annotation.image.clone()));
    }
    let n = annotation.readings.len();
    let pairs = match format {
        PairFormat::Full => {
            let mut combos: Vec<(usize, usize)> =
                (0..n).flat_map(|r| (0..templates.full.len()).map(move |t| (r, t))).collect();
            combos.shuffle(rng);
            combos
                .into_iter()
                .take(per_image)
                .map(|(r, t)| make_full_pair(templates, annotation, r, t))
                .collect::<Result<Vec<_>, _>>()?
        }
        PairFormat::OneWord => {
            let mut combos: Vec<(usize, PairTarget)> = (0..n)
                .flat_map(|r| [(r, PairTarget::Measurement), (r, PairTarget::Unit)])
                .collect();
            combos.shuffle(rng);
            combos
                .into_iter()
                .take(per_image)
                .map(|(r, t)| make_one_word_pair(templates, annotation, r, t))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(pairs)
}

/// Labels a list of annotations; annotation `i` draws from its own stream.
pub fn label_annotations(
    templates: &TemplateSet,
    annotations: &[AnnotationRecord],
    format: PairFormat,
    per_image: usize,
    seed: u64,
) -> Result<Vec<VqaPair>, LabelingError> {
    let mut out = Vec::with_capacity(annotations.len() * per_image);
    for (i, a) in annotations.iter().enumerate() {
        let mut rng = stream(seed, &[stage::LABEL, i as u64]);
        out.extend(pairs_for(templates, a, format, per_image, &mut rng)?);
    }
    Ok(out)
}

/// Joins each manifest row to the render record of its foreground.
pub fn annotations_for_manifest(
    manifest: &[CompositeRecord],
    renders: &[RenderRecord],
) -> Result<Vec<AnnotationRecord>, LabelingError> {
    let by_rgb: HashMap<&str, &RenderRecord> = renders.iter().map(|r| (r.rgb_path.as_str(), r)).collect();
    manifest
        .iter()
        .map(|row| {
            let record = by_rgb
                .get(row.foreground.as_str())
                .ok_or_else(|| LabelingError::DanglingForeground(row.foreground.clone()))?;
            Ok(AnnotationRecord::from_render(&row.composite, record))
        })
        .collect()
}

/// Labels composites from their recorded render parameters, without
/// touching any image.
pub fn label_dataset(
    templates: &TemplateSet,
    manifest: &[CompositeRecord],
    renders: &[RenderRecord],
    format: PairFormat,
    per_image: usize,
    seed: u64,
) -> Result<Vec<VqaPair>, LabelingError> {
    let annotations = annotations_for_manifest(manifest, renders)?;
    label_annotations(templates, &annotations, format, per_image, seed)
}

pub fn write_pairs(path: &Path, pairs: &[VqaPair]) -> Result<(), LabelingError> {
    let file = fs::File::create(path).map_err(|e| LabelingError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        serde_json::to_writer(&mut w, p).map_err(|e| LabelingError::Json {
            path: path.to_owned(),
            source: e,
        })?;
        w.write_all(b"\n").map_err(|e| LabelingError::io(path, e))?;
    }
    w.flush().map_err(|e| LabelingError::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<VqaPair>, LabelingError> {
    let text = fs::read_to_string(path).map_err(|e| LabelingError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| LabelingError::Json {
                path: path.to_owned(),
                source: e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn metronome() -> AnnotationRecord {
        AnnotationRecord {
            image: "composites/c000000.png".into(),
            device: "metronome".into(),
            mode: "tempo".into(),
            readings: vec![Reading {
                measurement_type: "TEMPO".into(),
                value: "30".into(),
                unit: "BPM".into(),
            }],
        }
    }

    #[test]
    fn full_and_one_word_forms() {
        let t = TemplateSet::builtin();
        let full = make_full_pair(&t, &metronome(), 0, 0).unwrap();
        assert_eq!(full.answer, "The digital display conveys a TEMPO reading of 30 BPM.");
        assert_eq!(full.target, PairTarget::Measurement);
        let unit = make_one_word_pair(&t, &metronome(), 0, PairTarget::Unit).unwrap();
        assert_eq!(unit.answer, "BPM");
        assert!(unit.question.starts_with("What unit is used for TEMPO? Answer with a single word"));
        assert!(matches!(
            make_one_word_pair(&t, &metronome(), 1, PairTarget::Unit),
            Err(LabelingError::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn draws_are_distinct_and_capped() {
        let t = TemplateSet::builtin();
        let pairs = pairs_for(&t, &metronome(), PairFormat::OneWord, 5, &mut seeded(3)).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_ne!(pairs[0], pairs[1]);
        let full = pairs_for(&t, &metronome(), PairFormat::Full, 3, &mut seeded(3)).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full, pairs_for(&t, &metronome(), PairFormat::Full, 3, &mut seeded(3)).unwrap());
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = label_annotations(&TemplateSet::builtin(), &[metronome()], PairFormat::OneWord, 2, 1).unwrap();
        write_pairs(&path, &pairs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"image":"composites/c000000.png","question":"#));
        assert!(text.contains(r#""format":"one_word""#));
        assert_eq!(read_pairs(&path).unwrap(), pairs);
    }
}

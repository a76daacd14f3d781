use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::font::{Face, FontSet};
use super::roi::{clear_roi, RegionOfInterest};
use super::template::DisplayTemplate;
use super::DisplayError;
use crate::dictionaries::Dictionary;

/// Inset on every side of an ROI, as a fraction of the ROI height.
pub const MARGIN_FRACTION: f32 = 0.04;
/// Smallest size tried before giving up with `ValueTooLong`.
pub const MIN_FONT_SIZE: u32 = 6;
pub const DISPLAY_INDEX_FILE: &str = "displays.jsonl";

/// Draws `value` right-aligned and vertically centred in `roi`, at the
/// largest size that fits inside the margin.
pub fn render_value(
    image: &mut RgbImage,
    roi: &RegionOfInterest,
    value: &str,
    face: &dyn Face,
    fg: Rgb<u8>,
) -> Result<(), DisplayError> {
    if value.is_empty() {
        return Err(DisplayError::EmptyValue);
    }
    if !roi.fits_in(image.width(), image.height()) {
        return Err(DisplayError::RoiOutOfBounds {
            roi: *roi,
            width: image.width(),
            height: image.height(),
        });
    }
    let margin = MARGIN_FRACTION * roi.height as f32;
    let avail_w = roi.width as f32 - 2.0 * margin;
    let avail_h = roi.height as f32 - 2.0 * margin;
    let fits = |size: u32| -> Result<bool, DisplayError> {
        let (w, h) = face.measure(value, size)?;
        Ok(w as f32 <= avail_w && h as f32 <= avail_h)
    };
    let too_long = || DisplayError::ValueTooLong {
        value: value.to_owned(),
        width: roi.width,
        height: roi.height,
    };
    if avail_w < 1.0 || avail_h < 1.0 || !fits(MIN_FONT_SIZE)? {
        return Err(too_long());
    }
    // Largest fitting size; TrueType ink can be well under the em size, so
    // search past the ROI height.
    let (mut lo, mut hi) = (MIN_FONT_SIZE, (avail_h.ceil() as u32).saturating_mul(4).max(MIN_FONT_SIZE + 1));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let cov = face.rasterize(value, lo)?;
    if cov.width == 0 || cov.height == 0 {
        return Ok(());
    }
    let right = (roi.x as f32 + roi.width as f32 - margin).floor() as u32;
    let x0 = right.saturating_sub(cov.width).max(roi.x);
    let y0 = roi.y + (roi.height - cov.height.min(roi.height)) / 2;
    for cy in 0..cov.height {
        for cx in 0..cov.width {
            let a = cov.at(cx, cy);
            if a <= 0.0 {
                continue;
            }
            let (x, y) = (x0 + cx, y0 + cy);
            if !roi.contains(x, y) {
                continue;
            }
            if a >= 1.0 {
                image.put_pixel(x, y, fg);
            } else {
                let p = image.get_pixel_mut(x, y);
                for c in 0..3 {
                    let v = f32::from(fg.0[c]) * a + f32::from(p.0[c]) * (1.0 - a);
                    p.0[c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok(())
}

/// One generated display image and the readings drawn on it.
#[derive(Debug, Clone)]
pub struct SyntheticDisplay {
    pub image: RgbImage,
    /// One value per label, in label order.
    pub values: Vec<String>,
    pub font_id: String,
    pub template_ref: String,
}

/// A template with its ROIs cleared once and its dictionaries resolved.
pub struct DisplayGenerator<'a> {
    template: &'a DisplayTemplate,
    rois: &'a [RegionOfInterest],
    dictionaries: Vec<&'a Dictionary>,
    fonts: &'a FontSet,
    base: RgbImage,
}

impl<'a> DisplayGenerator<'a> {
    /// `dictionaries` is keyed by dictionary name; each label binds to
    /// [`super::ModeLabel::dictionary_key`].
    pub fn new(
        template: &'a DisplayTemplate,
        dictionaries: &'a BTreeMap<String, Dictionary>,
        fonts: &'a FontSet,
    ) -> Result<Self, DisplayError> {
        let rois = template.rois().ok_or(DisplayError::MissingRois)?;
        if fonts.is_empty() {
            return Err(DisplayError::Font("empty font set".into()));
        }
        let dictionaries = template
            .metadata
            .labels
            .iter()
            .map(|l| {
                dictionaries
                    .get(l.dictionary_key())
                    .ok_or_else(|| DisplayError::MissingDictionary(l.dictionary_key().to_owned()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut base = template.image.clone();
        for roi in rois {
            clear_roi(&mut base, roi, template.bg_color)?;
        }
        Ok(Self {
            template,
            rois,
            dictionaries,
            fonts,
            base,
        })
    }

    pub fn next_display<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<SyntheticDisplay, DisplayError> {
        let face = self.fonts.choose(rng);
        let mut image = self.base.clone();
        let mut values = vec![String::new(); self.rois.len()];
        for roi in self.rois {
            let value = self.dictionaries[roi.label_index].sample(rng);
            render_value(&mut image, roi, value, face.as_ref(), self.template.fg_color)?;
            values[roi.label_index] = value.to_owned();
        }
        Ok(SyntheticDisplay {
            image,
            values,
            font_id: face.id().to_owned(),
            template_ref: self.template.metadata.mode.clone(),
        })
    }
}

pub fn generate_display_images<R: rand::Rng + ?Sized>(
    template: &DisplayTemplate,
    dictionaries: &BTreeMap<String, Dictionary>,
    fonts: &FontSet,
    count: usize,
    rng: &mut R,
) -> Result<Vec<SyntheticDisplay>, DisplayError> {
    let gen = DisplayGenerator::new(template, dictionaries, fonts)?;
    (0..count).map(|_| gen.next_display(rng)).collect()
}

/// One line of `displays.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayIndexEntry {
    pub id: String,
    pub image: String,
    pub device: String,
    pub mode: String,
    pub font: String,
    pub values: Vec<String>,
    pub units: Vec<String>,
    pub measurement_types: Vec<String>,
}

impl DisplayIndexEntry {
    pub fn read_all(path: &Path) -> Result<Vec<Self>, DisplayError> {
        let text = fs::read_to_string(path).map_err(|e| DisplayError::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| DisplayError::json(path, e)))
            .collect()
    }
}

/// File-name-safe form of a device or mode name.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Generates `count` displays for one template, writing PNGs into `out_dir`
/// and appending their entries to `out_dir/displays.jsonl`.
pub fn write_display_batch<R: rand::Rng + ?Sized>(
    template: &DisplayTemplate,
    device: &str,
    dictionaries: &BTreeMap<String, Dictionary>,
    fonts: &FontSet,
    count: usize,
    rng: &mut R,
    out_dir: &Path,
) -> Result<Vec<DisplayIndexEntry>, DisplayError> {
    let gen = DisplayGenerator::new(template, dictionaries, fonts)?;
    fs::create_dir_all(out_dir).map_err(|e| DisplayError::io(out_dir, e))?;
    let index_path = out_dir.join(DISPLAY_INDEX_FILE);
    let index = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&index_path)
        .map_err(|e| DisplayError::io(&index_path, e))?;
    let mut index = BufWriter::new(index);
    let labels = &template.metadata.labels;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let display = gen.next_display(rng)?;
        let id = format!("{}_{}_{:05}", slug(device), slug(&template.metadata.mode), i);
        let file = format!("{id}.png");
        let path = out_dir.join(&file);
        save_display(&display, &path)?;
        let entry = DisplayIndexEntry {
            id,
            image: file,
            device: device.to_owned(),
            mode: template.metadata.mode.clone(),
            font: display.font_id,
            values: display.values,
            units: labels.iter().map(|l| l.unit.clone()).collect(),
            measurement_types: labels.iter().map(|l| l.measurement_type.clone()).collect(),
        };
        let line = serde_json::to_string(&entry).expect("index entry serializes");
        writeln!(index, "{line}").map_err(|e| DisplayError::io(&index_path, e))?;
        entries.push(entry);
    }
    index.flush().map_err(|e| DisplayError::io(&index_path, e))?;
    Ok(entries)
}

/// Writes a single image without touching the index; used by the CLI.
pub fn save_display(display: &SyntheticDisplay, path: &Path) -> Result<(), DisplayError> {
    crate::imageio::save_png(&display.image, path).map_err(|e| DisplayError::image(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::display::font::{SegmentFace, SegmentStyle, Weight};
    use crate::display::template::{binarize_template, ModeLabel, ModeMetadata, Polarity};
    use crate::rng;

    fn face() -> SegmentFace {
        SegmentFace::new(SegmentStyle::Classic, Weight::Regular, false)
    }

    fn canvas() -> RgbImage {
        RgbImage::from_pixel(120, 60, Rgb([10, 10, 10]))
    }

    #[test]
    fn value_stays_inside_roi() {
        let mut img = canvas();
        let roi = RegionOfInterest::new(20, 10, 80, 40, 0);
        let fg = Rgb([200, 250, 210]);
        render_value(&mut img, &roi, "30", &face(), fg).unwrap();
        let mut hits = 0;
        for (x, y, p) in img.enumerate_pixels() {
            if *p != Rgb([10, 10, 10]) {
                assert!(roi.contains(x, y), "ink at {x},{y}");
            }
            if *p == fg {
                hits += 1;
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn value_is_right_aligned() {
        let mut img = canvas();
        let roi = RegionOfInterest::new(0, 0, 120, 60, 0);
        render_value(&mut img, &roi, "1", &face(), Rgb([255, 255, 255])).unwrap();
        let ink_x: Vec<u32> = img
            .enumerate_pixels()
            .filter(|(_, _, p)| p.0[0] > 10)
            .map(|(x, _, _)| x)
            .collect();
        assert!(*ink_x.iter().min().unwrap() > 60);
        assert!(*ink_x.iter().max().unwrap() >= 110);
    }

    #[test]
    fn long_value_in_tiny_roi() {
        let mut img = canvas();
        let roi = RegionOfInterest::new(0, 0, 10, 10, 0);
        let value = "0123456789".repeat(4);
        assert!(matches!(
            render_value(&mut img, &roi, &value, &face(), Rgb([255, 255, 255])),
            Err(DisplayError::ValueTooLong { .. })
        ));
    }

    #[test]
    fn rendering_is_deterministic() {
        let roi = RegionOfInterest::new(5, 5, 100, 40, 0);
        let draw = || {
            let mut img = canvas();
            render_value(&mut img, &roi, "-4.416", &face(), Rgb([90, 200, 90])).unwrap();
            img
        };
        assert_eq!(draw(), draw());
    }

    fn template() -> DisplayTemplate {
        let img = RgbImage::from_fn(160, 60, |x, y| {
            if (x / 9 + y / 13) % 5 == 0 {
                Rgb([220, 230, 220])
            } else {
                Rgb([30, 40, 35])
            }
        });
        let meta = ModeMetadata {
            image_filename: "x.png".into(),
            roi_count: 2,
            mode: "dc volts".into(),
            labels: vec![
                ModeLabel {
                    measurement_type: "DC Voltage".into(),
                    unit: "V".into(),
                    dictionary: None,
                },
                ModeLabel {
                    measurement_type: "Range".into(),
                    unit: "V".into(),
                    dictionary: Some("range".into()),
                },
            ],
            rois: Some(vec![
                RegionOfInterest::new(4, 4, 100, 40, 0),
                RegionOfInterest::new(110, 4, 46, 20, 1),
            ]),
            device: Some("multimeter".into()),
            polarity: Polarity::Auto,
        };
        binarize_template(img, meta).unwrap()
    }

    fn dicts() -> BTreeMap<String, Dictionary> {
        [
            Dictionary::new("V", "V", vec!["0.022".into()]).unwrap(),
            Dictionary::new("range", "V", vec!["2".into(), "20".into(), "200".into()]).unwrap(),
        ]
        .into_iter()
        .map(|d| (d.name().to_owned(), d))
        .collect()
    }

    #[test]
    fn generation_count_and_binding() {
        let t = template();
        let fonts = FontSet::builtin();
        let d = dicts();
        let mut r = rng::seeded(5);
        assert!(generate_display_images(&t, &d, &fonts, 0, &mut r).unwrap().is_empty());
        let out = generate_display_images(&t, &d, &fonts, 12, &mut r).unwrap();
        assert_eq!(out.len(), 12);
        for s in &out {
            assert_eq!(s.values[0], "0.022");
            assert!(d["range"].contains(&s.values[1]));
            assert_eq!(s.template_ref, "dc volts");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let t = template();
        let fonts = FontSet::builtin();
        let d = dicts();
        let run = || {
            let mut r = rng::seeded(99);
            generate_display_images(&t, &d, &fonts, 20, &mut r)
                .unwrap()
                .into_iter()
                .map(|s| (s.values, s.font_id))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn missing_dictionary_and_rois() {
        let t = template();
        let fonts = FontSet::builtin();
        let mut d = dicts();
        d.remove("range");
        let mut r = rng::seeded(1);
        assert!(matches!(
            generate_display_images(&t, &d, &fonts, 1, &mut r),
            Err(DisplayError::MissingDictionary(k)) if k == "range"
        ));
        let mut no_rois = template();
        no_rois.metadata.rois = None;
        assert!(matches!(
            generate_display_images(&no_rois, &dicts(), &fonts, 1, &mut r),
            Err(DisplayError::MissingRois)
        ));
    }

    #[test]
    fn batch_writer_appends_index() {
        let t = template();
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng::seeded(3);
        let entries =
            write_display_batch(&t, "multimeter", &dicts(), &FontSet::builtin(), 3, &mut r, dir.path()).unwrap();
        assert_eq!(entries[0].id, "multimeter_dc_volts_00000");
        assert!(dir.path().join("multimeter_dc_volts_00002.png").exists());
        let read = DisplayIndexEntry::read_all(&dir.path().join(DISPLAY_INDEX_FILE)).unwrap();
        assert_eq!(read, entries);
        assert_eq!(read[1].units, ["V", "V"]);
    }
}

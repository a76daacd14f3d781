//! A small self-contained project: synthetic LCD templates, box meshes,
//! procedural backgrounds and a config that runs end to end on the mock
//! backend.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng as _;
use thiserror::Error;

use crate::dictionaries::{DictionarySpec, RangeSpec, ValueSpec, DEFAULT_ENTRY_CAP};
use crate::display::font::{SegmentFace, SegmentStyle, Weight};
use crate::display::generate::render_value;
use crate::display::{ModeLabel, ModeMetadata, Polarity, RegionOfInterest};
use crate::imageio::save_png;
use crate::pipeline::config::PipelineConfig;
use crate::renderer::RenderRanges;
use crate::rng::seeded;

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("{} already exists and is not empty", .0.display())]
    NotEmpty(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("drawing template: {0}")]
    Display(#[from] crate::display::DisplayError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SampleError + '_ {
    move |source| SampleError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), SampleError> {
    let mut text = serde_json::to_string_pretty(value).expect("sample documents serialize");
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

fn save(img: &RgbImage, path: &Path) -> Result<(), SampleError> {
    save_png(img, path).map_err(|source| SampleError::Image {
        path: path.to_owned(),
        source,
    })
}

struct Readout {
    measurement_type: &'static str,
    unit: &'static str,
    dictionary: &'static str,
    example: &'static str,
    roi: (u32, u32, u32, u32),
}

struct Screen {
    device: &'static str,
    mode: &'static str,
    size: (u32, u32),
    readouts: &'static [Readout],
}

const SCREENS: &[Screen] = &[
    Screen {
        device: "metronome",
        mode: "tempo",
        size: (320, 120),
        readouts: &[Readout {
            measurement_type: "TEMPO",
            unit: "BPM",
            dictionary: "tempo_bpm",
            example: "120",
            roi: (60, 16, 200, 88),
        }],
    },
    Screen {
        device: "pulse_oximeter",
        mode: "spot_check",
        size: (320, 200),
        readouts: &[
            Readout {
                measurement_type: "SpO2",
                unit: "%",
                dictionary: "spo2_percent",
                example: "98",
                roi: (40, 12, 240, 84),
            },
            Readout {
                measurement_type: "Pulse Rate",
                unit: "BPM",
                dictionary: "pulse_bpm",
                example: "76",
                roi: (40, 108, 240, 80),
            },
        ],
    },
    Screen {
        device: "multimeter",
        mode: "dc_voltage",
        size: (320, 120),
        readouts: &[Readout {
            measurement_type: "DC Voltage",
            unit: "V",
            dictionary: "volts",
            example: "12.50",
            roi: (40, 16, 240, 88),
        }],
    },
];

/// (name, unit, min, max, step, decimals)
const DICTIONARIES: &[(&str, &str, &str, &str, &str, u32)] = &[
    ("tempo_bpm", "BPM", "40", "208", "1", 0),
    ("spo2_percent", "%", "70", "100", "1", 0),
    ("pulse_bpm", "BPM", "30", "250", "1", 0),
    ("volts", "V", "0", "19.99", "0.01", 2),
];

/// (device, width, depth, height) in metres; the screen faces -y.
const DEVICES: &[(&str, f64, f64, f64)] = &[
    ("metronome", 0.09, 0.05, 0.13),
    ("pulse_oximeter", 0.05, 0.06, 0.04),
    ("multimeter", 0.09, 0.045, 0.18),
];

const LCD_BACKGROUND: Rgb<u8> = Rgb([188, 202, 168]);
const LCD_DIGITS: Rgb<u8> = Rgb([34, 42, 36]);

/// Box mesh with the -y quad listed first, so the display is face 0.
fn box_obj(w: f64, d: f64, h: f64) -> String {
    let (x, y, z) = (w / 2.0, d / 2.0, h / 2.0);
    let mut s = String::from("# box\n");
    for (vx, vy, vz) in [
        (-x, -y, -z),
        (x, -y, -z),
        (x, -y, z),
        (-x, -y, z),
        (-x, y, -z),
        (x, y, -z),
        (x, y, z),
        (-x, y, z),
    ] {
        s.push_str(&format!("v {vx} {vy} {vz}\n"));
    }
    for f in ["1 2 3 4", "6 5 8 7", "5 1 4 8", "2 6 7 3", "4 3 7 8", "5 6 2 1"] {
        s.push_str(&format!("f {f}\n"));
    }
    s
}

fn background(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = seeded(seed);
    let top: [f64; 3] = std::array::from_fn(|_| rng.gen_range(90.0..200.0));
    let bottom: [f64; 3] = std::array::from_fn(|_| rng.gen_range(40.0..150.0));
    let mut img = RgbImage::from_fn(width, height, |_, y| {
        let t = f64::from(y) / f64::from(height);
        Rgb(std::array::from_fn(|c| (top[c] * (1.0 - t) + bottom[c] * t) as u8))
    });
    for _ in 0..12 {
        let (w, h) = (rng.gen_range(40..width / 3), rng.gen_range(40..height / 3));
        let (x0, y0) = (rng.gen_range(0..width - w), rng.gen_range(0..height - h));
        let colour = Rgb(std::array::from_fn(|_| rng.gen_range(0..=255u8)));
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.put_pixel(x, y, colour);
            }
        }
    }
    img
}

/// Writes the sample project into `dir` and returns the config path. `dir`
/// must be absent or empty.
pub fn write_sample_project(dir: &Path) -> Result<PathBuf, SampleError> {
    if dir.exists() && fs::read_dir(dir).map_err(io(dir))?.next().is_some() {
        return Err(SampleError::NotEmpty(dir.to_owned()));
    }
    let sub = |name: &str| -> Result<PathBuf, SampleError> {
        let p = dir.join(name);
        fs::create_dir_all(&p).map_err(io(&p))?;
        Ok(p)
    };

    let dicts = sub("dictionaries")?;
    for &(name, unit, min, max, step, decimals) in DICTIONARIES {
        let spec = DictionarySpec {
            name: name.into(),
            unit: unit.into(),
            max_entries: DEFAULT_ENTRY_CAP,
            values: ValueSpec::Range(RangeSpec {
                min_value: min.parse().expect("literal decimal"),
                max_value: max.parse().expect("literal decimal"),
                step: step.parse().expect("literal decimal"),
                decimals,
                pad_width: 0,
                prefix: String::new(),
                suffix: String::new(),
            }),
        };
        write_json(&dicts.join(format!("{name}.json")), &spec)?;
    }

    let face = SegmentFace::new(SegmentStyle::Classic, Weight::Bold, false);
    for screen in SCREENS {
        let tdir = sub(&format!("templates/{}", screen.device))?;
        let mut img = RgbImage::from_pixel(screen.size.0, screen.size.1, LCD_BACKGROUND);
        let mut rois = Vec::new();
        for (i, r) in screen.readouts.iter().enumerate() {
            let roi = RegionOfInterest::new(r.roi.0, r.roi.1, r.roi.2, r.roi.3, i);
            render_value(&mut img, &roi, r.example, &face, LCD_DIGITS)?;
            rois.push(roi);
        }
        let image_filename = format!("{}.png", screen.mode);
        save(&img, &tdir.join(&image_filename))?;
        let meta = ModeMetadata {
            image_filename,
            roi_count: rois.len(),
            mode: screen.mode.into(),
            labels: screen
                .readouts
                .iter()
                .map(|r| ModeLabel {
                    measurement_type: r.measurement_type.into(),
                    unit: r.unit.into(),
                    dictionary: Some(r.dictionary.into()),
                })
                .collect(),
            rois: Some(rois),
            device: Some(screen.device.into()),
            polarity: Polarity::Auto,
        };
        write_json(&tdir.join(format!("{}.json", screen.mode)), &meta)?;
    }

    let meshes = sub("meshes")?;
    let mut registry = Vec::new();
    for &(name, w, d, h) in DEVICES {
        let mesh = meshes.join(format!("{name}.obj"));
        fs::write(&mesh, box_obj(w, d, h)).map_err(io(&mesh))?;
        registry.push(serde_json::json!({
            "name": name,
            "mesh": format!("meshes/{name}.obj"),
            "face_index": 0,
        }));
    }
    write_json(&dir.join("devices.json"), &registry)?;

    let bgs = sub("backgrounds")?;
    for (i, (name, w, h)) in [
        ("desk.png", 1024, 768),
        ("shelf.png", 800, 1000),
        ("bench.png", 1280, 720),
        ("thumbnail.png", 320, 240),
    ]
    .into_iter()
    .enumerate()
    {
        save(&background(w, h, 1000 + i as u64), &bgs.join(name))?;
    }

    let mut config = PipelineConfig::parse(
        r#"{"seed": 7, "paths": {"dictionaries": "dictionaries", "templates": "templates",
            "devices": "devices.json", "backgrounds": "backgrounds", "output": "out"}}"#,
    )
    .expect("sample config parses");
    config.display.per_template = 5;
    config.render.count = 12;
    config.render.ranges = RenderRanges {
        resolution: [384, 384],
        ..RenderRanges::default()
    };
    config.compose.count = 24;
    let path = dir.join(CONFIG_FILE);
    write_json(&path, &config)?;
    Ok(path)
}

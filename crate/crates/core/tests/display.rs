use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use dmdforge_core::decimal::Decimal;
use dmdforge_core::dictionaries::{
    generate_numeric_dictionary, load_dictionary, save_dictionary, Dictionary, DictionarySpec, RangeSpec, ValueSpec,
};
use dmdforge_core::display::otsu::grey_histogram;
use dmdforge_core::display::template::to_grey;
use dmdforge_core::display::{
    binarize_template, define_rois_in_file, generate_display_images, otsu_threshold, DisplayTemplate, FontSet,
    ModeLabel, ModeMetadata, Polarity, RegionOfInterest, ScriptedPicker,
};
use dmdforge_core::rng::seeded;
use image::{GrayImage, Luma, Rgb, RgbImage};
use proptest::prelude::*;
use rand::Rng;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// Exhaustive Otsu oracle: every split scored from scratch as an exact
// fraction (n1*s0 - n0*s1)^2 / (n0*n1); empty classes score zero.
fn otsu_oracle(h: &[u64; 256]) -> u8 {
    let score = |t: usize| -> (u128, u128) {
        let (mut n0, mut s0, mut n1, mut s1) = (0i128, 0i128, 0i128, 0i128);
        for (g, &c) in h.iter().enumerate() {
            if g <= t {
                n0 += c as i128;
                s0 += g as i128 * c as i128;
            } else {
                n1 += c as i128;
                s1 += g as i128 * c as i128;
            }
        }
        if n0 == 0 || n1 == 0 {
            return (0, 1);
        }
        let d = (n1 * s0 - n0 * s1).unsigned_abs();
        (d * d, (n0 * n1) as u128)
    };
    let mut best = 0usize;
    let mut best_score = score(0);
    for t in 1..256 {
        let s = score(t);
        if s.0 * best_score.1 > best_score.0 * s.1 {
            best = t;
            best_score = s;
        }
    }
    best as u8
}

// Textbook form with probabilities, used as a second opinion.
fn between_class_variance(h: &[u64; 256], t: usize) -> f64 {
    let total: u64 = h.iter().sum();
    let p: Vec<f64> = h.iter().map(|&c| c as f64 / total as f64).collect();
    let w0: f64 = p[..=t].iter().sum();
    let w1 = 1.0 - w0;
    if w0 <= 0.0 || w1 <= 0.0 {
        return 0.0;
    }
    let m0 = (0..=t).map(|g| g as f64 * p[g]).sum::<f64>() / w0;
    let m1 = (t + 1..256).map(|g| g as f64 * p[g]).sum::<f64>() / w1;
    w0 * w1 * (m0 - m1) * (m0 - m1)
}

#[test]
fn otsu_matches_exhaustive_search_on_random_histograms() {
    let mut rng = seeded(2024);
    for case in 0..100 {
        let mut h = [0u64; 256];
        // Alternate dense noise, sparse supports and bimodal shapes.
        match case % 3 {
            0 => h.iter_mut().for_each(|c| *c = rng.gen_range(0..=1000)),
            1 => {
                for _ in 0..rng.gen_range(2..8) {
                    h[rng.gen_range(0..256)] = rng.gen_range(1..=1000);
                }
            }
            _ => {
                let (a, b) = (rng.gen_range(10..120), rng.gen_range(136..246));
                for g in 0..256i64 {
                    let bump = |c: i64| (600 - 40 * (g - c).abs()).max(0) as u64;
                    h[g as usize] = bump(a) + bump(b) + rng.gen_range(0..5);
                }
            }
        }
        if h.iter().filter(|&&c| c > 0).count() < 2 {
            h[0] += 1;
            h[255] += 1;
        }
        let t = otsu_threshold(&h).unwrap();
        assert_eq!(t, otsu_oracle(&h), "case {case}");
        let best = (0..256).map(|t| between_class_variance(&h, t)).fold(0.0, f64::max);
        assert!((between_class_variance(&h, t as usize) - best).abs() <= 1e-9 * best.max(1.0));
    }
}

#[test]
fn otsu_known_cases() {
    let mut h = [0u64; 256];
    h[0] = 10;
    h[255] = 10;
    assert_eq!(otsu_threshold(&h).unwrap(), 0);
    let mut h = [0u64; 256];
    h[50] = 100;
    h[200] = 100;
    assert_eq!(otsu_threshold(&h).unwrap(), otsu_oracle(&h));
    assert_eq!(otsu_threshold(&h).unwrap(), 50);
    let mut h = [0u64; 256];
    h[77] = 5;
    assert!(otsu_threshold(&h).is_err());
}

#[test]
fn two_colour_raster_recovers_its_colours() {
    let digits = Rgb([230, 240, 90]);
    let back = Rgb([20, 24, 30]);
    let img = RgbImage::from_fn(64, 32, |x, y| if (20..44).contains(&x) && (8..24).contains(&y) { digits } else { back });
    let t = binarize_template(img, meta(1, None)).unwrap();
    for c in 0..3 {
        assert!(t.fg_color.0[c].abs_diff(digits.0[c]) <= 2);
        assert!(t.bg_color.0[c].abs_diff(back.0[c]) <= 2);
    }
    let black = RgbImage::new(16, 16);
    assert!(binarize_template(black, meta(1, None)).is_err());
}

#[test]
fn oximeter_crop_binary_map_matches_golden() {
    let image = image::open(fixture("oximeter_crop.png")).unwrap().to_rgb8();
    let t = binarize_template(image, meta(1, None)).unwrap();
    let (w, h) = (t.width(), t.height());
    let map = GrayImage::from_fn(w, h, |x, y| Luma([if t.binary_map[(y * w + x) as usize] { 255 } else { 0 }]));
    let golden_path = fixture("oximeter_binary.png");
    if std::env::var_os("DMDFORGE_BLESS").is_some() {
        map.save(&golden_path).unwrap();
    }
    let golden = image::open(&golden_path).unwrap().to_luma8();
    assert_eq!(map, golden);
    // Dark digits on a light LCD: the dark class is the smaller one.
    let dark = t.binary_map.iter().filter(|b| !**b).count();
    assert!(dark * 4 < t.binary_map.len());
    let brightness = |c: Rgb<u8>| c.0.iter().map(|&v| u32::from(v)).sum::<u32>();
    assert!(brightness(t.fg_color) < brightness(t.bg_color));
    let grey = to_grey(&t.image);
    assert_eq!(otsu_threshold(&grey_histogram(&grey)).unwrap(), t.threshold);
}

fn meta(roi_count: usize, rois: Option<Vec<RegionOfInterest>>) -> ModeMetadata {
    ModeMetadata {
        image_filename: "screen.png".into(),
        roi_count,
        mode: "spot".into(),
        labels: (0..roi_count)
            .map(|i| ModeLabel {
                measurement_type: ["SpO2", "Pulse Rate"][i % 2].into(),
                unit: ["%", "BPM"][i % 2].into(),
                dictionary: Some(["spo2", "pulse"][i % 2].into()),
            })
            .collect(),
        rois,
        device: Some("pulse_oximeter".into()),
        polarity: Polarity::Auto,
    }
}

fn lcd_template() -> DisplayTemplate {
    // A light LCD with a printed legend outside the value regions.
    let img = RgbImage::from_fn(200, 120, |x, y| {
        if x < 40 && (y % 20) < 6 && x % 7 < 4 {
            Rgb([30, 40, 30])
        } else {
            Rgb([180 + (x % 7) as u8, 196, 160 + (y % 5) as u8])
        }
    });
    let rois = vec![RegionOfInterest::new(60, 8, 130, 50, 0), RegionOfInterest::new(60, 64, 130, 48, 1)];
    binarize_template(img, meta(2, Some(rois))).unwrap()
}

fn dictionaries() -> BTreeMap<String, Dictionary> {
    let spo2 = generate_numeric_dictionary("spo2", "%", &range("70", "100", "1", 0)).unwrap();
    let pulse = generate_numeric_dictionary("pulse", "BPM", &range("30", "250", "1", 0)).unwrap();
    BTreeMap::from([("spo2".into(), spo2), ("pulse".into(), pulse)])
}

fn range(min: &str, max: &str, step: &str, decimals: u32) -> RangeSpec {
    RangeSpec {
        min_value: min.parse().unwrap(),
        max_value: max.parse().unwrap(),
        step: step.parse().unwrap(),
        decimals,
        pad_width: 0,
        prefix: String::new(),
        suffix: String::new(),
    }
}

#[test]
fn hundred_displays_keep_template_pixels_and_dictionary_values() {
    let template = lcd_template();
    let dicts = dictionaries();
    let fonts = FontSet::builtin();
    let displays = generate_display_images(&template, &dicts, &fonts, 100, &mut seeded(3)).unwrap();
    assert_eq!(displays.len(), 100);
    let rois = template.rois().unwrap();
    for d in &displays {
        assert_eq!(d.values.len(), 2);
        assert!(dicts["spo2"].contains(&d.values[0]));
        assert!(dicts["pulse"].contains(&d.values[1]));
        for (x, y, p) in d.image.enumerate_pixels() {
            if !rois.iter().any(|r| r.contains(x, y)) {
                assert_eq!(p, template.image.get_pixel(x, y), "pixel {x},{y} changed");
            }
        }
        // Something was drawn in every ROI.
        for r in rois {
            let drawn = (r.y..r.y + r.height)
                .flat_map(|y| (r.x..r.x + r.width).map(move |x| (x, y)))
                .any(|(x, y)| *d.image.get_pixel(x, y) != template.bg_color);
            assert!(drawn);
        }
    }
    let again = generate_display_images(&template, &dicts, &fonts, 100, &mut seeded(3)).unwrap();
    assert!(displays.iter().zip(&again).all(|(a, b)| a.values == b.values && a.image == b.image));
    assert!(generate_display_images(&template, &dicts, &fonts, 0, &mut seeded(3)).unwrap().is_empty());
}

#[test]
fn every_builtin_font_is_used_over_a_thousand_displays() {
    let template = lcd_template();
    let dicts = dictionaries();
    let fonts = FontSet::builtin();
    assert_eq!(fonts.len(), 24);
    let used: BTreeSet<String> = generate_display_images(&template, &dicts, &fonts, 1000, &mut seeded(9))
        .unwrap()
        .into_iter()
        .map(|d| d.font_id)
        .collect();
    assert_eq!(used.len(), 24, "{used:?}");
}

#[test]
fn singleton_dictionary_pins_the_reading() {
    let img = RgbImage::from_fn(120, 48, |x, _| if x < 10 { Rgb([20, 20, 20]) } else { Rgb([200, 210, 190]) });
    let mut m = meta(1, Some(vec![RegionOfInterest::new(20, 4, 96, 40, 0)]));
    m.labels[0] = ModeLabel {
        measurement_type: "DC Voltage".into(),
        unit: "V".into(),
        dictionary: None,
    };
    let template = binarize_template(img, m).unwrap();
    let dicts = BTreeMap::from([("V".to_owned(), Dictionary::new("V", "V", vec!["0.022".into()]).unwrap())]);
    let out = generate_display_images(&template, &dicts, &FontSet::builtin(), 20, &mut seeded(1)).unwrap();
    assert!(out.iter().all(|d| d.values == ["0.022"]));
}

#[test]
fn rois_are_stored_once_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::from_fn(100, 60, |x, _| if x > 80 { Rgb([10, 10, 10]) } else { Rgb([220, 220, 220]) });
    img.save(dir.path().join("screen.png")).unwrap();
    let json = dir.path().join("spot.json");
    meta(2, None).save(&json).unwrap();
    let boxes = vec![RegionOfInterest::new(2, 2, 40, 20, 0), RegionOfInterest::new(2, 30, 40, 20, 1)];
    let mut picker = ScriptedPicker::new(boxes.clone());
    assert_eq!(define_rois_in_file(&json, &mut picker).unwrap(), boxes);
    assert_eq!(picker.calls, 1);
    assert_eq!(ModeMetadata::load(&json).unwrap().rois, Some(boxes.clone()));
    let mut second = ScriptedPicker::new(vec![]);
    assert_eq!(define_rois_in_file(&json, &mut second).unwrap(), boxes);
    assert_eq!(second.calls, 0);

    meta(2, None).save(&json).unwrap();
    let mut outside = ScriptedPicker::new(vec![RegionOfInterest::new(70, 2, 40, 20, 0), boxes[1]]);
    assert!(define_rois_in_file(&json, &mut outside).is_err());
    assert_eq!(ModeMetadata::load(&json).unwrap().rois, None);
}

// Independent enumeration of a 10 000-entry range in integer hundredths.
#[test]
fn ten_thousand_entry_range_matches_oracle() {
    let dict = generate_numeric_dictionary("volts", "V", &range("-5.00", "94.99", "0.01", 2)).unwrap();
    let oracle: Vec<String> = (-500i64..=9499)
        .map(|c| {
            let sign = if c < 0 { "-" } else { "" };
            format!("{sign}{}.{:02}", c.abs() / 100, c.abs() % 100)
        })
        .collect();
    assert_eq!(dict.entries(), oracle.as_slice());
    let set: HashSet<&String> = dict.entries().iter().collect();
    assert_eq!(set.len(), 10_000);
}

#[test]
fn spec_files_generate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("temp.json");
    fs::write(
        &spec_path,
        r#"{"name": "celsius", "unit": "°C", "range": {"min_value": "34.0", "max_value": "42.0", "step": "0.1", "decimals": 1}}"#,
    )
    .unwrap();
    let spec = DictionarySpec::load(&spec_path).unwrap();
    assert!(matches!(spec.values, ValueSpec::Range(_)));
    let dict = spec.generate().unwrap();
    assert_eq!(dict.len(), 81);
    assert!(dict.contains("35.9"));
    let txt = dir.path().join("celsius.txt");
    save_dictionary(&dict, &txt).unwrap();
    assert_eq!(load_dictionary(&txt).unwrap().entries(), dict.entries());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn range_entries_are_exact_steps(min in -2000i64..2000, count in 1i64..400, step in 1i64..50, decimals in 0u32..3) {
        let scale = 10i64.pow(decimals);
        let to_dec = |v: i64| -> Decimal {
            let s = if v < 0 { "-" } else { "" };
            format!("{s}{}.{:0width$}", v.abs() / scale, v.abs() % scale, width = decimals as usize).parse().unwrap()
        };
        let max = min + (count - 1) * step;
        let spec = RangeSpec {
            min_value: to_dec(min),
            max_value: to_dec(max),
            step: to_dec(step),
            decimals,
            pad_width: 0,
            prefix: String::new(),
            suffix: String::new(),
        };
        let dict = generate_numeric_dictionary("p", "u", &spec).unwrap();
        prop_assert_eq!(dict.len() as i64, count);
        for (k, e) in dict.entries().iter().enumerate() {
            let value: Decimal = e.parse().unwrap();
            prop_assert_eq!(value, to_dec(min + k as i64 * step));
            let frac = e.split('.').nth(1).map_or(0, str::len);
            prop_assert_eq!(frac as u32, decimals);
        }
    }

    #[test]
    fn saved_dictionaries_load_identically(entries in proptest::collection::btree_set("[0-9A-Za-z:.%-]{1,8}", 1..50)) {
        let dir = tempfile::tempdir().unwrap();
        let entries: Vec<String> = entries.into_iter().collect();
        let dict = Dictionary::new("d", "d", entries.clone()).unwrap();
        let path = dir.path().join("d.txt");
        save_dictionary(&dict, &path).unwrap();
        let loaded = load_dictionary(&path).unwrap();
        prop_assert_eq!(loaded.entries(), entries.as_slice());
    }
}

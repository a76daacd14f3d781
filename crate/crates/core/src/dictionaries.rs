//! Measurement-value dictionaries.
//!
//! A dictionary is the ordered set of legal readouts for one unit and range,
//! stored as a UTF-8 text file with one value per line and no header. Files can
//! be generated from a [`RangeSpec`] or [`PatternSpec`], or written by hand and
//! imported.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::{format_scaled, Decimal};

/// Largest dictionary the generators will build unless told otherwise.
pub const DEFAULT_ENTRY_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("dictionary would hold {count} entries, above the cap of {cap}")]
    OverflowGuard { count: u128, cap: u64 },
    #[error("dictionary {0:?} is empty")]
    EmptyDictionary(String),
    #[error("duplicate entry {entry:?} (line {line})")]
    DuplicateEntry { entry: String, line: usize },
    #[error("invalid entry {entry:?} (line {line}): entries must be non-empty single-line strings")]
    InvalidEntry { entry: String, line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Spec {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

type Result<T> = std::result::Result<T, DictionaryError>;

/// An evenly stepped numeric range rendered at fixed precision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub min_value: Decimal,
    pub max_value: Decimal,
    pub step: Decimal,
    #[serde(default)]
    pub decimals: u32,
    /// Total width of the numeric part (sign included), zero-padded.
    #[serde(default)]
    pub pad_width: usize,
    #[serde(default)]
    pub prefix: String,
    #[serde(default)]
    pub suffix: String,
}

/// Integer range for one `{field}` placeholder of a [`PatternSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRange {
    pub min: i64,
    pub max: i64,
    /// Zero-padded width; 0 means no padding.
    #[serde(default)]
    pub width: usize,
}

/// Composite readouts such as clock times: `"{h}:{m}"` with per-field ranges.
/// `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub pattern: String,
    pub field_ranges: BTreeMap<String, FieldRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSpec {
    Range(RangeSpec),
    Pattern(PatternSpec),
}

/// On-disk generator input: a named dictionary for one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySpec {
    pub name: String,
    pub unit: String,
    #[serde(default = "default_cap")]
    pub max_entries: u64,
    #[serde(flatten)]
    pub values: ValueSpec,
}

fn default_cap() -> u64 {
    DEFAULT_ENTRY_CAP
}

impl DictionarySpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| DictionaryError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| DictionaryError::Spec {
            path: path.to_owned(),
            source,
        })
    }

    pub fn generate(&self) -> Result<Dictionary> {
        let entries = match &self.values {
            ValueSpec::Range(r) => numeric_entries(r, self.max_entries)?,
            ValueSpec::Pattern(p) => pattern_entries(p, self.max_entries)?,
        };
        Dictionary::new(&self.name, &self.unit, entries)
    }
}

/// The legal readouts for one unit. Entries are non-empty, single-line and
/// pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    name: String,
    unit: String,
    entries: Vec<String>,
}

impl Dictionary {
    pub fn new(name: &str, unit: &str, entries: Vec<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(DictionaryError::EmptyDictionary(name.to_owned()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() || e.contains(['\n', '\r']) {
                return Err(DictionaryError::InvalidEntry {
                    entry: e.clone(),
                    line: i + 1,
                });
            }
            if !seen.insert(e.as_str()) {
                return Err(DictionaryError::DuplicateEntry {
                    entry: e.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            name: name.to_owned(),
            unit: unit.to_owned(),
            entries,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.entries.iter().any(|e| e == value)
    }

    /// Uniform draw over the entries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        &self.entries[rng.gen_range(0..self.entries.len())]
    }
}

pub fn generate_numeric_dictionary(name: &str, unit: &str, spec: &RangeSpec) -> Result<Dictionary> {
    Dictionary::new(name, unit, numeric_entries(spec, DEFAULT_ENTRY_CAP)?)
}

pub fn generate_pattern_dictionary(name: &str, unit: &str, spec: &PatternSpec) -> Result<Dictionary> {
    Dictionary::new(name, unit, pattern_entries(spec, DEFAULT_ENTRY_CAP)?)
}

pub fn sample_value<'d, R: Rng + ?Sized>(dict: &'d Dictionary, rng: &mut R) -> &'d str {
    dict.sample(rng)
}

/// Formats one scaled value the way [`RangeSpec`] describes it.
pub fn format_value(mantissa: i128, spec: &RangeSpec) -> String {
    let plain = format_scaled(mantissa, spec.decimals);
    let numeric = if plain.len() >= spec.pad_width {
        plain
    } else {
        let zeros = "0".repeat(spec.pad_width - plain.len());
        match plain.strip_prefix('-') {
            Some(rest) => format!("-{zeros}{rest}"),
            None => format!("{zeros}{plain}"),
        }
    };
    format!("{}{}{}", spec.prefix, numeric, spec.suffix)
}

fn numeric_entries(spec: &RangeSpec, cap: u64) -> Result<Vec<String>> {
    let at_scale = |d: &Decimal, what: &str| {
        d.mantissa_at(spec.decimals).ok_or_else(|| {
            DictionaryError::InvalidRange(format!(
                "{what} {d} has more than {} fraction digits",
                spec.decimals
            ))
        })
    };
    let lo = at_scale(&spec.min_value, "min_value")?;
    let hi = at_scale(&spec.max_value, "max_value")?;
    let step = at_scale(&spec.step, "step")?;
    if step <= 0 {
        return Err(DictionaryError::InvalidRange(format!(
            "step must be positive, got {}",
            spec.step
        )));
    }
    if lo > hi {
        return Err(DictionaryError::InvalidRange(format!(
            "min_value {} exceeds max_value {}",
            spec.min_value, spec.max_value
        )));
    }
    let span = hi - lo;
    if span % step != 0 {
        return Err(DictionaryError::InvalidRange(format!(
            "step {} does not divide {} - {}",
            spec.step, spec.max_value, spec.min_value
        )));
    }
    let count = (span / step) as u128 + 1;
    if count > u128::from(cap) {
        return Err(DictionaryError::OverflowGuard { count, cap });
    }
    Ok((0..count as i128)
        .map(|k| format_value(lo + k * step, spec))
        .collect())
}

enum Piece {
    Literal(String),
    Field(usize),
}

fn parse_pattern(spec: &PatternSpec) -> Result<(Vec<Piece>, Vec<String>)> {
    let mut pieces = Vec::new();
    let mut fields: Vec<String> = Vec::new();
    let mut literal = String::new();
    let mut chars = spec.pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) => name.push(c),
                        None => {
                            return Err(DictionaryError::InvalidPattern(format!(
                                "unterminated placeholder in {:?}",
                                spec.pattern
                            )))
                        }
                    }
                }
                if !spec.field_ranges.contains_key(&name) {
                    return Err(DictionaryError::InvalidPattern(format!(
                        "placeholder {{{name}}} has no field range"
                    )));
                }
                if !literal.is_empty() {
                    pieces.push(Piece::Literal(std::mem::take(&mut literal)));
                }
                let idx = match fields.iter().position(|f| *f == name) {
                    Some(i) => i,
                    None => {
                        fields.push(name);
                        fields.len() - 1
                    }
                };
                pieces.push(Piece::Field(idx));
            }
            '}' => {
                return Err(DictionaryError::InvalidPattern(format!(
                    "stray '}}' in {:?}",
                    spec.pattern
                )))
            }
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    Ok((pieces, fields))
}

fn pattern_entries(spec: &PatternSpec, cap: u64) -> Result<Vec<String>> {
    let (pieces, fields) = parse_pattern(spec)?;
    let ranges: Vec<&FieldRange> = fields.iter().map(|f| &spec.field_ranges[f]).collect();
    let mut count: u128 = 1;
    for (name, r) in fields.iter().zip(&ranges) {
        if r.min > r.max {
            return Err(DictionaryError::InvalidPattern(format!(
                "field {name}: min {} exceeds max {}",
                r.min, r.max
            )));
        }
        count = count.saturating_mul((i128::from(r.max) - i128::from(r.min) + 1) as u128);
    }
    if count > u128::from(cap) {
        return Err(DictionaryError::OverflowGuard { count, cap });
    }

    let render_field = |v: i64, width: usize| {
        if v < 0 {
            format!("-{:0w$}", v.unsigned_abs(), w = width.saturating_sub(1))
        } else {
            format!("{v:0width$}")
        }
    };

    // Odometer over the fields, first field slowest.
    let mut current: Vec<i64> = ranges.iter().map(|r| r.min).collect();
    let mut seen = HashSet::with_capacity(count as usize);
    let mut out = Vec::with_capacity(count as usize);
    loop {
        let mut s = String::new();
        for piece in &pieces {
            match piece {
                Piece::Literal(l) => s.push_str(l),
                Piece::Field(i) => s.push_str(&render_field(current[*i], ranges[*i].width)),
            }
        }
        if seen.insert(s.clone()) {
            out.push(s);
        }
        let mut k = current.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if current[k] < ranges[k].max {
                current[k] += 1;
                break;
            }
            current[k] = ranges[k].min;
        }
    }
}

/// Writes one entry per line, newline-terminated.
pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    let mut text = dict.entries.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|source| DictionaryError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Loads a dictionary file. The file stem becomes both the name and the unit;
/// use [`load_dictionary_for_unit`] when the unit differs from the file name.
pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_dictionary_for_unit(path, &stem)
}

pub fn load_dictionary_for_unit(path: &Path, unit: &str) -> Result<Dictionary> {
    let text = fs::read_to_string(path).map_err(|source| DictionaryError::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let entries: Vec<String> = text.lines().map(str::to_owned).collect();
    Dictionary::new(&name, unit, entries)
}

/// Loads every `*.txt` in `dir`, keyed by dictionary name, in sorted order.
pub fn load_dictionary_dir(dir: &Path) -> Result<BTreeMap<String, Dictionary>> {
    let read = fs::read_dir(dir).map_err(|source| DictionaryError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for entry in read {
        let path = entry
            .map_err(|source| DictionaryError::Io {
                path: dir.to_owned(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "txt") {
            let d = load_dictionary(&path)?;
            out.insert(d.name().to_owned(), d);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn range(min: &str, max: &str, step: &str, decimals: u32, pad: usize) -> RangeSpec {
        RangeSpec {
            min_value: min.parse().unwrap(),
            max_value: max.parse().unwrap(),
            step: step.parse().unwrap(),
            decimals,
            pad_width: pad,
            prefix: String::new(),
            suffix: String::new(),
        }
    }

    fn field(min: i64, max: i64, width: usize) -> FieldRange {
        FieldRange { min, max, width }
    }

    #[test]
    fn small_integer_range() {
        let d = generate_numeric_dictionary("n", "u", &range("0", "2", "1", 0, 0)).unwrap();
        assert_eq!(d.entries(), ["0", "1", "2"]);
    }

    #[test]
    fn zero_padded_singleton() {
        let d = generate_numeric_dictionary("v", "V", &range("0.67", "0.67", "0.01", 2, 5)).unwrap();
        assert_eq!(d.entries(), ["00.67"]);
    }

    #[test]
    fn padding_goes_after_the_sign() {
        let spec = range("-1.5", "-1.5", "0.5", 1, 5);
        assert_eq!(format_value(-15, &spec), "-01.5");
    }

    #[test]
    fn prefix_and_suffix_wrap_the_number() {
        let mut spec = range("1", "2", "1", 0, 2);
        spec.prefix = "P".into();
        spec.suffix = "%".into();
        let d = generate_numeric_dictionary("p", "%", &spec).unwrap();
        assert_eq!(d.entries(), ["P01%", "P02%"]);
    }

    #[test]
    fn range_errors() {
        let err = |s: RangeSpec| generate_numeric_dictionary("x", "x", &s).unwrap_err();
        assert!(matches!(err(range("0", "1", "0", 0, 0)), DictionaryError::InvalidRange(_)));
        assert!(matches!(err(range("0", "1", "-1", 0, 0)), DictionaryError::InvalidRange(_)));
        assert!(matches!(err(range("2", "1", "1", 0, 0)), DictionaryError::InvalidRange(_)));
        assert!(matches!(err(range("0", "1", "0.3", 1, 0)), DictionaryError::InvalidRange(_)));
        assert!(matches!(err(range("0.05", "1", "0.1", 1, 0)), DictionaryError::InvalidRange(_)));
        assert!(matches!(
            err(range("0", "100000000", "1", 0, 0)),
            DictionaryError::OverflowGuard { .. }
        ));
    }

    #[test]
    fn clock_pattern() {
        let spec = PatternSpec {
            pattern: "{h}:{m}".into(),
            field_ranges: [("h".to_owned(), field(0, 23, 2)), ("m".to_owned(), field(0, 59, 2))]
                .into_iter()
                .collect(),
        };
        let d = generate_pattern_dictionary("clock", "time", &spec).unwrap();
        assert_eq!(d.len(), 1440);
        assert!(d.contains("17:57"));
        assert_eq!(d.entries()[0], "00:00");
        assert_eq!(d.entries()[1439], "23:59");
    }

    #[test]
    fn binary_pattern_enumerates_in_order() {
        let spec = PatternSpec {
            pattern: "{a}:{b}".into(),
            field_ranges: [("a".to_owned(), field(0, 1, 0)), ("b".to_owned(), field(0, 1, 0))]
                .into_iter()
                .collect(),
        };
        let d = generate_pattern_dictionary("d", "d", &spec).unwrap();
        assert_eq!(d.entries(), ["0:0", "0:1", "1:0", "1:1"]);
    }

    #[test]
    fn single_field_pattern_and_repeated_placeholder() {
        let one = PatternSpec {
            pattern: "x{a}".into(),
            field_ranges: [("a".to_owned(), field(0, 0, 0))].into_iter().collect(),
        };
        assert_eq!(generate_pattern_dictionary("o", "o", &one).unwrap().entries(), ["x0"]);

        let twice = PatternSpec {
            pattern: "{a}{{{a}}}".into(),
            field_ranges: [("a".to_owned(), field(1, 2, 0))].into_iter().collect(),
        };
        assert_eq!(
            generate_pattern_dictionary("t", "t", &twice).unwrap().entries(),
            ["1{1}", "2{2}"]
        );
    }

    #[test]
    fn pattern_errors() {
        let bad = |p: &str| PatternSpec {
            pattern: p.into(),
            field_ranges: [("a".to_owned(), field(0, 9, 0))].into_iter().collect(),
        };
        for p in ["{b}", "{a", "a}"] {
            assert!(matches!(
                generate_pattern_dictionary("x", "x", &bad(p)),
                Err(DictionaryError::InvalidPattern(_))
            ));
        }
        let huge = PatternSpec {
            pattern: "{a}{b}".into(),
            field_ranges: [("a".to_owned(), field(0, 99_999, 0)), ("b".to_owned(), field(0, 999, 0))]
                .into_iter()
                .collect(),
        };
        assert!(matches!(
            generate_pattern_dictionary("x", "x", &huge),
            Err(DictionaryError::OverflowGuard { .. })
        ));
    }

    #[test]
    fn spec_json_mirrors_field_names() {
        let json = r#"{"name": "volts", "unit": "V",
            "range": {"min_value": 0.0, "max_value": 0.03, "step": 0.001, "decimals": 3}}"#;
        let spec: DictionarySpec = serde_json::from_str(json).unwrap();
        let d = spec.generate().unwrap();
        assert_eq!(d.unit(), "V");
        assert_eq!(d.len(), 31);
        assert!(d.contains("0.022"));

        let json = r#"{"name": "clock", "unit": "time",
            "pattern": {"pattern": "{h}:{m}", "field_ranges": {"h": {"min": 0, "max": 23, "width": 2},
                                                                "m": {"min": 0, "max": 59, "width": 2}}}}"#;
        let spec: DictionarySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.generate().unwrap().len(), 1440);
    }

    #[test]
    fn load_rejects_duplicates_blank_lines_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dup.txt");
        fs::write(&p, "1\n2\n1\n").unwrap();
        assert!(matches!(
            load_dictionary(&p),
            Err(DictionaryError::DuplicateEntry { line: 3, .. })
        ));
        fs::write(&p, "1\n\n2\n").unwrap();
        assert!(matches!(load_dictionary(&p), Err(DictionaryError::InvalidEntry { line: 2, .. })));
        fs::write(&p, "").unwrap();
        assert!(matches!(load_dictionary(&p), Err(DictionaryError::EmptyDictionary(_))));
    }

    #[test]
    fn load_hand_written_file_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("BPM.txt");
        fs::write(&p, "120\r\n30\r\n76").unwrap();
        let d = load_dictionary(&p).unwrap();
        assert_eq!(d.entries(), ["120", "30", "76"]);
        assert_eq!((d.name(), d.unit()), ("BPM", "BPM"));
    }

    #[test]
    fn singleton_sampling() {
        let d = Dictionary::new("one", "V", vec!["0.022".into()]).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..10 {
            assert_eq!(sample_value(&d, &mut r), "0.022");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = generate_numeric_dictionary("n", "u", &range("0", "999", "1", 0, 0)).unwrap();
        let draw = |seed| {
            let mut r = rng::seeded(seed);
            (0..50).map(|_| sample_value(&d, &mut r).to_owned()).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        let d = generate_numeric_dictionary("n", "u", &range("0", "9", "1", 0, 0)).unwrap();
        let mut r = rng::seeded(2024);
        let n = 100_000usize;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[sample_value(&d, &mut r).parse::<usize>().unwrap()] += 1;
        }
        // Binomial(n, 0.1): sigma = sqrt(n * 0.1 * 0.9).
        let mean = n as f64 * 0.1;
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
        }
        // Pearson chi-square, 9 dof; critical value at alpha = 0.01 is 21.666.
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }
}

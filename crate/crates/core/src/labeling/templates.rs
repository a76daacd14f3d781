//! Question and answer templates.
//!
//! Placeholders: `{device}`, `{mode}`, `{measurement_type}`, `{value}`,
//! `{unit}`. The built-in set lives in `templates.json` next to this file;
//! users may load their own with [`TemplateSet::load`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, LabelingError, PairTarget, Reading};

const BUILTIN: &str = include_str!("templates.json");
const PLACEHOLDERS: [&str; 5] = ["device", "mode", "measurement_type", "value", "unit"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullTemplate {
    pub target: PairTarget,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneWordTemplates {
    pub measurement: String,
    pub unit: String,
    /// Appended to every one-word question after a space.
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    pub full: Vec<FullTemplate>,
    pub one_word: OneWordTemplates,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in templates are valid")
    }

    pub fn parse(json: &str) -> Result<Self, LabelingError> {
        let set: TemplateSet =
            serde_json::from_str(json).map_err(|e| LabelingError::InvalidTemplates(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, LabelingError> {
        let text = fs::read_to_string(path).map_err(|e| LabelingError::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), LabelingError> {
        let bad = |m: String| Err(LabelingError::InvalidTemplates(m));
        if self.full.is_empty() {
            return bad("the full-format pool is empty".into());
        }
        for (i, t) in self.full.iter().enumerate() {
            if t.target == PairTarget::Unit {
                return bad(format!("full template {i}: unit questions are one-word only"));
            }
            if !t.answer.ends_with('.') {
                return bad(format!("full template {i}: answer must end with a period"));
            }
            if !t.answer.contains("{measurement_type}") {
                return bad(format!("full template {i}: answer must name the measurement type"));
            }
        }
        let texts = self
            .full
            .iter()
            .flat_map(|t| [&t.question, &t.answer])
            .chain([&self.one_word.measurement, &self.one_word.unit, &self.one_word.instruction]);
        for text in texts {
            for name in placeholders(text) {
                if !PLACEHOLDERS.contains(&name) {
                    return bad(format!("unknown placeholder {{{name}}} in {text:?}"));
                }
            }
        }
        Ok(())
    }
}

fn placeholders(text: &str) -> impl Iterator<Item = &str> {
    text.split('{').skip(1).filter_map(|rest| rest.split_once('}').map(|(name, _)| name))
}

/// Substitutes placeholders in one pass, so values are inserted verbatim
/// even if they contain braces.
pub(crate) fn fill(template: &str, annotation: &AnnotationRecord, reading: &Reading) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let value = after.find('}').and_then(|end| {
            let v = match &after[..end] {
                "device" => &annotation.device,
                "mode" => &annotation.mode,
                "measurement_type" => &reading.measurement_type,
                "value" => &reading.value,
                "unit" => &reading.unit,
                _ => return None,
            };
            Some((v, end))
        });
        match value {
            Some((v, end)) => {
                out.push_str(v);
                rest = &after[end + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pool_shape() {
        let t = TemplateSet::builtin();
        assert_eq!(t.full.len(), 8);
        assert_eq!(t.full.iter().filter(|f| f.target == PairTarget::DeviceSummary).count(), 3);
    }

    #[test]
    fn fill_is_single_pass() {
        let a = AnnotationRecord {
            image: "i".into(),
            device: "dev".into(),
            mode: "m".into(),
            readings: vec![],
        };
        let r = Reading {
            measurement_type: "{unit}".into(),
            value: "1".into(),
            unit: "V".into(),
        };
        assert_eq!(fill("{measurement_type}={value} {unit} {x}", &a, &r), "{unit}=1 V {x}");
    }

    #[test]
    fn validation_rejects_bad_sets() {
        let mut json: serde_json::Value = serde_json::from_str(BUILTIN).unwrap();
        json["full"][0]["answer"] = "no period {measurement_type}".into();
        assert!(TemplateSet::parse(&json.to_string()).is_err());
        let mut json: serde_json::Value = serde_json::from_str(BUILTIN).unwrap();
        json["one_word"]["unit"] = "What {units}?".into();
        assert!(TemplateSet::parse(&json.to_string()).is_err());
        let mut json: serde_json::Value = serde_json::from_str(BUILTIN).unwrap();
        json["full"] = serde_json::json!([]);
        assert!(TemplateSet::parse(&json.to_string()).is_err());
    }
}

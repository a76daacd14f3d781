//! Annotations for real photographs, from a CSV file or typed in.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::{AnnotationRecord, LabelingError, Reading};

const COLUMNS: [&str; 6] = ["image", "device", "mode", "measurement_type", "value", "unit"];

/// Reads `image,device,mode,measurement_type,value,unit` rows. Rows for the
/// same image are merged into one record in order of first appearance; all
/// of them must agree on device and mode.
pub fn annotate_real(csv_path: &Path) -> Result<Vec<AnnotationRecord>, LabelingError> {
    let csv_err = |e| LabelingError::Csv {
        path: csv_path.to_owned(),
        source: e,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index: Vec<Option<usize>> = COLUMNS.iter().map(|c| headers.iter().position(|h| h == *c)).collect();
    let mut records: Vec<AnnotationRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut cells = [""; 6];
        for (k, col) in COLUMNS.iter().enumerate() {
            let cell = index[k].and_then(|i| row.get(i)).unwrap_or("");
            if cell.is_empty() {
                return Err(LabelingError::MissingField {
                    line,
                    field: (*col).to_owned(),
                });
            }
            cells[k] = cell;
        }
        let [image, device, mode, measurement_type, value, unit] = cells;
        let reading = Reading {
            measurement_type: measurement_type.to_owned(),
            value: value.to_owned(),
            unit: unit.to_owned(),
        };
        match records.iter_mut().find(|r| r.image == image) {
            Some(existing) => {
                for (field, have, got) in [("device", &existing.device, device), ("mode", &existing.mode, mode)] {
                    if have != got {
                        return Err(LabelingError::ConflictingField {
                            line,
                            field: field.to_owned(),
                            image: image.to_owned(),
                        });
                    }
                }
                existing.readings.push(reading);
            }
            None => records.push(AnnotationRecord {
                image: image.to_owned(),
                device: device.to_owned(),
                mode: mode.to_owned(),
                readings: vec![reading],
            }),
        }
    }
    Ok(records)
}

struct Prompter<R, W> {
    input: R,
    output: W,
    line: usize,
}

impl<R: BufRead, W: Write> Prompter<R, W> {
    fn ask(&mut self, prompt: &str) -> Result<String, LabelingError> {
        let console = Path::new("<console>");
        write!(self.output, "{prompt}: ")
            .and_then(|_| self.output.flush())
            .map_err(|e| LabelingError::io(console, e))?;
        let mut buf = String::new();
        self.input.read_line(&mut buf).map_err(|e| LabelingError::io(console, e))?;
        self.line += 1;
        Ok(buf.trim().to_owned())
    }

    fn require(&mut self, prompt: &str, field: &str) -> Result<String, LabelingError> {
        let answer = self.ask(prompt)?;
        if answer.is_empty() {
            return Err(LabelingError::MissingField {
                line: self.line,
                field: field.to_owned(),
            });
        }
        Ok(answer)
    }
}

/// Prompts on `output` for each image's device, mode and readings, reading
/// answers line by line from `input`. An empty measurement type ends the
/// readings of one image.
pub fn annotate_interactive<R: BufRead, W: Write>(
    images: &[String],
    input: R,
    output: W,
) -> Result<Vec<AnnotationRecord>, LabelingError> {
    let mut p = Prompter { input, output, line: 0 };
    let mut records = Vec::with_capacity(images.len());
    for image in images {
        let device = p.require(&format!("{image} device"), "device")?;
        let mode = p.require(&format!("{image} mode"), "mode")?;
        let mut readings = Vec::new();
        loop {
            let measurement_type = p.ask(&format!("{image} measurement type (empty to finish)"))?;
            if measurement_type.is_empty() {
                break;
            }
            let value = p.require(&format!("{image} {measurement_type} value"), "value")?;
            let unit = p.require(&format!("{image} {measurement_type} unit"), "unit")?;
            readings.push(Reading {
                measurement_type,
                value,
                unit,
            });
        }
        if readings.is_empty() {
            return Err(LabelingError::NoReadings(image.clone()));
        }
        records.push(AnnotationRecord {
            image: image.clone(),
            device,
            mode,
            readings,
        });
    }
    Ok(records)
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<(), LabelingError> {
    let file = fs::File::create(path).map_err(|e| LabelingError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| LabelingError::Json {
            path: path.to_owned(),
            source: e,
        })?;
        w.write_all(b"\n").map_err(|e| LabelingError::io(path, e))?;
    }
    w.flush().map_err(|e| LabelingError::io(path, e))
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, LabelingError> {
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
    use std::io::Cursor;

    #[test]
    fn interactive_session() {
        let typed = "pulse oximeter\nspot\nSpO2\n96\n%\nPulse Rate\n76\nBPM\n\n";
        let mut shown = Vec::new();
        let recs = annotate_interactive(&["a.jpg".to_string()], Cursor::new(typed), &mut shown).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].readings.len(), 2);
        assert_eq!(recs[0].readings[1].value, "76");
        assert!(String::from_utf8(shown).unwrap().contains("a.jpg device: "));
        let missing = annotate_interactive(&["b.jpg".to_string()], Cursor::new("meter\n\n"), Vec::new());
        assert!(matches!(missing, Err(LabelingError::MissingField { line: 2, .. })));
        let none = annotate_interactive(&["c.jpg".to_string()], Cursor::new("meter\nx\n\n"), Vec::new());
        assert!(matches!(none, Err(LabelingError::NoReadings(_))));
    }
}

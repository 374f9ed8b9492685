use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Document, Label, LabeledExample, Source};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Tsv,
    Csv,
    JsonLines,
}

impl DatasetFormat {
    /// Guesses the format from a file extension (`.tsv`, `.csv`, `.jsonl`,
    /// `.json`).
    pub fn from_path(path: impl AsRef<Path>) -> Option<Self> {
        let ext = path.as_ref().extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "tsv" => Some(DatasetFormat::Tsv),
            "csv" => Some(DatasetFormat::Csv),
            "jsonl" | "json" | "ndjson" => Some(DatasetFormat::JsonLines),
            _ => None,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(DatasetFormat::Tsv),
            "csv" => Ok(DatasetFormat::Csv),
            "jsonl" | "json_lines" | "jsonlines" => Ok(DatasetFormat::JsonLines),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset format {other:?}"
            ))),
        }
    }
}

pub fn load_labeled_dataset(
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<Vec<LabeledExample>> {
    let text = fs::read_to_string(path)?;
    parse_labeled(&text, format)
}

/// Parses a labeled dataset held in memory. Line numbers in errors are
/// physical, 1-based.
pub fn parse_labeled(text: &str, format: DatasetFormat) -> Result<Vec<LabeledExample>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let raw = match format {
        DatasetFormat::Tsv => parse_tsv(text)?,
        DatasetFormat::Csv => parse_csv(text)?,
        DatasetFormat::JsonLines => parse_json_lines(text)?,
    };
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let label = Label::from_str(&r.label).map_err(|_| Error::InvalidLabel {
            line: r.line,
            value: r.label.clone(),
        })?;
        if r.text.trim().is_empty() {
            return Err(parse_err(r.line, "empty text"));
        }
        if !seen.insert(r.id) {
            return Err(parse_err(r.line, format!("duplicate id {}", r.id)));
        }
        out.push(LabeledExample {
            doc: Document {
                id: r.id,
                text: r.text,
                source: Source::LabeledDialogue,
            },
            label,
        });
    }
    Ok(out)
}

struct RawRecord {
    line: usize,
    id: u64,
    text: String,
    label: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_id(line: usize, s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid id {s:?}")))
}

// `id<TAB>text<TAB>label`; an optional `id\ttext\tlabel` header is skipped.
// The text field may itself contain tabs.
fn parse_tsv(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.eq_ignore_ascii_case("id\ttext\tlabel") {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(line_no, "expected 3 tab-separated fields"))?;
        let (body, label) = rest
            .rsplit_once('\t')
            .ok_or_else(|| parse_err(line_no, "expected 3 tab-separated fields"))?;
        out.push(RawRecord {
            line: line_no,
            id: parse_id(line_no, id)?,
            text: body.to_string(),
            label: label.trim().to_string(),
        });
    }
    Ok(out)
}

// Header row `id,text,label` required (column order free).
fn parse_csv(text: &str) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let (id_col, text_col, label_col) = (col("id")?, col("text")?, col("label")?);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| {
            rec.get(c)
                .ok_or_else(|| parse_err(line, "missing field"))
                .map(str::to_string)
        };
        out.push(RawRecord {
            line,
            id: parse_id(line, &field(id_col)?)?,
            text: field(text_col)?,
            label: field(label_col)?,
        });
    }
    Ok(out)
}

fn parse_json_lines(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let id = match &v["id"] {
            Value::Number(n) => n
                .as_u64()
                .ok_or_else(|| parse_err(line_no, format!("invalid id {n}")))?,
            Value::String(s) => parse_id(line_no, s)?,
            _ => return Err(parse_err(line_no, "missing \"id\"")),
        };
        let text = v["text"]
            .as_str()
            .ok_or_else(|| parse_err(line_no, "missing \"text\""))?
            .to_string();
        let label = match &v["label"] {
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            Value::Bool(b) => (*b as u8).to_string(),
            _ => return Err(parse_err(line_no, "missing \"label\"")),
        };
        out.push(RawRecord {
            line: line_no,
            id,
            text,
            label,
        });
    }
    Ok(out)
}

/// One document per non-empty line; the id is the 1-based line number.
pub fn load_plain_text(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    Ok(parse_plain_text(&fs::read_to_string(path)?))
}

pub fn parse_plain_text(text: &str) -> Vec<Document> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Document {
            id: i as u64 + 1,
            text: l.trim_end_matches('\r').to_string(),
            source: Source::PlainLiterature,
        })
        .collect()
}

/// External label file for a plain-text corpus: one label per non-empty
/// line, aligned with the corpus documents.
pub fn load_label_file(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse::<Label>().map_err(|_| Error::InvalidLabel {
                line: i + 1,
                value: l.trim().to_string(),
            })
        })
        .collect()
}

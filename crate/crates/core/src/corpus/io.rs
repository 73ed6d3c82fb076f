use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Corpus, LabeledExample};
use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn context(path: &Path) -> String {
    path.display().to_string()
}

/// Reads the public GoEmotions release: `text \t comma-joined ids \t id`.
///
/// `id_order` names the emotion for each numeric label id; names are then
/// resolved against `taxonomy`.
pub fn load_goemotions_tsv(path: impl AsRef<Path>, taxonomy: &EmotionTaxonomy, id_order: &[&str]) -> Result<Corpus> {
    let path = path.as_ref();
    let mapping = id_order
        .iter()
        .map(|name| taxonomy.resolve(name))
        .collect::<Result<Vec<_>>>()?;
    let mut examples = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(context(path), lineno + 1, "expected 3 tab-separated fields"));
        }
        let mut labels = Vec::new();
        for raw in fields[1].split(',') {
            let id: usize = raw
                .trim()
                .parse()
                .map_err(|_| Error::parse(context(path), lineno + 1, format!("bad label id '{raw}'")))?;
            let label = mapping
                .get(id)
                .ok_or_else(|| Error::parse(context(path), lineno + 1, format!("label id {id} out of range")))?;
            labels.push(*label);
        }
        examples.push(LabeledExample::new(fields[2], fields[0], labels, None));
    }
    Corpus::new(taxonomy.clone(), examples, format!("goemotions:{}", path.display()))
}

fn parse_timestamp(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => {
            let s = s.trim();
            if let Ok(secs) = s.parse::<i64>() {
                return Some(secs);
            }
            if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
                return Some(dt.timestamp());
            }
            for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
                if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                    return Some(dt.and_utc().timestamp());
                }
            }
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
        }
        _ => None,
    }
}

/// Reads Vent-style JSON lines with fields `text`, `emotion`, `created_at`
/// (and an optional `id`; the line number is used otherwise).
///
/// Rows whose emotion is not in the taxonomy are skipped when
/// `skip_unknown` is set, otherwise they are an error.
pub fn load_vent_jsonl(path: impl AsRef<Path>, taxonomy: &EmotionTaxonomy, skip_unknown: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut examples = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(context(path), lineno + 1, e.to_string()))?;
        let field = |name: &str| {
            row.get(name)
                .ok_or_else(|| Error::parse(context(path), lineno + 1, format!("missing field '{name}'")))
        };
        let text = field("text")?
            .as_str()
            .ok_or_else(|| Error::parse(context(path), lineno + 1, "'text' must be a string"))?;
        let emotion = field("emotion")?
            .as_str()
            .ok_or_else(|| Error::parse(context(path), lineno + 1, "'emotion' must be a string"))?;
        let label = match taxonomy.resolve(emotion) {
            Ok(l) => l,
            Err(_) if skip_unknown => continue,
            Err(e) => return Err(e),
        };
        let timestamp = parse_timestamp(field("created_at")?);
        if timestamp.is_none() {
            return Err(Error::parse(context(path), lineno + 1, "unparseable 'created_at'"));
        }
        let id = match row.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(v @ Value::Number(_)) => v.to_string(),
            _ => (lineno + 1).to_string(),
        };
        examples.push(LabeledExample::new(id, text, vec![label], timestamp));
    }
    Corpus::new(taxonomy.clone(), examples, format!("vent:{}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct JsonlRow {
    id: String,
    text: String,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<i64>,
}

/// Writes the prepared-corpus format: one `{id, text, labels, timestamp}`
/// object per line, labels by name, text as originally read.
pub fn save_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for ex in &corpus.examples {
        let row = JsonlRow {
            id: ex.id.clone(),
            text: ex.raw_text.clone(),
            labels: ex
                .writer_labels
                .iter()
                .map(|&l| corpus.taxonomy.emotion_name(l).to_owned())
                .collect(),
            timestamp: ex.timestamp,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads the format written by [`save_jsonl`].
pub fn load_jsonl(path: impl AsRef<Path>, taxonomy: &EmotionTaxonomy) -> Result<Corpus> {
    let path = path.as_ref();
    let mut examples = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line)
            .map_err(|e| Error::parse(context(path), lineno + 1, e.to_string()))?;
        let labels = row
            .labels
            .iter()
            .map(|l| taxonomy.resolve(l))
            .collect::<Result<Vec<_>>>()?;
        examples.push(LabeledExample::new(row.id, row.text, labels, row.timestamp));
    }
    Corpus::new(taxonomy.clone(), examples, format!("jsonl:{}", path.display()))
}

/// One lowercase word per line; blank lines and `#` comments ignored.
pub fn load_word_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

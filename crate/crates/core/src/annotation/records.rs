use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::EmotionTaxonomy;

/// One reader's judgement of one snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub example_id: String,
    pub reader_id: String,
    pub submission_id: String,
    pub emotion: usize,
    /// Always the taxonomy category of `emotion`.
    pub category: usize,
}

impl AnnotationRecord {
    pub fn new(
        example_id: impl Into<String>,
        reader_id: impl Into<String>,
        submission_id: impl Into<String>,
        emotion: usize,
        taxonomy: &EmotionTaxonomy,
    ) -> Result<Self> {
        if emotion >= taxonomy.len() {
            return Err(Error::InvalidArgument(format!("emotion index {emotion} out of range")));
        }
        Ok(Self {
            example_id: example_id.into(),
            reader_id: reader_id.into(),
            submission_id: submission_id.into(),
            emotion,
            category: taxonomy.category_of(emotion),
        })
    }
}

#[derive(Deserialize, Serialize)]
struct CsvRow {
    example_id: String,
    reader_id: String,
    submission_id: String,
    emotion: String,
}

/// Reads `example_id,reader_id,submission_id,emotion` rows; emotions are
/// names resolved against `taxonomy`.
pub fn load_annotations_csv(path: impl AsRef<Path>, taxonomy: &EmotionTaxonomy) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let context = path.display().to_string();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(&context, line, e.to_string()))?;
        let emotion = taxonomy
            .resolve(&row.emotion)
            .map_err(|e| Error::parse(&context, line, e.to_string()))?;
        out.push(AnnotationRecord::new(row.example_id, row.reader_id, row.submission_id, emotion, taxonomy)?);
    }
    Ok(out)
}

pub fn save_annotations_csv(records: &[AnnotationRecord], path: impl AsRef<Path>, taxonomy: &EmotionTaxonomy) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(CsvRow {
            example_id: r.example_id.clone(),
            reader_id: r.reader_id.clone(),
            submission_id: r.submission_id.clone(),
            emotion: taxonomy.emotion_name(r.emotion).to_string(),
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_errors() {
        let tax = EmotionTaxonomy::from_groups([("A", vec!["joy", "love"]), ("B", vec!["fear"])]).unwrap();
        let recs = vec![
            AnnotationRecord::new("x1", "r1", "s1", 0, &tax).unwrap(),
            AnnotationRecord::new("x1", "r2", "s2", 2, &tax).unwrap(),
        ];
        assert_eq!(recs[1].category, 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        save_annotations_csv(&recs, &p, &tax).unwrap();
        assert_eq!(load_annotations_csv(&p, &tax).unwrap(), recs);

        std::fs::write(&p, "example_id,reader_id,submission_id,emotion\nx1,r1,s1,joy\nx2,r1,s1,boredom\n").unwrap();
        match load_annotations_csv(&p, &tax) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}

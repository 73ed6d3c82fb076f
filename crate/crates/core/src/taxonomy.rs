//! Emotion label spaces.
//!
//! A taxonomy is an ordered list of emotions, each belonging to exactly one
//! category. On disk it is a JSON object mapping category names to lists of
//! emotion names; emotion indices follow the order in which they appear.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyRepr", into = "TaxonomyRepr")]
pub struct EmotionTaxonomy {
    emotions: Vec<String>,
    categories: Vec<String>,
    category_of: Vec<usize>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyRepr {
    emotions: Vec<String>,
    categories: Vec<String>,
    category_of: Vec<usize>,
}

impl TryFrom<TaxonomyRepr> for EmotionTaxonomy {
    type Error = Error;

    fn try_from(repr: TaxonomyRepr) -> Result<Self> {
        EmotionTaxonomy::new(repr.emotions, repr.categories, repr.category_of)
    }
}

impl From<EmotionTaxonomy> for TaxonomyRepr {
    fn from(t: EmotionTaxonomy) -> Self {
        TaxonomyRepr {
            emotions: t.emotions,
            categories: t.categories,
            category_of: t.category_of,
        }
    }
}

impl EmotionTaxonomy {
    pub fn new(emotions: Vec<String>, categories: Vec<String>, category_of: Vec<usize>) -> Result<Self> {
        if emotions.is_empty() {
            return Err(Error::Taxonomy("taxonomy has no emotions".into()));
        }
        if emotions.len() != category_of.len() {
            return Err(Error::Taxonomy(format!(
                "{} emotions but {} category assignments",
                emotions.len(),
                category_of.len()
            )));
        }
        if let Some(&bad) = category_of.iter().find(|&&c| c >= categories.len()) {
            return Err(Error::Taxonomy(format!("category index {bad} out of range")));
        }
        let mut index = HashMap::with_capacity(emotions.len());
        for (i, name) in emotions.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Taxonomy(format!("duplicate emotion '{name}'")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &categories {
            if !seen.insert(c) {
                return Err(Error::Taxonomy(format!("duplicate category '{c}'")));
            }
        }
        Ok(Self {
            emotions,
            categories,
            category_of,
            index,
        })
    }

    /// Builds a taxonomy from `(category, emotions)` groups, preserving order.
    pub fn from_groups<C, E, I>(groups: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, Vec<E>)>,
        C: Into<String>,
        E: Into<String>,
    {
        let mut emotions = Vec::new();
        let mut categories = Vec::new();
        let mut category_of = Vec::new();
        for (c, members) in groups {
            let ci = categories.len();
            categories.push(c.into());
            for e in members {
                emotions.push(e.into());
                category_of.push(ci);
            }
        }
        Self::new(emotions, categories, category_of)
    }

    /// Every emotion is its own category.
    pub fn flat<E: Into<String>>(emotions: impl IntoIterator<Item = E>) -> Result<Self> {
        let emotions: Vec<String> = emotions.into_iter().map(Into::into).collect();
        let n = emotions.len();
        Self::new(emotions.clone(), emotions, (0..n).collect())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(s)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Taxonomy("expected a JSON object of category -> emotion list".into()))?;
        let mut groups = Vec::with_capacity(obj.len());
        for (cat, members) in obj {
            let list = members
                .as_array()
                .ok_or_else(|| Error::Taxonomy(format!("category '{cat}' must map to a list")))?;
            let names = list
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| Error::Taxonomy(format!("non-string emotion in '{cat}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push((cat.clone(), names));
        }
        Self::from_groups(groups)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// The category -> emotions JSON document accepted by [`Self::from_json_str`].
    pub fn to_json_value(&self) -> Value {
        let mut map = Map::new();
        for (ci, cat) in self.categories.iter().enumerate() {
            let members: Vec<Value> = self
                .members(ci)
                .map(|e| Value::String(self.emotions[e].clone()))
                .collect();
            map.insert(cat.clone(), Value::Array(members));
        }
        Value::Object(map)
    }

    pub fn len(&self) -> usize {
        self.emotions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emotions.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn emotions(&self) -> &[String] {
        &self.emotions
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn emotion_name(&self, i: usize) -> &str {
        &self.emotions[i]
    }

    pub fn category_name(&self, c: usize) -> &str {
        &self.categories[c]
    }

    pub fn category_of(&self, emotion: usize) -> usize {
        self.category_of[emotion]
    }

    pub fn category_assignments(&self) -> &[usize] {
        &self.category_of
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Case-insensitive lookup, used by loaders of hand-written files.
    pub fn resolve(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.index_of(name) {
            return Ok(i);
        }
        let lower = name.to_lowercase();
        self.emotions
            .iter()
            .position(|e| e.to_lowercase() == lower)
            .ok_or_else(|| Error::UnknownEmotion(name.to_owned()))
    }

    /// Emotion indices belonging to category `c`, in taxonomy order.
    pub fn members(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.category_of
            .iter()
            .enumerate()
            .filter(move |(_, &cat)| cat == c)
            .map(|(e, _)| e)
    }

    pub fn category_index_of(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }
}

/// Label ids of the public GoEmotions release, in id order.
pub const GOEMOTIONS_ID_ORDER: [&str; 28] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
    "neutral",
];

/// GoEmotions grouped by sentiment, shipped as `data/goemotions_taxonomy.json`.
pub fn goemotions() -> EmotionTaxonomy {
    EmotionTaxonomy::from_json_str(include_str!("../data/goemotions_taxonomy.json"))
        .expect("bundled GoEmotions taxonomy is valid")
}

/// The nine Vent emotion categories.
pub const VENT_CATEGORIES: [&str; 9] = [
    "Affection",
    "Anger",
    "Creativity",
    "Fear",
    "Feelings",
    "Happiness",
    "Positivity",
    "Sadness",
    "Surprise",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_order() {
        let t = EmotionTaxonomy::from_json_str(r#"{"Pos": ["joy", "love"], "Neg": ["anger"]}"#).unwrap();
        assert_eq!(t.emotions(), ["joy", "love", "anger"]);
        assert_eq!(t.category_of(2), 1);
        let back = EmotionTaxonomy::from_json_str(&t.to_json_value().to_string()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn duplicate_emotion_rejected() {
        let err = EmotionTaxonomy::from_json_str(r#"{"A": ["x"], "B": ["x"]}"#).unwrap_err();
        assert!(err.to_string().contains("duplicate emotion"));
    }

    #[test]
    fn empty_taxonomy_rejected() {
        assert!(EmotionTaxonomy::from_json_str("{}").is_err());
    }

    #[test]
    fn bundled_goemotions_covers_release_ids() {
        let t = goemotions();
        assert_eq!(t.len(), 28);
        for name in GOEMOTIONS_ID_ORDER {
            assert!(t.index_of(name).is_some(), "{name}");
        }
    }

    #[test]
    fn serde_round_trip() {
        let t = goemotions();
        let s = serde_json::to_string(&t).unwrap();
        let back: EmotionTaxonomy = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.index_of("joy"), t.index_of("joy"));
    }
}

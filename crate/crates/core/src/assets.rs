//! Knowledge-annotated asset catalog with a deterministic TF-IDF index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const BUNDLED_LIBRARY: &str = include_str!("../data/library.json");

const SIZE_TOL: f64 = 1e-6;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "any", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in",
    "into", "is", "it", "its", "of", "on", "onto", "or", "over", "so", "some", "such", "than",
    "that", "the", "their", "there", "these", "this", "those", "to", "under", "up", "was",
    "with", "i", "me", "my", "we", "our", "you", "your", "want", "please", "would", "like",
];

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("record {record}: invalid field \"{field}\": {message}")]
    Validation { record: String, field: String, message: String },
}

impl AssetError {
    fn invalid(record: &str, field: &str, message: impl Into<String>) -> Self {
        AssetError::Validation { record: record.to_string(), field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssetCategory {
    Architecture,
    Plant,
    Rock,
    Structure,
}

impl AssetCategory {
    pub const ALL: [AssetCategory; 4] =
        [AssetCategory::Architecture, AssetCategory::Plant, AssetCategory::Rock, AssetCategory::Structure];

    pub fn name(self) -> &'static str {
        match self {
            AssetCategory::Architecture => "Architecture",
            AssetCategory::Plant => "Plant",
            AssetCategory::Rock => "Rock",
            AssetCategory::Structure => "Structure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for AssetCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One catalog entry. Unknown JSON fields are kept in `extra` and written
/// back on serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value")]
pub struct AssetRecord {
    pub name: String,
    pub category: AssetCategory,
    pub path: String,
    pub pos: String,
    pub object: Vec<String>,
    pub season: String,
    pub description: String,
    pub minp: [f64; 3],
    pub maxp: [f64; 3],
    pub size: [f64; 3],
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

const KNOWN_FIELDS: [&str; 10] =
    ["name", "category", "path", "pos", "object", "season", "description", "minp", "maxp", "size"];

impl AssetRecord {
    /// Ground footprint `l * w` in square meters.
    pub fn footprint(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    pub fn is_combination(&self) -> bool {
        !self.object.is_empty()
    }

    /// Text used for retrieval.
    pub fn knowledge_text(&self) -> String {
        format!("{} {} {} {}", self.name, self.pos, self.season, self.description)
    }

    pub fn validate(&self) -> Result<(), AssetError> {
        let who = if self.name.is_empty() { "<unnamed>" } else { &self.name };
        if self.name.trim().is_empty() {
            return Err(AssetError::invalid(who, "name", "must be nonempty"));
        }
        for (field, v) in [("minp", &self.minp), ("maxp", &self.maxp), ("size", &self.size)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(AssetError::invalid(who, field, "components must be finite"));
            }
        }
        for k in 0..3 {
            if self.maxp[k] < self.minp[k] {
                return Err(AssetError::invalid(
                    who,
                    "maxp",
                    format!("component {k} ({}) is below minp ({})", self.maxp[k], self.minp[k]),
                ));
            }
            let span = self.maxp[k] - self.minp[k];
            if (self.size[k] - span).abs() > SIZE_TOL {
                return Err(AssetError::invalid(
                    who,
                    "size",
                    format!("component {k} is {} but maxp - minp is {span}", self.size[k]),
                ));
            }
        }
        Ok(())
    }

    fn from_object(obj: &Map<String, Value>, locus: &str) -> Result<Self, AssetError> {
        let who = obj.get("name").and_then(Value::as_str).unwrap_or(locus).to_string();
        let text = |field: &str| -> Result<String, AssetError> {
            match obj.get(field) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(AssetError::invalid(&who, field, "expected a string")),
                None => Err(AssetError::invalid(&who, field, "missing required field")),
            }
        };
        let triple = |field: &str| -> Result<[f64; 3], AssetError> {
            let arr = match obj.get(field) {
                Some(Value::Array(a)) => a,
                Some(_) => return Err(AssetError::invalid(&who, field, "expected three numbers")),
                None => return Err(AssetError::invalid(&who, field, "missing required field")),
            };
            let nums: Vec<f64> = arr.iter().filter_map(Value::as_f64).collect();
            if arr.len() != 3 || nums.len() != 3 {
                return Err(AssetError::invalid(&who, field, "expected three numbers"));
            }
            Ok([nums[0], nums[1], nums[2]])
        };
        let category = text("category")?;
        let category = AssetCategory::parse(&category).ok_or_else(|| {
            AssetError::invalid(&who, "category", format!("unknown category {category:?}"))
        })?;
        let object = match obj.get("object") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::String(s)) if s.trim().is_empty() => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| AssetError::invalid(&who, "object", "expected a list of names"))?,
            Some(_) => return Err(AssetError::invalid(&who, "object", "expected a list of names")),
        };
        let extra = obj
            .iter()
            .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let rec = AssetRecord {
            name: text("name")?,
            category,
            path: text("path")?,
            pos: text("pos")?,
            object,
            season: text("season")?,
            description: text("description")?,
            minp: triple("minp")?,
            maxp: triple("maxp")?,
            size: triple("size")?,
            extra,
        };
        rec.validate()?;
        Ok(rec)
    }
}

impl TryFrom<Value> for AssetRecord {
    type Error = AssetError;

    fn try_from(v: Value) -> Result<Self, Self::Error> {
        match &v {
            Value::Object(obj) => AssetRecord::from_object(obj, "<record>"),
            _ => Err(AssetError::invalid("<record>", "record", "expected an object")),
        }
    }
}

/// Lowercased alphanumeric tokens with stopwords removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TfIdfIndex {
    idf: BTreeMap<String, f64>,
    /// Unit-normalized sparse vectors per record.
    docs: Vec<BTreeMap<String, f64>>,
}

impl TfIdfIndex {
    fn build(records: &[AssetRecord]) -> Self {
        let tfs: Vec<BTreeMap<String, f64>> = records
            .iter()
            .map(|r| {
                let mut tf = BTreeMap::new();
                for t in tokenize(&r.knowledge_text()) {
                    *tf.entry(t).or_insert(0.0) += 1.0;
                }
                tf
            })
            .collect();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for tf in &tfs {
            for t in tf.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let n = records.len() as f64;
        let idf: BTreeMap<String, f64> =
            df.into_iter().map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)).collect();
        let docs = tfs.into_iter().map(|tf| weigh(&tf, &idf)).collect();
        Self { idf, docs }
    }

    fn vectorize(&self, text: &str) -> BTreeMap<String, f64> {
        let mut tf = BTreeMap::new();
        for t in tokenize(text) {
            if self.idf.contains_key(&t) {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
        }
        weigh(&tf, &self.idf)
    }
}

fn weigh(tf: &BTreeMap<String, f64>, idf: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut v: BTreeMap<String, f64> = tf.iter().map(|(t, c)| (t.clone(), c * idf[t])).collect();
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LibraryStats {
    pub counts: BTreeMap<AssetCategory, usize>,
    pub combination_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetLibrary {
    records: Vec<AssetRecord>,
    index: TfIdfIndex,
}

impl Default for AssetLibrary {
    fn default() -> Self {
        Self::new(Vec::new()).expect("empty library is valid")
    }
}

impl AssetLibrary {
    pub fn new(records: Vec<AssetRecord>) -> Result<Self, AssetError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.name.as_str()) {
                return Err(AssetError::invalid(&r.name, "name", "duplicate name"));
            }
        }
        let index = TfIdfIndex::build(&records);
        Ok(Self { records, index })
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_LIBRARY).expect("bundled library is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AssetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| AssetError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, AssetError> {
        let value: Value = serde_json::from_str(text).map_err(|e| AssetError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let items = match value {
            Value::Array(items) => items,
            _ => {
                return Err(AssetError::Parse {
                    line: 1,
                    column: 1,
                    message: "expected a JSON array of records".into(),
                })
            }
        };
        let records = items
            .iter()
            .enumerate()
            .map(|(k, v)| match v {
                Value::Object(obj) => AssetRecord::from_object(obj, &format!("#{k}")),
                _ => Err(AssetError::invalid(&format!("#{k}"), "record", "expected an object")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(records)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    pub fn records(&self) -> &[AssetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&AssetRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Up to `k` records with positive cosine score against `text`, best
    /// first, ties by name.
    pub fn query(
        &self,
        text: &str,
        k: usize,
        filter: Option<AssetCategory>,
    ) -> Vec<(&AssetRecord, f64)> {
        let q = self.index.vectorize(text);
        if q.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<(&AssetRecord, f64)> = self
            .records
            .iter()
            .zip(&self.index.docs)
            .filter(|(r, _)| filter.is_none_or(|c| r.category == c))
            .map(|(r, d)| (r, q.iter().map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0)).sum::<f64>()))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.name.cmp(&b.0.name)));
        hits.truncate(k);
        hits
    }

    pub fn stats(&self) -> LibraryStats {
        let mut counts: BTreeMap<AssetCategory, usize> =
            AssetCategory::ALL.iter().map(|&c| (c, 0)).collect();
        for r in &self.records {
            *counts.entry(r.category).or_default() += 1;
        }
        let combos = self.records.iter().filter(|r| r.is_combination()).count();
        let combination_ratio =
            if self.records.is_empty() { 0.0 } else { combos as f64 / self.records.len() as f64 };
        LibraryStats { counts, combination_ratio }
    }
}

//! Structured layout constraints: `area -> object -> [[kind, (rel,) type]]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("unknown constraint kind {0:?}")]
    UnknownKind(String),
    #[error("unknown constraint type {0:?}")]
    UnknownType(String),
    #[error("kind {kind} requires type {expected}, got {got}")]
    TypeMismatch { kind: ConstraintKind, expected: ConstraintType, got: ConstraintType },
    #[error("kind {0} needs a related object")]
    MissingRel(ConstraintKind),
    #[error("kind {0} takes no related object")]
    UnexpectedRel(ConstraintKind),
    #[error("related object {0:?} is not selected in this area")]
    DanglingRel(String),
    #[error("object {0:?} is related to itself")]
    SelfRel(String),
    #[error("malformed constraint tuple: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    Edge,
    Middle,
    Around,
    BackedUp,
    Near,
    Far,
    Aligned,
    FaceTo,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 8] = [
        ConstraintKind::Edge,
        ConstraintKind::Middle,
        ConstraintKind::Around,
        ConstraintKind::BackedUp,
        ConstraintKind::Near,
        ConstraintKind::Far,
        ConstraintKind::Aligned,
        ConstraintKind::FaceTo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Edge => "edge",
            ConstraintKind::Middle => "middle",
            ConstraintKind::Around => "around",
            ConstraintKind::BackedUp => "backed up",
            ConstraintKind::Near => "near",
            ConstraintKind::Far => "far",
            ConstraintKind::Aligned => "aligned",
            ConstraintKind::FaceTo => "face to",
        }
    }

    /// Accepts spaces, underscores or hyphens between words, any case.
    pub fn parse(s: &str) -> Result<Self, ConstraintError> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .split([' ', '_', '-'])
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| ConstraintError::UnknownKind(s.to_string()))
    }

    pub fn constraint_type(self) -> ConstraintType {
        match self {
            ConstraintKind::Edge | ConstraintKind::Middle => ConstraintType::Global,
            ConstraintKind::Around | ConstraintKind::BackedUp => ConstraintType::Position,
            ConstraintKind::Near | ConstraintKind::Far => ConstraintType::Distance,
            ConstraintKind::Aligned => ConstraintType::Alignment,
            ConstraintKind::FaceTo => ConstraintType::Rotation,
        }
    }

    pub fn is_relational(self) -> bool {
        self.constraint_type() != ConstraintType::Global
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintType {
    Global,
    Position,
    Distance,
    Alignment,
    Rotation,
}

impl ConstraintType {
    pub const ALL: [ConstraintType; 5] = [
        ConstraintType::Global,
        ConstraintType::Position,
        ConstraintType::Distance,
        ConstraintType::Alignment,
        ConstraintType::Rotation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintType::Global => "Global",
            ConstraintType::Position => "Position",
            ConstraintType::Distance => "Distance",
            ConstraintType::Alignment => "Alignment",
            ConstraintType::Rotation => "Rotation",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConstraintError> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConstraintError::UnknownType(s.to_string()))
    }
}

impl fmt::Display for ConstraintType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub rel: Option<String>,
}

impl Constraint {
    pub fn global(kind: ConstraintKind) -> Self {
        Self { kind, rel: None }
    }

    pub fn with(kind: ConstraintKind, rel: impl Into<String>) -> Self {
        Self { kind, rel: Some(rel.into()) }
    }

    pub fn constraint_type(&self) -> ConstraintType {
        self.kind.constraint_type()
    }

    /// Parses one tuple such as `["middle", "Global"]` or
    /// `["near", "pine", "Distance"]`.
    pub fn from_tuple(items: &[String]) -> Result<Self, ConstraintError> {
        let (kind, rel, ty) = match items {
            [k, t] => (k, None, t),
            [k, r, t] => (k, Some(r.clone()), t),
            _ => return Err(ConstraintError::Malformed(format!("{} items", items.len()))),
        };
        let kind = ConstraintKind::parse(kind)?;
        let ty = ConstraintType::parse(ty)?;
        if ty != kind.constraint_type() {
            return Err(ConstraintError::TypeMismatch { kind, expected: kind.constraint_type(), got: ty });
        }
        match (kind.is_relational(), rel) {
            (true, None) => Err(ConstraintError::MissingRel(kind)),
            (false, Some(_)) => Err(ConstraintError::UnexpectedRel(kind)),
            (_, rel) => Ok(Self { kind, rel }),
        }
    }

    pub fn to_tuple(&self) -> Vec<String> {
        let mut v = vec![self.kind.as_str().to_string()];
        if let Some(r) = &self.rel {
            v.push(r.clone());
        }
        v.push(self.constraint_type().as_str().to_string());
        v
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_tuple().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<String>::deserialize(d)?;
        Constraint::from_tuple(&items).map_err(D::Error::custom)
    }
}

/// Constraints of one area keyed by object instance name.
pub type AreaConstraints = BTreeMap<String, Vec<Constraint>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSpec(pub BTreeMap<String, AreaConstraints>);

impl ConstraintSpec {
    pub fn area(&self, id: &str) -> Option<&AreaConstraints> {
        self.0.get(id)
    }
}

/// Checks that every related object names another selected instance.
pub fn check_relations(constraints: &AreaConstraints, instances: &[String]) -> Result<(), ConstraintError> {
    for (obj, list) in constraints {
        if !instances.contains(obj) {
            return Err(ConstraintError::DanglingRel(obj.clone()));
        }
        for c in list {
            if let Some(r) = &c.rel {
                if r == obj {
                    return Err(ConstraintError::SelfRel(r.clone()));
                }
                if !instances.contains(r) {
                    return Err(ConstraintError::DanglingRel(r.clone()));
                }
            }
        }
    }
    Ok(())
}

/// Lenient parse of an untrusted area constraint object: tuples that fail
/// validation are dropped and reported, the rest kept.
pub fn parse_area_constraints(
    value: &serde_json::Value,
    instances: &[String],
) -> (AreaConstraints, Vec<String>) {
    let mut out = AreaConstraints::new();
    let mut rejected = Vec::new();
    let Some(map) = value.as_object() else {
        rejected.push("constraints are not a JSON object".to_string());
        return (out, rejected);
    };
    for (obj, tuples) in map {
        if !instances.contains(obj) {
            rejected.push(format!("{obj}: not a selected object"));
            continue;
        }
        let Some(tuples) = tuples.as_array() else {
            rejected.push(format!("{obj}: constraint list is not an array"));
            continue;
        };
        for t in tuples {
            let items: Option<Vec<String>> = t
                .as_array()
                .and_then(|a| a.iter().map(|v| v.as_str().map(str::to_string)).collect());
            let parsed = items
                .ok_or_else(|| ConstraintError::Malformed(t.to_string()))
                .and_then(|items| Constraint::from_tuple(&items))
                .and_then(|c| {
                    match &c.rel {
                        Some(r) if r == obj => return Err(ConstraintError::SelfRel(r.clone())),
                        Some(r) if !instances.contains(r) => return Err(ConstraintError::DanglingRel(r.clone())),
                        _ => {}
                    }
                    Ok(c)
                });
            match parsed {
                Ok(c) => out.entry(obj.clone()).or_default().push(c),
                Err(e) => rejected.push(format!("{obj}: {e}")),
            }
        }
    }
    (out, rejected)
}

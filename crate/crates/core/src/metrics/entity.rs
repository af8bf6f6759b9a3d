use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Named-entity category. Common OntoNotes labels get their own variant;
/// anything else is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum EntityLabel {
    Person,
    Norp,
    Fac,
    Org,
    Gpe,
    Loc,
    Product,
    Event,
    WorkOfArt,
    Law,
    Language,
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
    Other(String),
}

impl From<String> for EntityLabel {
    fn from(s: String) -> Self {
        match s.to_ascii_uppercase().as_str() {
            "PERSON" => Self::Person,
            "NORP" => Self::Norp,
            "FAC" => Self::Fac,
            "ORG" => Self::Org,
            "GPE" => Self::Gpe,
            "LOC" => Self::Loc,
            "PRODUCT" => Self::Product,
            "EVENT" => Self::Event,
            "WORK_OF_ART" => Self::WorkOfArt,
            "LAW" => Self::Law,
            "LANGUAGE" => Self::Language,
            "DATE" => Self::Date,
            "TIME" => Self::Time,
            "PERCENT" => Self::Percent,
            "MONEY" => Self::Money,
            "QUANTITY" => Self::Quantity,
            "ORDINAL" => Self::Ordinal,
            "CARDINAL" => Self::Cardinal,
            _ => Self::Other(s),
        }
    }
}

impl From<&str> for EntityLabel {
    fn from(s: &str) -> Self {
        Self::from(s.to_string())
    }
}

impl From<EntityLabel> for String {
    fn from(l: EntityLabel) -> Self {
        l.to_string()
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Person => "PERSON",
            Self::Norp => "NORP",
            Self::Fac => "FAC",
            Self::Org => "ORG",
            Self::Gpe => "GPE",
            Self::Loc => "LOC",
            Self::Product => "PRODUCT",
            Self::Event => "EVENT",
            Self::WorkOfArt => "WORK_OF_ART",
            Self::Law => "LAW",
            Self::Language => "LANGUAGE",
            Self::Date => "DATE",
            Self::Time => "TIME",
            Self::Percent => "PERCENT",
            Self::Money => "MONEY",
            Self::Quantity => "QUANTITY",
            Self::Ordinal => "ORDINAL",
            Self::Cardinal => "CARDINAL",
            Self::Other(s) => s,
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub surface: String,
    pub label: EntityLabel,
}

impl EntityAnnotation {
    pub fn new(surface: impl Into<String>, label: impl Into<EntityLabel>) -> Self {
        Self {
            surface: surface.into(),
            label: label.into(),
        }
    }
}

/// Micro-F1 over exact `(surface, label)` matches with multiset counting,
/// scaled to `[0, 100]`. With `label_filter`, both sides are restricted to
/// that label first. Two empty sides score 100; annotations with an empty
/// surface are ignored.
pub fn entity_f1(
    reference: &[EntityAnnotation],
    candidate: &[EntityAnnotation],
    label_filter: Option<&EntityLabel>,
) -> f64 {
    let keep = |a: &&EntityAnnotation| {
        !a.surface.is_empty() && label_filter.is_none_or(|l| &a.label == l)
    };
    let mut ref_counts: HashMap<&EntityAnnotation, usize> = HashMap::new();
    let mut ref_total = 0usize;
    for a in reference.iter().filter(keep) {
        *ref_counts.entry(a).or_insert(0) += 1;
        ref_total += 1;
    }
    let mut cand_total = 0usize;
    let mut matched = 0usize;
    for a in candidate.iter().filter(keep) {
        cand_total += 1;
        if let Some(c) = ref_counts.get_mut(a) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    if ref_total == 0 && cand_total == 0 {
        return 100.0;
    }
    if matched == 0 {
        return 0.0;
    }
    let p = matched as f64 / cand_total as f64;
    let r = matched as f64 / ref_total as f64;
    100.0 * 2.0 * p * r / (p + r)
}

//! Dataset characterization: the meta-feature catalogue and its six
//! families (simple, statistical, information-theoretic, landmarking,
//! model-based, data complexity).

mod complexity;
mod info;
mod landmarking;
mod model_based;
mod simple;
mod statistical;
pub mod stats;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;

pub use info::{discretize, entropy_bits, mutual_information};

pub const CATALOGUE_VERSION: &str = "mf-catalogue/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Simple,
    Statistical,
    InfoTheoretic,
    Landmarking,
    ModelBased,
    Complexity,
}

pub(crate) type Entries = Vec<(&'static str, Option<f64>)>;

/// Catalogue names of one family, in order.
pub fn family_names(family: Family) -> &'static [&'static str] {
    match family {
        Family::Simple => simple::NAMES,
        Family::Statistical => statistical::NAMES,
        Family::InfoTheoretic => info::NAMES,
        Family::Landmarking => landmarking::NAMES,
        Family::ModelBased => model_based::NAMES,
        Family::Complexity => complexity::NAMES,
    }
}

pub const FAMILIES: [Family; 6] = [
    Family::Simple,
    Family::Statistical,
    Family::InfoTheoretic,
    Family::Landmarking,
    Family::ModelBased,
    Family::Complexity,
];

/// The full ordered catalogue as `(name, family)` pairs.
pub fn catalogue() -> Vec<(&'static str, Family)> {
    FAMILIES
        .iter()
        .flat_map(|&f| family_names(f).iter().map(move |&n| (n, f)))
        .collect()
}

/// Values keyed by catalogue name; `None` marks a measure that is
/// undefined for the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureVector {
    pub dataset_id: String,
    pub catalogue_version: String,
    entries: Vec<(String, Option<f64>)>,
}

impl MetaFeatureVector {
    pub fn new(dataset_id: impl Into<String>, entries: Vec<(String, Option<f64>)>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(k, v)| (k, v.filter(|x| x.is_finite())))
            .collect();
        Self {
            dataset_id: dataset_id.into(),
            catalogue_version: CATALOGUE_VERSION.to_string(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Option<f64>)] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _)| k == name)
            .and_then(|(_, v)| *v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == name)
    }

    /// The flat `name -> value|null` object.
    pub fn to_flat_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), v.map_or(serde_json::Value::Null, serde_json::Value::from)))
            .collect();
        serde_json::Value::Object(map)
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    dataset_id: String,
    catalogue: String,
    values: serde_json::Map<String, serde_json::Value>,
}

impl Serialize for MetaFeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let values = match self.to_flat_json() {
            serde_json::Value::Object(m) => m,
            _ => unreachable!(),
        };
        Wire {
            dataset_id: self.dataset_id.clone(),
            catalogue: self.catalogue_version.clone(),
            values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetaFeatureVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        let mut entries = Vec::with_capacity(w.values.len());
        for (k, v) in w.values {
            let val = match v {
                serde_json::Value::Null => None,
                serde_json::Value::Number(n) => n.as_f64(),
                other => return Err(D::Error::custom(format!("bad value for `{k}`: {other}"))),
            };
            entries.push((k, val));
        }
        Ok(Self {
            dataset_id: w.dataset_id,
            catalogue_version: w.catalogue,
            entries,
        })
    }
}

fn partial(ds: &Dataset, entries: Entries) -> MetaFeatureVector {
    MetaFeatureVector::new(
        ds.id(),
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    )
}

fn checked(names: &[&str], entries: Entries) -> Entries {
    debug_assert_eq!(names.len(), entries.len());
    debug_assert!(names.iter().zip(&entries).all(|(a, (b, _))| a == b));
    entries
}

pub fn extract_simple(ds: &Dataset) -> MetaFeatureVector {
    partial(ds, checked(simple::NAMES, simple::extract(ds)))
}

pub fn extract_statistical(ds: &Dataset) -> MetaFeatureVector {
    partial(ds, checked(statistical::NAMES, statistical::extract(ds)))
}

pub fn extract_info_theoretic(ds: &Dataset) -> MetaFeatureVector {
    partial(ds, checked(info::NAMES, info::extract(ds)))
}

pub fn extract_landmarking(ds: &Dataset, seed: u64) -> MetaFeatureVector {
    partial(ds, checked(landmarking::NAMES, landmarking::extract(ds, seed)))
}

pub fn extract_model_based(ds: &Dataset, seed: u64) -> MetaFeatureVector {
    partial(ds, checked(model_based::NAMES, model_based::extract(ds, seed)))
}

pub fn extract_complexity(ds: &Dataset) -> MetaFeatureVector {
    partial(ds, checked(complexity::NAMES, complexity::extract(ds)))
}

/// All six families concatenated in catalogue order.
pub fn extract_all(ds: &Dataset, seed: u64) -> MetaFeatureVector {
    let mut entries = Vec::new();
    for v in [
        extract_simple(ds),
        extract_statistical(ds),
        extract_info_theoretic(ds),
        extract_landmarking(ds, seed),
        extract_model_based(ds, seed),
        extract_complexity(ds),
    ] {
        entries.extend(v.entries);
    }
    MetaFeatureVector::new(ds.id(), entries)
}

#[cfg(test)]
mod tests;

//! Declarative hyperparameter spaces and concrete points in them.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl HpValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            HpValue::Int(v) => Some(*v as f64),
            HpValue::Real(v) => Some(*v),
            HpValue::Cat(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            HpValue::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Int(v) => write!(f, "{v}"),
            HpValue::Real(v) => write!(f, "{v}"),
            HpValue::Cat(s) => f.write_str(s),
        }
    }
}

/// A point in a search space: dimension name to value. Inactive
/// conditional dimensions are absent.
pub type ParamPoint = BTreeMap<String, HpValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Continuous {
        low: f64,
        high: f64,
        log: bool,
    },
    /// `high` is the bound as printed; when `high_exclusive` the largest
    /// admissible value is `high - 1`.
    Integer {
        low: i64,
        high: i64,
        high_exclusive: bool,
    },
    Categorical {
        values: Vec<String>,
    },
}

impl Domain {
    pub fn int_range(&self) -> Option<(i64, i64)> {
        match *self {
            Domain::Integer {
                low,
                high,
                high_exclusive,
            } => Some((low, if high_exclusive { high - 1 } else { high })),
            _ => None,
        }
    }

    pub fn contains(&self, v: &HpValue) -> bool {
        match (self, v) {
            (Domain::Continuous { low, high, .. }, HpValue::Real(x)) => {
                x.is_finite() && *x >= *low && *x <= *high
            }
            (Domain::Continuous { low, high, .. }, HpValue::Int(x)) => {
                (*x as f64) >= *low && (*x as f64) <= *high
            }
            (Domain::Integer { .. }, HpValue::Int(x)) => {
                let (lo, hi) = self.int_range().unwrap();
                *x >= lo && *x <= hi
            }
            (Domain::Categorical { values }, HpValue::Cat(s)) => values.iter().any(|v| v == s),
            _ => false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HpValue {
        match self {
            Domain::Continuous { low, high, log } => {
                let u: f64 = rng.random();
                HpValue::Real(unit_to_real(u, *low, *high, *log))
            }
            Domain::Integer { .. } => {
                let (lo, hi) = self.int_range().unwrap();
                HpValue::Int(rng.random_range(lo..=hi))
            }
            Domain::Categorical { values } => {
                HpValue::Cat(values[rng.random_range(0..values.len())].clone())
            }
        }
    }

    /// Maps a numeric value into `[0, 1]` (log space for log dims);
    /// categorical values map to their index over `len - 1`.
    pub fn to_unit(&self, v: &HpValue) -> f64 {
        match (self, v) {
            (Domain::Continuous { low, high, log }, _) => {
                let x = v.as_f64().unwrap_or(*low);
                if high == low {
                    return 0.5;
                }
                if *log {
                    (x.ln() - low.ln()) / (high.ln() - low.ln())
                } else {
                    (x - low) / (high - low)
                }
            }
            (Domain::Integer { .. }, _) => {
                let (lo, hi) = self.int_range().unwrap();
                if hi == lo {
                    return 0.5;
                }
                (v.as_f64().unwrap_or(lo as f64) - lo as f64) / (hi - lo) as f64
            }
            (Domain::Categorical { values }, _) => {
                let idx = v
                    .as_str()
                    .and_then(|s| values.iter().position(|x| x == s))
                    .unwrap_or(0);
                if values.len() <= 1 {
                    0.0
                } else {
                    idx as f64 / (values.len() - 1) as f64
                }
            }
        }
    }

    /// Inverse of [`Domain::to_unit`], rounding integers and categories.
    pub fn from_unit(&self, u: f64) -> HpValue {
        let u = u.clamp(0.0, 1.0);
        match self {
            Domain::Continuous { low, high, log } => HpValue::Real(unit_to_real(u, *low, *high, *log)),
            Domain::Integer { .. } => {
                let (lo, hi) = self.int_range().unwrap();
                HpValue::Int(lo + (u * (hi - lo) as f64).round() as i64)
            }
            Domain::Categorical { values } => {
                let idx = (u * (values.len() - 1) as f64).round() as usize;
                HpValue::Cat(values[idx].clone())
            }
        }
    }

    /// Grid values for this dimension: all categories, or `per_dim`
    /// evenly spaced points (log-spaced when flagged) including both ends.
    pub fn grid(&self, per_dim: usize) -> Vec<HpValue> {
        match self {
            Domain::Categorical { values } => values.iter().cloned().map(HpValue::Cat).collect(),
            Domain::Continuous { low, high, log } => {
                if per_dim == 1 {
                    return vec![HpValue::Real(unit_to_real(0.5, *low, *high, *log))];
                }
                (0..per_dim)
                    .map(|i| {
                        let v = if i == 0 {
                            *low
                        } else if i == per_dim - 1 {
                            *high
                        } else {
                            unit_to_real(i as f64 / (per_dim - 1) as f64, *low, *high, *log)
                        };
                        HpValue::Real(v)
                    })
                    .collect()
            }
            Domain::Integer { .. } => {
                let (lo, hi) = self.int_range().unwrap();
                if per_dim == 1 {
                    return vec![HpValue::Int(lo + (hi - lo) / 2)];
                }
                let mut out: Vec<i64> = (0..per_dim)
                    .map(|i| {
                        let t = i as f64 / (per_dim - 1) as f64;
                        (lo as f64 + t * (hi - lo) as f64).round() as i64
                    })
                    .collect();
                out.dedup();
                out.into_iter().map(HpValue::Int).collect()
            }
        }
    }
}

pub(crate) fn unit_to_real(u: f64, low: f64, high: f64, log: bool) -> f64 {
    let v = if log {
        (low.ln() + u * (high.ln() - low.ln())).exp()
    } else {
        low + u * (high - low)
    };
    v.clamp(low, high)
}

/// Activation condition: the dimension exists only when `parent` takes
/// one of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl Dimension {
    pub fn real(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, Domain::Continuous { low, high, log: false })
    }

    pub fn log_real(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, Domain::Continuous { low, high, log: true })
    }

    pub fn int(name: &str, low: i64, high: i64, high_exclusive: bool) -> Self {
        Self::new(
            name,
            Domain::Integer {
                low,
                high,
                high_exclusive,
            },
        )
    }

    pub fn cat(name: &str, values: &[&str]) -> Self {
        Self::new(
            name,
            Domain::Categorical {
                values: values.iter().map(|s| s.to_string()).collect(),
            },
        )
    }

    fn new(name: &str, domain: Domain) -> Self {
        Self {
            name: name.to_string(),
            domain,
            condition: None,
        }
    }

    pub fn when(mut self, parent: &str, values: &[&str]) -> Self {
        self.condition = Some(Condition {
            parent: parent.to_string(),
            values: values.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn is_active(&self, point: &ParamPoint) -> bool {
        match &self.condition {
            None => true,
            Some(c) => point
                .get(&c.parent)
                .and_then(HpValue::as_str)
                .is_some_and(|v| c.values.iter().any(|x| x == v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
}

impl SearchSpace {
    /// Validates bounds and the condition graph. Parents must precede
    /// their children, which rules out cycles.
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        for (i, d) in dimensions.iter().enumerate() {
            match &d.domain {
                Domain::Continuous { low, high, log } => {
                    if !(low.is_finite() && high.is_finite() && low <= high) {
                        return Err(Error::InvalidConfig(format!("{}: bad bounds", d.name)));
                    }
                    if *log && *low <= 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "{}: log scale needs positive bounds",
                            d.name
                        )));
                    }
                }
                Domain::Integer { .. } => {
                    let (lo, hi) = d.domain.int_range().unwrap();
                    if lo > hi {
                        return Err(Error::InvalidConfig(format!("{}: empty range", d.name)));
                    }
                }
                Domain::Categorical { values } => {
                    if values.is_empty() {
                        return Err(Error::InvalidConfig(format!("{}: no values", d.name)));
                    }
                }
            }
            if dimensions[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::InvalidConfig(format!("duplicate dimension {}", d.name)));
            }
            if let Some(c) = &d.condition {
                let parent = dimensions[..i].iter().find(|o| o.name == c.parent);
                match parent {
                    Some(Dimension {
                        domain: Domain::Categorical { .. },
                        ..
                    }) => {}
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "{}: condition parent `{}` must be an earlier categorical dimension",
                            d.name, c.parent
                        )))
                    }
                }
            }
        }
        Ok(Self { dimensions })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamPoint {
        let mut point = ParamPoint::new();
        for d in &self.dimensions {
            if d.is_active(&point) {
                point.insert(d.name.clone(), d.domain.sample(rng));
            }
        }
        point
    }

    /// Drops inactive dimensions and samples any active one that is absent.
    pub fn repair<R: Rng + ?Sized>(&self, point: &mut ParamPoint, rng: &mut R) {
        point.retain(|k, _| self.dimension(k).is_some());
        for d in &self.dimensions {
            if d.is_active(point) {
                if !point.contains_key(&d.name) {
                    point.insert(d.name.clone(), d.domain.sample(rng));
                }
            } else {
                point.remove(&d.name);
            }
        }
    }

    pub fn validate(&self, point: &ParamPoint) -> Result<()> {
        for key in point.keys() {
            if self.dimension(key).is_none() {
                return Err(Error::InvalidConfig(format!("unknown hyperparameter `{key}`")));
            }
        }
        for d in &self.dimensions {
            let active = d.is_active(point);
            match (active, point.get(&d.name)) {
                (true, None) => {
                    return Err(Error::InvalidConfig(format!("`{}` is required", d.name)))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidConfig(format!(
                        "`{}` present but its condition does not hold",
                        d.name
                    )))
                }
                (true, Some(v)) if !d.domain.contains(v) => {
                    return Err(Error::InvalidConfig(format!(
                        "`{}` = {v} outside its domain",
                        d.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn space() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::cat("kernel", &["poly", "rbf"]),
            Dimension::log_real("c", 1e-3, 10.0),
            Dimension::int("degree", 2, 3, false).when("kernel", &["poly"]),
        ])
        .unwrap()
    }

    #[test]
    fn conditional_presence() {
        let s = space();
        let mut r = rng::rng(1, 0);
        for _ in 0..200 {
            let p = s.sample(&mut r);
            s.validate(&p).unwrap();
            assert_eq!(p.contains_key("degree"), p["kernel"].as_str() == Some("poly"));
        }
    }

    #[test]
    fn rejects_bad_spaces_and_points() {
        assert!(SearchSpace::new(vec![Dimension::log_real("x", 0.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::real("x", 2.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::int("d", 1, 2, false).when("k", &["a"])]).is_err());
        let s = space();
        let mut p = ParamPoint::new();
        p.insert("kernel".into(), HpValue::Cat("rbf".into()));
        p.insert("c".into(), HpValue::Real(1.0));
        s.validate(&p).unwrap();
        p.insert("degree".into(), HpValue::Int(2));
        assert!(s.validate(&p).is_err());
        p.remove("degree");
        p.insert("c".into(), HpValue::Real(100.0));
        assert!(s.validate(&p).is_err());
    }

    #[test]
    fn exclusive_integer_bound() {
        let d = Domain::Integer {
            low: 1,
            high: 21,
            high_exclusive: true,
        };
        assert!(d.contains(&HpValue::Int(20)));
        assert!(!d.contains(&HpValue::Int(21)));
    }

    #[test]
    fn value_json_shapes() {
        let p: ParamPoint = serde_json::from_str(r#"{"a":3,"b":2.0,"c":"x","d":1e-10}"#).unwrap();
        assert_eq!(p["a"], HpValue::Int(3));
        assert_eq!(p["b"], HpValue::Real(2.0));
        assert_eq!(p["c"], HpValue::Cat("x".into()));
        assert_eq!(p["d"], HpValue::Real(1e-10));
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ParamPoint>(&back).unwrap(), p);
    }
}

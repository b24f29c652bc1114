//! Verification reports: one entry per checked property.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

/// One checked (or merely measured) property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub status: Status,
    /// Named measurements; non-finite values serialize as `null`.
    #[serde(serialize_with = "ser_measured", deserialize_with = "de_measured")]
    pub measured: BTreeMap<String, f64>,
    pub tolerance: Option<f64>,
    /// Short statement of the property being checked.
    pub anchor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn ser_measured<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    let view: BTreeMap<&str, Option<f64>> = m
        .iter()
        .map(|(k, v)| (k.as_str(), v.is_finite().then_some(*v)))
        .collect();
    view.serialize(s)
}

fn de_measured<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| (k, v.unwrap_or(f64::NAN)))
        .collect())
}

impl ReportEntry {
    pub fn new(name: impl Into<String>, status: Status, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            measured: BTreeMap::new(),
            tolerance: None,
            anchor: anchor.into(),
            detail: None,
        }
    }

    /// Entry asserting `pass`; a `NaN` measurement never passes.
    pub fn check(name: impl Into<String>, pass: bool, anchor: impl Into<String>) -> Self {
        Self::new(name, if pass { Status::Pass } else { Status::Fail }, anchor)
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Ordered collection of entries; serializes as a JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(ReportEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

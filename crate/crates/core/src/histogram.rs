//! Per-class sample-count histograms.
//!
//! `(ClassHistogram, merge, empty)` is a commutative monoid, so histograms can be
//! built per shard and merged in any order with a bit-identical result.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::manifest::{Manifest, SampleRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistogramError {
    #[error("sample count overflow for class `{0}`")]
    Overflow(String),
    #[error("histogram total {declared} does not match the sum of counts {actual}")]
    TotalMismatch { declared: u64, actual: u64 },
    #[error("histogram label_set_size {declared} does not match {actual} classes")]
    LabelSetMismatch { declared: u64, actual: u64 },
}

/// Which labels of a record are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Only the first label counts.
    #[default]
    Primary,
    /// Every label counts once.
    All,
}

impl LabelMode {
    pub fn labels<'a>(&self, record: &'a SampleRecord) -> &'a [String] {
        match self {
            LabelMode::Primary => &record.labels()[..1],
            LabelMode::All => record.labels(),
        }
    }
}

/// Class → sample count. Classes with a zero count are members of the label
/// set (they come from a declared label set).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassHistogram {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl ClassHistogram {
    pub fn new() -> Self {
        ClassHistogram::default()
    }

    /// Builds a histogram from `(class, count)` pairs; repeated classes add up.
    pub fn from_counts<I, S>(counts: I) -> Result<Self, HistogramError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut h = ClassHistogram::new();
        for (class, n) in counts {
            h.add(class.into(), n)?;
        }
        Ok(h)
    }

    /// Adds a class with zero samples if it is not present yet.
    pub fn declare(&mut self, class: impl Into<String>) {
        self.counts.entry(class.into()).or_insert(0);
    }

    pub fn add(&mut self, class: impl Into<String>, n: u64) -> Result<(), HistogramError> {
        let class = class.into();
        let total = self
            .total
            .checked_add(n)
            .ok_or_else(|| HistogramError::Overflow(class.clone()))?;
        match self.counts.get_mut(&class) {
            Some(c) => *c = c.checked_add(n).ok_or(HistogramError::Overflow(class))?,
            None => {
                self.counts.insert(class, n);
            }
        }
        self.total = total;
        Ok(())
    }

    /// Increments by one without allocating when the class already exists.
    pub(crate) fn increment(&mut self, class: &str) -> Result<(), HistogramError> {
        match self.counts.get_mut(class) {
            Some(c) => {
                let total = self
                    .total
                    .checked_add(1)
                    .ok_or_else(|| HistogramError::Overflow(class.to_string()))?;
                *c = c
                    .checked_add(1)
                    .ok_or_else(|| HistogramError::Overflow(class.to_string()))?;
                self.total = total;
                Ok(())
            }
            None => self.add(class, 1),
        }
    }

    /// Removes one sample previously counted. The class stays in the label set.
    pub(crate) fn decrement(&mut self, class: &str) {
        let c = self.counts.get_mut(class).expect("decrement of a counted class");
        *c -= 1;
        self.total -= 1;
    }

    pub fn count(&self, class: &str) -> Option<u64> {
        self.counts.get(class).copied()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// N: total number of samples.
    pub fn total_samples(&self) -> u64 {
        self.total
    }

    /// C: number of classes in the label set, including zero-count ones.
    pub fn label_set_size(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Pointwise sum; the label set is the union.
    pub fn merge(&self, other: &ClassHistogram) -> Result<ClassHistogram, HistogramError> {
        let (mut acc, small) = if self.counts.len() >= other.counts.len() {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        for (class, &n) in &small.counts {
            acc.add(class.as_str(), n)?;
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("histogram serialization cannot fail")
    }

    pub fn from_json(text: &str) -> serde_json::Result<ClassHistogram> {
        serde_json::from_str(text)
    }
}

// keys in sorted order
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramDoc {
    counts: BTreeMap<String, u64>,
    label_set_size: u64,
    total: u64,
}

impl Serialize for ClassHistogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        HistogramDoc {
            counts: self.counts.clone(),
            label_set_size: self.label_set_size(),
            total: self.total,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClassHistogram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = HistogramDoc::deserialize(deserializer)?;
        let h = ClassHistogram::from_counts(doc.counts).map_err(D::Error::custom)?;
        if h.total != doc.total {
            return Err(D::Error::custom(HistogramError::TotalMismatch {
                declared: doc.total,
                actual: h.total,
            }));
        }
        if h.label_set_size() != doc.label_set_size {
            return Err(D::Error::custom(HistogramError::LabelSetMismatch {
                declared: doc.label_set_size,
                actual: h.label_set_size(),
            }));
        }
        Ok(h)
    }
}

/// Counts a sequence of records into a histogram, seeding it with `declared`
/// classes at zero.
pub fn count_records<'a, I>(
    records: I,
    declared: Option<&BTreeSet<String>>,
    mode: LabelMode,
) -> ClassHistogram
where
    I: IntoIterator<Item = &'a SampleRecord>,
{
    let mut h = ClassHistogram::new();
    if let Some(declared) = declared {
        for class in declared {
            h.declare(class.as_str());
        }
    }
    for record in records {
        for label in mode.labels(record) {
            // a class count is bounded by the number of records
            h.increment(label).expect("record count fits in u64");
        }
    }
    h
}

pub fn build_histogram(manifest: &Manifest, mode: LabelMode) -> ClassHistogram {
    count_records(manifest.records(), manifest.declared_label_set(), mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(pairs: &[(&str, u64)]) -> ClassHistogram {
        ClassHistogram::from_counts(pairs.iter().map(|&(c, n)| (c, n))).unwrap()
    }

    fn manifest(labels: &[&str], declared: Option<&[&str]>) -> Manifest {
        let records = labels.iter().enumerate().map(|(i, l)| {
            SampleRecord::new(format!("r{i}"), vec![l.to_string()], None).unwrap()
        });
        Manifest::from_records(
            records,
            declared.map(|d| d.iter().map(|s| s.to_string()).collect()),
        )
        .unwrap()
    }

    #[test]
    fn direct_count() {
        let hist = build_histogram(&manifest(&["dog", "dog", "cat"], None), LabelMode::Primary);
        assert_eq!(hist, h(&[("dog", 2), ("cat", 1)]));
        assert_eq!(hist.total_samples(), 3);
        assert_eq!(hist.label_set_size(), 2);
    }

    #[test]
    fn zero_count_declared_class_kept() {
        let hist = build_histogram(
            &manifest(&["dog"], Some(&["dog", "cat", "fox"])),
            LabelMode::Primary,
        );
        assert_eq!(hist, h(&[("dog", 1), ("cat", 0), ("fox", 0)]));
        assert_eq!(hist.label_set_size(), 3);
    }

    #[test]
    fn empty_manifest() {
        let hist = build_histogram(&Manifest::empty(), LabelMode::Primary);
        assert!(hist.is_empty());
        assert_eq!((hist.total_samples(), hist.label_set_size()), (0, 0));
    }

    #[test]
    fn all_labels_mode() {
        let r = SampleRecord::new("a", vec!["x".into(), "y".into()], None).unwrap();
        let m = Manifest::from_records([r], None).unwrap();
        assert_eq!(build_histogram(&m, LabelMode::Primary), h(&[("x", 1)]));
        assert_eq!(build_histogram(&m, LabelMode::All), h(&[("x", 1), ("y", 1)]));
    }

    #[test]
    fn merge_pointwise() {
        let merged = h(&[("a", 3), ("b", 2)]).merge(&h(&[("a", 1), ("c", 4)])).unwrap();
        assert_eq!(merged, h(&[("a", 4), ("b", 2), ("c", 4)]));
        let m = h(&[("a", 3)]);
        assert_eq!(m.merge(&ClassHistogram::new()).unwrap(), m);
    }

    #[test]
    fn overflow_is_checked() {
        let big = h(&[("a", u64::MAX)]);
        assert_eq!(
            big.merge(&h(&[("a", 1)])),
            Err(HistogramError::Overflow("a".into()))
        );
        assert!(big.merge(&h(&[("b", 1)])).is_err());
    }

    #[test]
    fn json_layout() {
        let hist = h(&[("b", 2), ("a", 0)]);
        assert_eq!(
            hist.to_json(),
            r#"{"counts":{"a":0,"b":2},"label_set_size":2,"total":2}"#
        );
        assert_eq!(ClassHistogram::from_json(&hist.to_json()).unwrap(), hist);
        assert!(ClassHistogram::from_json(r#"{"counts":{"a":1},"label_set_size":1,"total":2}"#).is_err());
    }
}

//! Dataset-level quality indicators computed from a [`ClassHistogram`].
//!
//! - *left-skewedness*: share of all samples that fall in the most common
//!   `k%` of classes. A perfectly balanced dataset scores exactly `k`.
//! - *long-tailedness @ k*: share of classes with strictly fewer than `k`
//!   samples. Declared classes with no samples are always in the tail.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::histogram::ClassHistogram;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("indicator is undefined on an empty dataset")]
    EmptyDataset,
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorConfig {
    /// Head size for left-skewedness, as a percentage of classes.
    pub skew_k_percent: f64,
    /// Sample-count thresholds for long-tailedness, strictly decreasing.
    pub tail_thresholds: Vec<u64>,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            skew_k_percent: 5.0,
            tail_thresholds: vec![500, 100],
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        let k = self.skew_k_percent;
        if !(k > 0.0 && k <= 100.0) {
            return Err(IndicatorError::InvalidConfig(format!(
                "skew_k_percent must be in (0, 100], got {k}"
            )));
        }
        if self.tail_thresholds.contains(&0) {
            return Err(IndicatorError::InvalidConfig(
                "tail thresholds must be positive".into(),
            ));
        }
        if self.tail_thresholds.windows(2).any(|w| w[0] <= w[1]) {
            return Err(IndicatorError::InvalidConfig(format!(
                "tail thresholds must be strictly decreasing, got {:?}",
                self.tail_thresholds
            )));
        }
        Ok(())
    }
}

/// Number of head classes for left-skewedness: `max(1, round_half_up(k% · C))`.
pub fn head_class_count(k_percent: f64, label_set_size: u64) -> u64 {
    let exact = k_percent * label_set_size as f64 / 100.0;
    ((exact + 0.5).floor() as u64).clamp(1, label_set_size.max(1))
}

/// Percentage of samples in the most common `k_percent`% of classes.
///
/// Head classes are the largest by count, ties broken by ascending class id.
pub fn left_skewedness(h: &ClassHistogram, k_percent: f64) -> Result<f64, IndicatorError> {
    if h.label_set_size() == 0 || h.total_samples() == 0 {
        return Err(IndicatorError::EmptyDataset);
    }
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(IndicatorError::InvalidConfig(format!(
            "k must be in (0, 100], got {k_percent}"
        )));
    }
    let m = head_class_count(k_percent, h.label_set_size()) as usize;
    let mut ranked: Vec<(&String, u64)> = h.counts().iter().map(|(c, &n)| (c, n)).collect();
    // BTreeMap iteration is already in ascending id order; a stable sort keeps it for ties
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    let head: u64 = ranked[..m].iter().map(|&(_, n)| n).sum();
    Ok(100.0 * head as f64 / h.total_samples() as f64)
}

/// Percentage of classes with strictly fewer than `k` samples.
pub fn long_tailedness(h: &ClassHistogram, k: u64) -> Result<f64, IndicatorError> {
    if h.label_set_size() == 0 {
        return Err(IndicatorError::EmptyDataset);
    }
    let below = h.counts().values().filter(|&&n| n < k).count();
    Ok(100.0 * below as f64 / h.label_set_size() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorReport {
    pub config: IndicatorConfig,
    pub label_set_size: u64,
    #[serde(with = "pct")]
    pub left_skew: f64,
    #[serde(with = "pct_map")]
    pub long_tail: BTreeMap<u64, f64>,
    pub per_class_max: u64,
    pub per_class_mean: f64,
    pub per_class_min: u64,
    pub total_samples: u64,
}

impl IndicatorReport {
    pub fn long_tail_at(&self, k: u64) -> Option<f64> {
        self.long_tail.get(&k).copied()
    }
}

/// Computes every indicator for one histogram. O(C log C) time, O(C) memory.
pub fn audit(h: &ClassHistogram, cfg: &IndicatorConfig) -> Result<IndicatorReport, IndicatorError> {
    cfg.validate()?;
    let left_skew = left_skewedness(h, cfg.skew_k_percent)?;
    let long_tail = cfg
        .tail_thresholds
        .iter()
        .map(|&k| long_tailedness(h, k).map(|v| (k, v)))
        .collect::<Result<_, _>>()?;
    let counts = h.counts().values();
    Ok(IndicatorReport {
        config: cfg.clone(),
        label_set_size: h.label_set_size(),
        left_skew,
        long_tail,
        per_class_max: counts.clone().copied().max().unwrap_or(0),
        per_class_mean: h.total_samples() as f64 / h.label_set_size() as f64,
        per_class_min: counts.copied().min().unwrap_or(0),
        total_samples: h.total_samples(),
    })
}

/// Percentages as JSON numbers with exactly four decimal places.
pub(crate) mod pct {
    use super::*;
    use serde_json::value::RawValue;

    pub(crate) fn to_raw(v: f64) -> Box<RawValue> {
        RawValue::from_string(format!("{v:.4}")).expect("formatted float is valid JSON")
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return Err(serde::ser::Error::custom("percentage is not finite"));
        }
        to_raw(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(D::Error::custom(format!("percentage {v} outside [0, 100]")));
        }
        Ok(v)
    }
}

/// Threshold → percentage map, keys as decimal strings in lexicographic order.
mod pct_map {
    use super::*;
    use serde_json::value::RawValue;

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, f64>, s: S) -> Result<S::Ok, S::Error> {
        let sorted: BTreeMap<String, Box<RawValue>> =
            m.iter().map(|(k, v)| (k.to_string(), pct::to_raw(*v))).collect();
        sorted.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, f64>, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let k = k
                    .parse::<u64>()
                    .map_err(|_| D::Error::custom(format!("bad threshold key `{k}`")))?;
                Ok((k, v))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(pairs: &[(&str, u64)]) -> ClassHistogram {
        ClassHistogram::from_counts(pairs.iter().map(|&(c, n)| (c, n))).unwrap()
    }

    fn balanced(classes: u64, per_class: u64) -> ClassHistogram {
        ClassHistogram::from_counts((0..classes).map(|i| (format!("c{i:03}"), per_class))).unwrap()
    }

    #[test]
    fn balanced_left_skew_equals_k() {
        assert_eq!(left_skewedness(&balanced(100, 1250), 5.0).unwrap(), 5.0);
        assert_eq!(left_skewedness(&balanced(100, 1250), 100.0).unwrap(), 100.0);
    }

    #[test]
    fn single_head_class() {
        let hist = h(&[("a", 90), ("b", 5), ("c", 5)]);
        assert_eq!(head_class_count(34.0, 3), 1);
        assert_eq!(left_skewedness(&hist, 34.0).unwrap(), 90.0);
    }

    #[test]
    fn head_count_rounding() {
        assert_eq!(head_class_count(5.0, 100), 5);
        assert_eq!(head_class_count(5.0, 10), 1); // 0.5 rounds up
        assert_eq!(head_class_count(5.0, 9), 1); // 0.45 → 0 → clamped to 1
        assert_eq!(head_class_count(50.0, 3), 2); // 1.5 rounds up
        assert_eq!(head_class_count(100.0, 7), 7);
    }

    #[test]
    fn long_tail_examples() {
        assert_eq!(long_tailedness(&balanced(100, 1250), 500).unwrap(), 0.0);
        let hist = h(&[("a", 50), ("b", 600), ("c", 600)]);
        assert_eq!(long_tailedness(&hist, 500).unwrap(), 100.0 / 3.0);
        // strict: a class with exactly k samples is not in the tail
        assert_eq!(long_tailedness(&hist, 50).unwrap(), 0.0);
        let with_empty = h(&[("a", 3), ("b", 0), ("c", 0), ("d", 9)]);
        assert_eq!(long_tailedness(&with_empty, 1).unwrap(), 50.0);
    }

    #[test]
    fn empty_histogram_errors() {
        let empty = ClassHistogram::new();
        assert_eq!(left_skewedness(&empty, 5.0), Err(IndicatorError::EmptyDataset));
        assert_eq!(long_tailedness(&empty, 5), Err(IndicatorError::EmptyDataset));
        assert!(audit(&empty, &IndicatorConfig::default()).is_err());
        // declared classes without samples: tail is defined, skew is not
        let zeros = h(&[("a", 0)]);
        assert_eq!(long_tailedness(&zeros, 1).unwrap(), 100.0);
        assert!(left_skewedness(&zeros, 5.0).is_err());
    }

    #[test]
    fn audit_balanced() {
        let r = audit(&balanced(100, 1250), &IndicatorConfig::default()).unwrap();
        assert_eq!(r.label_set_size, 100);
        assert_eq!(r.total_samples, 125_000);
        assert_eq!(r.left_skew, 5.0);
        assert_eq!(r.long_tail_at(500), Some(0.0));
        assert_eq!(r.long_tail_at(100), Some(0.0));
        assert_eq!((r.per_class_min, r.per_class_max), (1250, 1250));
        assert_eq!(r.per_class_mean, 1250.0);
    }

    #[test]
    fn audit_single_class() {
        let r = audit(&h(&[("a", 10)]), &IndicatorConfig::default()).unwrap();
        assert_eq!(r.label_set_size, 1);
        assert_eq!(r.left_skew, 100.0);
        assert_eq!(r.long_tail_at(500), Some(100.0));
        assert_eq!(r.long_tail_at(100), Some(100.0));
    }

    #[test]
    fn config_validation() {
        let bad = |k: f64, t: Vec<u64>| IndicatorConfig {
            skew_k_percent: k,
            tail_thresholds: t,
        };
        assert!(bad(0.0, vec![5]).validate().is_err());
        assert!(bad(100.5, vec![5]).validate().is_err());
        assert!(bad(f64::NAN, vec![5]).validate().is_err());
        assert!(bad(5.0, vec![100, 500]).validate().is_err());
        assert!(bad(5.0, vec![100, 100]).validate().is_err());
        assert!(bad(5.0, vec![0]).validate().is_err());
        assert!(bad(100.0, vec![]).validate().is_ok());
    }

    #[test]
    fn report_json() {
        let r = audit(&h(&[("a", 50), ("b", 600), ("c", 600)]), &IndicatorConfig::default()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(
            text,
            "{\"config\":{\"skew_k_percent\":5.0,\"tail_thresholds\":[500,100]},\
             \"label_set_size\":3,\"left_skew\":48.0000,\
             \"long_tail\":{\"100\":33.3333,\"500\":33.3333},\
             \"per_class_max\":600,\"per_class_mean\":416.6666666666667,\
             \"per_class_min\":50,\"total_samples\":1250}"
        );
        let back: IndicatorReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.long_tail_at(100), Some(33.3333));
        assert_eq!(back.left_skew, 48.0);
    }
}

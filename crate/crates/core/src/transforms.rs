//! Dataset variants built from manifests.
//!
//! Every transform is a pure function of its input manifests, parameters and
//! seed. Whenever a transform keeps "n samples of class c", it keeps the n
//! records with the smallest [`sample_rank`]`(seed, c, id)`, ties broken by id.
//! The choice therefore does not depend on record order or sharding, and the
//! output is returned in canonical order.
//!
//! Transforms only select existing records; nothing is duplicated or invented.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::sample_rank;
use crate::manifest::{Manifest, ManifestError, ManifestFormat, SampleRecord};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("invalid {kind} parameters: {message}")]
    InvalidParams { kind: &'static str, message: String },
    #[error(
        "donor has {available} non-overlapping classes with samples but {needed} were requested \
         (short by {})", needed - available
    )]
    InsufficientDonorClasses { needed: u64, available: u64 },
    #[error("invalid transform plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

pub type Result<T, E = TransformError> = std::result::Result<T, E>;

/// What a transform did. Written next to every emitted manifest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSummary {
    pub classes_touched: Vec<String>,
    pub kind: String,
    pub samples_added: u64,
    pub samples_dropped: u64,
    pub samples_in: u64,
    pub samples_out: u64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformOutput {
    pub manifest: Manifest,
    pub summary: TransformSummary,
}

/// Optional alias → canonical class name map used when deciding whether two
/// class identifiers denote the same class. Without it, matching is exact.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynonymMap(BTreeMap<String, String>);

impl SynonymMap {
    pub fn new<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        SynonymMap(
            pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        )
    }

    pub fn canonical<'a>(&'a self, class: &'a str) -> &'a str {
        self.0.get(class).map(String::as_str).unwrap_or(class)
    }
}

/// Keeps the `n` records with the smallest rank for `class`.
fn select_by_rank<'a>(
    records: &[&'a SampleRecord],
    class: &str,
    n: usize,
    seed: u64,
) -> Vec<&'a SampleRecord> {
    if n >= records.len() {
        return records.to_vec();
    }
    let mut ranked: Vec<(u64, &str, &'a SampleRecord)> = records
        .iter()
        .map(|r| (sample_rank(seed, class, r.id()), r.id(), *r))
        .collect();
    ranked.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    ranked.truncate(n);
    ranked.into_iter().map(|(_, _, r)| r).collect()
}

fn invalid(kind: &'static str, message: impl Into<String>) -> TransformError {
    TransformError::InvalidParams {
        kind,
        message: message.into(),
    }
}

fn summary(kind: &str, seed: u64, input_len: usize) -> TransformSummary {
    TransformSummary {
        kind: kind.to_string(),
        seed,
        samples_in: input_len as u64,
        ..Default::default()
    }
}

fn finish(
    records: Vec<SampleRecord>,
    declared: Option<BTreeSet<String>>,
    mut summary: TransformSummary,
) -> Result<TransformOutput> {
    let manifest = Manifest::from_records(records, declared)?.canonicalized();
    summary.samples_out = manifest.len() as u64;
    Ok(TransformOutput { manifest, summary })
}

fn list_classes(classes: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut text = classes[..classes.len().min(SHOWN)].join(", ");
    if classes.len() > SHOWN {
        text.push_str(&format!(", … ({} more)", classes.len() - SHOWN));
    }
    text
}

fn cap_classes(m: &Manifest, cap: u64, seed: u64, kind: &'static str) -> Result<TransformOutput> {
    let mut s = summary(kind, seed, m.len());
    if m.is_empty() {
        s.warnings.push("input manifest is empty".into());
        return finish(Vec::new(), m.declared_label_set().cloned(), s);
    }
    let cap_n = usize::try_from(cap).unwrap_or(usize::MAX);
    let mut kept = Vec::with_capacity(m.len());
    let mut undersized = Vec::new();
    for (class, records) in m.by_primary_label() {
        if records.len() > cap_n {
            s.classes_touched.push(class.to_string());
            s.samples_dropped += (records.len() - cap_n) as u64;
            kept.extend(select_by_rank(&records, class, cap_n, seed).into_iter().cloned());
        } else {
            if records.len() < cap_n {
                undersized.push(class);
            }
            kept.extend(records.into_iter().cloned());
        }
    }
    if kind == "v_scale" && !undersized.is_empty() {
        s.warnings.push(format!(
            "{} classes smaller than the target were kept whole: {}",
            undersized.len(),
            list_classes(&undersized)
        ));
    }
    finish(kept, m.declared_label_set().cloned(), s)
}

/// Vertical scaling: at most `per_class_target` samples per class, label set unchanged.
pub fn v_scale(m: &Manifest, per_class_target: u64, seed: u64) -> Result<TransformOutput> {
    if per_class_target == 0 {
        return Err(invalid("v_scale", "per_class_target must be at least 1"));
    }
    cap_classes(m, per_class_target, seed, "v_scale")
}

/// Clips every class above `cap` down to `cap`; smaller classes are untouched.
pub fn truncate_head(m: &Manifest, cap: u64, seed: u64) -> Result<TransformOutput> {
    if cap == 0 {
        return Err(invalid("truncate_head", "cap must be at least 1"));
    }
    cap_classes(m, cap, seed, "truncate_head")
}

/// Horizontal scaling: adds the `num_extra_classes` largest donor classes that
/// do not overlap the base label set, each capped at `per_class_cap` samples.
pub fn h_scale(
    base: &Manifest,
    donor: &Manifest,
    num_extra_classes: u64,
    per_class_cap: u64,
    seed: u64,
    synonyms: &SynonymMap,
) -> Result<TransformOutput> {
    if num_extra_classes == 0 {
        return Err(invalid("h_scale", "num_extra_classes must be at least 1"));
    }
    if per_class_cap == 0 {
        return Err(invalid("h_scale", "per_class_cap must be at least 1"));
    }
    let mut s = summary("h_scale", seed, base.len());
    if donor.is_empty() {
        s.warnings.push("donor manifest is empty; base returned unchanged".into());
        return finish(base.records().to_vec(), base.declared_label_set().cloned(), s);
    }
    if base.is_empty() {
        s.warnings.push("base manifest is empty".into());
    }

    let base_classes: HashSet<&str> = base
        .declared_label_set()
        .into_iter()
        .flatten()
        .map(String::as_str)
        .chain(base.records().iter().flat_map(|r| r.labels().iter().map(String::as_str)))
        .map(|c| synonyms.canonical(c))
        .collect();

    let mut eligible: Vec<(&str, Vec<&SampleRecord>)> = donor
        .by_primary_label()
        .into_iter()
        .filter(|(class, records)| {
            !records.is_empty() && !base_classes.contains(synonyms.canonical(class))
        })
        .collect();
    if (eligible.len() as u64) < num_extra_classes {
        return Err(TransformError::InsufficientDonorClasses {
            needed: num_extra_classes,
            available: eligible.len() as u64,
        });
    }
    // largest first; by_primary_label is already in class order, so the stable sort breaks ties by id
    eligible.sort_by_key(|(_, records)| std::cmp::Reverse(records.len()));
    eligible.truncate(num_extra_classes as usize);

    let cap_n = usize::try_from(per_class_cap).unwrap_or(usize::MAX);
    let mut records: Vec<SampleRecord> = base.records().to_vec();
    let mut declared = base.declared_label_set().cloned();
    for (class, candidates) in &eligible {
        let chosen = select_by_rank(candidates, class, cap_n, seed);
        s.classes_touched.push(class.to_string());
        s.samples_added += chosen.len() as u64;
        if let Some(declared) = declared.as_mut() {
            for r in &chosen {
                declared.extend(r.labels().iter().cloned());
            }
        }
        records.extend(chosen.into_iter().cloned());
    }
    s.classes_touched.sort();
    finish(records, declared, s)
}

/// Raises every class with fewer than `k` samples towards `k` using unused
/// donor samples of the same class. Classes at or above `k` are untouched.
pub fn rebalance_tail(m: &Manifest, k: u64, donor: &Manifest, seed: u64) -> Result<TransformOutput> {
    if k == 0 {
        return Err(invalid("rebalance_tail", "k must be at least 1"));
    }
    let mut s = summary("rebalance_tail", seed, m.len());
    if m.is_empty() && m.declared_label_set().is_none() {
        s.warnings.push("input manifest is empty".into());
        return finish(Vec::new(), None, s);
    }
    let used: HashSet<&str> = m.records().iter().map(SampleRecord::id).collect();
    let groups = m.by_primary_label();
    let donor_groups = donor.by_primary_label();

    let mut records: Vec<SampleRecord> = m.records().to_vec();
    let mut unfilled = Vec::new();
    let mut partial = Vec::new();
    for class in m.label_set() {
        let have = groups.get(class.as_str()).map_or(0, Vec::len) as u64;
        if have >= k {
            continue;
        }
        let need = (k - have) as usize;
        let candidates: Vec<&SampleRecord> = donor_groups
            .get(class.as_str())
            .into_iter()
            .flatten()
            .copied()
            .filter(|r| !used.contains(r.id()))
            .collect();
        let chosen = select_by_rank(&candidates, &class, need, seed);
        if chosen.is_empty() {
            unfilled.push(class);
            continue;
        }
        if chosen.len() < need {
            partial.push(format!("{class} ({}/{k})", have + chosen.len() as u64));
        }
        s.samples_added += chosen.len() as u64;
        s.classes_touched.push(class);
        records.extend(chosen.into_iter().cloned());
    }
    if !unfilled.is_empty() {
        let names: Vec<&str> = unfilled.iter().map(String::as_str).collect();
        s.warnings.push(format!(
            "{} classes below {k} have no unused donor samples: {}",
            unfilled.len(),
            list_classes(&names)
        ));
    }
    if !partial.is_empty() {
        let names: Vec<&str> = partial.iter().map(String::as_str).collect();
        s.warnings.push(format!(
            "{} classes could only be partly filled: {}",
            partial.len(),
            list_classes(&names)
        ));
    }
    finish(records, m.declared_label_set().cloned(), s)
}

/// Union of several manifests. A record whose id was already taken by an
/// earlier source is dropped when its labels agree (the earlier record wins)
/// and is an error otherwise.
pub fn blend(sources: &[&Manifest], seed: u64) -> Result<TransformOutput> {
    if sources.is_empty() {
        return Err(invalid("blend", "at least one source is required"));
    }
    let total: usize = sources.iter().map(|m| m.len()).sum();
    let mut s = summary("blend", seed, total);
    if total == 0 {
        s.warnings.push("all sources are empty".into());
    }

    let mut taken: BTreeMap<&str, &SampleRecord> = BTreeMap::new();
    for source in sources {
        for record in source.records() {
            match taken.get(record.id()) {
                None => {
                    taken.insert(record.id(), record);
                }
                Some(first) if first.labels() == record.labels() => s.samples_dropped += 1,
                Some(_) => {
                    return Err(ManifestError::ConflictingDuplicate {
                        id: record.id().to_string(),
                        line: None,
                    }
                    .into())
                }
            }
        }
    }

    let declared = if sources.iter().any(|m| m.declared_label_set().is_some()) {
        let mut set = BTreeSet::new();
        for m in sources {
            match m.declared_label_set() {
                Some(d) => set.extend(d.iter().cloned()),
                None => set.extend(m.class_names()),
            }
        }
        Some(set)
    } else {
        None
    };
    finish(taken.into_values().cloned().collect(), declared, s)
}

/// A transform as described by a JSON plan file:
/// `{"kind": "v_scale", "params": {...}, "seed": 7}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformSpec {
    pub op: TransformOp,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformOp {
    VScale(VScaleParams),
    HScale(HScaleParams),
    TruncateHead(TruncateHeadParams),
    RebalanceTail(RebalanceTailParams),
    Blend(BlendParams),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VScaleParams {
    pub per_class_target: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HScaleParams {
    pub donor: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor_format: Option<ManifestFormat>,
    pub num_extra_classes: u64,
    pub per_class_cap: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonyms: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncateHeadParams {
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RebalanceTailParams {
    pub donor: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor_format: Option<ManifestFormat>,
    pub k: u64,
}

/// Extra sources blended after the main input, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendParams {
    pub sources: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<ManifestFormat>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    kind: String,
    #[serde(default)]
    params: serde_json::Value,
    seed: u64,
}

impl TransformOp {
    pub fn kind(&self) -> &'static str {
        match self {
            TransformOp::VScale(_) => "v_scale",
            TransformOp::HScale(_) => "h_scale",
            TransformOp::TruncateHead(_) => "truncate_head",
            TransformOp::RebalanceTail(_) => "rebalance_tail",
            TransformOp::Blend(_) => "blend",
        }
    }
}

impl TransformSpec {
    /// Parses and validates a plan. Nothing is read besides the plan text.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanDoc =
            serde_json::from_str(text).map_err(|e| TransformError::Plan(e.to_string()))?;
        let params = if doc.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            doc.params
        };
        fn p<T: serde::de::DeserializeOwned>(kind: &str, v: serde_json::Value) -> Result<T> {
            serde_json::from_value(v).map_err(|e| TransformError::Plan(format!("{kind}: {e}")))
        }
        let op = match doc.kind.as_str() {
            "v_scale" => TransformOp::VScale(p(&doc.kind, params)?),
            "h_scale" => TransformOp::HScale(p(&doc.kind, params)?),
            "truncate_head" => TransformOp::TruncateHead(p(&doc.kind, params)?),
            "rebalance_tail" => TransformOp::RebalanceTail(p(&doc.kind, params)?),
            "blend" => TransformOp::Blend(p(&doc.kind, params)?),
            other => return Err(TransformError::Plan(format!("unknown transform kind `{other}`"))),
        };
        let spec = TransformSpec { op, seed: doc.seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let params = match &self.op {
            TransformOp::VScale(p) => serde_json::to_value(p),
            TransformOp::HScale(p) => serde_json::to_value(p),
            TransformOp::TruncateHead(p) => serde_json::to_value(p),
            TransformOp::RebalanceTail(p) => serde_json::to_value(p),
            TransformOp::Blend(p) => serde_json::to_value(p),
        }
        .expect("params serialize");
        serde_json::to_string(&PlanDoc {
            kind: self.op.kind().to_string(),
            params,
            seed: self.seed,
        })
        .expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match &self.op {
            TransformOp::VScale(p) if p.per_class_target == 0 => {
                Err(invalid("v_scale", "per_class_target must be at least 1"))
            }
            TransformOp::HScale(p) if p.num_extra_classes == 0 => {
                Err(invalid("h_scale", "num_extra_classes must be at least 1"))
            }
            TransformOp::HScale(p) if p.per_class_cap == 0 => {
                Err(invalid("h_scale", "per_class_cap must be at least 1"))
            }
            TransformOp::TruncateHead(p) if p.cap == 0 => {
                Err(invalid("truncate_head", "cap must be at least 1"))
            }
            TransformOp::RebalanceTail(p) if p.k == 0 => {
                Err(invalid("rebalance_tail", "k must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::{build_histogram, ClassHistogram, LabelMode};
    use crate::manifest::manifest_to_bytes;

    fn manifest(counts: &[(&str, usize)], prefix: &str, source: Option<&str>) -> Manifest {
        let records = counts.iter().flat_map(|&(class, n)| {
            (0..n).map(move |i| {
                SampleRecord::new(
                    format!("{prefix}{class}-{i}"),
                    vec![class.to_string()],
                    source.map(str::to_string),
                )
                .unwrap()
            })
        });
        Manifest::from_records(records, None).unwrap()
    }

    fn hist(m: &Manifest) -> ClassHistogram {
        build_histogram(m, LabelMode::Primary)
    }

    fn h(pairs: &[(&str, u64)]) -> ClassHistogram {
        ClassHistogram::from_counts(pairs.iter().map(|&(c, n)| (c, n))).unwrap()
    }

    #[test]
    fn v_scale_uniform() {
        let counts: Vec<(String, usize)> = (0..100).map(|i| (format!("c{i:03}"), 1250)).collect();
        let refs: Vec<(&str, usize)> = counts.iter().map(|(c, n)| (c.as_str(), *n)).collect();
        let out = v_scale(&manifest(&refs, "", None), 500, 1).unwrap();
        let hh = hist(&out.manifest);
        assert_eq!(hh.label_set_size(), 100);
        assert_eq!(hh.total_samples(), 50_000);
        assert!(hh.counts().values().all(|&n| n == 500));
        assert_eq!(out.summary.samples_dropped, 75_000);
    }

    #[test]
    fn v_scale_small_class_kept() {
        let m = manifest(&[("a", 10), ("b", 3)], "", None);
        let out = v_scale(&m, 5, 9).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("a", 5), ("b", 3)]));
        assert_eq!(out.summary.warnings.len(), 1);
        assert_eq!(out.summary.classes_touched, vec!["a".to_string()]);
    }

    #[test]
    fn v_scale_identity_when_target_large() {
        let m = manifest(&[("a", 10), ("b", 3)], "", None);
        let out = v_scale(&m, 10, 9).unwrap();
        assert_eq!(out.manifest, m.clone().canonicalized());
        assert!(v_scale(&m, 0, 1).is_err());
    }

    #[test]
    fn truncate_only_head() {
        let m = manifest(&[("a", 1000), ("b", 200), ("c", 50)], "", None);
        let out = truncate_head(&m, 300, 4).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("a", 300), ("b", 200), ("c", 50)]));
        let again = truncate_head(&m, 1000, 4).unwrap();
        assert_eq!(again.manifest, m.canonicalized());
    }

    #[test]
    fn selection_depends_on_seed() {
        let m = manifest(&[("a", 100)], "", None);
        let x = manifest_to_bytes(&v_scale(&m, 10, 1).unwrap().manifest);
        let y = manifest_to_bytes(&v_scale(&m, 10, 2).unwrap().manifest);
        assert_ne!(x, y);
        assert_eq!(x, manifest_to_bytes(&v_scale(&m, 10, 1).unwrap().manifest));
    }

    #[test]
    fn h_scale_adds_largest_disjoint_classes() {
        let base = manifest(&[("dog", 5), ("cat", 5)], "in-", Some("in"));
        let donor = manifest(
            &[("dog", 50), ("owl", 9), ("bee", 20), ("ant", 9), ("elk", 1)],
            "oi-",
            Some("oi"),
        );
        let out = h_scale(&base, &donor, 2, 5, 3, &SynonymMap::default()).unwrap();
        let hh = hist(&out.manifest);
        // bee (20), then ant and owl tie at 9 → ant by id order
        assert_eq!(hh, h(&[("dog", 5), ("cat", 5), ("bee", 5), ("ant", 5)]));
        assert_eq!(out.summary.classes_touched, vec!["ant", "bee"]);
        assert!(out
            .manifest
            .records()
            .iter()
            .filter(|r| r.primary_label() == "bee")
            .all(|r| r.source() == Some("oi")));
    }

    #[test]
    fn h_scale_cap_inactive_and_shortfall() {
        let base = manifest(&[("dog", 2)], "in-", None);
        let donor = manifest(&[("dog", 50), ("owl", 3)], "oi-", None);
        let out = h_scale(&base, &donor, 1, 100, 0, &SynonymMap::default()).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("dog", 2), ("owl", 3)]));
        match h_scale(&base, &donor, 2, 5, 0, &SynonymMap::default()) {
            Err(TransformError::InsufficientDonorClasses { needed: 2, available: 1 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(h_scale(&base, &donor, 0, 5, 0, &SynonymMap::default()).is_err());
    }

    #[test]
    fn h_scale_synonyms_exclude_overlap() {
        let base = manifest(&[("dog", 2)], "in-", None);
        let donor = manifest(&[("Dog", 50), ("owl", 3)], "oi-", None);
        let syn = SynonymMap::new([("Dog", "dog")]);
        let out = h_scale(&base, &donor, 1, 100, 0, &syn).unwrap();
        assert_eq!(out.summary.classes_touched, vec!["owl"]);
        let plain = h_scale(&base, &donor, 1, 100, 0, &SynonymMap::default()).unwrap();
        assert_eq!(plain.summary.classes_touched, vec!["Dog"]);
    }

    #[test]
    fn rebalance_raises_to_threshold() {
        let m = manifest(&[("a", 1000), ("b", 200), ("c", 50)], "m-", None);
        let donor = manifest(&[("c", 500), ("a", 10)], "d-", None);
        let out = rebalance_tail(&m, 100, &donor, 5).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("a", 1000), ("b", 200), ("c", 100)]));
        assert_eq!(out.summary.samples_added, 50);
        assert!(out.summary.warnings.is_empty());
    }

    #[test]
    fn rebalance_skips_used_ids_and_warns() {
        let m = manifest(&[("a", 2), ("b", 1)], "", None);
        // donor re-uses the ids a-0 and a-1, plus one fresh a sample
        let donor = manifest(&[("a", 3)], "", None);
        let out = rebalance_tail(&m, 5, &donor, 5).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("a", 3), ("b", 1)]));
        assert_eq!(out.summary.warnings.len(), 2, "{:?}", out.summary.warnings);
    }

    #[test]
    fn blend_dedups_and_conflicts() {
        let m = manifest(&[("a", 3)], "", None);
        let out = blend(&[&m, &Manifest::empty()], 0).unwrap();
        assert_eq!(out.manifest, m.clone().canonicalized());

        let overlap = manifest(&[("a", 1), ("b", 2)], "", Some("other"));
        let out = blend(&[&m, &overlap], 0).unwrap();
        assert_eq!(hist(&out.manifest), h(&[("a", 3), ("b", 2)]));
        assert_eq!(out.summary.samples_dropped, 1);
        // first source wins
        assert_eq!(out.manifest.records()[0].source(), None);

        let clash = Manifest::from_records(
            [SampleRecord::new("a-0", vec!["z".into()], None).unwrap()],
            None,
        )
        .unwrap();
        assert!(blend(&[&m, &clash], 0).is_err());
        assert!(blend(&[], 0).is_err());
    }

    #[test]
    fn empty_inputs_give_empty_outputs() {
        let e = Manifest::empty();
        assert!(v_scale(&e, 3, 0).unwrap().manifest.is_empty());
        assert!(truncate_head(&e, 3, 0).unwrap().manifest.is_empty());
        assert!(rebalance_tail(&e, 3, &e, 0).unwrap().manifest.is_empty());
        let out = h_scale(&e, &e, 1, 1, 0, &SynonymMap::default()).unwrap();
        assert!(out.manifest.is_empty());
        assert!(!out.summary.warnings.is_empty());
    }

    #[test]
    fn plan_round_trip() {
        let text = r#"{"kind":"h_scale","params":{"donor":"oi.jsonl","num_extra_classes":900,"per_class_cap":500},"seed":7}"#;
        let spec = TransformSpec::from_json(text).unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.op.kind(), "h_scale");
        assert_eq!(TransformSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn plan_validation() {
        for bad in [
            r#"{"kind":"v_scale","params":{"per_class_target":0},"seed":1}"#,
            r#"{"kind":"v_scale","params":{"target":5},"seed":1}"#,
            r#"{"kind":"nope","params":{},"seed":1}"#,
            r#"{"kind":"truncate_head","params":{"cap":3}}"#,
        ] {
            assert!(TransformSpec::from_json(bad).is_err(), "{bad}");
        }
    }
}

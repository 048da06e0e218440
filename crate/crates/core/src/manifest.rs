//! Dataset manifests: parsing, streaming and canonical emission.
//!
//! Three input formats are supported:
//!
//! - `jsonl`: one `{"id": .., "labels": [..], "source": ..}` object per line.
//! - `csv`: header `id,label[,source]`, comma separated, no quoting. Consecutive
//!   rows sharing an id merge into one multi-label record.
//! - `dirlist`: one relative path per line; the class is the parent directory
//!   name and the id is the full path.
//!
//! Output is always canonical JSONL (see [`write_manifest`]).

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot open {}: {source}", path.display())]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("read error at line {line} (byte offset {offset}): {source}")]
    Read {
        line: u64,
        offset: u64,
        #[source]
        source: io::Error,
    },
    #[error("line {line} (byte offset {offset}): {message}")]
    Malformed {
        line: u64,
        offset: u64,
        message: String,
    },
    #[error("conflicting records share id `{id}`{}", line_suffix(*.line))]
    ConflictingDuplicate { id: String, line: Option<u64> },
    #[error("label `{label}` of record `{id}` is not in the declared label set")]
    UndeclaredLabel { id: String, label: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("unknown manifest format `{0}` (expected jsonl, csv or dirlist)")]
    UnknownFormat(String),
}

fn line_suffix(line: Option<u64>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ManifestError {
    fn malformed(pos: Position, message: impl Into<String>) -> Self {
        ManifestError::Malformed {
            line: pos.line,
            offset: pos.offset,
            message: message.into(),
        }
    }
}

pub type Result<T, E = ManifestError> = std::result::Result<T, E>;

/// Location of a record's first line: 1-based line number and byte offset of
/// the line start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Position {
    pub line: u64,
    pub offset: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestFormat {
    Jsonl,
    Csv,
    Dirlist,
}

impl ManifestFormat {
    /// Guess the format from a file extension. `.jsonl`/`.json` → jsonl,
    /// `.csv` → csv, `.txt`/`.lst` → dirlist.
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Some(ManifestFormat::Jsonl),
            "csv" => Some(ManifestFormat::Csv),
            "txt" | "lst" => Some(ManifestFormat::Dirlist),
            _ => None,
        }
    }
}

impl FromStr for ManifestFormat {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(ManifestFormat::Jsonl),
            "csv" => Ok(ManifestFormat::Csv),
            "dirlist" => Ok(ManifestFormat::Dirlist),
            other => Err(ManifestError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for ManifestFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifestFormat::Jsonl => "jsonl",
            ManifestFormat::Csv => "csv",
            ManifestFormat::Dirlist => "dirlist",
        })
    }
}

/// One labeled sample reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SampleRecord {
    id: String,
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

impl SampleRecord {
    /// Validates and builds a record. An empty source string is treated as absent.
    pub fn new(
        id: impl Into<String>,
        labels: Vec<String>,
        source: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(ManifestError::InvalidRecord("empty id".into()));
        }
        if id.contains(['\n', '\r']) {
            return Err(ManifestError::InvalidRecord(format!(
                "id {id:?} contains a newline"
            )));
        }
        if labels.is_empty() {
            return Err(ManifestError::InvalidRecord(format!(
                "record `{id}` has no labels"
            )));
        }
        if labels.iter().any(String::is_empty) {
            return Err(ManifestError::InvalidRecord(format!(
                "record `{id}` has an empty label"
            )));
        }
        Ok(SampleRecord {
            id,
            labels,
            source: source.filter(|s| !s.is_empty()),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The first label; the only one that counts in primary-label mode.
    pub fn primary_label(&self) -> &str {
        &self.labels[0]
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }
}

#[derive(Deserialize)]
struct JsonRecord<'a> {
    #[serde(borrow)]
    id: Cow<'a, str>,
    #[serde(borrow)]
    labels: Vec<Cow<'a, str>>,
    #[serde(default, borrow)]
    source: Option<Cow<'a, str>>,
}

fn parse_jsonl_line(text: &str, pos: Position) -> Result<SampleRecord> {
    let raw: JsonRecord<'_> = serde_json::from_str(text)
        .map_err(|e| ManifestError::malformed(pos, format!("invalid JSON record: {e}")))?;
    SampleRecord::new(
        raw.id.into_owned(),
        raw.labels.into_iter().map(Cow::into_owned).collect(),
        raw.source.map(Cow::into_owned),
    )
    .map_err(|e| ManifestError::malformed(pos, e.to_string()))
}

fn parse_dirlist_line(text: &str, pos: Position) -> Result<SampleRecord> {
    let parts: Vec<&str> = text
        .split('/')
        .filter(|c| !c.is_empty() && *c != ".")
        .collect();
    if parts.len() < 2 {
        return Err(ManifestError::malformed(
            pos,
            format!("path `{text}` has no class directory"),
        ));
    }
    let class = parts[parts.len() - 2];
    SampleRecord::new(text, vec![class.to_string()], None)
        .map_err(|e| ManifestError::malformed(pos, e.to_string()))
}

#[derive(Clone, Copy, Debug)]
struct CsvLayout {
    has_source: bool,
}

fn parse_csv_header(text: &str, pos: Position) -> Result<CsvLayout> {
    let fields: Vec<&str> = text.split(',').collect();
    match fields.as_slice() {
        ["id", "label"] => Ok(CsvLayout { has_source: false }),
        ["id", "label", "source"] => Ok(CsvLayout { has_source: true }),
        _ => Err(ManifestError::malformed(
            pos,
            format!("expected CSV header `id,label,source` or `id,label`, found `{text}`"),
        )),
    }
}

fn parse_csv_row(text: &str, layout: CsvLayout, pos: Position) -> Result<SampleRecord> {
    let fields: Vec<&str> = text.split(',').collect();
    let expected = if layout.has_source { 3 } else { 2 };
    if fields.len() != expected {
        return Err(ManifestError::malformed(
            pos,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    let source = if layout.has_source {
        Some(fields[2].to_string())
    } else {
        None
    };
    SampleRecord::new(fields[0], vec![fields[1].to_string()], source)
        .map_err(|e| ManifestError::malformed(pos, e.to_string()))
}

/// Streaming record iterator over one manifest.
///
/// Yields records in file order together with their [`Position`]. Memory use is
/// one line buffer plus, for CSV, the record currently being merged.
pub struct RecordReader<R> {
    inner: R,
    format: ManifestFormat,
    buf: Vec<u8>,
    line: u64,
    offset: u64,
    csv: Option<CsvLayout>,
    pending: Option<(Position, SampleRecord)>,
    done: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R, format: ManifestFormat) -> Self {
        RecordReader {
            inner,
            format,
            buf: Vec::with_capacity(256),
            line: 0,
            offset: 0,
            csv: None,
            pending: None,
            done: false,
        }
    }

    /// Reads the next non-blank line into `buf`, returning its position and
    /// the length of its content without the line terminator.
    fn next_line(&mut self) -> Result<Option<(Position, usize)>> {
        loop {
            self.buf.clear();
            let pos = Position {
                line: self.line + 1,
                offset: self.offset,
            };
            let n = self
                .inner
                .read_until(b'\n', &mut self.buf)
                .map_err(|source| ManifestError::Read {
                    line: pos.line,
                    offset: pos.offset,
                    source,
                })?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            self.offset += n as u64;

            let mut end = self.buf.len();
            if self.buf[..end].ends_with(b"\n") {
                end -= 1;
            }
            if self.buf[..end].ends_with(b"\r") {
                end -= 1;
            }
            if pos.offset == 0 && self.buf[..end].starts_with(b"\xEF\xBB\xBF") {
                self.buf.drain(..3);
                end -= 3;
            }
            if self.buf[..end].iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            if std::str::from_utf8(&self.buf[..end]).is_err() {
                return Err(ManifestError::malformed(pos, "line is not valid UTF-8"));
            }
            return Ok(Some((pos, end)));
        }
    }

    fn line_text(&self, len: usize) -> &str {
        // validated in next_line
        std::str::from_utf8(&self.buf[..len]).expect("validated utf-8")
    }

    fn next_raw(&mut self) -> Result<Option<(Position, SampleRecord)>> {
        loop {
            let Some((pos, len)) = self.next_line()? else {
                return Ok(None);
            };
            let text = self.line_text(len);
            let record = match self.format {
                ManifestFormat::Jsonl => parse_jsonl_line(text, pos)?,
                ManifestFormat::Dirlist => parse_dirlist_line(text, pos)?,
                ManifestFormat::Csv => match self.csv {
                    None => {
                        self.csv = Some(parse_csv_header(text, pos)?);
                        continue;
                    }
                    Some(layout) => parse_csv_row(text, layout, pos)?,
                },
            };
            return Ok(Some((pos, record)));
        }
    }

    fn next_merged(&mut self) -> Result<Option<(Position, SampleRecord)>> {
        if self.format != ManifestFormat::Csv {
            return self.next_raw();
        }
        loop {
            match self.next_raw()? {
                None => return Ok(self.pending.take()),
                Some((pos, row)) => match &mut self.pending {
                    Some((_, open)) if open.id == row.id => {
                        if open.source != row.source {
                            return Err(ManifestError::malformed(
                                pos,
                                format!("rows for id `{}` disagree on source", row.id),
                            ));
                        }
                        let label = row.labels.into_iter().next().expect("one label per row");
                        if !open.labels.contains(&label) {
                            open.labels.push(label);
                        }
                    }
                    _ => {
                        if let Some(prev) = self.pending.replace((pos, row)) {
                            return Ok(Some(prev));
                        }
                    }
                },
            }
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<(Position, SampleRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_merged() {
            Ok(Some(item)) => Some(Ok(item)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens a manifest file for streaming.
pub fn open_records(path: &Path, format: ManifestFormat) -> Result<RecordReader<BufReader<File>>> {
    let file = File::open(path).map_err(|source| ManifestError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RecordReader::new(
        BufReader::with_capacity(1 << 20, file),
        format,
    ))
}

/// An in-memory manifest with unique record ids.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    records: Vec<SampleRecord>,
    declared_label_set: Option<BTreeSet<String>>,
    duplicates_dropped: u64,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.declared_label_set == other.declared_label_set
    }
}

impl Eq for Manifest {}

impl Manifest {
    pub fn empty() -> Self {
        Manifest::default()
    }

    /// Builds a manifest, dropping exact duplicate records and rejecting
    /// conflicting ones. When `declared` is given, every label must be in it.
    pub fn from_records<I>(records: I, declared: Option<BTreeSet<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = SampleRecord>,
    {
        let mut builder = ManifestBuilder::new(declared);
        for record in records {
            builder.push(record, None)?;
        }
        Ok(builder.finish())
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SampleRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn declared_label_set(&self) -> Option<&BTreeSet<String>> {
        self.declared_label_set.as_ref()
    }

    /// Exact duplicate records dropped while building this manifest.
    pub fn duplicates_dropped(&self) -> u64 {
        self.duplicates_dropped
    }

    /// Attaches a declared label set, checking that every record label is in it.
    pub fn with_declared_label_set(mut self, declared: BTreeSet<String>) -> Result<Self> {
        check_declared(&self.records, &declared)?;
        self.declared_label_set = Some(declared);
        Ok(self)
    }

    /// The declared label set, or the set of all labels seen in records.
    pub fn class_names(&self) -> BTreeSet<String> {
        match &self.declared_label_set {
            Some(declared) => declared.clone(),
            None => self
                .records
                .iter()
                .flat_map(|r| r.labels.iter().cloned())
                .collect(),
        }
    }

    /// Classes as transforms see them: the declared label set, or the set of
    /// primary labels seen in records.
    pub fn label_set(&self) -> BTreeSet<String> {
        match &self.declared_label_set {
            Some(declared) => declared.clone(),
            None => self
                .records
                .iter()
                .map(|r| r.primary_label().to_string())
                .collect(),
        }
    }

    /// Records grouped by primary label, in manifest order within each class.
    pub fn by_primary_label(&self) -> BTreeMap<&str, Vec<&SampleRecord>> {
        let mut groups: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.primary_label()).or_default().push(r);
        }
        groups
    }

    /// Sorts records into canonical order: by primary label, then id.
    pub fn canonicalize(&mut self) {
        self.records.sort_by(canonical_cmp);
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }
}

fn canonical_cmp(a: &SampleRecord, b: &SampleRecord) -> std::cmp::Ordering {
    (a.primary_label(), a.id()).cmp(&(b.primary_label(), b.id()))
}

fn check_declared(records: &[SampleRecord], declared: &BTreeSet<String>) -> Result<()> {
    for r in records {
        for label in &r.labels {
            if !declared.contains(label) {
                return Err(ManifestError::UndeclaredLabel {
                    id: r.id.clone(),
                    label: label.clone(),
                });
            }
        }
    }
    Ok(())
}

struct ManifestBuilder {
    records: Vec<SampleRecord>,
    index: HashMap<String, usize>,
    declared: Option<BTreeSet<String>>,
    duplicates: u64,
}

impl ManifestBuilder {
    fn new(declared: Option<BTreeSet<String>>) -> Self {
        ManifestBuilder {
            records: Vec::new(),
            index: HashMap::new(),
            declared,
            duplicates: 0,
        }
    }

    fn push(&mut self, record: SampleRecord, pos: Option<Position>) -> Result<()> {
        if let Some(declared) = &self.declared {
            if let Some(label) = record.labels.iter().find(|l| !declared.contains(*l)) {
                return Err(ManifestError::UndeclaredLabel {
                    id: record.id.clone(),
                    label: label.clone(),
                });
            }
        }
        match self.index.get(record.id()) {
            Some(&i) if self.records[i] == record => {
                self.duplicates += 1;
                Ok(())
            }
            Some(_) => Err(ManifestError::ConflictingDuplicate {
                id: record.id,
                line: pos.map(|p| p.line),
            }),
            None => {
                self.index.insert(record.id.clone(), self.records.len());
                self.records.push(record);
                Ok(())
            }
        }
    }

    fn finish(self) -> Manifest {
        Manifest {
            records: self.records,
            declared_label_set: self.declared,
            duplicates_dropped: self.duplicates,
        }
    }
}

/// Reads a whole manifest from a reader.
pub fn read_manifest<R: BufRead>(
    reader: R,
    format: ManifestFormat,
    declared: Option<BTreeSet<String>>,
) -> Result<Manifest> {
    let mut builder = ManifestBuilder::new(declared);
    for item in RecordReader::new(reader, format) {
        let (pos, record) = item?;
        builder.push(record, Some(pos))?;
    }
    Ok(builder.finish())
}

/// Parses a manifest file. An empty file gives an empty manifest.
pub fn parse_manifest(path: &Path, format: ManifestFormat) -> Result<Manifest> {
    parse_manifest_with_labels(path, format, None)
}

pub fn parse_manifest_with_labels(
    path: &Path,
    format: ManifestFormat,
    declared: Option<BTreeSet<String>>,
) -> Result<Manifest> {
    let file = File::open(path).map_err(|source| ManifestError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_manifest(BufReader::with_capacity(1 << 20, file), format, declared)
}

/// Writes canonical JSONL: one record per line, keys `id, labels, source`,
/// LF endings, records sorted by (primary label, id).
pub fn write_manifest<W: Write>(manifest: &Manifest, mut out: W) -> io::Result<()> {
    let mut sorted: Vec<&SampleRecord> = manifest.records.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));
    for record in sorted {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Canonical JSONL as bytes.
pub fn manifest_to_bytes(manifest: &Manifest) -> Vec<u8> {
    let mut buf = Vec::new();
    write_manifest(manifest, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn emit_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let wrap = |source| ManifestError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    write_manifest(manifest, BufWriter::new(file)).map_err(wrap)
}

/// Reads a label set file: one class identifier per line, blank lines ignored.
pub fn read_label_set<R: BufRead>(reader: R) -> io::Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let class = line.trim_end_matches('\r');
        if !class.trim().is_empty() {
            set.insert(class.to_string());
        }
    }
    Ok(set)
}

pub fn load_label_set(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path).map_err(|source| ManifestError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_label_set(BufReader::new(file)).map_err(|source| ManifestError::Open {
        path: path.to_path_buf(),
        source,
    })
}

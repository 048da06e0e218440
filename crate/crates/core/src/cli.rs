//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable
//! or malformed inputs, failed transforms). All randomness comes from an
//! explicit `--seed`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::evalproto::{self, ScoreMatrix, ShiftAccuracies};
use crate::histogram::LabelMode;
use crate::indicators::{audit, IndicatorConfig, IndicatorReport};
use crate::manifest::{
    emit_manifest, load_label_set, parse_manifest_with_labels, Manifest, ManifestFormat,
};
use crate::predictor::{predict_order, validate_table, CandidateEntry, RankGroup, ValidationTable};
use crate::scan::{scan_histogram, ScanInput, ScanOptions};
use crate::synth::{self, ZipfSpec};
use crate::transforms::{
    self, BlendParams, HScaleParams, RebalanceTailParams, SynonymMap, TransformOp,
    TransformSpec, TransformSummary, TruncateHeadParams, VScaleParams,
};

pub const TOOL_NAME: &str = "dqkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "DQKIT_THREADS";

const BALANCE_TABLE: &str = include_str!("../fixtures/in100_balance.json");

#[derive(Debug, Parser)]
#[command(name = "dqkit", version, about = "Dataset-quality indicators and transforms for classification manifests")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute class-balance indicators for one or more manifests (treated as shards of one dataset).
    Audit(AuditArgs),
    /// Build a dataset variant from a manifest.
    Transform(TransformArgs),
    /// Generate synthetic manifests.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Rank candidate datasets best-first from their indicator reports.
    Predict(PredictArgs),
    /// Concordance of indicators with observed accuracies on a results table.
    Validate(ValidateArgs),
    /// Restricted-label-space top-1 accuracy, or average robustness.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
    Dirlist,
}

impl From<FormatArg> for ManifestFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => ManifestFormat::Jsonl,
            FormatArg::Csv => ManifestFormat::Csv,
            FormatArg::Dirlist => ManifestFormat::Dirlist,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Manifest files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Input format; guessed from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Declared label set, one class per line (zero-count classes included).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Count every label of multi-label records instead of only the first.
    #[arg(long)]
    all_labels: bool,
    /// Head size for left-skewedness, in percent of classes.
    #[arg(long)]
    skew_k: Option<f64>,
    /// Long-tail threshold; repeat for several (default 500 and 100).
    #[arg(long = "tail")]
    tail: Vec<u64>,
    /// TOML file with default `skew_k_percent`, `tail_thresholds`, `threads`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report_format: ReportFormat,
    /// Write the report here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Include wall-clock time and peak memory in the JSON report.
    #[arg(long)]
    stats: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    VScale,
    HScale,
    TruncateHead,
    RebalanceTail,
    Blend,
}

#[derive(Debug, Args)]
struct TransformArgs {
    input: PathBuf,
    /// Output manifest (canonical JSONL).
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// JSON plan `{"kind": .., "params": {..}, "seed": ..}`.
    #[arg(long, conflicts_with_all = ["kind", "seed"])]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "plan")]
    kind: Option<KindArg>,
    #[arg(long, required_unless_present = "plan")]
    seed: Option<u64>,
    #[arg(long)]
    per_class_target: Option<u64>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    donor: Option<PathBuf>,
    #[arg(long, value_enum)]
    donor_format: Option<FormatArg>,
    #[arg(long)]
    num_extra_classes: Option<u64>,
    #[arg(long)]
    per_class_cap: Option<u64>,
    /// JSON object mapping donor class aliases to canonical class names.
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// Additional blend source; repeat for several.
    #[arg(long = "source")]
    sources: Vec<PathBuf>,
    /// Summary path (default: `<output>.summary.json`).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Zipfian class sizes: class at rank r gets a share proportional to r^-s.
    Zipf {
        #[arg(long)]
        classes: u64,
        #[arg(long)]
        size: u64,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        #[arg(long)]
        seed: u64,
        /// Emit the histogram JSON instead of a manifest.
        #[arg(long)]
        histogram: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Every class gets the same number of samples.
    Balanced {
        #[arg(long)]
        classes: u64,
        #[arg(long)]
        per_class: u64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Audit reports, indicator reports or candidate entries (JSON).
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Results table (JSON). Defaults to the bundled IN100 class-balance table.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
struct EvalArgs {
    #[command(subcommand)]
    command: Option<EvalCommand>,
    /// Score CSV: header of class ids, one row of scores per sample.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Truth labels, one class id per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Evaluation label space, one class id per line (default: all columns).
    #[arg(long)]
    allow: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Mean accuracy over distribution shifts.
    Robustness {
        /// JSON object `{"shift": accuracy}` or array of accuracies.
        #[arg(long)]
        accuracies: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

type CliResult<T> = Result<T, CliError>;

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn with_path<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Optional TOML defaults; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    skew_k_percent: Option<f64>,
    tail_thresholds: Option<Vec<u64>>,
    threads: Option<usize>,
}

fn load_config(path: &Path) -> CliResult<ConfigFile> {
    let text = fs::read_to_string(path).map_err(with_path(path))?;
    toml::from_str(&text).map_err(with_path(path))
}

#[derive(Debug, Serialize)]
struct InputRef {
    format: ManifestFormat,
    path: String,
}

#[derive(Debug, Serialize)]
struct RunStats {
    peak_rss_bytes: Option<u64>,
    wall_clock_seconds: f64,
}

/// The JSON document written by `audit`. Keys are in sorted order.
#[derive(Debug, Serialize)]
struct AuditReportDocument {
    duplicates_dropped: u64,
    fingerprint_collisions: u64,
    indicators: IndicatorReport,
    inputs: Vec<InputRef>,
    label_mode: LabelMode,
    records_read: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<RunStats>,
    tool: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    transforms: Vec<TransformSummary>,
    version: &'static str,
    warnings: Vec<String>,
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn resolve_format(path: &Path, explicit: Option<FormatArg>) -> CliResult<ManifestFormat> {
    match explicit {
        Some(f) => Ok(f.into()),
        None => ManifestFormat::from_extension(path).ok_or_else(|| {
            CliError::Usage(format!(
                "cannot infer the format of {}; pass --format",
                path.display()
            ))
        }),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(with_path(p)),
        None => stdout.write_all(bytes).map_err(data),
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Fixed-width table: source, size, left-skew and long-tail columns.
fn text_report(name: &str, report: &IndicatorReport) -> String {
    let tails: Vec<String> = report
        .config
        .tail_thresholds
        .iter()
        .map(|t| format!("@ {t}"))
        .collect();
    let tail_header = format!("Long-tail {}", tails.join(" / "));
    let tail_values: Vec<String> = report
        .config
        .tail_thresholds
        .iter()
        .map(|t| format!("{:.2}%", report.long_tail_at(*t).unwrap_or(f64::NAN)))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>8} {:>14} {:>10}  {}",
        "Data Source", "Classes", "Dataset Size", "Left-skew", tail_header
    );
    let _ = writeln!(
        out,
        "{:<32} {:>8} {:>14} {:>9.2}%  {}",
        name,
        report.label_set_size,
        group_thousands(report.total_samples),
        report.left_skew,
        tail_values.join(" / ")
    );
    out
}

fn indicator_config(args: &AuditArgs, file: &ConfigFile) -> CliResult<IndicatorConfig> {
    let defaults = IndicatorConfig::default();
    let cfg = IndicatorConfig {
        skew_k_percent: args
            .skew_k
            .or(file.skew_k_percent)
            .unwrap_or(defaults.skew_k_percent),
        tail_thresholds: if !args.tail.is_empty() {
            args.tail.clone()
        } else {
            file.tail_thresholds.clone().unwrap_or(defaults.tail_thresholds)
        },
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run_audit(args: &AuditArgs, threads: Option<usize>, stdout: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    let file_cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let cfg = indicator_config(args, &file_cfg)?;
    let inputs = args
        .inputs
        .iter()
        .map(|p| {
            Ok(ScanInput {
                path: p.clone(),
                format: resolve_format(p, args.format)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let declared = args
        .labels
        .as_deref()
        .map(load_label_set)
        .transpose()
        .map_err(data)?;
    let mode = if args.all_labels {
        LabelMode::All
    } else {
        LabelMode::Primary
    };
    let opts = ScanOptions {
        mode,
        declared,
        threads: threads.or(file_cfg.threads).unwrap_or(0),
    };
    let scanned = scan_histogram(&inputs, &opts).map_err(data)?;
    let indicators = audit(&scanned.histogram, &cfg).map_err(data)?;

    let mut warnings = Vec::new();
    if scanned.duplicates_dropped > 0 {
        warnings.push(format!(
            "{} exact duplicate records dropped",
            scanned.duplicates_dropped
        ));
    }
    if scanned.fingerprint_collisions > 0 {
        warnings.push(format!(
            "{} records dropped on id fingerprint collision",
            scanned.fingerprint_collisions
        ));
    }
    let name = args
        .inputs
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join("+");

    let bytes = match args.report_format {
        ReportFormat::Text => text_report(&name, &indicators).into_bytes(),
        ReportFormat::Json => {
            let doc = AuditReportDocument {
                duplicates_dropped: scanned.duplicates_dropped,
                fingerprint_collisions: scanned.fingerprint_collisions,
                indicators,
                inputs: inputs
                    .iter()
                    .map(|i| InputRef {
                        format: i.format,
                        path: i.path.display().to_string(),
                    })
                    .collect(),
                label_mode: mode,
                records_read: scanned.records_read,
                stats: args.stats.then(|| RunStats {
                    peak_rss_bytes: peak_rss_bytes(),
                    wall_clock_seconds: started.elapsed().as_secs_f64(),
                }),
                tool: TOOL_NAME,
                transforms: Vec::new(),
                version: VERSION,
                warnings,
            };
            to_json_bytes(&doc)
        }
    };
    write_output(args.output.as_deref(), &bytes, stdout)
}

fn require<T>(value: Option<T>, flag: &str, kind: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("--kind {kind} requires --{flag}")))
}

fn spec_from_flags(args: &TransformArgs) -> CliResult<TransformSpec> {
    let kind = args.kind.expect("clap enforces --kind without --plan");
    let seed = args.seed.expect("clap enforces --seed without --plan");
    let donor_format = args.donor_format.map(ManifestFormat::from);
    let op = match kind {
        KindArg::VScale => TransformOp::VScale(VScaleParams {
            per_class_target: require(args.per_class_target, "per-class-target", "v-scale")?,
        }),
        KindArg::TruncateHead => TransformOp::TruncateHead(TruncateHeadParams {
            cap: require(args.cap, "cap", "truncate-head")?,
        }),
        KindArg::HScale => TransformOp::HScale(HScaleParams {
            donor: require(args.donor.clone(), "donor", "h-scale")?,
            donor_format,
            num_extra_classes: require(args.num_extra_classes, "num-extra-classes", "h-scale")?,
            per_class_cap: require(args.per_class_cap, "per-class-cap", "h-scale")?,
            synonyms: args.synonyms.clone(),
        }),
        KindArg::RebalanceTail => TransformOp::RebalanceTail(RebalanceTailParams {
            donor: require(args.donor.clone(), "donor", "rebalance-tail")?,
            donor_format,
            k: require(args.k, "k", "rebalance-tail")?,
        }),
        KindArg::Blend => TransformOp::Blend(BlendParams {
            sources: args.sources.clone(),
            format: None,
        }),
    };
    let spec = TransformSpec { op, seed };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn load_manifest(
    path: &Path,
    format: Option<ManifestFormat>,
    declared: Option<BTreeSet<String>>,
) -> CliResult<Manifest> {
    let format = match format {
        Some(f) => f,
        None => resolve_format(path, None)?,
    };
    parse_manifest_with_labels(path, format, declared).map_err(with_path(path))
}

fn run_transform(args: &TransformArgs) -> CliResult<()> {
    let spec = match &args.plan {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(with_path(p))?;
            TransformSpec::from_json(&text).map_err(with_path(p))?
        }
        None => spec_from_flags(args)?,
    };
    let declared = args
        .labels
        .as_deref()
        .map(load_label_set)
        .transpose()
        .map_err(data)?;
    let input_format = resolve_format(&args.input, args.format)?;
    let input = load_manifest(&args.input, Some(input_format), declared)?;

    let output = match &spec.op {
        TransformOp::VScale(p) => transforms::v_scale(&input, p.per_class_target, spec.seed),
        TransformOp::TruncateHead(p) => transforms::truncate_head(&input, p.cap, spec.seed),
        TransformOp::HScale(p) => {
            let donor = load_manifest(&p.donor, p.donor_format, None)?;
            let synonyms = match &p.synonyms {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(with_path(path))?;
                    serde_json::from_str::<SynonymMap>(&text).map_err(with_path(path))?
                }
                None => SynonymMap::default(),
            };
            transforms::h_scale(
                &input,
                &donor,
                p.num_extra_classes,
                p.per_class_cap,
                spec.seed,
                &synonyms,
            )
        }
        TransformOp::RebalanceTail(p) => {
            let donor = load_manifest(&p.donor, p.donor_format, None)?;
            transforms::rebalance_tail(&input, p.k, &donor, spec.seed)
        }
        TransformOp::Blend(p) => {
            let others = p
                .sources
                .iter()
                .map(|s| load_manifest(s, p.format, None))
                .collect::<CliResult<Vec<_>>>()?;
            let mut all: Vec<&Manifest> = vec![&input];
            all.extend(others.iter());
            transforms::blend(&all, spec.seed)
        }
    }
    .map_err(data)?;

    emit_manifest(&output.manifest, &args.output).map_err(data)?;
    let summary_path = args.summary.clone().unwrap_or_else(|| {
        let mut name = args.output.as_os_str().to_owned();
        name.push(".summary.json");
        PathBuf::from(name)
    });
    fs::write(&summary_path, to_json_bytes(&output.summary)).map_err(with_path(&summary_path))
}

fn run_synth(cmd: &SynthCommand, stdout: &mut dyn Write) -> CliResult<()> {
    let (histogram, seed, output, histogram_only) = match cmd {
        SynthCommand::Zipf {
            classes,
            size,
            exponent,
            seed,
            histogram,
            output,
        } => {
            let spec = ZipfSpec {
                num_classes: *classes,
                total_samples: *size,
                exponent: *exponent,
                seed: *seed,
            };
            let h = synth::zipf_histogram(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
            (h, *seed, output, *histogram)
        }
        SynthCommand::Balanced {
            classes,
            per_class,
            seed,
            output,
        } => {
            if *classes == 0 || *per_class == 0 {
                return Err(CliError::Usage(
                    "--classes and --per-class must be at least 1".into(),
                ));
            }
            classes.checked_mul(*per_class).ok_or_else(|| {
                CliError::Usage("--classes × --per-class overflows".into())
            })?;
            let h = crate::histogram::ClassHistogram::from_counts(
                (1..=*classes).map(|r| (synth::class_id(r, *classes), *per_class)),
            )
            .map_err(data)?;
            (h, *seed, output, false)
        }
    };
    if histogram_only {
        let mut bytes = histogram.to_json().into_bytes();
        bytes.push(b'\n');
        return write_output(output.as_deref(), &bytes, stdout);
    }
    match output {
        Some(p) => {
            let file = File::create(p).map_err(with_path(p))?;
            synth::write_histogram_jsonl(&histogram, seed, BufWriter::new(file)).map_err(with_path(p))
        }
        None => synth::write_histogram_jsonl(&histogram, seed, BufWriter::new(stdout)).map_err(data),
    }
}

#[derive(Deserialize)]
struct AuditDocIndicators {
    indicators: IndicatorReport,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReportFile {
    Candidate(CandidateEntry),
    Audit(AuditDocIndicators),
    Bare(IndicatorReport),
}

#[derive(Serialize)]
struct PredictOutput {
    groups: Vec<RankGroup>,
}

fn run_predict(args: &PredictArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut candidates = Vec::new();
    for path in &args.reports {
        let text = fs::read_to_string(path).map_err(with_path(path))?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let parsed: ReportFile = serde_json::from_str(&text).map_err(|_| {
            CliError::Data(format!(
                "{}: not an audit report, indicator report or candidate entry",
                path.display()
            ))
        })?;
        candidates.push(match parsed {
            ReportFile::Candidate(c) => c,
            ReportFile::Audit(doc) => CandidateEntry::new(name, doc.indicators),
            ReportFile::Bare(report) => CandidateEntry::new(name, report),
        });
    }
    let groups = predict_order(&candidates).map_err(data)?;
    write_output(args.output.as_deref(), &to_json_bytes(&PredictOutput { groups }), stdout)
}

fn run_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let text = match &args.table {
        Some(p) => fs::read_to_string(p).map_err(with_path(p))?,
        None => BALANCE_TABLE.to_string(),
    };
    let table = ValidationTable::from_json(&text).map_err(data)?;
    let report = validate_table(&table).map_err(data)?;
    write_output(args.output.as_deref(), &to_json_bytes(&report), stdout)
}

#[derive(Serialize)]
struct EvalOutput {
    allowed_classes: usize,
    rows: usize,
    top1_accuracy: f64,
}

#[derive(Serialize)]
struct RobustnessOutput {
    average_robustness: f64,
    shifts: usize,
}

fn read_lines_file(path: &Path) -> CliResult<Vec<String>> {
    let file = File::open(path).map_err(with_path(path))?;
    evalproto::read_class_lines(BufReader::new(file)).map_err(with_path(path))
}

fn run_eval(args: &EvalArgs, threads: Option<usize>, stdout: &mut dyn Write) -> CliResult<()> {
    if let Some(EvalCommand::Robustness { accuracies, output }) = &args.command {
        let text = fs::read_to_string(accuracies).map_err(with_path(accuracies))?;
        let parsed: ShiftAccuracies = serde_json::from_str(&text).map_err(with_path(accuracies))?;
        let values = parsed.values();
        let mean = evalproto::average_robustness(&values).map_err(data)?;
        let out = RobustnessOutput {
            average_robustness: mean,
            shifts: values.len(),
        };
        return write_output(output.as_deref(), &to_json_bytes(&out), stdout);
    }
    let (Some(scores_path), Some(truth_path)) = (&args.scores, &args.truth) else {
        return Err(CliError::Usage(
            "eval needs --scores and --truth (or the `robustness` subcommand)".into(),
        ));
    };
    let file = File::open(scores_path).map_err(with_path(scores_path))?;
    let scores = ScoreMatrix::read_csv(BufReader::new(file)).map_err(with_path(scores_path))?;
    let truth = read_lines_file(truth_path)?;
    let allowed: BTreeSet<String> = match &args.allow {
        Some(p) => read_lines_file(p)?.into_iter().collect(),
        None => scores.classes().iter().cloned().collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(data)?;
    let predicted = pool
        .install(|| scores.mask_and_argmax(&allowed))
        .map_err(data)?;
    let accuracy = evalproto::top1_accuracy(&predicted, &truth).map_err(data)?;
    let out = EvalOutput {
        allowed_classes: allowed.len(),
        rows: predicted.len(),
        top1_accuracy: accuracy,
    };
    write_output(args.output.as_deref(), &to_json_bytes(&out), stdout)
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Audit(a) => run_audit(a, cli.threads, stdout),
        Command::Transform(a) => run_transform(a),
        Command::Synth(c) => run_synth(c, stdout),
        Command::Predict(a) => run_predict(a, stdout),
        Command::Validate(a) => run_validate(a, stdout),
        Command::Eval(a) => run_eval(a, cli.threads, stdout),
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    1
                }
            };
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            let _ = writeln!(stderr, "run `{TOOL_NAME} --help` for usage");
            1
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    run_cli_with(argv, &mut out, &mut err)
}

//! The `yolokit` command line.
//!
//! Exit codes: 0 success, 1 validation or lint errors found, 2 usage error,
//! 3 I/O or parse failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::annotations::{
    abs_to_yolo, parse_abs_labels, parse_class_list, parse_sizes, parse_yolo_labels,
    read_image_dims, serialize_yolo_labels, ClassMap, ImageSize,
};
use crate::cfggen::{
    derive_custom_cfg, lint_cfg, parse_cfg, serialize_cfg, RandomMode, TrainingParams,
};
use crate::diagnostics::has_errors;
use crate::evaluation::{
    apply_threshold, emit_loss_table, loss_verdict, mean_average_precision, parse_detections,
    parse_training_log, serialize_detections, GroundTruthSet, DEFAULT_CONFIDENCE_THRESHOLD,
    DEFAULT_IOU_THRESHOLD, DEFAULT_LOSS_THRESHOLD,
};
use crate::headsim::{
    decode_scale, nms, parse_anchors, parse_raw_tensors, RawScaleOutput, DEFAULT_ANCHORS_PER_SCALE,
    DEFAULT_NMS_IOU,
};
use crate::manifest::{
    generate_image_list, generate_obj_data, generate_obj_names, split_dataset, DataPaths, SplitSpec,
};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Findings = 1,
    Usage = 2,
    Failure = 3,
}

impl From<ExitStatus> for ExitCode {
    fn from(status: ExitStatus) -> Self {
        ExitCode::from(status as u8)
    }
}

#[derive(Debug)]
struct CliError {
    status: ExitStatus,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Failure,
            message: message.into(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::failure(e.to_string())
    }
}

type CliResult = Result<ExitStatus, CliError>;

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];
const SUBDIVISIONS_FALLBACK: u32 = 32;

#[derive(Debug, Parser)]
#[command(
    name = "yolokit",
    version,
    about = "Dataset, cfg, and evaluation tooling for darknet YOLOv4 training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert OIDv4 absolute labels to YOLO label files.
    Convert(ConvertArgs),
    /// Split image ids into train.txt and test.txt.
    Split(SplitArgs),
    /// Derive a custom training cfg, or lint one with --lint-only.
    Cfg(CfgArgs),
    /// Split the dataset and write train.txt, test.txt, obj.names, and obj.data.
    Manifest(ManifestArgs),
    /// Compute per-class AP and mAP of detections against YOLO ground truth.
    Eval(EvalArgs),
    /// Extract the average-loss curve from a darknet training log.
    Loss(LossArgs),
    /// Decode raw head tensors into thresholded, NMS-filtered detections.
    Decode(DecodeArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("dims").required(true).multiple(true).args(["images", "sizes"]))]
struct ConvertArgs {
    /// Directory of absolute-format label files (`*.txt`).
    #[arg(long)]
    labels: PathBuf,
    /// classes.txt, one class name per line.
    #[arg(long)]
    classes: PathBuf,
    /// Directory holding the images; dimensions are read from file headers.
    #[arg(long)]
    images: Option<PathBuf>,
    /// sizes.txt sidecar (`<image_id> <width> <height>`); wins over --images.
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Output directory for YOLO-format label files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["ids", "images"]))]
struct SplitSource {
    /// File with one image id per line.
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Image directory; ids are the image file stems.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Fraction of images held out for validation.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path prefix for train.txt lines, e.g. `data/obj`.
    #[arg(long)]
    train_prefix: String,
    /// Path prefix for test.txt lines.
    #[arg(long)]
    valid_prefix: String,
    /// Image file extension used in the lists.
    #[arg(long, default_value = "jpg")]
    ext: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    source: SplitSource,
}

#[derive(Debug, Args)]
struct ManifestArgs {
    #[command(flatten)]
    source: SplitSource,
    /// classes.txt; copied to obj.names in the same order.
    #[arg(long)]
    classes: PathBuf,
    #[arg(long, default_value = "data/train.txt")]
    train_list: String,
    #[arg(long, default_value = "data/test.txt")]
    valid_list: String,
    #[arg(long, default_value = "data/obj.names")]
    names_file: String,
    /// Where darknet saves weights during training.
    #[arg(long, default_value = "/mydrive/yolov4/backup")]
    backup: String,
}

#[derive(Debug, Args)]
struct CfgArgs {
    /// Base cfg, e.g. yolov4.cfg.
    base: PathBuf,
    #[arg(long)]
    classes: u32,
    #[arg(long, default_value_t = 416)]
    width: u32,
    #[arg(long, default_value_t = 416)]
    height: u32,
    #[arg(long, default_value_t = 64)]
    batch: u32,
    #[arg(long, default_value_t = 16)]
    subdivisions: u32,
    /// Set random=0 in every [yolo] section (less memory, slightly lower accuracy).
    #[arg(long)]
    random_zero: bool,
    /// Override the derived max_batches.
    #[arg(long)]
    max_batches: Option<u32>,
    /// Output path; the derived cfg goes to stdout when omitted.
    #[arg(long, conflicts_with = "lint_only")]
    out: Option<PathBuf>,
    /// Lint the given cfg instead of deriving a new one.
    #[arg(long)]
    lint_only: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of YOLO ground-truth label files; file stems are image ids.
    #[arg(long)]
    gt: PathBuf,
    /// Detection file: `<image_id> <class_id> <confidence> <cx> <cy> <w> <h>` per line.
    #[arg(long)]
    detections: PathBuf,
    /// obj.names.
    #[arg(long)]
    names: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou: f64,
    /// Confidence threshold applied before matching.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    thresh: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct LossArgs {
    /// Darknet training log; `-` reads standard input.
    log: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LOSS_THRESHOLD)]
    threshold: f64,
    /// Write the loss curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Raw tensor text file, one block per scale.
    tensor: PathBuf,
    /// Anchor list (`w,h` pairs, darknet `anchors =` syntax accepted).
    #[arg(long)]
    anchors: PathBuf,
    /// Network input size as WIDTHxHEIGHT.
    #[arg(long, default_value = "416x416", value_parser = parse_input_size)]
    input_size: (u32, u32),
    #[arg(long, default_value_t = DEFAULT_ANCHORS_PER_SCALE)]
    per_scale: usize,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    thresh: f64,
    /// IoU threshold for non-maximum suppression.
    #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
    nms: f64,
    /// Image id written in the output; defaults to the tensor file stem.
    #[arg(long)]
    image_id: Option<String>,
}

fn parse_input_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let dim = |v: &str| {
        v.trim()
            .parse::<u32>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| format!("bad dimension `{v}`"))
    };
    Ok((dim(w)?, dim(h)?))
}

pub fn run() -> ExitCode {
    let status = run_from(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    status.into()
}

/// Runs the CLI with explicit arguments and output streams.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() {
                let _ = write!(err, "{e}");
                ExitStatus::Usage
            } else {
                let _ = write!(out, "{e}");
                ExitStatus::Success
            };
            return status;
        }
    };
    let result = match cli.command {
        Command::Convert(args) => cmd_convert(&args, out, err),
        Command::Split(args) => cmd_split(&args.source, out),
        Command::Cfg(args) => cmd_cfg(&args, out, err),
        Command::Manifest(args) => cmd_manifest(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Loss(args) => cmd_loss(&args, out),
        Command::Decode(args) => cmd_decode(&args, out),
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.status
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        return io::read_to_string(io::stdin()).map_err(Into::into);
    }
    fs::read_to_string(path).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
}

fn parse_failure(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::failure(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| CliError::failure(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn sorted_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if path.is_file() && matches {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_classes(path: &Path) -> Result<ClassMap, CliError> {
    parse_class_list(&read_text(path)?).map_err(parse_failure(path))
}

fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let classes = load_classes(&args.classes)?;
    if args.out.exists() && same_dir(&args.out, &args.labels) {
        return Err(CliError::usage("--out must differ from --labels"));
    }
    let sizes = match &args.sizes {
        Some(path) => parse_sizes(&read_text(path)?).map_err(parse_failure(path))?,
        None => BTreeMap::new(),
    };
    let image_index: BTreeMap<String, PathBuf> = match &args.images {
        Some(dir) => sorted_files(dir, &IMAGE_EXTENSIONS)?
            .into_iter()
            .map(|p| (stem(&p), p))
            .collect(),
        None => BTreeMap::new(),
    };
    let label_files = sorted_files(&args.labels, &["txt"])?;
    fs::create_dir_all(&args.out)?;

    let (mut converted, mut failed, mut boxes, mut clamped) = (0usize, 0usize, 0usize, 0usize);
    for file in &label_files {
        let id = stem(file);
        let outcome = (|| -> Result<(usize, usize), String> {
            let size = match sizes.get(&id) {
                Some(size) => *size,
                None => {
                    let image = image_index
                        .get(&id)
                        .ok_or_else(|| "no image or sizes entry".to_string())?;
                    image_size(image)?
                }
            };
            let text = fs::read_to_string(file).map_err(|e| e.to_string())?;
            let abs = parse_abs_labels(&text).map_err(|e| e.to_string())?;
            let mut yolo = Vec::with_capacity(abs.len());
            let mut n_clamped = 0;
            for b in &abs {
                yolo.push(abs_to_yolo(b, size, &classes).map_err(|e| e.to_string())?);
                n_clamped += usize::from(!b.rect.is_within(size));
            }
            write_atomic(
                &args.out.join(format!("{id}.txt")),
                &serialize_yolo_labels(&yolo),
            )
            .map_err(|e| e.message)?;
            Ok((yolo.len(), n_clamped))
        })();
        match outcome {
            Ok((n, c)) => {
                converted += 1;
                boxes += n;
                clamped += c;
            }
            Err(message) => {
                failed += 1;
                writeln!(err, "{}: {message}", file.display())?;
            }
        }
    }
    writeln!(
        out,
        "converted {converted} files ({boxes} boxes, {clamped} clamped), {failed} failed"
    )?;
    Ok(if failed > 0 {
        ExitStatus::Findings
    } else {
        ExitStatus::Success
    })
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn image_size(path: &Path) -> Result<ImageSize, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_image_dims(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn collect_ids(source: &SplitSource) -> Result<Vec<String>, CliError> {
    let ids: Vec<String> = if let Some(path) = &source.ids {
        read_text(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect()
    } else if let Some(dir) = &source.images {
        sorted_files(dir, &IMAGE_EXTENSIONS)?
            .iter()
            .map(|p| stem(p))
            .collect()
    } else {
        unreachable!("clap enforces one id source")
    };
    if ids.is_empty() {
        return Err(CliError::usage("no image ids found"));
    }
    Ok(ids)
}

/// Writes train.txt and test.txt; returns `(train, val)` counts.
fn write_split(source: &SplitSource) -> Result<(usize, usize), CliError> {
    let spec =
        SplitSpec::new(source.fraction, source.seed).map_err(|e| CliError::usage(e.to_string()))?;
    let ids = collect_ids(source)?;
    let split = split_dataset(&ids, &spec).map_err(|e| match e {
        Error::TooFewImages(_) => CliError::usage(e.to_string()),
        other => CliError::failure(other.to_string()),
    })?;
    let train = generate_image_list(&split.train, &source.train_prefix, &source.ext)
        .map_err(|e| CliError::failure(e.to_string()))?;
    let val = generate_image_list(&split.val, &source.valid_prefix, &source.ext)
        .map_err(|e| CliError::failure(e.to_string()))?;
    fs::create_dir_all(&source.out)?;
    write_atomic(&source.out.join("train.txt"), &train)?;
    write_atomic(&source.out.join("test.txt"), &val)?;
    Ok((split.train.len(), split.val.len()))
}

fn cmd_split(source: &SplitSource, out: &mut dyn Write) -> CliResult {
    let (train, val) = write_split(source)?;
    writeln!(out, "train.txt: {train} images, test.txt: {val} images")?;
    Ok(ExitStatus::Success)
}

fn cmd_manifest(args: &ManifestArgs, out: &mut dyn Write) -> CliResult {
    let classes = load_classes(&args.classes)?;
    let paths = DataPaths {
        train_list: args.train_list.clone(),
        valid_list: args.valid_list.clone(),
        names_file: args.names_file.clone(),
        backup_dir: args.backup.clone(),
    }
    .validated()
    .map_err(|e| CliError::usage(e.to_string()))?;
    let (train, val) = write_split(&args.source)?;
    let dir = &args.source.out;
    write_atomic(&dir.join("obj.names"), &generate_obj_names(&classes))?;
    write_atomic(
        &dir.join("obj.data"),
        &generate_obj_data(classes.len() as u32, &paths),
    )?;
    writeln!(
        out,
        "train.txt: {train} images, test.txt: {val} images, {} classes",
        classes.len()
    )?;
    Ok(ExitStatus::Success)
}

fn cmd_cfg(args: &CfgArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let params = TrainingParams {
        num_classes: args.classes,
        width: args.width,
        height: args.height,
        batch: args.batch,
        subdivisions: args.subdivisions,
        random_mode: if args.random_zero {
            RandomMode::ForceZero
        } else {
            RandomMode::Keep
        },
        max_batches_override: args.max_batches,
    }
    .validated()
    .map_err(|e| CliError::usage(e.to_string()))?;

    let text = read_text(&args.base)?;
    let base = parse_cfg(&text).map_err(parse_failure(&args.base))?;
    let file = args.base.display().to_string();

    if args.lint_only {
        let diags = lint_cfg(&base, args.classes);
        for d in &diags {
            writeln!(out, "{}", d.clone().at_file(&file))?;
        }
        return Ok(if has_errors(&diags) {
            ExitStatus::Findings
        } else {
            ExitStatus::Success
        });
    }

    let derived = derive_custom_cfg(&base, &params).map_err(parse_failure(&args.base))?;
    for d in lint_cfg(&derived, args.classes) {
        writeln!(err, "{d}")?;
    }
    let rendered = serialize_cfg(&derived);
    match &args.out {
        Some(path) => {
            if path.exists() && params.subdivisions < SUBDIVISIONS_FALLBACK {
                writeln!(
                    err,
                    "hint: if training runs out of memory, re-run with --subdivisions {SUBDIVISIONS_FALLBACK}"
                )?;
            }
            write_atomic(path, &rendered)?;
        }
        None => out.write_all(rendered.as_bytes())?,
    }
    Ok(ExitStatus::Success)
}

#[derive(Serialize)]
struct EvalJson<'a> {
    confidence_threshold: f64,
    #[serde(flatten)]
    report: &'a crate::evaluation::EvalReport,
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult {
    if !(0.0..=1.0).contains(&args.thresh) {
        return Err(CliError::usage(format!(
            "--thresh {} outside [0,1]",
            args.thresh
        )));
    }
    if !(args.iou > 0.0 && args.iou <= 1.0) {
        return Err(CliError::usage(format!("--iou {} outside (0,1]", args.iou)));
    }
    let classes = load_classes(&args.names)?;
    let gt_files = sorted_files(&args.gt, &["txt"])?;
    if gt_files.is_empty() {
        return Err(CliError::usage(format!(
            "no ground-truth files in {}",
            args.gt.display()
        )));
    }
    let mut gts = GroundTruthSet::new();
    for file in &gt_files {
        let boxes = parse_yolo_labels(&read_text(file)?).map_err(parse_failure(file))?;
        if let Some(b) = boxes.iter().find(|b| b.class_id as usize >= classes.len()) {
            return Err(CliError::failure(format!(
                "{}: class id {} out of range for {} classes",
                file.display(),
                b.class_id,
                classes.len()
            )));
        }
        gts.insert(stem(file), boxes)
            .map_err(|e| CliError::failure(e.to_string()))?;
    }
    let dets =
        parse_detections(&read_text(&args.detections)?).map_err(parse_failure(&args.detections))?;
    if let Some(d) = dets.iter().find(|d| d.class_id as usize >= classes.len()) {
        return Err(CliError::failure(format!(
            "{}: detection class id {} out of range for {} classes",
            args.detections.display(),
            d.class_id,
            classes.len()
        )));
    }
    let dets = apply_threshold(&dets, args.thresh);
    let report = mean_average_precision(&dets, &gts, &classes, args.iou);

    if args.json {
        let doc = EvalJson {
            confidence_threshold: args.thresh,
            report: &report,
        };
        serde_json::to_writer_pretty(&mut *out, &doc)
            .map_err(|e| CliError::failure(e.to_string()))?;
        writeln!(out)?;
        return Ok(ExitStatus::Success);
    }
    let width = classes
        .names()
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(5);
    writeln!(
        out,
        "{:<width$}  {:>8}  {:>6}  {:>6}",
        "class", "AP", "GT", "DET"
    )?;
    for c in &report.per_class {
        let ap = if c.num_gt > 0 {
            format!("{:.2}%", c.ap * 100.0)
        } else {
            "n/a".to_string()
        };
        writeln!(
            out,
            "{:<width$}  {ap:>8}  {:>6}  {:>6}",
            c.name, c.num_gt, c.num_det
        )?;
    }
    writeln!(
        out,
        "mAP@{:.2} = {:.2}% over {} classes (conf >= {})",
        args.iou,
        report.map * 100.0,
        report.scored_classes().count(),
        args.thresh
    )?;
    Ok(ExitStatus::Success)
}

#[derive(Serialize)]
struct LossJson {
    points: usize,
    #[serde(flatten)]
    verdict: crate::evaluation::LossVerdict,
}

fn cmd_loss(args: &LossArgs, out: &mut dyn Write) -> CliResult {
    let text = read_text(&args.log)?;
    let series = match parse_training_log(&text) {
        Ok(series) => series,
        Err(e) => {
            return Err(CliError {
                status: ExitStatus::Findings,
                message: format!("{}: {e}", args.log.display()),
            })
        }
    };
    let verdict =
        loss_verdict(&series, args.threshold).map_err(|e| CliError::failure(e.to_string()))?;
    if let Some(path) = &args.csv {
        write_atomic(path, &emit_loss_table(&series))?;
    }
    if args.json {
        let doc = LossJson {
            points: series.len(),
            verdict,
        };
        serde_json::to_writer_pretty(&mut *out, &doc)
            .map_err(|e| CliError::failure(e.to_string()))?;
        writeln!(out)?;
    } else {
        writeln!(
            out,
            "final avg loss {} at iteration {} ({} points): {}",
            verdict.final_avg_loss,
            verdict.final_iteration,
            series.len(),
            if verdict.passed { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(ExitStatus::Success)
}

fn cmd_decode(args: &DecodeArgs, out: &mut dyn Write) -> CliResult {
    if !(0.0..=1.0).contains(&args.thresh) {
        return Err(CliError::usage(format!(
            "--thresh {} outside [0,1]",
            args.thresh
        )));
    }
    if !(0.0..=1.0).contains(&args.nms) {
        return Err(CliError::usage(format!("--nms {} outside [0,1]", args.nms)));
    }
    let anchors = parse_anchors(&read_text(&args.anchors)?, args.per_scale)
        .map_err(parse_failure(&args.anchors))?;
    let blocks =
        parse_raw_tensors(&read_text(&args.tensor)?).map_err(parse_failure(&args.tensor))?;
    let image_id = args.image_id.clone().unwrap_or_else(|| stem(&args.tensor));
    let (w, h) = args.input_size;

    let mut dets = Vec::new();
    for block in &blocks {
        let raw = RawScaleOutput::from_block(block, w, h, &anchors)
            .map_err(parse_failure(&args.tensor))?;
        let decoded = decode_scale(&raw, (w, h)).map_err(parse_failure(&args.tensor))?;
        dets.extend(decoded.into_iter().map(|mut d| {
            d.image_id = image_id.clone();
            d
        }));
    }
    let kept = nms(&apply_threshold(&dets, args.thresh), args.nms);
    out.write_all(serialize_detections(&kept).as_bytes())?;
    Ok(ExitStatus::Success)
}

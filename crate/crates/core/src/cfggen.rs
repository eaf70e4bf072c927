//! Lossless darknet cfg documents, training-cfg derivation, and linting.
//!
//! Every input line is kept with its original bytes and line terminator, so
//! serializing an unmodified document reproduces the input exactly. Edits
//! rewrite only the value part of the touched `key=value` lines.

use std::fmt;

use crate::diagnostics::{Code, Diagnostic};
use crate::error::{Error, Result};

/// Smallest `max_batches` darknet training should use.
pub const MIN_MAX_BATCHES: u32 = 6000;
pub const ANCHORS_PER_SCALE: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineEnd {
    Lf,
    CrLf,
    /// Last line of a file without a trailing newline.
    None,
}

impl LineEnd {
    fn as_str(self) -> &'static str {
        match self {
            LineEnd::Lf => "\n",
            LineEnd::CrLf => "\r\n",
            LineEnd::None => "",
        }
    }
}

/// A comment, blank, or header line kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLine {
    pub text: String,
    pub end: LineEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    // `prefix + value + suffix` is the original line text
    prefix: String,
    suffix: String,
    end: LineEnd,
}

impl Entry {
    fn new(key: &str, value: &str) -> Self {
        Self {
            key: key.to_owned(),
            value: value.to_owned(),
            prefix: format!("{key}="),
            suffix: String::new(),
            end: LineEnd::Lf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Entry(Entry),
    Other(RawLine),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    header: RawLine,
    pub items: Vec<Item>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            header: RawLine {
                text: format!("[{name}]"),
                end: LineEnd::Lf,
            },
            items: Vec::new(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.items.iter().filter_map(|item| match item {
            Item::Entry(e) => Some(e),
            Item::Other(_) => None,
        })
    }

    /// First value for `key`, as darknet's option lookup does.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    /// Sets every occurrence of `key`, appending a new entry after the last
    /// existing entry when the key is absent.
    pub fn set(&mut self, key: &str, value: &str) {
        let mut found = false;
        for item in &mut self.items {
            if let Item::Entry(e) = item {
                if e.key == key {
                    found = true;
                    if e.value != value {
                        e.value = value.to_owned();
                    }
                }
            }
        }
        if found {
            return;
        }
        let at = self
            .items
            .iter()
            .rposition(|item| matches!(item, Item::Entry(_)))
            .map_or(0, |i| i + 1);
        let before = match at {
            0 => &mut self.header.end,
            i => match &mut self.items[i - 1] {
                Item::Entry(e) => &mut e.end,
                Item::Other(raw) => &mut raw.end,
            },
        };
        let mut entry = Entry::new(key, value);
        if *before == LineEnd::None {
            *before = LineEnd::Lf;
            entry.end = LineEnd::None;
        }
        self.items.insert(at, Item::Entry(entry));
    }

    fn is_net(&self) -> bool {
        self.name == "net" || self.name == "network"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CfgDocument {
    /// Comments and blanks before the first section header.
    pub preamble: Vec<RawLine>,
    pub sections: Vec<Section>,
}

impl CfgDocument {
    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> {
        self.sections.iter().filter(move |s| s.name == name)
    }

    /// 1-based line number of each section header.
    fn header_lines(&self) -> Vec<usize> {
        let mut line = self.preamble.len() + 1;
        self.sections
            .iter()
            .map(|s| {
                let at = line;
                line += 1 + s.items.len();
                at
            })
            .collect()
    }
}

fn split_lines(text: &str) -> impl Iterator<Item = (&str, LineEnd)> {
    text.split_inclusive('\n').map(|line| {
        if let Some(body) = line.strip_suffix("\r\n") {
            (body, LineEnd::CrLf)
        } else if let Some(body) = line.strip_suffix('\n') {
            (body, LineEnd::Lf)
        } else {
            (line, LineEnd::None)
        }
    })
}

pub fn parse_cfg(text: &str) -> Result<CfgDocument> {
    let mut doc = CfgDocument::default();
    for (i, (body, end)) in split_lines(text).enumerate() {
        let line = i + 1;
        let trimmed = body.trim();
        let raw = || RawLine {
            text: body.to_owned(),
            end,
        };
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            match doc.sections.last_mut() {
                Some(section) => section.items.push(Item::Other(raw())),
                None => doc.preamble.push(raw()),
            }
        } else if let Some(rest) = trimmed.strip_prefix('[') {
            let name = match rest.split_once(']') {
                Some((name, tail)) if tail.trim().is_empty() => name.trim(),
                Some(_) => {
                    return Err(Error::CfgSyntax {
                        line,
                        message: "unexpected text after section header".into(),
                    })
                }
                None => {
                    return Err(Error::CfgSyntax {
                        line,
                        message: "unclosed section header".into(),
                    })
                }
            };
            if name.is_empty() {
                return Err(Error::CfgSyntax {
                    line,
                    message: "empty section name".into(),
                });
            }
            doc.sections.push(Section {
                name: name.to_owned(),
                header: raw(),
                items: Vec::new(),
            });
        } else if let Some(eq) = body.find('=') {
            let Some(section) = doc.sections.last_mut() else {
                return Err(Error::CfgSyntax {
                    line,
                    message: "key=value entry before any section header".into(),
                });
            };
            let key = body[..eq].trim();
            if key.is_empty() {
                return Err(Error::CfgSyntax {
                    line,
                    message: "entry has an empty key".into(),
                });
            }
            let after = &body[eq + 1..];
            let value = after.trim();
            let (prefix_len, suffix_start) = if value.is_empty() {
                (body.len(), body.len())
            } else {
                let start = eq + 1 + (after.len() - after.trim_start().len());
                (start, start + value.len())
            };
            section.items.push(Item::Entry(Entry {
                key: key.to_owned(),
                value: value.to_owned(),
                prefix: body[..prefix_len].to_owned(),
                suffix: body[suffix_start..].to_owned(),
                end,
            }));
        } else {
            return Err(Error::CfgSyntax {
                line,
                message: format!("unrecognized line `{trimmed}`"),
            });
        }
    }
    Ok(doc)
}

pub fn serialize_cfg(doc: &CfgDocument) -> String {
    doc.to_string()
}

impl fmt::Display for CfgDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for raw in &self.preamble {
            write!(f, "{}{}", raw.text, raw.end.as_str())?;
        }
        for section in &self.sections {
            write!(f, "{}{}", section.header.text, section.header.end.as_str())?;
            for item in &section.items {
                match item {
                    Item::Entry(e) => {
                        write!(f, "{}{}{}{}", e.prefix, e.value, e.suffix, e.end.as_str())?
                    }
                    Item::Other(raw) => write!(f, "{}{}", raw.text, raw.end.as_str())?,
                }
            }
        }
        Ok(())
    }
}

/// `classes × 2000`, floored at 6000.
pub fn compute_max_batches(num_classes: u32) -> Result<u32> {
    if num_classes < 1 {
        return Err(Error::InvalidParameter(
            "num_classes must be at least 1".into(),
        ));
    }
    let scaled = num_classes.checked_mul(2000).ok_or_else(|| {
        Error::InvalidParameter(format!("{num_classes} classes overflows max_batches"))
    })?;
    Ok(scaled.max(MIN_MAX_BATCHES))
}

/// Learning-rate steps at 80% and 90% of `max_batches`, rounded down.
pub fn compute_steps(max_batches: u32) -> (u32, u32) {
    let mb = u64::from(max_batches);
    ((mb * 8 / 10) as u32, (mb * 9 / 10) as u32)
}

/// Output channels of the convolution feeding a `[yolo]` layer.
pub fn compute_filters(num_classes: u32) -> u32 {
    (num_classes + 5) * ANCHORS_PER_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RandomMode {
    /// Leave each `[yolo]` layer's `random` as it is.
    #[default]
    Keep,
    /// Write `random=0` to cut memory use and training time.
    ForceZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingParams {
    pub num_classes: u32,
    pub width: u32,
    pub height: u32,
    pub batch: u32,
    pub subdivisions: u32,
    pub random_mode: RandomMode,
    pub max_batches_override: Option<u32>,
}

impl TrainingParams {
    /// Defaults to batch 64, subdivisions 16, and a 416x416 network.
    pub fn new(num_classes: u32) -> Result<Self> {
        Self {
            num_classes,
            width: 416,
            height: 416,
            batch: 64,
            subdivisions: 16,
            random_mode: RandomMode::Keep,
            max_batches_override: None,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.num_classes < 1 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 1".into(),
            ));
        }
        for (name, v) in [("width", self.width), ("height", self.height)] {
            if v == 0 || v % 32 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "{name}={v} is not a positive multiple of 32"
                )));
            }
        }
        if self.batch == 0 || self.subdivisions == 0 {
            return Err(Error::InvalidParameter(
                "batch and subdivisions must be positive".into(),
            ));
        }
        if self.max_batches_override == Some(0) {
            return Err(Error::InvalidParameter(
                "max_batches must be positive".into(),
            ));
        }
        Ok(self)
    }

    pub fn max_batches(&self) -> Result<u32> {
        match self.max_batches_override {
            Some(mb) => Ok(mb),
            None => compute_max_batches(self.num_classes),
        }
    }
}

/// Index of the single `[net]` section and `(yolo, preceding conv)` index pairs.
fn locate(doc: &CfgDocument) -> Result<(usize, Vec<(usize, usize)>)> {
    let nets: Vec<_> = (0..doc.sections.len())
        .filter(|&i| doc.sections[i].is_net())
        .collect();
    let net = match nets.as_slice() {
        [] => return Err(Error::MissingNet),
        [net] => *net,
        _ => {
            return Err(Error::StructureMismatch(format!(
                "expected one [net] section, found {}",
                nets.len()
            )))
        }
    };
    let mut heads = Vec::new();
    for (i, section) in doc.sections.iter().enumerate() {
        if section.name != "yolo" {
            continue;
        }
        match i.checked_sub(1).map(|p| &doc.sections[p]) {
            Some(prev) if prev.name == "convolutional" => heads.push((i, i - 1)),
            _ => {
                return Err(Error::StructureMismatch(format!(
                    "[yolo] section #{} is not immediately preceded by a [convolutional] section",
                    i
                )))
            }
        }
    }
    if heads.is_empty() {
        return Err(Error::StructureMismatch("no [yolo] sections".into()));
    }
    Ok((net, heads))
}

/// Applies the custom-training edits to a copy of `base`.
pub fn derive_custom_cfg(base: &CfgDocument, params: &TrainingParams) -> Result<CfgDocument> {
    let params = params.clone().validated()?;
    let (net, heads) = locate(base)?;
    let max_batches = params.max_batches()?;
    let (s1, s2) = compute_steps(max_batches);
    let filters = compute_filters(params.num_classes).to_string();
    let classes = params.num_classes.to_string();

    let mut doc = base.clone();
    let net = &mut doc.sections[net];
    net.set("batch", &params.batch.to_string());
    net.set("subdivisions", &params.subdivisions.to_string());
    net.set("width", &params.width.to_string());
    net.set("height", &params.height.to_string());
    net.set("max_batches", &max_batches.to_string());
    net.set("steps", &format!("{s1},{s2}"));

    for (yolo, conv) in heads {
        let yolo = &mut doc.sections[yolo];
        yolo.set("classes", &classes);
        if params.random_mode == RandomMode::ForceZero {
            yolo.set("random", "0");
        }
        doc.sections[conv].set("filters", &filters);
    }
    Ok(doc)
}

fn entry_line(doc: &CfgDocument, headers: &[usize], section: usize, key: &str) -> Option<usize> {
    doc.sections[section]
        .items
        .iter()
        .position(|item| matches!(item, Item::Entry(e) if e.key == key))
        .map(|i| headers[section] + 1 + i)
}

/// Checks a cfg against the custom-training rules for `num_classes`.
pub fn lint_cfg(doc: &CfgDocument, num_classes: u32) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let headers = doc.header_lines();
    let located =
        |d: Diagnostic, section: usize, key: &str| match entry_line(doc, &headers, section, key) {
            Some(line) => d.at_line(line),
            None => d.at_line(headers[section]),
        };

    let nets: Vec<usize> = (0..doc.sections.len())
        .filter(|&i| doc.sections[i].is_net())
        .collect();
    match nets.as_slice() {
        [] => diags.push(Diagnostic::error(
            Code::MissingNet,
            "cfg has no [net] section",
        )),
        [net] => lint_net(doc, *net, &mut diags, &located),
        _ => diags.push(Diagnostic::error(
            Code::StructureMismatch,
            format!("expected one [net] section, found {}", nets.len()),
        )),
    }

    let expected_filters = compute_filters(num_classes);
    let yolos: Vec<usize> = (0..doc.sections.len())
        .filter(|&i| doc.sections[i].name == "yolo")
        .collect();
    if yolos.len() != 3 {
        diags.push(Diagnostic::warning(
            Code::YoloCount,
            format!("expected 3 [yolo] sections, found {}", yolos.len()),
        ));
    }
    for &y in &yolos {
        let yolo = &doc.sections[y];
        match yolo.get("classes").map(str::parse::<u32>) {
            Some(Ok(c)) if c == num_classes => {}
            Some(Ok(c)) => diags.push(located(
                Diagnostic::error(
                    Code::ClassesMismatch,
                    format!("classes={c}, expected {num_classes}"),
                ),
                y,
                "classes",
            )),
            Some(Err(_)) => diags.push(located(
                Diagnostic::error(Code::BadValue, "classes is not an integer"),
                y,
                "classes",
            )),
            None => diags.push(located(
                Diagnostic::error(Code::MissingKey, "[yolo] section has no classes key"),
                y,
                "classes",
            )),
        }
        let conv = y
            .checked_sub(1)
            .filter(|&p| doc.sections[p].name == "convolutional");
        let Some(conv) = conv else {
            diags.push(
                Diagnostic::error(
                    Code::StructureMismatch,
                    "[yolo] section is not immediately preceded by a [convolutional] section",
                )
                .at_line(headers[y]),
            );
            continue;
        };
        match doc.sections[conv].get("filters").map(str::parse::<u32>) {
            Some(Ok(f)) if f == expected_filters => {}
            Some(Ok(f)) => diags.push(located(
                Diagnostic::error(
                    Code::FiltersMismatch,
                    format!("filters={f} before [yolo], expected {expected_filters}"),
                ),
                conv,
                "filters",
            )),
            Some(Err(_)) => diags.push(located(
                Diagnostic::error(Code::BadValue, "filters is not an integer"),
                conv,
                "filters",
            )),
            None => diags.push(located(
                Diagnostic::error(
                    Code::MissingKey,
                    "convolution before [yolo] has no filters key",
                ),
                conv,
                "filters",
            )),
        }
    }
    diags
}

fn lint_net(
    doc: &CfgDocument,
    net: usize,
    diags: &mut Vec<Diagnostic>,
    located: &dyn Fn(Diagnostic, usize, &str) -> Diagnostic,
) {
    let section = &doc.sections[net];
    let int = |key: &str, diags: &mut Vec<Diagnostic>| -> Option<u64> {
        let raw = section.get(key)?;
        match raw.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                diags.push(located(
                    Diagnostic::error(Code::BadValue, format!("{key}={raw} is not an integer")),
                    net,
                    key,
                ));
                None
            }
        }
    };

    for key in ["width", "height"] {
        match int(key, diags) {
            Some(v) if v == 0 || v % 32 != 0 => diags.push(located(
                Diagnostic::error(
                    Code::NotMultipleOf32,
                    format!("{key}={v} is not a multiple of 32"),
                ),
                net,
                key,
            )),
            Some(_) => {}
            None if section.get(key).is_none() => diags.push(located(
                Diagnostic::error(Code::MissingKey, format!("[net] has no {key}")),
                net,
                key,
            )),
            None => {}
        }
    }

    if let (Some(batch), Some(subdivisions)) = (int("batch", diags), int("subdivisions", diags)) {
        if batch < subdivisions {
            diags.push(located(
                Diagnostic::warning(
                    Code::BatchBelowSubdivisions,
                    format!("batch={batch} is smaller than subdivisions={subdivisions}"),
                ),
                net,
                "subdivisions",
            ));
        }
    }

    if let Some(mb) = int("max_batches", diags) {
        if mb < u64::from(MIN_MAX_BATCHES) {
            diags.push(located(
                Diagnostic::error(
                    Code::MaxBatchesTooLow,
                    format!("max_batches={mb} is below {MIN_MAX_BATCHES}"),
                ),
                net,
                "max_batches",
            ));
        }
    }

    if let Some(raw) = section.get("steps") {
        let steps: std::result::Result<Vec<u64>, _> =
            raw.split(',').map(|s| s.trim().parse::<u64>()).collect();
        match steps {
            Ok(steps) if steps.windows(2).all(|w| w[0] < w[1]) => {}
            Ok(_) => diags.push(located(
                Diagnostic::error(
                    Code::StepsNotIncreasing,
                    format!("steps={raw} is not strictly increasing"),
                ),
                net,
                "steps",
            )),
            Err(_) => diags.push(located(
                Diagnostic::error(
                    Code::BadValue,
                    format!("steps={raw} is not a list of integers"),
                ),
                net,
                "steps",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# tiny
[net]
batch=1
subdivisions=1
width=608
height=608
max_batches = 500500
steps=400000,450000

[convolutional]
filters=32
size=3

[convolutional]
size=1
filters=255
activation=linear

[yolo]
mask = 0,1,2
classes=80
random=1
";

    #[test]
    fn parses_sections_and_entries() {
        let doc = parse_cfg("[net]\nbatch=64\n").unwrap();
        assert_eq!(doc.sections.len(), 1);
        assert_eq!(doc.sections[0].name, "net");
        assert_eq!(doc.sections[0].get("batch"), Some("64"));

        let doc = parse_cfg("[yolo]\nanchors = 12, 16, 19, 36\n").unwrap();
        assert_eq!(doc.sections[0].get("anchors"), Some("12, 16, 19, 36"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_cfg("batch=64\n[net]\n"),
            Err(Error::CfgSyntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_cfg("[net]\nbatch=1\n[conv\n"),
            Err(Error::CfgSyntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_cfg("[net]\nbogus\n"),
            Err(Error::CfgSyntax { line: 2, .. })
        ));
        assert!(matches!(parse_cfg("[]\n"), Err(Error::CfgSyntax { .. })));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for text in [
            "",
            MINIMAL,
            "[net]\r\nbatch = 64  \r\n; semi\r\n\r\nwidth=\r\n[yolo]\nclasses=1",
            "  # lead\n\n[net]\n  batch\t=\t 8 \n",
        ] {
            assert_eq!(serialize_cfg(&parse_cfg(text).unwrap()), text);
        }
        assert_eq!(serialize_cfg(&CfgDocument::default()), "");
    }

    #[test]
    fn set_rewrites_only_the_value() {
        let mut doc = parse_cfg("[net]\nmax_batches = 500500\r\nbatch=1\n").unwrap();
        doc.sections[0].set("max_batches", "6000");
        assert_eq!(
            serialize_cfg(&doc),
            "[net]\nmax_batches = 6000\r\nbatch=1\n"
        );
    }

    #[test]
    fn set_inserts_missing_keys_after_last_entry() {
        let mut doc = parse_cfg("[net]\nbatch=1\n\n# trailing\n[yolo]\nclasses=1").unwrap();
        doc.sections[0].set("width", "416");
        doc.sections[1].set("random", "0");
        assert_eq!(
            serialize_cfg(&doc),
            "[net]\nbatch=1\nwidth=416\n\n# trailing\n[yolo]\nclasses=1\nrandom=0"
        );
        let mut empty = parse_cfg("[net]").unwrap();
        empty.sections[0].set("batch", "2");
        assert_eq!(serialize_cfg(&empty), "[net]\nbatch=2");
    }

    #[test]
    fn formulas() {
        assert_eq!(compute_max_batches(1).unwrap(), 6000);
        assert_eq!(compute_max_batches(3).unwrap(), 6000);
        assert_eq!(compute_max_batches(4).unwrap(), 8000);
        assert_eq!(compute_max_batches(5).unwrap(), 10000);
        assert!(compute_max_batches(0).is_err());
        assert!(compute_max_batches(u32::MAX).is_err());

        assert_eq!(compute_steps(10000), (8000, 9000));
        assert_eq!(compute_steps(6000), (4800, 5400));
        // 0.8 * 6001 = 4800.8, 0.9 * 6001 = 5400.9
        assert_eq!(compute_steps(6001), (4800, 5400));

        assert_eq!(compute_filters(1), 18);
        assert_eq!(compute_filters(4), 27);
        assert_eq!(compute_filters(80), 255);
    }

    #[test]
    fn training_params_validation() {
        assert!(TrainingParams::new(0).is_err());
        let p = TrainingParams::new(2).unwrap();
        assert_eq!(
            (p.batch, p.subdivisions, p.width, p.height),
            (64, 16, 416, 416)
        );
        assert!(TrainingParams {
            width: 400,
            ..p.clone()
        }
        .validated()
        .is_err());
        assert!(TrainingParams {
            height: 0,
            ..p.clone()
        }
        .validated()
        .is_err());
        assert!(TrainingParams {
            max_batches_override: Some(0),
            ..p
        }
        .validated()
        .is_err());
    }

    #[test]
    fn derive_touches_only_target_lines() {
        let base = parse_cfg(MINIMAL).unwrap();
        let mut params = TrainingParams::new(1).unwrap();
        params.random_mode = RandomMode::ForceZero;
        let derived = serialize_cfg(&derive_custom_cfg(&base, &params).unwrap());
        let expected = MINIMAL
            .replace("batch=1\nsubdivisions=1", "batch=64\nsubdivisions=16")
            .replace("width=608\nheight=608", "width=416\nheight=416")
            .replace("max_batches = 500500", "max_batches = 6000")
            .replace("steps=400000,450000", "steps=4800,5400")
            .replace("filters=255", "filters=18")
            .replace("classes=80", "classes=1")
            .replace("random=1", "random=0");
        assert_eq!(derived, expected);
        assert!(derived.contains("filters=32"));
    }

    #[test]
    fn derive_keeps_random_by_default_and_honours_override() {
        let base = parse_cfg(MINIMAL).unwrap();
        let mut params = TrainingParams::new(5).unwrap();
        params.max_batches_override = Some(20000);
        let doc = derive_custom_cfg(&base, &params).unwrap();
        let yolo = doc.sections_named("yolo").next().unwrap();
        assert_eq!(yolo.get("random"), Some("1"));
        assert_eq!(yolo.get("classes"), Some("5"));
        let net = &doc.sections[0];
        assert_eq!(net.get("max_batches"), Some("20000"));
        assert_eq!(net.get("steps"), Some("16000,18000"));
    }

    #[test]
    fn derive_structure_errors() {
        let params = TrainingParams::new(1).unwrap();
        let no_net = parse_cfg("[convolutional]\nfilters=1\n[yolo]\nclasses=1\n").unwrap();
        assert_eq!(derive_custom_cfg(&no_net, &params), Err(Error::MissingNet));

        let bad = parse_cfg("[net]\n[convolutional]\n[route]\nlayers=-1\n[yolo]\n").unwrap();
        assert!(matches!(
            derive_custom_cfg(&bad, &params),
            Err(Error::StructureMismatch(_))
        ));
        let no_yolo = parse_cfg("[net]\n[convolutional]\n").unwrap();
        assert!(matches!(
            derive_custom_cfg(&no_yolo, &params),
            Err(Error::StructureMismatch(_))
        ));
    }

    fn codes(diags: &[Diagnostic]) -> Vec<Code> {
        diags
            .iter()
            .filter(|d| d.is_error())
            .map(|d| d.code)
            .collect()
    }

    #[test]
    fn lint_reports_rule_violations() {
        let doc = parse_cfg(MINIMAL).unwrap();
        let diags = lint_cfg(&doc, 1);
        let errs = codes(&diags);
        assert!(errs.contains(&Code::ClassesMismatch));
        assert!(errs.contains(&Code::FiltersMismatch));
        assert!(!errs.contains(&Code::NotMultipleOf32));
        let filters = diags
            .iter()
            .find(|d| d.code == Code::FiltersMismatch)
            .unwrap();
        assert!(filters.message.contains("expected 18"));
        assert_eq!(filters.line, Some(16));
        assert!(diags
            .iter()
            .any(|d| d.code == Code::YoloCount && !d.is_error()));

        let odd = parse_cfg(
            "[net]\nbatch=8\nsubdivisions=16\nwidth=400\nheight=416\nmax_batches=5000\nsteps=5,5\n",
        )
        .unwrap();
        let diags = lint_cfg(&odd, 1);
        assert_eq!(
            codes(&diags),
            [
                Code::NotMultipleOf32,
                Code::MaxBatchesTooLow,
                Code::StepsNotIncreasing
            ]
        );
        assert_eq!(diags[0].line, Some(4));
        assert!(diags
            .iter()
            .any(|d| d.code == Code::BatchBelowSubdivisions && !d.is_error()));
    }

    #[test]
    fn lint_on_derived_is_clean() {
        let base = parse_cfg(MINIMAL).unwrap();
        let derived = derive_custom_cfg(&base, &TrainingParams::new(1).unwrap()).unwrap();
        assert!(codes(&lint_cfg(&derived, 1)).is_empty());
        assert_eq!(
            codes(&lint_cfg(&parse_cfg("").unwrap(), 1)),
            [Code::MissingNet]
        );
    }
}

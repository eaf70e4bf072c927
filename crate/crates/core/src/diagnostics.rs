//! Lint and validation findings shared by the dataset and cfg checkers.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Closed set of machine-readable finding codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "&'static str")]
pub enum Code {
    // dataset validation
    ClassOutOfRange,
    CoordOutOfRange,
    NonPositiveSize,
    EmptyLabels,
    DuplicateImageId,
    // cfg lint
    MissingNet,
    NotMultipleOf32,
    FiltersMismatch,
    ClassesMismatch,
    StepsNotIncreasing,
    MaxBatchesTooLow,
    BatchBelowSubdivisions,
    YoloCount,
    StructureMismatch,
    MissingKey,
    BadValue,
}

impl Code {
    pub const ALL: [Code; 16] = [
        Code::ClassOutOfRange,
        Code::CoordOutOfRange,
        Code::NonPositiveSize,
        Code::EmptyLabels,
        Code::DuplicateImageId,
        Code::MissingNet,
        Code::NotMultipleOf32,
        Code::FiltersMismatch,
        Code::ClassesMismatch,
        Code::StepsNotIncreasing,
        Code::MaxBatchesTooLow,
        Code::BatchBelowSubdivisions,
        Code::YoloCount,
        Code::StructureMismatch,
        Code::MissingKey,
        Code::BadValue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::ClassOutOfRange => "class-out-of-range",
            Code::CoordOutOfRange => "coord-out-of-range",
            Code::NonPositiveSize => "non-positive-size",
            Code::EmptyLabels => "empty-labels",
            Code::DuplicateImageId => "duplicate-image-id",
            Code::MissingNet => "missing-net",
            Code::NotMultipleOf32 => "not-multiple-of-32",
            Code::FiltersMismatch => "filters-mismatch",
            Code::ClassesMismatch => "classes-mismatch",
            Code::StepsNotIncreasing => "steps-not-increasing",
            Code::MaxBatchesTooLow => "max-batches-too-low",
            Code::BatchBelowSubdivisions => "batch-below-subdivisions",
            Code::YoloCount => "yolo-count",
            Code::StructureMismatch => "structure-mismatch",
            Code::MissingKey => "missing-key",
            Code::BadValue => "bad-value",
        }
    }
}

impl From<Code> for &'static str {
    fn from(code: Code) -> Self {
        code.as_str()
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub file: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: Code, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            file: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn warning(code: Code, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(code, message)
        }
    }

    pub fn at_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{file}:{line}: ")?,
            (Some(file), None) => write!(f, "{file}: ")?,
            (None, Some(line)) => write!(f, "line {line}: ")?,
            (None, None) => {}
        }
        write!(f, "{severity}[{}]: {}", self.code, self.message)
    }
}

/// True when any finding has error severity.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

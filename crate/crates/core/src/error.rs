use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: duplicate class name `{name}`")]
    DuplicateClass { name: String, line: usize },

    #[error("class list contains no class names")]
    NoClasses,

    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: `{value}` is not a valid number")]
    BadNumber { line: usize, value: String },

    #[error("line {line}: degenerate box (min must be strictly below max on both axes)")]
    DegenerateBox { line: usize },

    #[error("line {line}: {message}")]
    OutOfRange { line: usize, message: String },

    #[error("unknown class name `{0}`")]
    UnknownClass(String),

    #[error("box lies entirely outside the {width}x{height} image")]
    BoxOutsideImage { width: u32, height: u32 },

    #[error("unsupported image format (expected PNG or JPEG)")]
    UnsupportedFormat,

    #[error("truncated image header")]
    TruncatedHeader,

    #[error("invalid image size {width}x{height}")]
    InvalidImageSize { width: u32, height: u32 },

    #[error("cfg line {line}: {message}")]
    CfgSyntax { line: usize, message: String },

    #[error("cfg has no [net] section")]
    MissingNet,

    #[error("cfg structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("need at least 2 images to split, got {0}")]
    TooFewImages(usize),

    #[error("empty image id")]
    EmptyId,

    #[error("obj.data is missing key `{0}`")]
    MissingKey(&'static str),

    #[error("no darknet iteration summary lines found")]
    NoLossLines,

    #[error("loss series is empty")]
    EmptySeries,

    #[error("raw tensor value #{index} is not finite")]
    NonFinite { index: usize },

    #[error("tensor shape mismatch: {0}")]
    Shape(String),
}

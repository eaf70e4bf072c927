//! Class lists, OIDv4 absolute labels, and normalized YOLO labels.
//!
//! Absolute labels are `class_name x_min y_min x_max y_max` in pixels, as
//! written by the OIDv4 toolkit. YOLO labels are `class_id cx cy w h` with all
//! four coordinates normalized by the image dimensions.

mod dims;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dims::read_image_dims;
pub use validate::validate_dataset;

/// Slack allowed on normalized coordinates for floating-point rounding.
pub const EPSILON: f64 = 1e-6;

/// Ordered class names; a name's id is its position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl ClassMap {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = ClassMap {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for (i, name) in names.into_iter().enumerate() {
            let name = name.into();
            let trimmed = name.trim();
            if trimmed.is_empty() || trimmed.len() != name.len() {
                return Err(Error::InvalidParameter(format!(
                    "class name {name:?} is empty or has surrounding whitespace"
                )));
            }
            map.push(name, i + 1)?;
        }
        if map.names.is_empty() {
            return Err(Error::NoClasses);
        }
        Ok(map)
    }

    fn push(&mut self, name: String, line: usize) -> Result<()> {
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateClass { name, line });
        }
        self.index.insert(name.clone(), self.names.len() as u32);
        self.names.push(name);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Parses `classes.txt` / `obj.names`: one class per line, blank lines skipped.
pub fn parse_class_list(text: &str) -> Result<ClassMap> {
    let mut map = ClassMap {
        names: Vec::new(),
        index: HashMap::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        map.push(name.to_owned(), i + 1)?;
    }
    if map.names.is_empty() {
        return Err(Error::NoClasses);
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImageSize { width, height });
        }
        Ok(Self { width, height })
    }
}

/// Corner rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl PixelRect {
    pub fn is_within(&self, size: ImageSize) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= f64::from(size.width)
            && self.y_max <= f64::from(size.height)
    }
}

/// One OIDv4-style absolute annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsBox {
    pub class_name: String,
    pub rect: PixelRect,
}

/// Center/size box geometry normalized to the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            cx: (x1 + x2) / 2.0,
            cy: (y1 + y2) / 2.0,
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    /// `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clips the box to the unit square, keeping whatever part lies inside.
    pub fn clamp_unit(&self) -> Self {
        let (x1, y1, x2, y2) = self.corners();
        let x1 = x1.clamp(0.0, 1.0);
        let y1 = y1.clamp(0.0, 1.0);
        let x2 = x2.clamp(x1, 1.0);
        let y2 = y2.clamp(y1, 1.0);
        Self::from_corners(x1, y1, x2, y2)
    }

    /// Checks the YOLO label bounds; returns a description of the first violation.
    pub fn check_bounds(&self) -> std::result::Result<(), String> {
        let NormBox { cx, cy, w, h } = *self;
        let in_unit = |v: f64| (-EPSILON..=1.0 + EPSILON).contains(&v);
        if !(in_unit(cx) && in_unit(cy)) {
            return Err(format!("center ({cx}, {cy}) outside [0,1]"));
        }
        if !(w > 0.0 && h > 0.0) {
            return Err(format!("non-positive size ({w}, {h})"));
        }
        if w > 1.0 + EPSILON || h > 1.0 + EPSILON {
            return Err(format!("size ({w}, {h}) exceeds 1"));
        }
        let (x1, y1, x2, y2) = self.corners();
        if x1 < -EPSILON || y1 < -EPSILON || x2 > 1.0 + EPSILON || y2 > 1.0 + EPSILON {
            return Err(format!(
                "box ({cx}, {cy}, {w}, {h}) extends outside the unit square"
            ));
        }
        Ok(())
    }
}

/// One line of a YOLO label file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoloBox {
    pub class_id: u32,
    #[serde(flatten)]
    pub bbox: NormBox,
}

impl YoloBox {
    pub fn new(class_id: u32, cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            class_id,
            bbox: NormBox { cx, cy, w, h },
        }
    }
}

/// An image and its YOLO annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image_id: String,
    pub size: ImageSize,
    pub boxes: Vec<YoloBox>,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, fields)| !fields.is_empty())
}

fn parse_real(line: usize, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadNumber {
            line,
            value: value.to_owned(),
        }),
    }
}

/// Parses an OIDv4 absolute label file.
pub fn parse_abs_labels(text: &str) -> Result<Vec<AbsBox>> {
    content_lines(text)
        .map(|(line, fields)| {
            if fields.len() != 5 {
                return Err(Error::FieldCount {
                    line,
                    expected: 5,
                    found: fields.len(),
                });
            }
            let rect = PixelRect {
                x_min: parse_real(line, fields[1])?,
                y_min: parse_real(line, fields[2])?,
                x_max: parse_real(line, fields[3])?,
                y_max: parse_real(line, fields[4])?,
            };
            if rect.x_min >= rect.x_max || rect.y_min >= rect.y_max {
                return Err(Error::DegenerateBox { line });
            }
            Ok(AbsBox {
                class_name: fields[0].to_owned(),
                rect,
            })
        })
        .collect()
}

/// Normalizes an absolute box, clamping it to the image first.
pub fn abs_to_yolo(b: &AbsBox, size: ImageSize, classes: &ClassMap) -> Result<YoloBox> {
    let class_id = classes
        .id(&b.class_name)
        .ok_or_else(|| Error::UnknownClass(b.class_name.clone()))?;
    let (w, h) = (f64::from(size.width), f64::from(size.height));
    let x_min = b.rect.x_min.clamp(0.0, w);
    let x_max = b.rect.x_max.clamp(0.0, w);
    let y_min = b.rect.y_min.clamp(0.0, h);
    let y_max = b.rect.y_max.clamp(0.0, h);
    if x_min >= x_max || y_min >= y_max {
        return Err(Error::BoxOutsideImage {
            width: size.width,
            height: size.height,
        });
    }
    Ok(YoloBox {
        class_id,
        bbox: NormBox {
            cx: (x_min + x_max) / (2.0 * w),
            cy: (y_min + y_max) / (2.0 * h),
            w: (x_max - x_min) / w,
            h: (y_max - y_min) / h,
        },
    })
}

/// Inverse of [`abs_to_yolo`] for in-bounds boxes; returns `(class_id, rect)`.
pub fn yolo_to_abs(b: &YoloBox, size: ImageSize) -> (u32, PixelRect) {
    let (w, h) = (f64::from(size.width), f64::from(size.height));
    let (x1, y1, x2, y2) = b.bbox.corners();
    (
        b.class_id,
        PixelRect {
            x_min: x1 * w,
            y_min: y1 * h,
            x_max: x2 * w,
            y_max: y2 * h,
        },
    )
}

/// Writes a YOLO label file. Reals use the shortest round-tripping decimal form.
pub fn serialize_yolo_labels(boxes: &[YoloBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let NormBox { cx, cy, w, h } = b.bbox;
        writeln!(out, "{} {cx} {cy} {w} {h}", b.class_id).unwrap();
    }
    out
}

pub fn parse_yolo_labels(text: &str) -> Result<Vec<YoloBox>> {
    content_lines(text)
        .map(|(line, fields)| {
            if fields.len() != 5 {
                return Err(Error::FieldCount {
                    line,
                    expected: 5,
                    found: fields.len(),
                });
            }
            let class_id = match fields[0].parse::<i64>() {
                Ok(id) if id < 0 => {
                    return Err(Error::OutOfRange {
                        line,
                        message: format!("negative class id {id}"),
                    })
                }
                Ok(id) => u32::try_from(id).map_err(|_| Error::OutOfRange {
                    line,
                    message: format!("class id {id} too large"),
                })?,
                Err(_) => {
                    return Err(Error::BadNumber {
                        line,
                        value: fields[0].to_owned(),
                    })
                }
            };
            let bbox = NormBox {
                cx: parse_real(line, fields[1])?,
                cy: parse_real(line, fields[2])?,
                w: parse_real(line, fields[3])?,
                h: parse_real(line, fields[4])?,
            };
            bbox.check_bounds()
                .map_err(|message| Error::OutOfRange { line, message })?;
            Ok(YoloBox { class_id, bbox })
        })
        .collect()
}

/// Parses a `sizes.txt` sidecar: `<image_id> <width> <height>` per line.
pub fn parse_sizes(text: &str) -> Result<BTreeMap<String, ImageSize>> {
    let mut sizes = BTreeMap::new();
    for (line, fields) in content_lines(text) {
        if fields.len() != 3 {
            return Err(Error::FieldCount {
                line,
                expected: 3,
                found: fields.len(),
            });
        }
        let dim = |s: &str| {
            s.parse::<u32>().map_err(|_| Error::BadNumber {
                line,
                value: s.to_owned(),
            })
        };
        let size = ImageSize::new(dim(fields[1])?, dim(fields[2])?)?;
        if sizes.insert(fields[0].to_owned(), size).is_some() {
            return Err(Error::DuplicateId(fields[0].to_owned()));
        }
    }
    Ok(sizes)
}

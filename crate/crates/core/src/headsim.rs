//! Output geometry of the YOLOv4 detection head, and decoding raw head values
//! into detections.
//!
//! Each anchor slot of each grid cell holds `num_classes + 5` values laid out
//! as `[objectness, class_1 .. class_C, tx, ty, tw, th]`. Boxes decode as
//!
//! ```text
//! cx = (sigmoid(tx) + col) / cells_x     w = anchor_w * exp(tw) / input_w
//! cy = (sigmoid(ty) + row) / cells_y     h = anchor_h * exp(th) / input_h
//! confidence = sigmoid(objectness) * max_c sigmoid(class_c)
//! ```
//!
//! Raw tensors are exchanged as text: a header line
//! `cells_y cells_x per_scale values_per_anchor` followed by that many reals in
//! row-major order. A file may hold several such blocks, one per scale.

use std::fmt::Write as _;

use crate::annotations::NormBox;
use crate::error::{Error, Result};
use crate::evaluation::{iou, Detection};

/// Strides of the three head scales, finest first.
pub const STRIDES: [u32; 3] = [8, 16, 32];
pub const DEFAULT_ANCHORS_PER_SCALE: usize = 3;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// Anchors shipped with the stock yolov4.cfg.
pub const YOLOV4_ANCHORS: [(f64, f64); 9] = [
    (12.0, 16.0),
    (19.0, 36.0),
    (40.0, 28.0),
    (36.0, 75.0),
    (76.0, 55.0),
    (72.0, 146.0),
    (142.0, 110.0),
    (192.0, 243.0),
    (459.0, 401.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub w: f64,
    pub h: f64,
}

/// Anchor priors for all three scales; `per_scale` consecutive anchors each.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: Vec<Anchor>,
    per_scale: usize,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Anchor>, per_scale: usize) -> Result<Self> {
        if per_scale == 0 || anchors.len() != STRIDES.len() * per_scale {
            return Err(Error::InvalidParameter(format!(
                "expected {} anchors for {per_scale} per scale, got {}",
                STRIDES.len() * per_scale,
                anchors.len()
            )));
        }
        if anchors
            .iter()
            .any(|a| !(a.w > 0.0 && a.h > 0.0 && a.w.is_finite() && a.h.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "anchor dimensions must be positive".into(),
            ));
        }
        Ok(Self { anchors, per_scale })
    }

    pub fn yolov4() -> Self {
        let anchors = YOLOV4_ANCHORS
            .iter()
            .map(|&(w, h)| Anchor { w, h })
            .collect();
        Self::new(anchors, DEFAULT_ANCHORS_PER_SCALE).unwrap()
    }

    pub fn per_scale(&self) -> usize {
        self.per_scale
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Anchor slice for a stride: 8 takes the smallest priors, 32 the largest.
    pub fn for_stride(&self, stride: u32) -> Result<&[Anchor]> {
        let scale = STRIDES
            .iter()
            .position(|&s| s == stride)
            .ok_or_else(|| Error::InvalidParameter(format!("unsupported stride {stride}")))?;
        Ok(&self.anchors[scale * self.per_scale..(scale + 1) * self.per_scale])
    }
}

/// Reads darknet-style anchors (`12, 16, 19, 36, ...`), optionally prefixed
/// by `anchors =`. Numbers pair up as `(w, h)`.
pub fn parse_anchors(text: &str, per_scale: usize) -> Result<AnchorSet> {
    let body = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| match l.split_once('=') {
            Some((key, rest)) if key.trim() == "anchors" => rest,
            _ => l,
        })
        .collect::<Vec<_>>()
        .join(" ");
    let values = body
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>().map_err(|_| Error::BadNumber {
                line: i + 1,
                value: t.to_owned(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() % 2 != 0 {
        return Err(Error::InvalidParameter(
            "anchor list has an odd number of values".into(),
        ));
    }
    let anchors = values
        .chunks(2)
        .map(|p| Anchor { w: p[0], h: p[1] })
        .collect();
    AnchorSet::new(anchors, per_scale)
}

/// Per-anchor value layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionLayout {
    pub num_classes: usize,
}

impl PredictionLayout {
    pub const OBJECTNESS: usize = 0;
    pub const FIRST_CLASS: usize = 1;

    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 1".into(),
            ));
        }
        Ok(Self { num_classes })
    }

    pub fn from_values_per_anchor(values: usize) -> Result<Self> {
        Self::new(values.saturating_sub(5))
    }

    pub fn values_per_anchor(&self) -> usize {
        self.num_classes + 5
    }

    /// Offset of `tx`; `ty`, `tw`, `th` follow.
    pub fn box_offset(&self) -> usize {
        Self::FIRST_CLASS + self.num_classes
    }
}

/// `(num_classes + 5) × num_anchors` values per grid cell.
pub fn prediction_vector_len(num_classes: usize, num_anchors: usize) -> Result<usize> {
    if num_anchors == 0 {
        return Err(Error::InvalidParameter(
            "num_anchors must be at least 1".into(),
        ));
    }
    Ok(PredictionLayout::new(num_classes)?.values_per_anchor() * num_anchors)
}

pub fn grid_dims(input_w: u32, input_h: u32, stride: u32) -> Result<(u32, u32)> {
    if !STRIDES.contains(&stride) {
        return Err(Error::InvalidParameter(format!(
            "stride {stride} is not one of {STRIDES:?}"
        )));
    }
    if input_w == 0
        || input_h == 0
        || !input_w.is_multiple_of(stride)
        || !input_h.is_multiple_of(stride)
    {
        return Err(Error::InvalidParameter(format!(
            "input {input_w}x{input_h} is not divisible by stride {stride}"
        )));
    }
    Ok((input_w / stride, input_h / stride))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub stride: u32,
    pub cells_x: u32,
    pub cells_y: u32,
}

impl GridSpec {
    pub fn for_input(input_w: u32, input_h: u32, stride: u32) -> Result<Self> {
        let (cells_x, cells_y) = grid_dims(input_w, input_h, stride)?;
        Ok(Self {
            stride,
            cells_x,
            cells_y,
        })
    }

    /// The three head grids for a network input, finest first.
    pub fn all_scales(input_w: u32, input_h: u32) -> Result<[Self; 3]> {
        Ok([
            Self::for_input(input_w, input_h, STRIDES[0])?,
            Self::for_input(input_w, input_h, STRIDES[1])?,
            Self::for_input(input_w, input_h, STRIDES[2])?,
        ])
    }
}

/// One scale's raw head output.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScaleOutput {
    pub grid: GridSpec,
    pub anchors: Vec<Anchor>,
    pub layout: PredictionLayout,
    pub values: Vec<f64>,
}

impl RawScaleOutput {
    pub fn new(
        grid: GridSpec,
        anchors: Vec<Anchor>,
        layout: PredictionLayout,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = grid.cells_y as usize
            * grid.cells_x as usize
            * anchors.len()
            * layout.values_per_anchor();
        if anchors.is_empty() || values.len() != expected {
            return Err(Error::Shape(format!(
                "{}x{} grid with {} anchors and {} values per anchor needs {expected} values, got {}",
                grid.cells_y,
                grid.cells_x,
                anchors.len(),
                layout.values_per_anchor(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            anchors,
            layout,
            values,
        })
    }

    /// Builds a scale from a parsed text block; the stride is inferred from
    /// the input size.
    pub fn from_block(
        block: &RawTensorBlock,
        input_w: u32,
        input_h: u32,
        anchors: &AnchorSet,
    ) -> Result<Self> {
        if block.cells_x == 0
            || block.cells_y == 0
            || !input_w.is_multiple_of(block.cells_x)
            || !input_h.is_multiple_of(block.cells_y)
            || input_w / block.cells_x != input_h / block.cells_y
        {
            return Err(Error::Shape(format!(
                "{}x{} grid does not tile a {input_w}x{input_h} input with a square stride",
                block.cells_y, block.cells_x
            )));
        }
        if block.per_scale != anchors.per_scale() {
            return Err(Error::Shape(format!(
                "tensor has {} anchors per cell, anchor set has {}",
                block.per_scale,
                anchors.per_scale()
            )));
        }
        let stride = input_w / block.cells_x;
        let grid = GridSpec::for_input(input_w, input_h, stride)?;
        let layout = PredictionLayout::from_values_per_anchor(block.values_per_anchor)?;
        Self::new(
            grid,
            anchors.for_stride(stride)?.to_vec(),
            layout,
            block.values.clone(),
        )
    }

    fn slot(&self, row: usize, col: usize, anchor: usize) -> &[f64] {
        let vpa = self.layout.values_per_anchor();
        let start = ((row * self.grid.cells_x as usize + col) * self.anchors.len() + anchor) * vpa;
        &self.values[start..start + vpa]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A decoded anchor slot, with the box center before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSlot {
    pub row: usize,
    pub col: usize,
    pub anchor: usize,
    pub raw_center: (f64, f64),
    pub detection: Detection,
}

/// Decodes every slot of every cell; boxes are clamped to the unit square.
pub fn decode_scale_slots(
    raw: &RawScaleOutput,
    input_size: (u32, u32),
) -> Result<Vec<DecodedSlot>> {
    if let Some(index) = raw.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (input_w, input_h) = (f64::from(input_size.0), f64::from(input_size.1));
    if input_w <= 0.0 || input_h <= 0.0 {
        return Err(Error::InvalidParameter(
            "input size must be positive".into(),
        ));
    }
    let (cells_x, cells_y) = (raw.grid.cells_x as usize, raw.grid.cells_y as usize);
    let layout = raw.layout;
    let mut out = Vec::with_capacity(cells_x * cells_y * raw.anchors.len());
    for row in 0..cells_y {
        for col in 0..cells_x {
            for (a, anchor) in raw.anchors.iter().enumerate() {
                let v = raw.slot(row, col, a);
                let (class_id, class_prob) = v[PredictionLayout::FIRST_CLASS..layout.box_offset()]
                    .iter()
                    .map(|&s| sigmoid(s))
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, p)| {
                        if p > best.1 {
                            (c, p)
                        } else {
                            best
                        }
                    });
                let t = &v[layout.box_offset()..];
                let cx = (sigmoid(t[0]) + col as f64) / cells_x as f64;
                let cy = (sigmoid(t[1]) + row as f64) / cells_y as f64;
                let w = anchor.w * t[2].exp() / input_w;
                let h = anchor.h * t[3].exp() / input_h;
                out.push(DecodedSlot {
                    row,
                    col,
                    anchor: a,
                    raw_center: (cx, cy),
                    detection: Detection {
                        image_id: String::new(),
                        class_id: class_id as u32,
                        confidence: sigmoid(v[PredictionLayout::OBJECTNESS]) * class_prob,
                        bbox: NormBox::new(cx, cy, w, h).clamp_unit(),
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Decodes a scale into one detection per anchor slot, unthresholded.
pub fn decode_scale(raw: &RawScaleOutput, input_size: (u32, u32)) -> Result<Vec<Detection>> {
    Ok(decode_scale_slots(raw, input_size)?
        .into_iter()
        .map(|s| s.detection)
        .collect())
}

/// Greedy per-class non-maximum suppression.
///
/// Candidates are visited by confidence (descending), then class id, then
/// input position. A candidate is dropped when it overlaps an already kept
/// detection of the same class with IoU at or above `iou_threshold`.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(dets[a].class_id.cmp(&dets[b].class_id))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept.iter().any(|&k| {
            dets[k].class_id == dets[i].class_id
                && dets[k].image_id == dets[i].image_id
                && iou(&dets[k].bbox, &dets[i].bbox) >= iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

/// One header-plus-values block of the raw tensor text format.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensorBlock {
    pub cells_y: u32,
    pub cells_x: u32,
    pub per_scale: usize,
    pub values_per_anchor: usize,
    pub values: Vec<f64>,
}

impl RawTensorBlock {
    pub fn len(&self) -> usize {
        self.cells_y as usize * self.cells_x as usize * self.per_scale * self.values_per_anchor
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<&RawScaleOutput> for RawTensorBlock {
    fn from(raw: &RawScaleOutput) -> Self {
        Self {
            cells_y: raw.grid.cells_y,
            cells_x: raw.grid.cells_x,
            per_scale: raw.anchors.len(),
            values_per_anchor: raw.layout.values_per_anchor(),
            values: raw.values.clone(),
        }
    }
}

pub fn parse_raw_tensors(text: &str) -> Result<Vec<RawTensorBlock>> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
        .peekable();
    let mut blocks = Vec::new();
    while let Some(&(line, _)) = tokens.peek() {
        let mut header = [0usize; 4];
        for slot in header.iter_mut() {
            let (l, tok) = tokens
                .next()
                .ok_or_else(|| Error::Shape(format!("line {line}: truncated tensor header")))?;
            if l != line {
                return Err(Error::Shape(format!(
                    "line {line}: tensor header needs 4 fields on one line"
                )));
            }
            *slot = tok
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| {
                    Error::Shape(format!("line {l}: bad tensor header field `{tok}`"))
                })?;
        }
        let [cells_y, cells_x, per_scale, values_per_anchor] = header;
        if values_per_anchor < 6 {
            return Err(Error::Shape(format!(
                "line {line}: values_per_anchor must be at least 6"
            )));
        }
        let to_u32 = |v: usize| {
            u32::try_from(v).map_err(|_| Error::Shape(format!("line {line}: grid too large")))
        };
        let mut block = RawTensorBlock {
            cells_y: to_u32(cells_y)?,
            cells_x: to_u32(cells_x)?,
            per_scale,
            values_per_anchor,
            values: Vec::new(),
        };
        let n = block.len();
        block.values.reserve(n);
        for _ in 0..n {
            let (l, tok) = tokens.next().ok_or_else(|| {
                Error::Shape(format!("tensor block at line {line} needs {n} values"))
            })?;
            let v = tok.parse::<f64>().map_err(|_| Error::BadNumber {
                line: l,
                value: tok.to_owned(),
            })?;
            block.values.push(v);
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Writes one block; each anchor slot's values go on their own line.
pub fn serialize_raw_tensor(block: &RawTensorBlock) -> String {
    let mut out = format!(
        "{} {} {} {}\n",
        block.cells_y, block.cells_x, block.per_scale, block.values_per_anchor
    );
    for slot in block.values.chunks(block.values_per_anchor) {
        let line: Vec<String> = slot.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_lengths() {
        assert_eq!(prediction_vector_len(80, 9).unwrap(), 765);
        assert_eq!(prediction_vector_len(1, 9).unwrap(), 54);
        assert!(prediction_vector_len(0, 9).is_err());
        assert!(prediction_vector_len(3, 0).is_err());
        for anchors in 1..20 {
            assert_eq!(prediction_vector_len(80, anchors).unwrap(), 85 * anchors);
        }
    }

    #[test]
    fn grids() {
        assert_eq!(grid_dims(416, 416, 32).unwrap(), (13, 13));
        assert_eq!(grid_dims(416, 416, 16).unwrap(), (26, 26));
        assert_eq!(grid_dims(416, 416, 8).unwrap(), (52, 52));
        assert_eq!(grid_dims(608, 416, 32).unwrap(), (19, 13));
        assert!(grid_dims(417, 417, 32).is_err());
        assert!(grid_dims(416, 416, 4).is_err());
        let scales = GridSpec::all_scales(416, 416).unwrap();
        assert_eq!(scales.map(|g| g.cells_x), [52, 26, 13]);
    }

    #[test]
    fn anchors() {
        let set = AnchorSet::yolov4();
        assert_eq!(set.anchors().len(), 9);
        assert_eq!(set.for_stride(8).unwrap()[0], Anchor { w: 12.0, h: 16.0 });
        assert_eq!(
            set.for_stride(32).unwrap()[2],
            Anchor { w: 459.0, h: 401.0 }
        );
        let parsed = parse_anchors(
            "anchors = 12, 16, 19, 36, 40, 28, 36, 75, 76, 55, 72, 146, 142, 110, 192, 243, 459, 401\n",
            3,
        )
        .unwrap();
        assert_eq!(parsed, set);
        assert!(parse_anchors("1 2 3", 1).is_err());
        assert!(parse_anchors("1 2 3 4", 1).is_err());
        assert!(parse_anchors("1 2 3 4 5 -6", 1).is_err());
        assert_eq!(parse_anchors("1,2\n3,4\n5,6", 1).unwrap().per_scale(), 1);
    }

    fn unit_scale(values: Vec<f64>, input: u32) -> RawScaleOutput {
        let grid = GridSpec::for_input(input, input, 32).unwrap();
        RawScaleOutput::new(
            grid,
            vec![Anchor {
                w: f64::from(input),
                h: f64::from(input),
            }],
            PredictionLayout::new(1).unwrap(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn all_zero_decodes_to_full_box() {
        let raw = unit_scale(vec![0.0; 6], 32);
        let dets = decode_scale(&raw, (32, 32)).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, NormBox::new(0.5, 0.5, 1.0, 1.0));
        assert_eq!(dets[0].confidence, 0.25);
        assert_eq!(dets[0].class_id, 0);
    }

    #[test]
    fn saturated_offset_reaches_cell_edge() {
        let grid = GridSpec::for_input(64, 64, 32).unwrap();
        let layout = PredictionLayout::new(2).unwrap();
        let mut values = vec![0.0; 4 * 7];
        // cell (row 1, col 0): tx = 20, class 1 stronger
        let base = 2 * 7;
        values[base + 2] = 3.0;
        values[base + 3] = 20.0;
        values[base + 5] = -3.0;
        let raw =
            RawScaleOutput::new(grid, vec![Anchor { w: 8.0, h: 8.0 }], layout, values).unwrap();
        let slots = decode_scale_slots(&raw, (64, 64)).unwrap();
        let s = &slots[2];
        assert_eq!((s.row, s.col), (1, 0));
        assert!((s.raw_center.0 - 0.5).abs() < 1e-6);
        assert!((s.raw_center.1 - 0.75).abs() < 1e-12);
        assert_eq!(s.detection.class_id, 1);
    }

    #[test]
    fn decode_rejects_non_finite() {
        let mut values = vec![0.0; 6];
        values[4] = f64::NAN;
        let raw = unit_scale(values, 32);
        assert_eq!(
            decode_scale(&raw, (32, 32)),
            Err(Error::NonFinite { index: 4 })
        );
    }

    #[test]
    fn raw_shape_checked() {
        let grid = GridSpec::for_input(32, 32, 32).unwrap();
        assert!(RawScaleOutput::new(
            grid,
            vec![Anchor { w: 1.0, h: 1.0 }],
            PredictionLayout::new(1).unwrap(),
            vec![0.0; 5]
        )
        .is_err());
    }

    fn d(class_id: u32, confidence: f64, bbox: NormBox) -> Detection {
        Detection {
            image_id: "x".into(),
            class_id,
            confidence,
            bbox,
        }
    }

    #[test]
    fn nms_examples() {
        let a = NormBox::new(0.5, 0.5, 0.2, 0.2);
        let kept = nms(&[d(0, 0.8, a), d(0, 0.9, a)], DEFAULT_NMS_IOU);
        assert_eq!(kept, [d(0, 0.9, a)]);

        let b = NormBox::new(0.1, 0.1, 0.1, 0.1);
        assert_eq!(nms(&[d(0, 0.5, a), d(0, 0.6, b)], 0.45).len(), 2);
        // different classes never suppress each other
        assert_eq!(nms(&[d(0, 0.5, a), d(1, 0.6, a)], 0.45).len(), 2);
        assert!(nms(&[], 0.45).is_empty());
    }

    #[test]
    fn tensor_text_round_trip() {
        let text = "1 1 1 6\n0 0 0 0 0 0\n2 1 1 6\n0.5 -1 2 3 4 5\n1 1 1 1 1 1\n";
        let blocks = parse_raw_tensors(text).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[1].values[1], -1.0);
        let again: String = blocks.iter().map(serialize_raw_tensor).collect();
        assert_eq!(parse_raw_tensors(&again).unwrap(), blocks);
        assert_eq!(serialize_raw_tensor(&blocks[0]), "1 1 1 6\n0 0 0 0 0 0\n");
    }

    #[test]
    fn tensor_text_errors() {
        assert!(parse_raw_tensors("1 1 1\n6 0 0 0 0 0 0").is_err());
        assert!(parse_raw_tensors("1 1 1 6\n0 0 0").is_err());
        assert!(parse_raw_tensors("1 1 1 5\n0 0 0 0 0").is_err());
        assert!(parse_raw_tensors("1 x 1 6\n").is_err());
        assert!(parse_raw_tensors("1 1 1 6\n0 0 0 0 0 z").is_err());
        assert!(parse_raw_tensors("").unwrap().is_empty());
    }

    #[test]
    fn block_to_scale_infers_stride() {
        let set = AnchorSet::yolov4();
        let block = RawTensorBlock {
            cells_y: 13,
            cells_x: 13,
            per_scale: 3,
            values_per_anchor: 6,
            values: vec![0.0; 13 * 13 * 3 * 6],
        };
        let raw = RawScaleOutput::from_block(&block, 416, 416, &set).unwrap();
        assert_eq!(raw.grid.stride, 32);
        assert_eq!(raw.anchors[0], Anchor { w: 142.0, h: 110.0 });
        assert!(RawScaleOutput::from_block(&block, 400, 416, &set).is_err());
        assert!(RawScaleOutput::from_block(&block, 13 * 4, 13 * 4, &set).is_err());
    }
}

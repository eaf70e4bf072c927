//! Detection matching, IoU, AP/mAP, confidence thresholds, and training-loss
//! analysis.
//!
//! Ranking is global per class: all detections of a class across every image
//! are sorted by confidence before matching. A detection is a true positive
//! when its best-overlapping still-unmatched ground truth of the same class in
//! the same image reaches the IoU threshold. AP is the exact area under the
//! precision envelope (all-point interpolation).

mod loss;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::annotations::{ClassMap, LabeledImage, NormBox, YoloBox, EPSILON};
use crate::error::{Error, Result};

pub use loss::{
    emit_loss_table, loss_verdict, parse_training_log, LossPoint, LossSeries, LossVerdict,
    DEFAULT_LOSS_THRESHOLD,
};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Test-time confidence cut-off used by `darknet detector test -thresh 0.3`.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    pub confidence: f64,
    pub bbox: NormBox,
}

/// Ground-truth boxes keyed by image id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSet {
    images: BTreeMap<String, Vec<YoloBox>>,
}

impl GroundTruthSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: impl Into<String>, boxes: Vec<YoloBox>) -> Result<()> {
        let image_id = image_id.into();
        if self.images.contains_key(&image_id) {
            return Err(Error::DuplicateId(image_id));
        }
        self.images.insert(image_id, boxes);
        Ok(())
    }

    pub fn from_images(images: &[LabeledImage]) -> Result<Self> {
        let mut set = Self::new();
        for image in images {
            set.insert(image.image_id.clone(), image.boxes.clone())?;
        }
        Ok(set)
    }

    pub fn get(&self, image_id: &str) -> &[YoloBox] {
        self.images.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[YoloBox])> {
        self.images.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn count_class(&self, class_id: u32) -> usize {
        self.images
            .values()
            .flatten()
            .filter(|b| b.class_id == class_id)
            .count()
    }
}

/// Intersection over union of two normalized boxes; 0 when disjoint.
pub fn iou(a: &NormBox, b: &NormBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    // areas from the same corners as the intersection, so identical boxes give exactly 1
    let area_a = (ax2 - ax1) * (ay2 - ay1);
    let area_b = (bx2 - bx1) * (by2 - by1);
    let union = area_a + area_b - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Keeps detections with `confidence >= thresh`, preserving order.
pub fn apply_threshold(dets: &[Detection], thresh: f64) -> Vec<Detection> {
    dets.iter()
        .filter(|d| d.confidence >= thresh)
        .cloned()
        .collect()
}

/// Matching outcome for one detection, in confidence rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedMatch {
    /// Index into the detection slice passed to [`match_detections`].
    pub index: usize,
    pub true_positive: bool,
}

fn rank_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then_with(|| dets[a].image_id.cmp(&dets[b].image_id))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy confidence-ordered matching; each ground truth matches at most once.
pub fn match_detections(
    dets: &[Detection],
    gts: &GroundTruthSet,
    iou_threshold: f64,
) -> Vec<RankedMatch> {
    let mut matched: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    rank_order(dets)
        .into_iter()
        .map(|index| {
            let det = &dets[index];
            let truths = gts.get(&det.image_id);
            let used = matched
                .entry(det.image_id.as_str())
                .or_insert_with(|| vec![false; truths.len()]);
            let mut best: Option<(usize, f64)> = None;
            for (g, truth) in truths.iter().enumerate() {
                if used[g] || truth.class_id != det.class_id {
                    continue;
                }
                let overlap = iou(&det.bbox, &truth.bbox);
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((g, overlap));
                }
            }
            let true_positive = match best {
                Some((g, overlap)) if overlap >= iou_threshold => {
                    used[g] = true;
                    true
                }
                _ => false,
            };
            RankedMatch {
                index,
                true_positive,
            }
        })
        .collect()
}

/// All-point interpolated AP over a confidence-ranked TP/FP list.
pub fn average_precision(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(flags.len() + 2);
    let mut precision = Vec::with_capacity(flags.len() + 2);
    recall.push(0.0);
    precision.push(0.0);
    let mut tp = 0usize;
    for (i, &hit) in flags.iter().enumerate() {
        tp += usize::from(hit);
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);

    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..recall.len() {
        if recall[i] != recall[i - 1] {
            ap += (recall[i] - recall[i - 1]) * precision[i];
        }
    }
    ap.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub class_id: u32,
    pub name: String,
    pub ap: f64,
    pub num_gt: usize,
    pub num_det: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub per_class: Vec<ClassAp>,
    /// Mean AP over classes with at least one ground truth.
    pub map: f64,
}

impl EvalReport {
    pub fn scored_classes(&self) -> impl Iterator<Item = &ClassAp> {
        self.per_class.iter().filter(|c| c.num_gt > 0)
    }
}

pub fn mean_average_precision(
    dets: &[Detection],
    gts: &GroundTruthSet,
    classes: &ClassMap,
    iou_threshold: f64,
) -> EvalReport {
    let per_class: Vec<ClassAp> = (0..classes.len() as u32)
        .map(|class_id| {
            let class_dets: Vec<Detection> = dets
                .iter()
                .filter(|d| d.class_id == class_id)
                .cloned()
                .collect();
            let num_gt = gts.count_class(class_id);
            let flags: Vec<bool> = match_detections(&class_dets, gts, iou_threshold)
                .into_iter()
                .map(|m| m.true_positive)
                .collect();
            ClassAp {
                class_id,
                name: classes.name(class_id).unwrap_or_default().to_owned(),
                ap: average_precision(&flags, num_gt),
                num_gt,
                num_det: class_dets.len(),
            }
        })
        .collect();
    let scored: Vec<f64> = per_class
        .iter()
        .filter(|c| c.num_gt > 0)
        .map(|c| c.ap)
        .collect();
    let map = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    EvalReport {
        iou_threshold,
        per_class,
        map,
    }
}

/// Parses `<image_id> <class_id> <confidence> <cx> <cy> <w> <h>` lines.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>> {
    let mut dets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 7 {
            return Err(Error::FieldCount {
                line,
                expected: 7,
                found: fields.len(),
            });
        }
        let real = |s: &str| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::BadNumber {
                line,
                value: s.to_owned(),
            }),
        };
        let class_id = fields[1].parse::<u32>().map_err(|_| Error::BadNumber {
            line,
            value: fields[1].to_owned(),
        })?;
        let confidence = real(fields[2])?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::OutOfRange {
                line,
                message: format!("confidence {confidence} outside [0,1]"),
            });
        }
        let bbox = NormBox::new(
            real(fields[3])?,
            real(fields[4])?,
            real(fields[5])?,
            real(fields[6])?,
        );
        let (x1, y1, x2, y2) = bbox.corners();
        if !(bbox.w >= 0.0 && bbox.h >= 0.0)
            || x1 < -EPSILON
            || y1 < -EPSILON
            || x2 > 1.0 + EPSILON
            || y2 > 1.0 + EPSILON
        {
            return Err(Error::OutOfRange {
                line,
                message: "detection box outside the unit square".into(),
            });
        }
        dets.push(Detection {
            image_id: fields[0].to_owned(),
            class_id,
            confidence,
            bbox,
        });
    }
    Ok(dets)
}

pub fn serialize_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        let NormBox { cx, cy, w, h } = d.bbox;
        writeln!(
            out,
            "{} {} {} {cx} {cy} {w} {h}",
            d.image_id, d.class_id, d.confidence
        )
        .unwrap();
    }
    out
}

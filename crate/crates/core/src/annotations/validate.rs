use std::collections::HashSet;

use super::{ClassMap, LabeledImage};
use crate::diagnostics::{Code, Diagnostic};

/// Checks labels against the class map. Errors for bad ids and geometry,
/// warnings for background images and repeated image ids.
pub fn validate_dataset(images: &[LabeledImage], classes: &ClassMap) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    for image in images {
        if !seen.insert(image.image_id.as_str()) {
            diags.push(
                Diagnostic::warning(
                    Code::DuplicateImageId,
                    format!("image id `{}` appears more than once", image.image_id),
                )
                .at_file(&image.image_id),
            );
        }
        if image.boxes.is_empty() {
            diags.push(
                Diagnostic::warning(Code::EmptyLabels, "image has no boxes")
                    .at_file(&image.image_id),
            );
        }
        for (i, b) in image.boxes.iter().enumerate() {
            let at = |d: Diagnostic| d.at_file(&image.image_id).at_line(i + 1);
            if b.class_id as usize >= classes.len() {
                diags.push(at(Diagnostic::error(
                    Code::ClassOutOfRange,
                    format!("class id {} but only {} classes", b.class_id, classes.len()),
                )));
            }
            if !(b.bbox.w > 0.0 && b.bbox.h > 0.0) {
                diags.push(at(Diagnostic::error(
                    Code::NonPositiveSize,
                    format!("box size ({}, {}) must be positive", b.bbox.w, b.bbox.h),
                )));
            } else if let Err(message) = b.bbox.check_bounds() {
                diags.push(at(Diagnostic::error(Code::CoordOutOfRange, message)));
            }
        }
    }
    diags
}

//! Tooling for the custom YOLOv4 training workflow around darknet.
//!
//! The library covers the parts of the workflow that can be checked by a
//! machine: converting OIDv4 annotations to YOLO labels, splitting datasets
//! and writing darknet manifests, deriving and linting training cfgs,
//! modelling the detection head's output geometry, and evaluating detections
//! (IoU, AP, mAP, training-loss curves).

pub mod annotations;
pub mod cfggen;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod headsim;
pub mod manifest;

pub use diagnostics::{Code, Diagnostic, Severity};
pub use error::{Error, Result};

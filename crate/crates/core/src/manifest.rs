//! Train/validation splitting and the darknet manifest files
//! (`obj.names`, `obj.data`, `train.txt`, `test.txt`).

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotations::ClassMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub const MIN_FRACTION: f64 = 0.05;
    pub const MAX_FRACTION: f64 = 0.5;

    pub fn new(val_fraction: f64, seed: u64) -> Result<Self> {
        if !(Self::MIN_FRACTION..=Self::MAX_FRACTION).contains(&val_fraction) {
            return Err(Error::InvalidParameter(format!(
                "validation fraction {val_fraction} outside [{}, {}]",
                Self::MIN_FRACTION,
                Self::MAX_FRACTION
            )));
        }
        Ok(Self { val_fraction, seed })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Validation-set size: `fraction × total` rounded half-up, at least 1.
pub fn validation_size(total: usize, fraction: f64) -> usize {
    // the nudge keeps exact halves such as 0.3 × 5 from rounding down
    let n = (fraction * total as f64 + 0.5 + 1e-9).floor() as usize;
    n.clamp(1, total.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

/// Seeded shuffle then prefix take. The result does not depend on input order.
pub fn split_dataset(image_ids: &[String], spec: &SplitSpec) -> Result<Split> {
    let spec = SplitSpec::new(spec.val_fraction, spec.seed)?;
    if image_ids.len() < 2 {
        return Err(Error::TooFewImages(image_ids.len()));
    }
    let mut seen = HashSet::with_capacity(image_ids.len());
    for id in image_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }

    let mut ids = image_ids.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);

    let n_val = validation_size(ids.len(), spec.val_fraction);
    let mut train = ids.split_off(n_val);
    let mut val = ids;
    train.sort();
    val.sort();
    Ok(Split { train, val })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub train_list: String,
    pub valid_list: String,
    pub names_file: String,
    pub backup_dir: String,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self {
            train_list: "data/train.txt".into(),
            valid_list: "data/test.txt".into(),
            names_file: "data/obj.names".into(),
            backup_dir: "/mydrive/yolov4/backup".into(),
        }
    }
}

impl DataPaths {
    pub fn validated(self) -> Result<Self> {
        for (key, v) in [
            ("train", &self.train_list),
            ("valid", &self.valid_list),
            ("names", &self.names_file),
            ("backup", &self.backup_dir),
        ] {
            if v.trim().is_empty() {
                return Err(Error::InvalidParameter(format!("{key} path is empty")));
            }
        }
        Ok(self)
    }
}

pub fn generate_obj_names(classes: &ClassMap) -> String {
    let mut out = String::new();
    for name in classes.names() {
        out.push_str(name);
        out.push('\n');
    }
    out
}

pub fn generate_obj_data(num_classes: u32, paths: &DataPaths) -> String {
    format!(
        "classes = {num_classes}\ntrain = {}\nvalid = {}\nnames = {}\nbackup = {}\n",
        paths.train_list, paths.valid_list, paths.names_file, paths.backup_dir
    )
}

/// Reads `obj.data`; keys may appear in any order.
pub fn parse_obj_data(text: &str) -> Result<(u32, DataPaths)> {
    let mut classes = None;
    let (mut train, mut valid, mut names, mut backup) = (None, None, None, None);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let value = value.trim().to_owned();
        match key.trim() {
            "classes" => {
                classes = Some(value.parse::<u32>().map_err(|_| {
                    Error::InvalidParameter(format!("classes = {value} is not an integer"))
                })?)
            }
            "train" => train = Some(value),
            "valid" => valid = Some(value),
            "names" => names = Some(value),
            "backup" => backup = Some(value),
            _ => {}
        }
    }
    let classes = classes.ok_or(Error::MissingKey("classes"))?;
    let paths = DataPaths {
        train_list: train.ok_or(Error::MissingKey("train"))?,
        valid_list: valid.ok_or(Error::MissingKey("valid"))?,
        names_file: names.ok_or(Error::MissingKey("names"))?,
        backup_dir: backup.ok_or(Error::MissingKey("backup"))?,
    };
    Ok((classes, paths))
}

/// One `<prefix>/<id>.<extension>` line per image, in input order.
pub fn generate_image_list(image_ids: &[String], prefix: &str, extension: &str) -> Result<String> {
    let prefix = prefix.trim_end_matches('/');
    let extension = extension.trim_start_matches('.');
    let mut out = String::new();
    for id in image_ids {
        if id.is_empty() {
            return Err(Error::EmptyId);
        }
        if prefix.is_empty() {
            writeln!(out, "{id}.{extension}").unwrap();
        } else {
            writeln!(out, "{prefix}/{id}.{extension}").unwrap();
        }
    }
    Ok(out)
}

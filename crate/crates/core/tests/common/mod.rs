//! Reference implementations used as oracles by the integration and
//! acceptance tests. Deliberately naive: no shared code with the library
//! beyond its plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use yolokit::evaluation::Detection;

pub type Q = Ratio<i128>;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn q(n: i128) -> Q {
    Q::from_integer(n)
}

/// Exact value of a plain decimal literal such as `0.758` or `12`.
pub fn decimal(s: &str) -> Q {
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: i128 = format!("{int}{frac}").parse().expect("decimal literal");
    let v = Q::new(digits, 10i128.pow(frac.len() as u32));
    if neg {
        -v
    } else {
        v
    }
}

pub fn to_f64(v: Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// Center-format box with exact coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QBox {
    pub cx: Q,
    pub cy: Q,
    pub w: Q,
    pub h: Q,
}

impl QBox {
    pub fn parse(fields: &[&str]) -> Self {
        Self {
            cx: decimal(fields[0]),
            cy: decimal(fields[1]),
            w: decimal(fields[2]),
            h: decimal(fields[3]),
        }
    }
}

pub fn qiou(a: &QBox, b: &QBox) -> Q {
    let two = q(2);
    let lo = |c: Q, s: Q| c - s / two;
    let hi = |c: Q, s: Q| c + s / two;
    let iw = hi(a.cx, a.w).min(hi(b.cx, b.w)) - lo(a.cx, a.w).max(lo(b.cx, b.w));
    let ih = hi(a.cy, a.h).min(hi(b.cy, b.h)) - lo(a.cy, a.h).max(lo(b.cy, b.h));
    if iw <= q(0) || ih <= q(0) {
        return q(0);
    }
    let inter = iw * ih;
    inter / (a.w * a.h + b.w * b.h - inter)
}

#[derive(Debug, Clone)]
pub struct QDet {
    pub image: String,
    pub class: u32,
    pub conf: Q,
    pub bbox: QBox,
}

#[derive(Debug, Clone)]
pub struct QGt {
    pub class: u32,
    pub bbox: QBox,
}

pub fn parse_qdets(text: &str) -> Vec<QDet> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            QDet {
                image: f[0].to_owned(),
                class: f[1].parse().unwrap(),
                conf: decimal(f[2]),
                bbox: QBox::parse(&f[3..7]),
            }
        })
        .collect()
}

/// Reads every `*.txt` in a directory of YOLO labels.
pub fn load_qgts(dir: &Path) -> BTreeMap<String, Vec<QGt>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let id = path.file_stem().unwrap().to_str().unwrap().to_owned();
        let text = std::fs::read_to_string(&path).unwrap();
        let gts = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                QGt {
                    class: f[0].parse().unwrap(),
                    bbox: QBox::parse(&f[1..5]),
                }
            })
            .collect();
        out.insert(id, gts);
    }
    out
}

/// Brute-force AP for one class: match in confidence order, then evaluate
/// precision/recall at every cutoff and integrate the interpolated curve.
pub fn oracle_ap(
    dets: &[QDet],
    gts: &BTreeMap<String, Vec<QGt>>,
    class: u32,
    iou_thr: Q,
    conf_thr: Q,
) -> Option<Q> {
    let num_gt: usize = gts.values().flatten().filter(|g| g.class == class).count();
    if num_gt == 0 {
        return None;
    }
    let mut mine: Vec<(usize, &QDet)> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| d.class == class && d.conf >= conf_thr)
        .collect();
    mine.sort_by(|(ia, a), (ib, b)| {
        b.conf
            .cmp(&a.conf)
            .then_with(|| a.image.cmp(&b.image))
            .then(ia.cmp(ib))
    });

    let mut used: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    let mut hits = Vec::new();
    for (_, d) in &mine {
        let truths = gts.get(&d.image).map(Vec::as_slice).unwrap_or(&[]);
        let flags = used
            .entry(&d.image)
            .or_insert_with(|| vec![false; truths.len()]);
        let mut best: Option<(usize, Q)> = None;
        for (g, t) in truths.iter().enumerate() {
            if flags[g] || t.class != class {
                continue;
            }
            let o = qiou(&d.bbox, &t.bbox);
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        let hit = matches!(best, Some((_, o)) if o >= iou_thr);
        if hit {
            flags[best.unwrap().0] = true;
        }
        hits.push(hit);
    }

    // precision and recall at each cutoff k = 1..n
    let n = hits.len();
    let mut prec = Vec::with_capacity(n);
    let mut rec = Vec::with_capacity(n);
    let mut tp = 0i128;
    for (k, &h) in hits.iter().enumerate() {
        tp += i128::from(h);
        prec.push(Q::new(tp, k as i128 + 1));
        rec.push(Q::new(tp, num_gt as i128));
    }
    let mut ap = q(0);
    let mut prev_r = q(0);
    for k in 0..n {
        if rec[k] > prev_r {
            let best_p = prec[k..].iter().copied().max().unwrap();
            ap += (rec[k] - prev_r) * best_p;
            prev_r = rec[k];
        }
    }
    Some(ap)
}

/// Pixel-counting IoU on a `res × res` raster of the unit square; a pixel
/// belongs to a box when its center does.
pub fn raster_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), res: usize) -> f64 {
    let center = |i: usize| (i as f64 + 0.5) / res as f64;
    let inside = |lo: f64, hi: f64, v: f64| lo <= v && v < hi;
    let col_a: Vec<bool> = (0..res).map(|i| inside(a.0, a.2, center(i))).collect();
    let col_b: Vec<bool> = (0..res).map(|i| inside(b.0, b.2, center(i))).collect();
    let (mut inter, mut union) = (0u64, 0u64);
    for row in 0..res {
        let y = center(row);
        let (ra, rb) = (inside(a.1, a.3, y), inside(b.1, b.3, y));
        if !ra && !rb {
            continue;
        }
        for col in 0..res {
            let pa = ra && col_a[col];
            let pb = rb && col_b[col];
            inter += u64::from(pa && pb);
            union += u64::from(pa || pb);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn plain_iou(a: &Detection, b: &Detection) -> f64 {
    let c = |d: &Detection| {
        (
            d.bbox.cx - d.bbox.w / 2.0,
            d.bbox.cy - d.bbox.h / 2.0,
            d.bbox.cx + d.bbox.w / 2.0,
            d.bbox.cy + d.bbox.h / 2.0,
        )
    };
    let (a, b) = (c(a), c(b));
    let iw = (a.2.min(b.2) - a.0.max(b.0)).max(0.0);
    let ih = (a.3.min(b.3) - a.1.max(b.1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / ((a.2 - a.0) * (a.3 - a.1) + (b.2 - b.0) * (b.3 - b.1) - inter)
}

/// Quadratic NMS: repeatedly take the best remaining candidate and strike
/// everything it suppresses. Returns kept input indices in keep order.
pub fn reference_nms(dets: &[Detection], thr: f64) -> Vec<usize> {
    let mut alive = vec![true; dets.len()];
    let mut kept = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..dets.len() {
            if !alive[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let (di, dj) = (&dets[i], &dets[j]);
                    let better = di.confidence > dj.confidence
                        || (di.confidence == dj.confidence && di.class_id < dj.class_id);
                    Some(if better { i } else { j })
                }
            };
        }
        let Some(k) = best else { break };
        alive[k] = false;
        kept.push(k);
        for i in 0..dets.len() {
            if alive[i]
                && dets[i].class_id == dets[k].class_id
                && dets[i].image_id == dets[k].image_id
                && plain_iou(&dets[i], &dets[k]) >= thr
            {
                alive[i] = false;
            }
        }
    }
    kept
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar decode of one anchor slot `[Pc, classes.., tx, ty, tw, th]`:
/// returns `(class, confidence, cx, cy, w, h)` before clamping.
pub fn reference_decode_slot(
    v: &[f64],
    col: usize,
    row: usize,
    cells: (usize, usize),
    anchor: (f64, f64),
    input: (f64, f64),
) -> (u32, f64, f64, f64, f64, f64) {
    let nc = v.len() - 5;
    let mut best = (0usize, sig(v[1]));
    for c in 1..nc {
        let p = sig(v[1 + c]);
        if p > best.1 {
            best = (c, p);
        }
    }
    let t = &v[1 + nc..];
    (
        best.0 as u32,
        sig(v[0]) * best.1,
        (sig(t[0]) + col as f64) / cells.0 as f64,
        (sig(t[1]) + row as f64) / cells.1 as f64,
        anchor.0 * t[2].exp() / input.0,
        anchor.1 * t[3].exp() / input.1,
    )
}

/// Relative closeness; values below 1e-9 in magnitude compare absolutely.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-9)
}

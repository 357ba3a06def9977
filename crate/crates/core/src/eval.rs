//! Per-class confusion counts, IoU and Recall.
//!
//! Pixels whose reference label is invalid are excluded entirely. A valid
//! reference pixel predicted as invalid counts as a miss (FN) for its class.
//! Counts from several images can be summed before computing metrics
//! (micro-averaging).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{Class, LabelMask};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl AddAssign for ClassCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// Counts for land, water and cloud, indexed by `class_id - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub classes: [ClassCounts; 3],
}

impl ConfusionCounts {
    pub fn get(&self, class: Class) -> Option<&ClassCounts> {
        (class != Class::Invalid).then(|| &self.classes[class.id() as usize - 1])
    }

    pub fn evaluated_pixels(&self) -> u64 {
        self.classes[0].total()
    }

    /// Reference pixels of `class`.
    pub fn support(&self, class: Class) -> u64 {
        self.get(class).map(|c| c.tp + c.fn_).unwrap_or(0)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.classes.iter_mut().zip(o.classes) {
            *a += b;
        }
    }
}

// (pred, truth) pair histogram over 4x4 ids.
fn pair_histogram(pred: &[u8], truth: &[u8]) -> [[u64; 4]; 4] {
    let mut h = [[0u64; 4]; 4];
    for (&p, &t) in pred.iter().zip(truth) {
        h[p as usize][t as usize] += 1;
    }
    h
}

pub fn confusion(pred: &LabelMask, truth: &LabelMask) -> Result<ConfusionCounts> {
    if !pred.same_shape(truth) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs reference {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    const CHUNK: usize = 1 << 16;
    let (p, t) = (pred.labels(), truth.labels());
    let partial = par::map_range(p.len().div_ceil(CHUNK), |i| {
        let r = i * CHUNK..((i + 1) * CHUNK).min(p.len());
        pair_histogram(&p[r.clone()], &t[r])
    });
    let mut hist = [[0u64; 4]; 4];
    for h in partial {
        for (row, hr) in hist.iter_mut().zip(h) {
            for (a, b) in row.iter_mut().zip(hr) {
                *a += b;
            }
        }
    }

    let evaluated: u64 = (0..4).map(|p| (1..4).map(|t| hist[p][t]).sum::<u64>()).sum();
    let mut out = ConfusionCounts::default();
    for class in Class::TRAINABLE {
        let i = class.id() as usize;
        let tp = hist[i][i];
        let fp: u64 = (1..4).filter(|&t| t != i).map(|t| hist[i][t]).sum();
        let fn_: u64 = (0..4).filter(|&p| p != i).map(|p| hist[p][i]).sum();
        out.classes[i - 1] = ClassCounts {
            tp,
            fp,
            fn_,
            tn: evaluated - tp - fp - fn_,
        };
    }
    Ok(out)
}

/// TP / (TP + FP + FN); `None` when the class is absent from both masks.
pub fn iou(counts: &ConfusionCounts, class: Class) -> Option<f64> {
    let c = counts.get(class)?;
    let denom = c.tp + c.fp + c.fn_;
    (denom > 0).then(|| c.tp as f64 / denom as f64)
}

/// TP / (TP + FN); `None` when the class is absent from the reference.
pub fn recall(counts: &ConfusionCounts, class: Class) -> Option<f64> {
    let c = counts.get(class)?;
    let denom = c.tp + c.fn_;
    (denom > 0).then(|| c.tp as f64 / denom as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class_id: u8,
    /// Row heading; water is reported as "total water".
    pub name: String,
    pub iou: Option<f64>,
    pub recall: Option<f64>,
    /// Fraction of evaluated pixels that belong to this class in the reference.
    pub pixel_share: Option<f64>,
    pub counts: ClassCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub evaluated_pixels: u64,
    pub classes: Vec<ClassMetrics>,
}

fn row_name(class: Class, class_names: &BTreeMap<u8, String>) -> String {
    if class == Class::Water {
        return "total water".to_string();
    }
    class_names
        .get(&class.id())
        .cloned()
        .unwrap_or_else(|| class.name().to_string())
        .to_lowercase()
}

pub fn report_from_counts(counts: &ConfusionCounts, class_names: &BTreeMap<u8, String>) -> MetricsReport {
    let n = counts.evaluated_pixels();
    MetricsReport {
        evaluated_pixels: n,
        classes: Class::TRAINABLE
            .iter()
            .map(|&c| ClassMetrics {
                class_id: c.id(),
                name: row_name(c, class_names),
                iou: iou(counts, c),
                recall: recall(counts, c),
                pixel_share: (n > 0).then(|| counts.support(c) as f64 / n as f64),
                counts: *counts.get(c).unwrap(),
            })
            .collect(),
    }
}

pub fn report(pred: &LabelMask, truth: &LabelMask, class_names: &BTreeMap<u8, String>) -> Result<MetricsReport> {
    Ok(report_from_counts(&confusion(pred, truth)?, class_names))
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_else(|| "n/a".into())
}

impl MetricsReport {
    pub fn get(&self, class: Class) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.class_id == class.id())
    }

    /// Aligned columns, percentages with two decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "evaluated pixels: {}", self.evaluated_pixels);
        let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8}", "class", "IoU %", "Recall %", "share %");
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<12} {:>8} {:>8} {:>8}",
                c.name,
                pct(c.iou),
                pct(c.recall),
                pct(c.pixel_share)
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

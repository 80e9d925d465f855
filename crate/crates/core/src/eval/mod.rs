//! Pixel confusion counts, derived metrics and method comparison reports.
//! The positive class is ground (or road).

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, Mask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merged(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pixels where `ignore` is set are skipped.
pub fn confusion(pred: &Mask, gt: &Mask, ignore: Option<&Mask>) -> Result<ConfusionCounts> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    if let Some(i) = ignore {
        ensure_same_dims(gt.dims(), i.dims())?;
    }
    let mut c = ConfusionCounts::default();
    for (k, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if ignore.is_some_and(|i| i.data()[k]) {
            continue;
        }
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision and recall are 0 on a zero denominator; f1 is 0 when both are.
pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::Empty("no evaluated pixels".into()));
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
    })
}

/// One method's prediction on one scene.
#[derive(Debug, Clone)]
pub struct MethodResult<'a> {
    pub method: String,
    pub pred: &'a Mask,
}

/// A scene with ground truth and the predictions to compare.
#[derive(Debug, Clone)]
pub struct SceneResults<'a> {
    pub scene: String,
    pub gt: &'a Mask,
    pub methods: Vec<MethodResult<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scene: String,
    pub method: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Per-scene rows followed by one `ALL` row per method (pooled counts).
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: &str = "scene,method,accuracy,precision,recall,f1,tp,fp,tn,fn";
pub const AGGREGATE_SCENE: &str = "ALL";

pub fn compare_report(scenes: &[SceneResults<'_>]) -> Result<Report> {
    if scenes.is_empty() || scenes.iter().any(|s| s.methods.is_empty()) {
        return Err(Error::Empty("report needs at least one scene and one method".into()));
    }
    let mut rows = Vec::new();
    let mut pooled: Vec<(String, ConfusionCounts)> = Vec::new();
    for s in scenes {
        for m in &s.methods {
            let counts = confusion(m.pred, s.gt, None)?;
            rows.push(ReportRow {
                scene: s.scene.clone(),
                method: m.method.clone(),
                counts,
                metrics: metrics(&counts)?,
            });
            match pooled.iter_mut().find(|(name, _)| *name == m.method) {
                Some((_, c)) => *c = c.merged(counts),
                None => pooled.push((m.method.clone(), counts)),
            }
        }
    }
    for (method, counts) in pooled {
        rows.push(ReportRow {
            scene: AGGREGATE_SCENE.into(),
            method,
            metrics: metrics(&counts)?,
            counts,
        });
    }
    Ok(Report { rows })
}

impl Report {
    pub fn row(&self, scene: &str, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scene == scene && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (m, c) = (&r.metrics, &r.counts);
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                r.scene, r.method, m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.tn, c.fn_
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let sw = self.rows.iter().map(|r| r.scene.len()).max().unwrap_or(0).max(5);
        let mw = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let mut out = format!(
            "{:<sw$}  {:<mw$}  {:>8}  {:>9}  {:>8}  {:>8}\n",
            "scene", "method", "accuracy", "precision", "recall", "f1"
        );
        out.push_str(&"-".repeat(sw + mw + 45));
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            writeln!(
                out,
                "{:<sw$}  {:<mw$}  {:>8.4}  {:>9.4}  {:>8.4}  {:>8.4}",
                r.scene, r.method, m.accuracy, m.precision, m.recall, m.f1
            )
            .expect("writing to a String");
        }
        out
    }
}

//! Confusion counts, accuracy / precision / recall / F1 with macro
//! averaging, and loss-curve comparison export.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::TrainLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// One-vs-rest counts for every class plus the full confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub num_classes: usize,
    pub total: u64,
    /// `matrix[truth * num_classes + predicted]`.
    pub matrix: Vec<u64>,
    pub classes: Vec<ClassCounts>,
}

impl ConfusionCounts {
    pub fn correct(&self) -> u64 {
        self.classes.iter().map(|c| c.tp).sum()
    }

    /// Number of samples whose true label is `class`.
    pub fn support(&self, class: usize) -> u64 {
        let c = &self.classes[class];
        c.tp + c.fn_
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = predictions.iter().chain(labels).find(|&&id| id >= num_classes) {
        return Err(Error::Input(format!(
            "class id {bad} out of range for {num_classes} classes"
        )));
    }
    let k = num_classes;
    let mut matrix = vec![0u64; k * k];
    for (&p, &t) in predictions.iter().zip(labels) {
        matrix[t * k + p] += 1;
    }
    let total = labels.len() as u64;
    let classes = (0..k)
        .map(|c| {
            let tp = matrix[c * k + c];
            let row: u64 = matrix[c * k..(c + 1) * k].iter().sum();
            let col: u64 = (0..k).map(|t| matrix[t * k + c]).sum();
            let (fn_, fp) = (row - tp, col - tp);
            ClassCounts {
                tp,
                fp,
                fn_,
                tn: total - tp - fp - fn_,
            }
        })
        .collect();
    Ok(ConfusionCounts {
        num_classes: k,
        total,
        matrix,
        classes,
    })
}

/// Overall correct / total.
pub fn accuracy(counts: &ConfusionCounts) -> Result<f64> {
    if counts.total == 0 {
        return Err(Error::Input(
            "accuracy of an empty evaluation is undefined".into(),
        ));
    }
    Ok(counts.correct() as f64 / counts.total as f64)
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// TP / (TP + FP), 0 when undefined.
pub fn precision(counts: &ConfusionCounts, class: usize) -> f64 {
    let c = &counts.classes[class];
    ratio(c.tp, c.tp + c.fp).0
}

/// TP / (TP + FN), 0 when undefined.
pub fn recall(counts: &ConfusionCounts, class: usize) -> f64 {
    let c = &counts.classes[class];
    ratio(c.tp, c.tp + c.fn_).0
}

pub fn f1_from(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn f1(counts: &ConfusionCounts, class: usize) -> f64 {
    f1_from(precision(counts, class), recall(counts, class))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest (TP + TN) / total.
    pub binary_accuracy: f64,
    /// Precision or recall had a zero denominator and was set to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted means over classes that occur in the labels.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub const REPORT_CSV_HEADER: &str = "model,accuracy,precision,recall,f1";

pub fn report(counts: &ConfusionCounts) -> Result<MetricsReport> {
    let accuracy = accuracy(counts)?;
    let per_class: Vec<ClassMetrics> = counts
        .classes
        .iter()
        .enumerate()
        .map(|(class, c)| {
            let (p, dp) = ratio(c.tp, c.tp + c.fp);
            let (r, dr) = ratio(c.tp, c.tp + c.fn_);
            ClassMetrics {
                class,
                support: c.tp + c.fn_,
                precision: p,
                recall: r,
                f1: f1_from(p, r),
                binary_accuracy: (c.tp + c.tn) as f64 / counts.total as f64,
                degenerate: dp || dr,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64;
    Ok(MetricsReport {
        total: counts.total,
        accuracy,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
    })
}

impl MetricsReport {
    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{model},{},{},{},{}",
            self.accuracy, self.macro_precision, self.macro_recall, self.macro_f1
        )
    }

    /// Human-readable block: aggregates, then one line per class.
    pub fn text(&self, class_name: impl Fn(usize) -> String) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples          {}", self.total);
        let _ = writeln!(s, "accuracy         {:.4}", self.accuracy);
        let _ = writeln!(s, "macro precision  {:.4}", self.macro_precision);
        let _ = writeln!(s, "macro recall     {:.4}", self.macro_recall);
        let _ = writeln!(s, "macro f1         {:.4}", self.macro_f1);
        let _ = writeln!(s, "\nclass\tsupport\tprecision\trecall\tf1\tbinary_acc\tflag");
        for m in &self.per_class {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
                class_name(m.class),
                m.support,
                m.precision,
                m.recall,
                m.f1,
                m.binary_accuracy,
                if m.degenerate { "degenerate" } else { "" }
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSeries {
    Train,
    Val,
}

/// One row per epoch, one column per run; runs that stopped earlier leave
/// blanks. Values use shortest round-trip decimal formatting.
pub fn export_loss_comparison(runs: &[(&str, &TrainLog)], series: LossSeries) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::Input("loss comparison needs at least one run".into()));
    }
    let mut seen = HashSet::new();
    for (name, _) in runs {
        if !seen.insert(*name) {
            return Err(Error::Input(format!("duplicate run name `{name}`")));
        }
        if name.contains([',', '\n', '"']) {
            return Err(Error::Input(format!("run name `{name}` cannot be a CSV field")));
        }
    }
    let rows = runs.iter().map(|(_, l)| l.records.len()).max().unwrap_or(0);
    let mut s = String::from("epoch");
    for (name, _) in runs {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for e in 0..rows {
        s += &(e + 1).to_string();
        for (_, log) in runs {
            s.push(',');
            if let Some(r) = log.records.get(e) {
                let v = match series {
                    LossSeries::Train => r.train_loss,
                    LossSeries::Val => r.val_loss,
                };
                s += &v.to_string();
            }
        }
        s.push('\n');
    }
    Ok(s)
}

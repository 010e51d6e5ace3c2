//! Per-pixel flagging metrics.
//!
//! Curves sweep every distinct score as a threshold, from the highest down,
//! with equal scores entering together. Areas are trapezoidal, which makes
//! AUROC equal to the probability that a random RFI pixel outscores a
//! random clean one, ties counting one half.

use ndarray::{ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Absent when the mask lacks either class.
    pub auroc: Option<f64>,
    /// Absent when the mask has no RFI.
    pub auprc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub roc_points: Vec<(f64, f64)>,
    /// `(recall, precision)`, starting at recall 0.
    pub pr_points: Vec<(f64, f64)>,
    /// Score threshold the flags were produced with; set by the caller.
    pub threshold_used: f64,
}

impl EvalReport {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }
}

/// Scores `flags` and `scores` against the ground-truth `mask`.
pub fn evaluate(
    flags: ArrayView2<bool>,
    scores: ArrayView2<f64>,
    mask: ArrayView2<bool>,
) -> Result<EvalReport> {
    if flags.dim() != mask.dim() || scores.dim() != mask.dim() {
        return Err(Error::Shape(format!(
            "flags {:?}, scores {:?} and mask {:?} differ",
            flags.dim(),
            scores.dim(),
            mask.dim()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Precondition(format!("score {s} outside [0, 1]")));
    }
    evaluate_pixels(
        flags.iter().copied(),
        scores.iter().copied().zip(mask.iter().copied()).collect(),
    )
}

/// Scores pooled pixels, `(score, label)` pairs in any order.
pub(crate) fn evaluate_pixels(
    flags: impl Iterator<Item = bool>,
    mut pixels: Vec<(f64, bool)>,
) -> Result<EvalReport> {
    let n = pixels.len();
    if n == 0 {
        return Err(Error::Shape("nothing to evaluate".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (f, &(_, m)) in flags.zip(&pixels) {
        match (f, m) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / n as f64;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    let pos = pixels.iter().filter(|p| p.1).count();
    let neg = n - pos;
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (roc_points, pr_points) = curves(&pixels, pos, neg);
    let auroc = (pos > 0 && neg > 0).then(|| trapezoid(&roc_points));
    let auprc = (pos > 0).then(|| trapezoid(&pr_points));
    Ok(EvalReport {
        accuracy,
        auroc,
        auprc,
        f1,
        precision,
        recall,
        roc_points,
        pr_points,
        threshold_used: 0.0,
    })
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// ROC and PR points for pixels sorted by descending score.
fn curves(sorted: &[(f64, bool)], pos: usize, neg: usize) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut roc = vec![(0.0, 0.0)];
    let mut pr = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        roc.push((ratio(fp, neg), ratio(tp, pos)));
        let p = ratio(tp, tp + fp);
        if pr.is_empty() {
            pr.push((0.0, p));
        }
        pr.push((ratio(tp, pos), p));
    }
    if neg == 0 || pos == 0 {
        // degenerate axes; keep the documented endpoints
        roc.push((1.0, 1.0));
        roc.dedup();
    }
    (roc, pr)
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half. Quadratic; meant as a test oracle.
pub fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut good = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                good += 1.0;
            } else if si == sj {
                good += 0.5;
            }
        }
    }
    (pairs > 0).then(|| good / pairs as f64)
}

/// Accuracy alone, for callers that have no scores.
pub fn accuracy(flags: ArrayView2<bool>, mask: ArrayView2<bool>) -> Result<f64> {
    if flags.dim() != mask.dim() {
        return Err(Error::Shape("flags and mask differ".into()));
    }
    let mut hit = 0usize;
    Zip::from(&flags)
        .and(&mask)
        .for_each(|a, b| hit += usize::from(a == b));
    Ok(hit as f64 / mask.len() as f64)
}

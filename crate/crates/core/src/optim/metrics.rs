use serde::{Deserialize, Serialize};

/// Classification scores over one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

impl Metrics {
    pub fn compute(predicted: &[usize], truth: &[usize], num_classes: usize) -> Self {
        assert_eq!(
            predicted.len(),
            truth.len(),
            "prediction/label length mismatch"
        );
        Metrics {
            count: truth.len(),
            accuracy: accuracy(predicted, truth),
            macro_f1: macro_f1(predicted, truth, num_classes),
            micro_f1: micro_f1(predicted, truth, num_classes),
        }
    }
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Per-class `(tp, fp, fn)`.
fn confusion(
    predicted: &[usize],
    truth: &[usize],
    num_classes: usize,
) -> Vec<(usize, usize, usize)> {
    let width = predicted
        .iter()
        .chain(truth)
        .map(|&c| c + 1)
        .max()
        .unwrap_or(0)
        .max(num_classes);
    let mut counts = vec![(0, 0, 0); width];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            counts[p].0 += 1;
        } else {
            counts[p].1 += 1;
            counts[t].2 += 1;
        }
    }
    counts
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 over classes that occur in either
/// the predictions or the labels.
pub fn macro_f1(predicted: &[usize], truth: &[usize], num_classes: usize) -> f64 {
    let present: Vec<f64> = confusion(predicted, truth, num_classes)
        .into_iter()
        .filter(|&(tp, fp, fn_)| tp + fp + fn_ > 0)
        .map(|(tp, fp, fn_)| f1(tp, fp, fn_))
        .collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

pub fn micro_f1(predicted: &[usize], truth: &[usize], num_classes: usize) -> f64 {
    let (tp, fp, fn_) = confusion(predicted, truth, num_classes)
        .into_iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    f1(tp, fp, fn_)
}

use serde::{Deserialize, Serialize};

/// Binary confusion counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent.
    pub accuracy: f64,
    /// Percent; `None` when the split has no positives.
    pub sensitivity: Option<f64>,
    /// Percent; `None` when the split has no negatives.
    pub specificity: Option<f64>,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { None } else { Some(100.0 * num as f64 / den as f64) };
        Self {
            accuracy: pct(tp + tn, tp + tn + fp + fn_).unwrap_or(0.0),
            sensitivity: pct(tp, tp + fn_),
            specificity: pct(tn, tn + fp),
            tp,
            tn,
            fp,
            fn_,
        }
    }

    /// From `(label, prediction)` pairs.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (y, p) in pairs {
            match (y, p) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (0, _) => fp += 1,
                _ => fn_ += 1,
            }
        }
        Self::from_counts(tp, tn, fp, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Mean and sample (n - 1) standard deviation; `None` for an empty input,
/// std 0 for a single value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

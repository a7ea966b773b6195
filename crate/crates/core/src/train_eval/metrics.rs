use serde::{Deserialize, Serialize};

/// Binary classification report. Rates are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl EvalReport {
    /// Precision is 0 with no predicted positives, recall 0 with no actual
    /// positives, and F1 0 when both are 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let precision = pct(tp, tp + fp);
        let recall = pct(tp, tp + fn_);
        Self {
            precision,
            recall,
            // Equals 2PR / (P + R) with a single rounding step.
            f1: pct(2 * tp, 2 * tp + fp + fn_),
            accuracy: pct(tp + tn, tp + fp + tn + fn_),
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len(), "prediction/label length mismatch");
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = EvalReport::from_counts(2, 1, 5, 2);
        assert!((r.precision - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.recall, 50.0);
        assert!((r.f1 - 400.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 70.0);
    }

    #[test]
    fn all_correct_and_no_positives() {
        let r = EvalReport::from_predictions(&[true, false, true], &[true, false, true]);
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (100.0, 100.0, 100.0, 100.0));
        let r = EvalReport::from_counts(0, 0, 3, 2);
        assert_eq!((r.precision, r.f1), (0.0, 0.0));
    }

    #[test]
    fn json_uses_fn_key() {
        let json = serde_json::to_string(&EvalReport::from_counts(1, 0, 0, 1)).unwrap();
        assert!(json.contains("\"fn\":1"), "{json}");
    }
}

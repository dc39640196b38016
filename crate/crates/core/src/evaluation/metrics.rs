use serde::{Deserialize, Serialize};

use crate::dataset::CreditLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub positive_class: CreditLabel,
    /// Predictions that could not be parsed; not part of the four cells.
    #[serde(default)]
    pub unscored: u64,
}

impl ConfusionMatrix {
    pub fn empty(positive_class: CreditLabel) -> Self {
        Self {
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 0,
            positive_class,
            unscored: 0,
        }
    }

    pub fn scored(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts one pair. With `strict`, a missing prediction counts as the
    /// wrong label instead of being set aside.
    pub fn add(&mut self, predicted: Option<CreditLabel>, actual: CreditLabel, strict: bool) {
        let predicted = match (predicted, strict) {
            (Some(p), _) => p,
            (None, true) => actual.flipped(),
            (None, false) => {
                self.unscored += 1;
                return;
            }
        };
        let pos = self.positive_class;
        match (predicted == pos, actual == pos) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

pub fn confusion(pairs: &[(Option<CreditLabel>, CreditLabel)], positive_class: CreditLabel) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::empty(positive_class);
    for (predicted, actual) in pairs {
        m.add(*predicted, *actual, false);
    }
    m
}

/// Metric values as fractions; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(m: &ConfusionMatrix) -> Metrics {
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics {
        accuracy: ratio(m.tp + m.tn, m.scored()),
        precision,
        recall,
        f1,
    }
}

pub const UNDEFINED: &str = "—";

/// Percentage with two decimals, or the undefined marker.
pub fn fmt_pct(value: Option<f64>) -> String {
    value.map_or_else(|| UNDEFINED.to_string(), |v| format!("{:.2}%", v * 100.0))
}

/// Signed difference in percentage points.
pub fn fmt_delta(value: Option<f64>, reference: Option<f64>) -> String {
    match (value, reference) {
        (Some(v), Some(r)) => format!("{:+.2}", (v - r) * 100.0),
        _ => UNDEFINED.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CreditLabel::{Bad, Good};

    #[test]
    fn perfect_classifier() {
        let pairs: Vec<_> = (0..10)
            .map(|i| if i < 5 { (Some(Good), Good) } else { (Some(Bad), Bad) })
            .collect();
        let m = confusion(&pairs, Good);
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (5, 5, 0, 0));
        let metrics = compute_metrics(&m);
        for v in [metrics.accuracy, metrics.precision, metrics.recall, metrics.f1] {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn flipping_predictions_swaps_cells() {
        let pairs = [
            (Some(Good), Good),
            (Some(Bad), Good),
            (Some(Good), Bad),
            (Some(Bad), Bad),
            (Some(Good), Good),
        ];
        let flipped: Vec<_> = pairs.iter().map(|(p, a)| (p.map(CreditLabel::flipped), *a)).collect();
        let m = confusion(&pairs, Good);
        let f = confusion(&flipped, Good);
        assert_eq!((f.tp, f.fn_, f.fp, f.tn), (m.fn_, m.tp, m.tn, m.fp));
    }

    #[test]
    fn no_positive_predictions_leave_precision_undefined() {
        let m = confusion(&[(Some(Bad), Good), (Some(Bad), Bad)], Good);
        let metrics = compute_metrics(&m);
        assert_eq!(metrics.precision, None);
        assert_eq!(metrics.recall, Some(0.0));
        assert_eq!(metrics.f1, None);
        assert_eq!(fmt_pct(metrics.precision), "—");
    }

    #[test]
    fn accuracy_identity_for_table_value() {
        let mut m = ConfusionMatrix::empty(Good);
        m.tp = 70;
        m.tn = 50;
        m.fp = 45;
        m.fn_ = 35;
        let acc = compute_metrics(&m).accuracy.unwrap();
        assert_eq!(fmt_pct(Some(acc)), "60.00%");
        assert_eq!((acc * m.scored() as f64).round() as u64, m.tp + m.tn);
    }

    #[test]
    fn unscored_and_strict() {
        let mut m = ConfusionMatrix::empty(Good);
        m.add(None, Good, false);
        m.add(Some(Good), Good, false);
        assert_eq!((m.scored(), m.unscored), (1, 1));
        m.add(None, Good, true);
        assert_eq!((m.fn_, m.unscored), (1, 1));
    }

    #[test]
    fn deltas() {
        assert_eq!(fmt_delta(Some(0.6), Some(0.455)), "+14.50");
        assert_eq!(fmt_delta(Some(0.4), Some(0.5)), "-10.00");
        assert_eq!(fmt_delta(None, Some(0.5)), "—");
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Result};
use crate::corpus::UserClass;

/// Precision, recall and F1 of the Diagnosed class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl EvalReport {
    pub fn named(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts and positive-class metrics. Zero denominators give 0.
pub fn evaluate(predictions: &[UserClass], truth: &[UserClass]) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(ClassifierError::LengthMismatch { predictions: predictions.len(), truth: truth.len() });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport { model: String::new(), precision, recall, f1, tp, fp, fn_, tn, threshold: None })
}

/// Evaluates each candidate threshold on held-out probabilities. Returns all
/// reports in candidate order and the index of the best F1; ties prefer the
/// threshold nearest 0.5, then the lower one.
pub fn sweep_threshold(probs: &[f64], truth: &[UserClass], candidates: &[f64]) -> Result<(Vec<EvalReport>, usize)> {
    if probs.len() != truth.len() {
        return Err(ClassifierError::LengthMismatch { predictions: probs.len(), truth: truth.len() });
    }
    if candidates.is_empty() || candidates.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(ClassifierError::InvalidConfig("thresholds must be a non-empty list in (0, 1)".into()));
    }
    let mut reports = Vec::with_capacity(candidates.len());
    for &t in candidates {
        let preds: Vec<UserClass> =
            probs.iter().map(|&p| if p >= t { UserClass::Diagnosed } else { UserClass::Control }).collect();
        reports.push(evaluate(&preds, truth)?.with_threshold(t));
    }
    let key = |i: usize| (reports[i].f1, -(candidates[i] - 0.5).abs(), -candidates[i]);
    let best = (0..reports.len()).max_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(b.cmp(&a))).unwrap();
    Ok((reports, best))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = if self.model.is_empty() { "model" } else { &self.model };
        let w = name.len().max(5);
        writeln!(f, "{:<w$}  {:>9}  {:>6}  {:>4}", "Model", "Precision", "Recall", "F1")?;
        writeln!(f, "{:<w$}  {:>9.2}  {:>6.2}  {:>4.2}", name, self.precision, self.recall, self.f1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use UserClass::{Control as C, Diagnosed as D};

    #[test]
    fn perfect_prediction() {
        let truth = [D, C, C, D, C];
        let r = evaluate(&truth, &truth).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (2, 0, 0, 3));
    }

    #[test]
    fn hand_confusion() {
        // TP=2, FP=1, FN=2, TN=1.
        let pred = [D, D, D, C, C, C];
        let truth = [D, D, C, D, D, C];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (2, 1, 2, 1));
        assert_eq!(r.precision, 2.0 / 3.0);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn no_positive_predictions() {
        let r = evaluate(&[C, C, C], &[D, C, D]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(matches!(evaluate(&[C], &[C, D]), Err(ClassifierError::LengthMismatch { .. })));
    }

    #[test]
    fn table_layout() {
        let r = evaluate(&[D, C], &[D, D]).unwrap().named("Prompt.BoW");
        let text = r.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["Model", "Precision", "Recall", "F1"]);
        assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["Prompt.BoW", "1.00", "0.50", "0.67"]);
    }

    #[test]
    fn sweep_picks_best_f1() {
        let probs = [0.9, 0.45, 0.3, 0.2, 0.6];
        let truth = [D, D, C, C, C];
        let (reports, best) = sweep_threshold(&probs, &truth, &[0.25, 0.4, 0.5, 0.7]).unwrap();
        assert_eq!(reports.len(), 4);
        assert_eq!(reports[best].threshold, Some(0.4));
        assert!(sweep_threshold(&probs, &truth, &[1.0]).is_err());
    }

    fn class() -> impl Strategy<Value = UserClass> {
        prop_oneof![Just(D), Just(C)]
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_f1_formula(
            pairs in proptest::collection::vec((class(), class()), 1..40),
            rot in 0usize..40,
        ) {
            let (p, t): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let a = evaluate(&p, &t).unwrap();
            let mut shuffled = pairs.clone();
            let len = shuffled.len();
            shuffled.rotate_left(rot % len);
            shuffled.reverse();
            let (p2, t2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            prop_assert_eq!(&a, &evaluate(&p2, &t2).unwrap());
            for m in [a.precision, a.recall, a.f1] {
                prop_assert!((0.0..=1.0).contains(&m));
            }
            let want = if a.precision + a.recall > 0.0 {
                2.0 * a.precision * a.recall / (a.precision + a.recall)
            } else {
                0.0
            };
            prop_assert!((a.f1 - want).abs() <= 1e-12);
        }
    }
}

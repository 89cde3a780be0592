use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::features::EncodedSplit;

/// Accuracies in percent, laid out like a results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Per difficulty 1..=4; `None` when the split has no such item.
    pub accuracy: [Option<f64>; 4],
    pub counts: [usize; 4],
    /// Count-weighted pooled accuracy.
    pub overall: f64,
    /// Unweighted mean of the present per-difficulty accuracies.
    pub diff_avg: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Aggregates per-difficulty accuracies (%) with their item counts.
    pub fn from_accuracies(accuracy: [f64; 4], counts: [usize; 4]) -> Self {
        let acc: [Option<f64>; 4] = std::array::from_fn(|d| (counts[d] > 0).then_some(accuracy[d]));
        let n: usize = counts.iter().sum();
        let overall = if n == 0 {
            0.0
        } else {
            (0..4).filter_map(|d| acc[d].map(|a| a * counts[d] as f64)).sum::<f64>() / n as f64
        };
        let present: Vec<f64> = acc.iter().flatten().copied().collect();
        let diff_avg = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Self {
            accuracy: acc,
            counts,
            overall,
            diff_avg,
            config: serde_json::Value::Null,
        }
    }

    /// Builds a report from `(difficulty, correct)` outcomes.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (u8, bool)>) -> Self {
        let mut counts = [0usize; 4];
        let mut hits = [0usize; 4];
        for (d, ok) in outcomes {
            let d = usize::from(d.clamp(1, 4)) - 1;
            counts[d] += 1;
            hits[d] += usize::from(ok);
        }
        let acc = std::array::from_fn(|d| if counts[d] == 0 { 0.0 } else { 100.0 * hits[d] as f64 / counts[d] as f64 });
        let mut r = Self::from_accuracies(acc, counts);
        // pooled accuracy straight from counts avoids rounding drift
        let n: usize = counts.iter().sum();
        if n > 0 {
            r.overall = 100.0 * hits.iter().sum::<usize>() as f64 / n as f64;
        }
        r
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = config;
        self
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn csv_header() -> &'static str {
        "diff1,diff2,diff3,diff4,overall,diff_avg,n1,n2,n3,n4"
    }

    pub fn csv_row(&self) -> String {
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.4}"));
        let accs: Vec<String> = self.accuracy.iter().map(|a| f(*a)).collect();
        let counts: Vec<String> = self.counts.iter().map(usize::to_string).collect();
        format!("{},{:.4},{},{}", accs.join(","), self.overall, f(self.diff_avg), counts.join(","))
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::csv_header(), self.csv_row())
    }
}

/// Scores every item of `split` with `model`.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, split: &EncodedSplit) -> EvalReport {
    EvalReport::from_outcomes(
        (0..split.len()).map(|i| (split.items[i].difficulty, model.predict(split.batch(i)) == split.items[i].correct_idx)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTS: [usize; 4] = [1782, 853, 409, 409];

    // independent recomputation of the two aggregates
    fn oracle(acc: [f64; 4], n: [usize; 4]) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for d in 0..4 {
            num += acc[d] * n[d] as f64;
            den += n[d] as f64;
        }
        (num / den, (acc[0] + acc[1] + acc[2] + acc[3]) / 4.0)
    }

    #[test]
    fn full_model_row() {
        let acc = [75.96, 74.65, 57.36, 56.63];
        let r = EvalReport::from_accuracies(acc, COUNTS);
        assert!((r.overall - 71.14).abs() <= 0.02, "{}", r.overall);
        assert!((r.diff_avg.unwrap() - 66.15).abs() <= 0.005);
        let (o, a) = oracle(acc, COUNTS);
        assert!((r.overall - o).abs() < 1e-9 && (r.diff_avg.unwrap() - a).abs() < 1e-9);
    }

    #[test]
    fn qa_similarity_row() {
        let r = EvalReport::from_accuracies([30.64, 27.20, 26.16, 22.25], COUNTS);
        assert!((r.overall - 28.27).abs() <= 0.02, "{}", r.overall);
        assert!((r.diff_avg.unwrap() - 26.56).abs() <= 0.005);
    }

    #[test]
    fn all_correct_is_hundred() {
        let r = EvalReport::from_outcomes((1..=4).flat_map(|d| [(d, true), (d, true)]));
        assert_eq!(r.accuracy, [Some(100.0); 4]);
        assert_eq!((r.overall, r.diff_avg), (100.0, Some(100.0)));
    }

    #[test]
    fn absent_difficulty_is_excluded() {
        let r = EvalReport::from_outcomes([(1, true), (1, false), (3, true)]);
        assert_eq!(r.accuracy, [Some(50.0), None, Some(100.0), None]);
        assert_eq!(r.diff_avg, Some(75.0));
        assert!((r.overall - 200.0 / 3.0).abs() < 1e-12);
        assert!(r.to_csv().lines().nth(1).unwrap().starts_with("50.0000,,100.0000,,"));
    }
}

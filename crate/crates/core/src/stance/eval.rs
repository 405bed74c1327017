//! Blocked cross-validation and the accuracy / F1(buy, sell) metrics.

use std::ops::Range;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Serialize;

use super::{train_two_plane, FeatureVector, StanceError, TrainParams};
use crate::ingest::Stance;

/// 3×3 counts; rows are gold, columns predicted, both in Buy/Hold/Sell order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub counts: [[u64; 3]; 3],
}

impl Confusion {
    pub fn new(counts: [[u64; 3]; 3]) -> Self {
        Confusion { counts }
    }

    pub fn record(&mut self, gold: Stance, predicted: Stance) {
        self.counts[gold.report_index()][predicted.report_index()] += 1;
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (row, o) in self.counts.iter_mut().zip(other.counts.iter()) {
            for (c, v) in row.iter_mut().zip(o.iter()) {
                *c += v;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..3).map(|i| self.counts[i][i]).sum();
        correct as f64 / total as f64
    }

    /// F1 of one class; 0 when the class is neither predicted nor present.
    pub fn class_f1(&self, class: Stance) -> f64 {
        let c = class.report_index();
        let tp = self.counts[c][c];
        let gold: u64 = self.counts[c].iter().sum();
        let predicted: u64 = self.counts.iter().map(|row| row[c]).sum();
        if gold + predicted == 0 {
            return 0.0;
        }
        2.0 * tp as f64 / (gold + predicted) as f64
    }

    pub fn f1_buy_sell(&self) -> f64 {
        f1_buy_sell(self)
    }
}

/// Mean of the Buy and Sell F1 scores.
pub fn f1_buy_sell(confusion: &Confusion) -> f64 {
    (confusion.class_f1(Stance::Buy) + confusion.class_f1(Stance::Sell)) / 2.0
}

/// Contiguous blocks covering `0..n`; the first `n % k` blocks are one longer.
pub fn fold_blocks(n: usize, k: usize) -> Vec<Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// One labeled example in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub timestamp: DateTime<Utc>,
    pub features: FeatureVector,
    pub stance: Stance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub test_start: usize,
    pub test_end: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub f1_buy_sell: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub n: usize,
    pub params: TrainParams,
    pub folds: Vec<FoldMetrics>,
    pub accuracy: MeanStd,
    pub f1_buy_sell: MeanStd,
    pub confusion: Confusion,
    pub notes: Vec<String>,
}

/// k-fold cross-validation over contiguous time blocks.
///
/// `data` must already be in ascending timestamp order; it is never re-sorted.
pub fn blocked_cv(
    data: &[LabeledExample],
    k: usize,
    params: TrainParams,
) -> Result<EvalReport, StanceError> {
    params.validate()?;
    if k < 2 {
        return Err(StanceError::InvalidParams(format!("k must be at least 2, got {k}")));
    }
    if data.len() < k {
        return Err(StanceError::TooFewExamples { n: data.len(), k });
    }
    if let Some(i) = data.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(StanceError::Unsorted { index: i + 1 });
    }
    let blocks = fold_blocks(data.len(), k);
    let folds: Vec<FoldMetrics> = blocks
        .par_iter()
        .enumerate()
        .map(|(fold, test)| -> Result<FoldMetrics, StanceError> {
            let train = data[..test.start].iter().chain(&data[test.end..]);
            let model = train_two_plane(train.map(|e| (&e.features, e.stance)), params)?;
            let mut confusion = Confusion::default();
            for e in &data[test.clone()] {
                confusion.record(e.stance, model.classify(&e.features)?);
            }
            Ok(FoldMetrics {
                fold,
                test_start: test.start,
                test_end: test.end,
                n_train: data.len() - test.len(),
                n_test: test.len(),
                accuracy: confusion.accuracy(),
                f1_buy_sell: confusion.f1_buy_sell(),
                confusion,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut pooled = Confusion::default();
    for f in &folds {
        pooled.merge(&f.confusion);
    }
    let acc: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let f1: Vec<f64> = folds.iter().map(|f| f.f1_buy_sell).collect();
    let mut notes = vec![
        "f1_buy_sell is the mean of the Buy and Sell F1 scores; a class with no gold and no predicted instances in a fold scores 0".to_string(),
        "std is the sample standard deviation across folds".to_string(),
    ];
    let empty_polar = folds
        .iter()
        .filter(|f| {
            [Stance::Buy, Stance::Sell].iter().any(|&s| {
                let c = s.report_index();
                f.confusion.counts[c].iter().sum::<u64>() == 0
                    && f.confusion.counts.iter().map(|r| r[c]).sum::<u64>() == 0
            })
        })
        .map(|f| f.fold.to_string())
        .collect::<Vec<_>>();
    if !empty_polar.is_empty() {
        notes.push(format!(
            "folds with an empty polar class (F1 taken as 0): {}",
            empty_polar.join(",")
        ));
    }
    Ok(EvalReport {
        k,
        n: data.len(),
        params,
        folds,
        accuracy: MeanStd::of(&acc),
        f1_buy_sell: MeanStd::of(&f1),
        confusion: pooled,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stance::FeatureHasher;
    use chrono::TimeZone;

    /// Harmonic mean of precision and recall, straight from the definitions.
    fn f1_oracle(m: &[[u64; 3]; 3], c: usize) -> f64 {
        let tp = m[c][c] as f64;
        let predicted: f64 = (0..3).map(|r| m[r][c] as f64).sum();
        let gold: f64 = m[c].iter().map(|&v| v as f64).sum();
        if tp == 0.0 {
            return 0.0;
        }
        let p = tp / predicted;
        let r = tp / gold;
        2.0 * p * r / (p + r)
    }

    #[test]
    fn f1_perfect_and_all_hold() {
        let perfect = Confusion::new([[5, 0, 0], [0, 3, 0], [0, 0, 2]]);
        assert_eq!(f1_buy_sell(&perfect), 1.0);
        let all_hold = Confusion::new([[0, 5, 0], [0, 3, 0], [0, 2, 0]]);
        assert_eq!(f1_buy_sell(&all_hold), 0.0);
        assert_eq!(f1_buy_sell(&Confusion::default()), 0.0);
    }

    #[test]
    fn f1_matches_definition() {
        let m = [[8, 2, 0], [1, 9, 0], [0, 3, 7]];
        let expected = (f1_oracle(&m, 0) + f1_oracle(&m, 2)) / 2.0;
        // Buy: P = 8/9, R = 8/10; Sell: P = 7/7, R = 7/10.
        assert!((expected - (16.0 / 19.0 + 14.0 / 17.0) / 2.0).abs() < 1e-15);
        assert!((f1_buy_sell(&Confusion::new(m)) - expected).abs() < 1e-12);
        assert!((Confusion::new(m).accuracy() - 24.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn blocks_are_contiguous() {
        let b = fold_blocks(100, 10);
        assert_eq!(b[0], 0..10);
        assert_eq!(b[9], 90..100);
        assert!(b.iter().all(|r| r.len() == 10));
        let b = fold_blocks(23, 5);
        let sizes: Vec<usize> = b.iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        assert_eq!(b.last().unwrap().end, 23);
    }

    fn separable(n: usize) -> Vec<LabeledExample> {
        let h = FeatureHasher::new(1024).unwrap();
        let t0 = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap();
        (0..n)
            .map(|i| {
                let (text, stance) = match i % 3 {
                    0 => ("bullish rally buy eur", Stance::Buy),
                    1 => ("quiet sideways range wait", Stance::Hold),
                    _ => ("bearish dump sell eur", Stance::Sell),
                };
                LabeledExample {
                    timestamp: t0 + chrono::Duration::minutes(i as i64),
                    features: h.featurize(text),
                    stance,
                }
            })
            .collect()
    }

    #[test]
    fn separable_cv_is_perfect() {
        let report = blocked_cv(&separable(90), 10, TrainParams::default()).unwrap();
        assert_eq!(report.accuracy.mean, 1.0);
        assert_eq!(report.accuracy.std, 0.0);
        assert_eq!(report.f1_buy_sell.mean, 1.0);
        assert_eq!(report.confusion.total(), 90);
    }

    #[test]
    fn unsorted_rejected() {
        let mut data = separable(30);
        data.swap(4, 5);
        data[5].timestamp = data[0].timestamp;
        assert!(matches!(
            blocked_cv(&data, 3, TrainParams::default()),
            Err(StanceError::Unsorted { .. })
        ));
    }

    #[test]
    fn size_and_k_checks() {
        let data = separable(5);
        assert!(matches!(
            blocked_cv(&data, 10, TrainParams::default()),
            Err(StanceError::TooFewExamples { n: 5, k: 10 })
        ));
        assert!(blocked_cv(&data, 1, TrainParams::default()).is_err());
    }

    #[test]
    fn pooled_accuracy_matches_fold_mean_for_equal_folds() {
        let mut data = separable(100);
        // make the problem imperfect so accuracies vary
        for e in data.iter_mut().step_by(7) {
            e.stance = Stance::Hold;
        }
        let report = blocked_cv(&data, 10, TrainParams::default()).unwrap();
        assert!((report.confusion.accuracy() - report.accuracy.mean).abs() < 1e-12);
        let mut pooled = Confusion::default();
        report.folds.iter().for_each(|f| pooled.merge(&f.confusion));
        assert_eq!(pooled, report.confusion);
    }
}

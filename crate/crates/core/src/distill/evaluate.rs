//! Test-split evaluation against gold truth.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::dataset::SequenceDataset;
use super::teacher::FlowPredictor;
use crate::flowcore::crop_to_multiple;
use crate::metrics::{boxplot_stats, epe_mean_with_margin, BoxplotStats};
use crate::{Error, FramePair, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(pair index, mean EPE* over the pair)` in test order.
    pub per_pair: Vec<(usize, f64)>,
    pub mean: f64,
    pub stats: BoxplotStats,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair,epe\n");
        for (i, e) in &self.per_pair {
            writeln!(s, "{i},{e:.6}").unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        self.stats.summary(self.mean)
    }

    /// Writes `metrics.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (name, body) in [("metrics.csv", self.to_csv()), ("summary.txt", self.summary())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Mean EPE* per test pair. Frames and gold are center-cropped to the predictor's
/// multiple; `margin` excludes that many border pixels from every mean.
pub fn evaluate(predictor: &dyn FlowPredictor, ds: &SequenceDataset, margin: usize) -> Result<EvalReport> {
    let test = ds.split().test.clone();
    if test.is_empty() {
        return Err(Error::Dataset("test split is empty".into()));
    }
    let m = predictor.multiple();
    let per_pair = test
        .into_par_iter()
        .map(|i| {
            let pair = ds.pair(i);
            let gold = ds.gold_at(i)?;
            let epe = if m == 1 {
                epe_mean_with_margin(&predictor.predict(i, &pair)?, gold, margin)?
            } else {
                let (a, b) = (crop_to_multiple(pair.first, m)?, crop_to_multiple(pair.second, m)?);
                let pred = predictor.predict(i, &FramePair::new(&a, &b)?)?;
                epe_mean_with_margin(&pred, &crop_to_multiple(gold, m)?, margin)?
            };
            Ok((i, epe))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per_pair.iter().map(|p| p.1).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(EvalReport { stats: boxplot_stats(&values)?, per_pair, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::{generate_gold, AnalyticTeacher, TeacherPredictor, ZeroFlow};
    use crate::{FlowField, ImageFrame};

    fn dataset() -> (SequenceDataset, AnalyticTeacher) {
        let frames = (0..7).map(|i| ImageFrame::filled(20, 12, 1, 0.1 * i as f32).unwrap()).collect();
        let flows: Vec<_> = (0..6).map(|i| FlowField::constant(20, 12, 3.0, 4.0 * i as f32).unwrap()).collect();
        let teacher = AnalyticTeacher::new(flows);
        let ds = SequenceDataset::new(frames, "t").unwrap().split_dataset(2, 1, 3).unwrap();
        (generate_gold(ds, &teacher).unwrap(), teacher)
    }

    #[test]
    fn teacher_against_itself_is_zero() {
        let (ds, teacher) = dataset();
        let r = evaluate(&TeacherPredictor(&teacher), &ds, 0).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.per_pair.iter().map(|p| p.0).collect::<Vec<_>>(), vec![3, 4, 5]);
    }

    #[test]
    fn zero_flow_error_is_the_gold_magnitude() {
        let (ds, _) = dataset();
        let r = evaluate(&ZeroFlow, &ds, 0).unwrap();
        let expected: Vec<f64> = (3..6).map(|i| (9.0 + 16.0 * (i * i) as f64).sqrt()).collect();
        for ((_, got), want) in r.per_pair.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-9);
        }
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    #[test]
    fn empty_test_split_is_an_error() {
        let (ds, _) = dataset();
        let ds = ds.split_dataset(4, 2, 0).unwrap();
        assert!(evaluate(&ZeroFlow, &ds, 0).is_err());
    }
}

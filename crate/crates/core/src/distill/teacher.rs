//! Gold-truth sources and the predictor abstraction used for evaluation.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::dataset::{gold_name, SequenceDataset};
use crate::flowcore::read_flo;
use crate::studentnet::StudentNet;
use crate::{Error, FlowField, FramePair, Result};

/// A slow, accurate flow estimator whose output serves as gold truth.
pub trait TeacherOracle: Sync {
    /// Flow for pair `index` of the sequence being annotated.
    fn estimate(&self, index: usize, pair: &FramePair) -> Result<FlowField>;
}

/// Returns the generator's exact flows.
#[derive(Debug, Clone)]
pub struct AnalyticTeacher {
    flows: Vec<FlowField>,
}

impl AnalyticTeacher {
    pub fn new(flows: Vec<FlowField>) -> Self {
        AnalyticTeacher { flows }
    }
}

fn check_dims(flow: &FlowField, pair: &FramePair) -> Result<()> {
    if flow.width() != pair.width() || flow.height() != pair.height() {
        return Err(Error::Dimension(format!(
            "teacher flow is {}x{}, pair is {}x{}",
            flow.width(),
            flow.height(),
            pair.width(),
            pair.height()
        )));
    }
    Ok(())
}

impl TeacherOracle for AnalyticTeacher {
    fn estimate(&self, index: usize, pair: &FramePair) -> Result<FlowField> {
        let flow = self.flows.get(index).ok_or_else(|| Error::Dataset(format!("no analytic flow for pair {index}")))?;
        check_dims(flow, pair)?;
        Ok(flow.clone())
    }
}

/// Reads precomputed `.flo` files named `{index:06}.flo` from a directory, e.g. the
/// output of an external high-accuracy model run offline.
#[derive(Debug, Clone)]
pub struct FileTeacher {
    dir: PathBuf,
}

impl FileTeacher {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        FileTeacher { dir: dir.as_ref().to_path_buf() }
    }
}

impl TeacherOracle for FileTeacher {
    fn estimate(&self, index: usize, pair: &FramePair) -> Result<FlowField> {
        let flow = read_flo(self.dir.join(gold_name(index)))?;
        check_dims(&flow, pair)?;
        Ok(flow)
    }
}

/// An exact teacher plus spatially smoothed Gaussian noise, to study imperfect gold truth.
#[derive(Debug, Clone)]
pub struct NoisyTeacher {
    inner: AnalyticTeacher,
    sigma: f64,
    smoothing: f64,
    seed: u64,
}

impl NoisyTeacher {
    /// `sigma`: per-component standard deviation in pixels after smoothing;
    /// `smoothing`: Gaussian kernel sigma in pixels (0 disables smoothing).
    pub fn new(inner: AnalyticTeacher, sigma: f64, smoothing: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && smoothing >= 0.0 && sigma.is_finite() && smoothing.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma and smoothing must be finite and nonnegative".into()));
        }
        Ok(NoisyTeacher { inner, sigma, smoothing, seed })
    }
}

fn smoothing_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn blur(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as i64;
    let pass = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kv) in k.iter().enumerate() {
                    let d = j as i64 - r;
                    let (sx, sy) = if horizontal {
                        ((x as i64 + d).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + d).clamp(0, h as i64 - 1) as usize)
                    };
                    acc += kv * src[sy * w + sx];
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    pass(&pass(plane, true), false)
}

impl TeacherOracle for NoisyTeacher {
    fn estimate(&self, index: usize, pair: &FramePair) -> Result<FlowField> {
        let exact = self.inner.estimate(index, pair)?;
        if self.sigma == 0.0 {
            return Ok(exact);
        }
        let (w, h) = (exact.width(), exact.height());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let k = smoothing_kernel(self.smoothing);
        // a separable blur shrinks white-noise variance by (sum k^2)^2
        let gain = self.sigma / k.iter().map(|v| v * v).sum::<f64>();
        let mut noise = || {
            let white: Vec<f64> = (0..w * h).map(|_| normal.sample(&mut rng)).collect();
            blur(&white, w, h, &k)
        };
        let (nu, nv) = (noise(), noise());
        FlowField::from_fn(w, h, |x, y| {
            let (u, v) = exact.at(x, y);
            let i = y * w + x;
            (u as f64 + gain * nu[i], v as f64 + gain * nv[i])
        })
    }
}

/// Annotates every pair (all splits) with the teacher's flow, in parallel.
pub fn generate_gold(mut dataset: SequenceDataset, teacher: &dyn TeacherOracle) -> Result<SequenceDataset> {
    let gold = (0..dataset.pair_count())
        .into_par_iter()
        .map(|i| {
            let pair = dataset.pair(i);
            let flow = teacher.estimate(i, &pair).map_err(|e| Error::Teacher { pair: i, source: Box::new(e) })?;
            check_dims(&flow, &pair).map_err(|e| Error::Teacher { pair: i, source: Box::new(e) })?;
            Ok(flow)
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.set_gold(gold)?;
    Ok(dataset)
}

/// Anything that maps a frame pair to a flow field; evaluated by [`super::evaluate`].
pub trait FlowPredictor: Sync {
    /// Inputs are center-cropped so both sides are multiples of this.
    fn multiple(&self) -> usize {
        1
    }

    fn predict(&self, index: usize, pair: &FramePair) -> Result<FlowField>;
}

impl FlowPredictor for StudentNet {
    fn multiple(&self) -> usize {
        self.config().multiple()
    }

    fn predict(&self, _index: usize, pair: &FramePair) -> Result<FlowField> {
        StudentNet::predict(self, pair)
    }
}

/// Evaluates a teacher as if it were a model.
pub struct TeacherPredictor<'a>(pub &'a dyn TeacherOracle);

impl FlowPredictor for TeacherPredictor<'_> {
    fn predict(&self, index: usize, pair: &FramePair) -> Result<FlowField> {
        self.0.estimate(index, pair)
    }
}

/// Predicts no motion anywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFlow;

impl FlowPredictor for ZeroFlow {
    fn predict(&self, _index: usize, pair: &FramePair) -> Result<FlowField> {
        Ok(FlowField::zeros(pair.width(), pair.height()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::write_flo;
    use crate::ImageFrame;

    fn dataset(n: usize) -> (SequenceDataset, Vec<FlowField>) {
        let frames = (0..n).map(|i| ImageFrame::filled(12, 10, 1, 0.1 * i as f32).unwrap()).collect();
        let flows = (0..n - 1).map(|i| FlowField::constant(12, 10, i as f32, 1.0).unwrap()).collect();
        (SequenceDataset::new(frames, "t").unwrap(), flows)
    }

    #[test]
    fn analytic_gold_is_exact() {
        let (ds, flows) = dataset(5);
        let ds = generate_gold(ds, &AnalyticTeacher::new(flows.clone())).unwrap();
        assert_eq!(ds.gold().unwrap(), flows.as_slice());
    }

    #[test]
    fn missing_file_names_the_pair() {
        let (ds, flows) = dataset(4);
        let dir = tempfile::tempdir().unwrap();
        for (i, f) in flows.iter().enumerate().filter(|(i, _)| *i != 2) {
            write_flo(f, dir.path().join(gold_name(i))).unwrap();
        }
        match generate_gold(ds, &FileTeacher::new(dir.path())) {
            Err(Error::Teacher { pair, .. }) => assert_eq!(pair, 2),
            other => panic!("expected a teacher error, got {other:?}"),
        }
    }

    #[test]
    fn zero_sigma_noise_is_exact() {
        let (ds, flows) = dataset(4);
        let noisy = NoisyTeacher::new(AnalyticTeacher::new(flows.clone()), 0.0, 2.0, 1).unwrap();
        assert_eq!(generate_gold(ds, &noisy).unwrap().gold().unwrap(), flows.as_slice());
    }

    #[test]
    fn noise_level_matches_sigma() {
        let flows = vec![FlowField::zeros(96, 96)];
        let f = ImageFrame::filled(96, 96, 1, 0.5).unwrap();
        let pair = FramePair::new(&f, &f).unwrap();
        let noisy = NoisyTeacher::new(AnalyticTeacher::new(flows), 0.5, 1.5, 4).unwrap();
        let out = noisy.estimate(0, &pair).unwrap();
        let var = out.u().iter().map(|&u| (u as f64).powi(2)).sum::<f64>() / out.u().len() as f64;
        assert!((var.sqrt() - 0.5).abs() < 0.1, "std {}", var.sqrt());
        assert_eq!(out, noisy.estimate(0, &pair).unwrap());
    }

    #[test]
    fn wrong_size_teacher_output_rejected() {
        let (ds, _) = dataset(3);
        let bad = AnalyticTeacher::new(vec![FlowField::zeros(4, 4); 2]);
        assert!(matches!(generate_gold(ds, &bad), Err(Error::Teacher { pair: 0, .. })));
    }
}

//! The supervised fine-tuning loop with validation-based early stopping.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::SequenceDataset;
use crate::flowcore::{crop_to_multiple, Crop};
use crate::metrics::multiscale_l1_loss;
use crate::studentnet::{optimizer_step, AdamConfig, OptimizerState, ParamSet, StudentNet};
use crate::{Error, FlowField, FramePair, ImageFrame, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneConfig {
    pub max_epochs: usize,
    pub val_every: usize,
    /// Consecutive non-improving validations before stopping.
    pub patience: usize,
    /// A validation loss counts as an improvement when below `best * (1 - min_rel_improvement)`.
    pub min_rel_improvement: f64,
    pub batch_size: usize,
    /// `(height, width)` of the random training crops.
    pub crop: (usize, usize),
    pub adam: AdamConfig,
    /// Per-scale loss weights, coarsest first; `None` means all ones.
    pub loss_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            max_epochs: 100,
            val_every: 5,
            patience: 3,
            min_rel_improvement: 1e-4,
            batch_size: 8,
            crop: (64, 64),
            adam: AdamConfig::default(),
            loss_weights: None,
            seed: 0,
        }
    }
}

impl FineTuneConfig {
    pub fn weights(&self, scales: usize) -> Result<Vec<f64>> {
        match &self.loss_weights {
            None => Ok(vec![1.0; scales]),
            Some(w) if w.len() == scales => Ok(w.clone()),
            Some(w) => Err(Error::InvalidConfig(format!("{} loss weights for {scales} output scales", w.len()))),
        }
    }

    fn validate(&self, net: &StudentNet, ds: &SequenceDataset) -> Result<()> {
        if self.val_every == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs, val_every and batch_size must be at least 1".into()));
        }
        let m = net.config().multiple();
        let (ch, cw) = self.crop;
        if ch == 0 || cw == 0 || ch % m != 0 || cw % m != 0 {
            return Err(Error::InvalidConfig(format!("crop {ch}x{cw} must be a positive multiple of {m}")));
        }
        if ch > ds.height() || cw > ds.width() {
            return Err(Error::InvalidConfig(format!("crop {ch}x{cw} exceeds the {}x{} frames", ds.height(), ds.width())));
        }
        self.weights(net.config().scales())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

/// Everything about a run that is reproducible from its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    /// Mean training loss of epochs `1..=n`.
    pub train_loss: Vec<f64>,
    /// `(epoch, loss)`; epoch 0 is the network before any update.
    pub val_loss: Vec<(usize, f64)>,
    /// Epoch whose parameters were kept (the best validation).
    pub epoch_of_convergence: usize,
    pub stop_reason: StopReason,
    pub steps: u64,
    /// Every pair index read during training or validation.
    pub accessed_pairs: BTreeSet<usize>,
}

/// Wall-clock seconds at the end of each epoch, kept apart from the reproducible log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timing {
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    pub net: StudentNet,
    pub log: TrainingLog,
    pub timing: Timing,
}

/// Progress report passed to observers after each epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub elapsed: f64,
}

impl TrainingLog {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_loss.iter().find(|(e, _)| *e == self.epoch_of_convergence).map(|&(_, l)| l)
    }

    /// `epoch,train_loss,val_loss` with empty cells where a value is absent.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        let val = |e: usize| self.val_loss.iter().find(|(v, _)| *v == e).map(|&(_, l)| l);
        for e in 0..=self.train_loss.len() {
            let train = if e == 0 { String::new() } else { format!("{:e}", self.train_loss[e - 1]) };
            let v = val(e).map(|l| format!("{l:e}")).unwrap_or_default();
            writeln!(s, "{e},{train},{v}").unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "epochs_run = {}", self.train_loss.len()).unwrap();
        writeln!(s, "epoch_of_convergence = {}", self.epoch_of_convergence).unwrap();
        writeln!(s, "stop_reason = {}", self.stop_reason.as_str()).unwrap();
        writeln!(s, "optimizer_steps = {}", self.steps).unwrap();
        if let Some(l) = self.best_val_loss() {
            writeln!(s, "best_val_loss = {l:e}").unwrap();
        }
        if let Some(l) = self.train_loss.last() {
            writeln!(s, "final_train_loss = {l:e}").unwrap();
        }
        s
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (name, body) in [("train_log.csv", self.to_csv()), ("train_summary.txt", self.summary())] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

impl Timing {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,elapsed_seconds\n");
        for (i, t) in self.epoch_seconds.iter().enumerate() {
            writeln!(s, "{},{t:.3}", i + 1).unwrap();
        }
        s
    }
}

struct Sample {
    frames: (ImageFrame, ImageFrame),
    gold: FlowField,
}

fn random_crop(ds: &SequenceDataset, i: usize, (ch, cw): (usize, usize), rng: &mut ChaCha8Rng) -> Result<Sample> {
    let x0 = rng.random_range(0..=ds.width() - cw);
    let y0 = rng.random_range(0..=ds.height() - ch);
    let pair = ds.pair(i);
    Ok(Sample { frames: (pair.first.crop(x0, y0, cw, ch)?, pair.second.crop(x0, y0, cw, ch)?), gold: ds.gold_at(i)?.crop(x0, y0, cw, ch)? })
}

/// Per-sample gradients in parallel, summed in sample order.
fn batch_gradient(net: &StudentNet, batch: &[Sample], weights: &[f64]) -> Result<(f64, ParamSet)> {
    let results = batch
        .par_iter()
        .map(|s| {
            let pair = FramePair::new(&s.frames.0, &s.frames.1)?;
            net.backward(&pair, &s.gold, weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = net.params().zeros_like();
    let mut loss = 0.0;
    for (l, g) in &results {
        loss += l;
        total.add_assign(g);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((loss, total))
}

/// Mean multi-scale loss over the validation pairs, full frames cropped to the network multiple.
pub fn validation_loss(net: &StudentNet, ds: &SequenceDataset, weights: &[f64]) -> Result<f64> {
    let m = net.config().multiple();
    let losses = ds
        .split()
        .val
        .clone()
        .into_par_iter()
        .map(|i| {
            let pair = ds.pair(i);
            let (a, b) = (crop_to_multiple(pair.first, m)?, crop_to_multiple(pair.second, m)?);
            let gold = crop_to_multiple(ds.gold_at(i)?, m)?;
            let pred = net.forward(&FramePair::new(&a, &b)?)?;
            multiscale_l1_loss(&pred, &gold, weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

pub fn fine_tune(net: StudentNet, ds: &SequenceDataset, cfg: &FineTuneConfig) -> Result<FineTuneOutcome> {
    fine_tune_observed(net, ds, cfg, |_| {})
}

/// [`fine_tune`] with a callback after every epoch.
pub fn fine_tune_observed(
    mut net: StudentNet,
    ds: &SequenceDataset,
    cfg: &FineTuneConfig,
    mut observer: impl FnMut(&EpochReport),
) -> Result<FineTuneOutcome> {
    cfg.validate(&net, ds)?;
    let split = ds.split().clone();
    if split.train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    for i in split.train.clone().chain(split.val.clone()) {
        ds.gold_at(i).map_err(|_| Error::Dataset(format!("pair {i} has no gold flow; run generate_gold first")))?;
    }
    let weights = cfg.weights(net.config().scales())?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(cfg.adam, net.params());
    let mut accessed: BTreeSet<usize> = BTreeSet::new();
    let has_val = !split.val.is_empty();
    accessed.extend(split.val.clone());

    let mut val_loss = Vec::new();
    let mut best: Option<(usize, f64, StudentNet)> = None;
    if has_val {
        let l = validation_loss(&net, ds, &weights)?;
        val_loss.push((0, l));
        best = Some((0, l, net.clone()));
    }
    let mut bad = 0;
    let mut train_loss = Vec::new();
    let mut timing = Timing::default();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut order: Vec<usize> = split.train.clone().collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    accessed.insert(i);
                    random_crop(ds, i, cfg.crop, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = batch_gradient(&net, &batch, &weights)?;
            sum += loss;
            optimizer_step(net.params_mut(), &grads, &mut state)?;
        }
        let epoch_loss = sum / order.len() as f64;
        train_loss.push(epoch_loss);

        let mut this_val = None;
        if has_val && epoch % cfg.val_every == 0 {
            let l = validation_loss(&net, ds, &weights)?;
            val_loss.push((epoch, l));
            this_val = Some(l);
            let best_l = best.as_ref().map(|b| b.1).expect("validation ran at epoch 0");
            if l < best_l * (1.0 - cfg.min_rel_improvement) {
                best = Some((epoch, l, net.clone()));
                bad = 0;
            } else {
                bad += 1;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        timing.epoch_seconds.push(elapsed);
        observer(&EpochReport { epoch, train_loss: epoch_loss, val_loss: this_val, elapsed });
        if has_val && bad >= cfg.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    timing.total_seconds = start.elapsed().as_secs_f64();
    let epochs_run = train_loss.len();
    let (epoch_of_convergence, net) = match best {
        Some((e, _, best_net)) => (e, best_net),
        None => (epochs_run, net),
    };
    let log = TrainingLog { train_loss, val_loss, epoch_of_convergence, stop_reason, steps: state.step, accessed_pairs: accessed };
    Ok(FineTuneOutcome { net, log, timing })
}

//! `key = value` run configuration with per-key command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::distill::FineTuneConfig;
use crate::studentnet::{AdamConfig, NetConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Distill,
    Eval,
    Track,
    Bench,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Gen, Command::Distill, Command::Eval, Command::Track, Command::Bench];

    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Distill => "distill",
            Command::Eval => "eval",
            Command::Track => "track",
            Command::Bench => "bench",
        }
    }
}

/// One recognised configuration key.
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    pub commands: &'static [Command],
}

use Command::*;

const NET: &[Command] = &[Distill, Bench];
const TRAIN: &[Command] = &[Distill];
const ALL: &[Command] = &[Gen, Distill, Eval, Track, Bench];

pub const KEYS: &[KeySpec] = &[
    KeySpec { key: "out", default: None, help: "output directory", commands: ALL },
    KeySpec { key: "data", default: None, help: "dataset directory (frames, gold/, manifest.txt)", commands: &[Distill, Eval, Track] },
    KeySpec { key: "threads", default: Some("0"), help: "worker threads; 0 uses all cores", commands: ALL },
    KeySpec { key: "seed", default: Some("0"), help: "seed for scene generation and training", commands: &[Gen, Distill] },
    KeySpec {
        key: "regime",
        default: None,
        help: "rotation | scale | sparse | deformation | generic | loop | loop-sampling",
        commands: &[Gen],
    },
    KeySpec { key: "frames", default: None, help: "frame count override", commands: &[Gen] },
    KeySpec { key: "illumination", default: Some("default"), help: "default | none | gain-ramp | vignette | specular", commands: &[Gen] },
    KeySpec { key: "gain_factor", default: Some("1.06"), help: "per-frame gain change of gain-ramp", commands: &[Gen] },
    KeySpec { key: "gain_period", default: Some("40"), help: "gain-ramp reversal period in frames", commands: &[Gen] },
    KeySpec { key: "input_channels", default: Some("2"), help: "2 (grayscale pair) or 6 (RGB pair)", commands: NET },
    KeySpec { key: "base_width", default: Some("16"), help: "channels of the first encoder level", commands: NET },
    KeySpec { key: "levels", default: Some("4"), help: "dyadic encoder levels", commands: NET },
    KeySpec { key: "net_seed", default: Some("0"), help: "weight initialization seed", commands: NET },
    KeySpec { key: "init", default: None, help: "checkpoint to start fine-tuning from", commands: TRAIN },
    KeySpec { key: "max_epochs", default: Some("100"), help: "epoch limit", commands: TRAIN },
    KeySpec { key: "val_every", default: Some("5"), help: "epochs between validations", commands: TRAIN },
    KeySpec { key: "patience", default: Some("3"), help: "non-improving validations before stopping", commands: TRAIN },
    KeySpec { key: "min_rel_improvement", default: Some("1e-4"), help: "relative validation improvement threshold", commands: TRAIN },
    KeySpec { key: "batch_size", default: Some("8"), help: "pairs per optimizer step", commands: TRAIN },
    KeySpec { key: "crop_height", default: Some("64"), help: "random crop height", commands: TRAIN },
    KeySpec { key: "crop_width", default: Some("64"), help: "random crop width", commands: TRAIN },
    KeySpec { key: "lr", default: Some("1e-4"), help: "Adam learning rate", commands: TRAIN },
    KeySpec { key: "beta1", default: Some("0.9"), help: "Adam first-moment decay", commands: TRAIN },
    KeySpec { key: "beta2", default: Some("0.999"), help: "Adam second-moment decay", commands: TRAIN },
    KeySpec { key: "eps", default: Some("1e-8"), help: "Adam epsilon", commands: TRAIN },
    KeySpec { key: "loss_weights", default: None, help: "comma-separated per-scale weights, coarsest first", commands: TRAIN },
    KeySpec { key: "model", default: Some("teacher"), help: "teacher | zero | path to a checkpoint", commands: &[Eval, Track] },
    KeySpec { key: "margin", default: Some("0"), help: "border pixels excluded from EPE*", commands: &[Eval] },
    KeySpec { key: "visualize", default: Some("0"), help: "flow color images written for the first N test pairs", commands: &[Eval] },
    KeySpec { key: "compare", default: None, help: "pre_dir,post_dir: compare two eval outputs", commands: &[Eval] },
    KeySpec { key: "mesh_nx", default: Some("12"), help: "mesh columns", commands: &[Track] },
    KeySpec { key: "mesh_ny", default: Some("9"), help: "mesh rows", commands: &[Track] },
    KeySpec { key: "mesh_margin", default: Some("16"), help: "mesh inset from the frame border in pixels", commands: &[Track] },
    KeySpec { key: "size", default: Some("256"), help: "square benchmark input side", commands: &[Bench] },
    KeySpec { key: "runs", default: Some("30"), help: "timed runs per model", commands: &[Bench] },
    KeySpec { key: "warmup", default: Some("3"), help: "discarded warm-up runs", commands: &[Bench] },
    KeySpec {
        key: "heavy_base_width",
        default: None,
        help: "reference base width; default: smallest with >= 8x the parameters",
        commands: &[Bench],
    },
    KeySpec { key: "heavy_levels", default: None, help: "reference levels; default: the student's", commands: &[Bench] },
];

pub fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

/// Resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let values = KEYS
            .iter()
            .filter(|k| k.commands.contains(&command))
            .filter_map(|k| k.default.map(|d| (k.key.to_string(), d.to_string())))
            .collect();
        RunConfig { command, values }
    }

    pub fn command(&self) -> Command {
        self.command
    }

    /// Sets a key; unknown keys and keys that do not apply to this command are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key_spec(&key) {
            None => Err(Error::InvalidConfig(format!("unknown configuration key `{key}`"))),
            Some(spec) if !spec.commands.contains(&self.command) => {
                Err(Error::InvalidConfig(format!("key `{key}` does not apply to `{}`", self.command.name())))
            }
            Some(_) => {
                self.values.insert(key, value.trim().to_string());
                Ok(())
            }
        }
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::InvalidConfig(format!("`{}` needs --{}", self.command.name(), key.replace('_', "-"))))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::InvalidConfig(format!("`{key}` = `{v}` is not a valid value")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!("`{key}` must be finite")));
        }
        Ok(v)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key).map(|_| self.usize(key)).transpose()
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    /// A path that must already exist as a directory.
    pub fn existing_dir(&self, key: &str) -> Result<PathBuf> {
        let p = self.path(key)?;
        if !p.is_dir() {
            return Err(Error::Dataset(format!("{key} directory `{}` does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn net_config(&self) -> Result<NetConfig> {
        let cfg = NetConfig {
            input_channels: self.usize("input_channels")?,
            base_width: self.usize("base_width")?,
            levels: self.usize("levels")?,
            seed: self.u64("net_seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fine_tune_config(&self) -> Result<FineTuneConfig> {
        let loss_weights = match self.get("loss_weights") {
            None => None,
            Some(s) => Some(
                s.split(',')
                    .map(|w| {
                        w.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite() && *v >= 0.0)
                            .ok_or_else(|| Error::InvalidConfig(format!("loss weight `{w}` is not a nonnegative number")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(FineTuneConfig {
            max_epochs: self.usize("max_epochs")?,
            val_every: self.usize("val_every")?,
            patience: self.usize("patience")?,
            min_rel_improvement: self.f64("min_rel_improvement")?,
            batch_size: self.usize("batch_size")?,
            crop: (self.usize("crop_height")?, self.usize("crop_width")?),
            adam: AdamConfig { lr: self.f64("lr")?, beta1: self.f64("beta1")?, beta2: self.f64("beta2")?, eps: self.f64("eps")? },
            loss_weights,
            seed: self.u64("seed")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_library_defaults() {
        let cfg = RunConfig::new(Command::Distill);
        assert_eq!(cfg.fine_tune_config().unwrap(), FineTuneConfig::default());
        assert_eq!(cfg.net_config().unwrap(), NetConfig::default());
    }

    #[test]
    fn file_then_override() {
        let mut cfg = RunConfig::new(Command::Distill);
        cfg.apply_text("# schedule\nmax_epochs = 20\nlr = 5e-4  # faster\n\n").unwrap();
        cfg.set("max-epochs", "1").unwrap();
        let ft = cfg.fine_tune_config().unwrap();
        assert_eq!(ft.max_epochs, 1);
        assert_eq!(ft.adam.lr, 5e-4);
    }

    #[test]
    fn unknown_or_foreign_keys_rejected() {
        let mut cfg = RunConfig::new(Command::Gen);
        assert!(cfg.apply_text("colour = blue").is_err());
        assert!(cfg.set("lr", "0.1").is_err());
        assert!(cfg.apply_text("regime rotation").is_err());
    }

    #[test]
    fn bad_values_reported_with_key() {
        let mut cfg = RunConfig::new(Command::Distill);
        cfg.set("batch_size", "eight").unwrap();
        let err = cfg.fine_tune_config().unwrap_err().to_string();
        assert!(err.contains("batch_size"), "{err}");
        cfg.set("batch_size", "8").unwrap();
        cfg.set("loss_weights", "1,-2").unwrap();
        assert!(cfg.fine_tune_config().is_err());
    }

    #[test]
    fn every_command_has_an_output_key() {
        for c in Command::ALL {
            assert!(KEYS.iter().any(|k| k.key == "out" && k.commands.contains(&c)));
        }
    }
}

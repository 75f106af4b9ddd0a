//! Frame sequences with per-pair gold flow and a temporal split.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::flowcore::{read_flo, read_image, write_flo, write_image_with_depth, BitDepth};
use crate::{Error, FlowField, FramePair, ImageFrame, Result};

pub const MANIFEST: &str = "manifest.txt";
pub const GOLD_DIR: &str = "gold";

/// Contiguous train/val/test pair ranges, in temporal order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    pub fn new(n_train: usize, n_val: usize, n_test: usize) -> Self {
        Split { train: 0..n_train, val: n_train..n_train + n_val, test: n_train + n_val..n_train + n_val + n_test }
    }

    pub fn end(&self) -> usize {
        self.test.end
    }
}

/// Ordered frames; pair `i` is `(frames[i], frames[i + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    frames: Vec<ImageFrame>,
    gold: Option<Vec<FlowField>>,
    split: Split,
    provenance: String,
}

impl SequenceDataset {
    /// A dataset without gold flow and with every pair in the test split.
    pub fn new(frames: Vec<ImageFrame>, provenance: impl Into<String>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Dataset(format!("need at least 2 frames, got {}", frames.len())));
        }
        if let Some(bad) = frames.iter().position(|f| !f.same_shape(&frames[0])) {
            return Err(Error::Dataset(format!("frame {bad} differs in shape from frame 0")));
        }
        let pairs = frames.len() - 1;
        Ok(SequenceDataset { frames, gold: None, split: Split::new(0, 0, pairs), provenance: provenance.into() })
    }

    pub fn frames(&self) -> &[ImageFrame] {
        &self.frames
    }

    pub fn pair_count(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn pair(&self, i: usize) -> FramePair<'_> {
        FramePair::new(&self.frames[i], &self.frames[i + 1]).expect("frames share a shape")
    }

    pub fn gold(&self) -> Option<&[FlowField]> {
        self.gold.as_deref()
    }

    pub fn gold_at(&self, i: usize) -> Result<&FlowField> {
        self.gold.as_ref().map(|g| &g[i]).ok_or_else(|| Error::Dataset("dataset has no gold flow; run generate_gold first".into()))
    }

    /// Attaches one gold flow per pair.
    pub fn set_gold(&mut self, gold: Vec<FlowField>) -> Result<()> {
        if gold.len() != self.pair_count() {
            return Err(Error::Dataset(format!("{} gold flows for {} pairs", gold.len(), self.pair_count())));
        }
        if let Some(i) = gold.iter().position(|g| g.width() != self.width() || g.height() != self.height()) {
            return Err(Error::Dimension(format!("gold flow {i} does not match the frame size")));
        }
        self.gold = Some(gold);
        Ok(())
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Contiguous temporal split: `[0, n_train)`, then validation, then test.
    pub fn split_dataset(mut self, n_train: usize, n_val: usize, n_test: usize) -> Result<Self> {
        let total = n_train + n_val + n_test;
        if total > self.pair_count() {
            return Err(Error::Dataset(format!("split {n_train}/{n_val}/{n_test} needs {total} pairs, dataset has {}", self.pair_count())));
        }
        self.split = Split::new(n_train, n_val, n_test);
        Ok(self)
    }

    /// Writes frames as 16-bit PNG, gold as `.flo` under `gold/`, and a manifest.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            write_image_with_depth(f, dir.join(frame_name(i)), BitDepth::Sixteen)?;
        }
        if let Some(gold) = &self.gold {
            let gdir = dir.join(GOLD_DIR);
            std::fs::create_dir_all(&gdir).map_err(|e| Error::io(&gdir, e))?;
            for (i, g) in gold.iter().enumerate() {
                write_flo(g, gdir.join(gold_name(i)))?;
            }
        }
        let path = dir.join(MANIFEST);
        std::fs::write(&path, self.manifest()).map_err(|e| Error::io(&path, e))
    }

    fn manifest(&self) -> String {
        let s = &self.split;
        let mut m = String::new();
        writeln!(m, "frames = {}", self.frames.len()).unwrap();
        writeln!(m, "width = {}", self.width()).unwrap();
        writeln!(m, "height = {}", self.height()).unwrap();
        writeln!(m, "channels = {}", self.frames[0].channels()).unwrap();
        writeln!(m, "train = {}..{}", s.train.start, s.train.end).unwrap();
        writeln!(m, "val = {}..{}", s.val.start, s.val.end).unwrap();
        writeln!(m, "test = {}..{}", s.test.start, s.test.end).unwrap();
        writeln!(m, "gold = {}", self.gold.is_some()).unwrap();
        writeln!(m, "provenance = {}", self.provenance).unwrap();
        m
    }

    /// Reads a directory written by [`SequenceDataset::save`] (or assembled by hand).
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest::parse(&text)?;
        let frames = (0..manifest.frames).map(|i| read_image(dir.join(frame_name(i)))).collect::<Result<Vec<_>>>()?;
        let mut ds = SequenceDataset::new(frames, manifest.provenance)?;
        let split = Split { train: manifest.train, val: manifest.val, test: manifest.test };
        let contiguous = split.train.start == 0 && split.val.start == split.train.end && split.test.start == split.val.end;
        if !contiguous || split.end() > ds.pair_count() {
            return Err(Error::Dataset(format!("manifest split {split:?} is not a contiguous prefix of the pairs")));
        }
        ds.split = split;
        let gdir = dir.join(GOLD_DIR);
        if gdir.is_dir() {
            let gold = (0..ds.pair_count()).map(|i| read_flo(gdir.join(gold_name(i)))).collect::<Result<Vec<_>>>()?;
            ds.set_gold(gold)?;
        }
        Ok(ds)
    }
}

pub fn frame_name(i: usize) -> String {
    format!("{i:06}.png")
}

pub fn gold_name(i: usize) -> String {
    format!("{i:06}.flo")
}

struct Manifest {
    frames: usize,
    train: Range<usize>,
    val: Range<usize>,
    test: Range<usize>,
    provenance: String,
}

impl Manifest {
    fn parse(text: &str) -> Result<Self> {
        let mut frames = None;
        let (mut train, mut val, mut test) = (None, None, None);
        let mut provenance = String::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Dataset(format!("manifest line `{line}` is not key = value")))?;
            match k {
                "frames" => frames = Some(parse_usize(v)?),
                "train" => train = Some(parse_range(v)?),
                "val" => val = Some(parse_range(v)?),
                "test" => test = Some(parse_range(v)?),
                "provenance" => provenance = v.to_string(),
                _ => {}
            }
        }
        let frames = frames.ok_or_else(|| Error::Dataset("manifest lacks `frames`".into()))?;
        let pairs = frames.saturating_sub(1);
        let train = train.unwrap_or(0..0);
        let val = val.unwrap_or(train.end..train.end);
        let test = test.unwrap_or(val.end..pairs);
        Ok(Manifest { frames, train, val, test, provenance })
    }
}

fn parse_usize(v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Dataset(format!("`{v}` is not a count")))
}

fn parse_range(v: &str) -> Result<Range<usize>> {
    let (a, b) = v.split_once("..").ok_or_else(|| Error::Dataset(format!("`{v}` is not a range a..b")))?;
    let (a, b) = (parse_usize(a.trim())?, parse_usize(b.trim())?);
    if a > b {
        return Err(Error::Dataset(format!("range `{v}` is reversed")));
    }
    Ok(a..b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize) -> Vec<ImageFrame> {
        (0..n).map(|i| ImageFrame::filled(8, 8, 1, i as f32 / n as f32).unwrap()).collect()
    }

    #[test]
    fn rotation_style_split_ranges() {
        let ds = SequenceDataset::new(frames(601), "t").unwrap().split_dataset(329, 110, 161).unwrap();
        assert_eq!(ds.split(), &Split { train: 0..329, val: 329..439, test: 439..600 });
    }

    #[test]
    fn empty_test_split_is_valid() {
        let ds = SequenceDataset::new(frames(11), "t").unwrap().split_dataset(7, 3, 0).unwrap();
        assert!(ds.split().test.is_empty());
    }

    #[test]
    fn oversized_split_rejected() {
        assert!(SequenceDataset::new(frames(11), "t").unwrap().split_dataset(7, 3, 1).is_err());
    }

    #[test]
    fn single_frame_or_mixed_shapes_rejected() {
        assert!(SequenceDataset::new(frames(1), "t").is_err());
        let mut f = frames(3);
        f.push(ImageFrame::filled(4, 8, 1, 0.0).unwrap());
        assert!(SequenceDataset::new(f, "t").is_err());
    }

    #[test]
    fn disk_round_trip() {
        let mut ds = SequenceDataset::new(frames(5), "unit test").unwrap().split_dataset(2, 1, 1).unwrap();
        ds.set_gold((0..4).map(|i| FlowField::constant(8, 8, i as f32, -0.5).unwrap()).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = SequenceDataset::load(dir.path()).unwrap();
        assert_eq!(back.split(), ds.split());
        assert_eq!(back.gold(), ds.gold());
        assert_eq!(back.provenance(), "unit test");
        for (a, b) in back.frames().iter().zip(ds.frames()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= 0.5 / 65535.0));
        }
    }

    #[test]
    fn missing_gold_file_is_reported() {
        let mut ds = SequenceDataset::new(frames(3), "t").unwrap();
        ds.set_gold(vec![FlowField::zeros(8, 8); 2]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(GOLD_DIR).join(gold_name(1))).unwrap();
        let err = SequenceDataset::load(dir.path()).unwrap_err().to_string();
        assert!(err.contains("000001.flo"), "{err}");
    }
}

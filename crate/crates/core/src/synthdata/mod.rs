//! Synthetic sequences with exact ground-truth flow.
//!
//! A fixed continuous base texture is rendered through the accumulated analytic
//! inverse map of each frame, so frames carry no resampling blur and the flow
//! between any two frames is known in closed form. Illumination is applied
//! afterwards and never touches the flow.

mod illumination;
mod motion;
mod texture;

pub use illumination::Illumination;
pub use motion::{Bump, Motion, Point, WanderParams};
pub use texture::{Texture, TextureKind, SPARSE_BACKGROUND};

use rayon::prelude::*;

use crate::distill::SequenceDataset;
use crate::{Error, FlowField, ImageFrame, Result};

/// Minimum fraction of pixels whose inter-frame flow lands inside the next frame.
pub const MIN_VISIBLE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub texture: TextureKind,
    pub motion: Motion,
    /// Empty means no perturbation.
    pub illumination: Vec<Illumination>,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// Rendered frames plus `gt_flows[n]` from frame `n` to `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<ImageFrame>,
    pub gt_flows: Vec<FlowField>,
}

fn texture_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0x7e57
}

fn illumination_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x111d
}

impl SceneSpec {
    pub fn texture(&self) -> Texture {
        Texture::new(self.texture, texture_seed(self.seed))
    }

    fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidConfig(format!("a sequence needs at least 2 frames, got {}", self.frames)));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidConfig(format!("frame size {}x{} is below 16x16", self.width, self.height)));
        }
        Ok(())
    }

    /// Exact flow from frame `a` to frame `b` (either order).
    pub fn analytic_flow(&self, a: usize, b: usize) -> FlowField {
        let (fa, fb) = (a as f64, b as f64);
        FlowField::from_fn(self.width, self.height, |x, y| self.motion.flow_between(fa, fb, (x as f64, y as f64)))
            .expect("analytic flow is finite")
    }

    fn render(&self, n: usize, texture: &Texture) -> Result<ImageFrame> {
        let (w, h) = (self.width, self.height);
        let t = n as f64;
        let mut plane = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let target = (x as f64, y as f64);
                let p = self.motion.inverse(t, target);
                let back = self.motion.forward(t, p);
                if (back.0 - target.0).abs() + (back.1 - target.1).abs() > 1e-6 {
                    return Err(Error::InvalidConfig(format!(
                        "motion is not invertible at ({x}, {y}) in frame {n}; reduce the deformation amplitude"
                    )));
                }
                plane.push(texture.sample(p.0, p.1));
            }
        }
        for ill in &self.illumination {
            ill.apply(&mut plane, w, h, n, illumination_seed(self.seed));
        }
        ImageFrame::from_clamped(w, h, 1, plane.into_iter().map(|v| v as f32).collect())
    }
}

fn visible_fraction(flow: &FlowField) -> f64 {
    let (w, h) = (flow.width(), flow.height());
    let mut inside = 0usize;
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let (tx, ty) = (x as f64 + u as f64, y as f64 + v as f64);
            if tx >= 0.0 && ty >= 0.0 && tx <= (w - 1) as f64 && ty <= (h - 1) as f64 {
                inside += 1;
            }
        }
    }
    inside as f64 / (w * h) as f64
}

/// Renders every frame and the exact inter-frame flows. Frames are generated in
/// parallel; the result does not depend on the thread count.
pub fn generate_sequence(spec: &SceneSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let texture = spec.texture();
    let frames = (0..spec.frames).into_par_iter().map(|n| spec.render(n, &texture)).collect::<Result<Vec<_>>>()?;
    let gt_flows: Vec<FlowField> = (0..spec.frames - 1).into_par_iter().map(|n| spec.analytic_flow(n, n + 1)).collect();
    if let Some((n, frac)) = gt_flows.iter().map(visible_fraction).enumerate().find(|&(_, f)| f < MIN_VISIBLE_FRACTION) {
        return Err(Error::InvalidConfig(format!(
            "pair {n} keeps only {:.1}% of pixels visible (need {:.0}%)",
            100.0 * frac,
            100.0 * MIN_VISIBLE_FRACTION
        )));
    }
    Ok(SyntheticSequence { frames, gt_flows })
}

/// The four target regimes, the generic pre-training domain, and the tracking loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Rotation,
    Scale,
    Sparse,
    Deformation,
    Generic,
    /// A scene whose motion returns to the identity after `LOOP_PERIOD` frames.
    Loop,
    /// Free motion over the loop scene's tissue, recorded before tracking.
    LoopSampling,
}

impl Regime {
    pub const TARGETS: [Regime; 4] = [Regime::Rotation, Regime::Scale, Regime::Sparse, Regime::Deformation];
    pub const ALL: [Regime; 7] =
        [Regime::Rotation, Regime::Scale, Regime::Sparse, Regime::Deformation, Regime::Generic, Regime::Loop, Regime::LoopSampling];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Rotation => "rotation",
            Regime::Scale => "scale",
            Regime::Sparse => "sparse",
            Regime::Deformation => "deformation",
            Regime::Generic => "generic",
            Regime::Loop => "loop",
            Regime::LoopSampling => "loop-sampling",
        }
    }

    pub fn parse(s: &str) -> Result<Regime> {
        Regime::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown regime `{s}`; expected rotation, scale, sparse, deformation, generic, loop or loop-sampling"
            ))
        })
    }

    /// Reference train/val/test sample counts of the patient recordings this regime imitates.
    /// The generic and loop-sampling regimes have no test split; the loop is all test.
    pub fn reference_split(self) -> [usize; 3] {
        match self {
            Regime::Rotation => [329, 110, 161],
            Regime::Scale => [600, 240, 397],
            Regime::Sparse => [399, 100, 307],
            Regime::Deformation => [600, 200, 100],
            Regime::Generic => [4, 1, 0],
            Regime::Loop => [0, 0, 1],
            Regime::LoopSampling => [3, 1, 0],
        }
    }
}

pub const SUITE_WIDTH: usize = 256;
pub const SUITE_HEIGHT: usize = 192;
/// Pairs per target regime in the desk-scale suite.
pub const SUITE_PAIRS: usize = 220;
pub const GENERIC_PAIRS: usize = 300;
pub const LOOP_PERIOD: usize = 100;
/// Pairs of free motion recorded over the loop scene before tracking.
pub const LOOP_SAMPLING_PAIRS: usize = 120;

/// Scales `counts` to sum to `total`, largest remainder first (ties to the earlier entry).
pub fn scale_split(counts: [usize; 3], total: usize) -> [usize; 3] {
    let sum: usize = counts.iter().sum();
    let mut out = [0usize; 3];
    let mut rem = [(0usize, 0usize); 3];
    for k in 0..3 {
        out[k] = counts[k] * total / sum;
        rem[k] = (counts[k] * total % sum, k);
    }
    let short = total - out.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in rem.iter().take(short) {
        out[k] += 1;
    }
    out
}

fn center() -> Point {
    ((SUITE_WIDTH as f64 - 1.0) / 2.0, (SUITE_HEIGHT as f64 - 1.0) / 2.0)
}

/// Scene of a regime at suite resolution. Each regime gets its own texture seed.
pub fn regime_spec(regime: Regime, seed: u64) -> SceneSpec {
    // the loop and its sampling phase share one scene seed, hence one texture
    let family = if regime == Regime::LoopSampling { Regime::Loop } else { regime };
    let s = seed.wrapping_mul(16).wrapping_add(family as u64);
    let c = center();
    let (w, h) = (SUITE_WIDTH, SUITE_HEIGHT);
    let (texture, motion, illumination, frames) = match regime {
        Regime::Rotation => {
            (TextureKind::TissueLike { octaves: 4 }, Motion::Rotation { deg_per_frame: 1.0, center: c }, vec![], SUITE_PAIRS + 1)
        }
        Regime::Scale => {
            (TextureKind::TissueLike { octaves: 4 }, Motion::Scale { factor: 1.01, center: c, period: Some(80) }, vec![], SUITE_PAIRS + 1)
        }
        Regime::Sparse => (
            TextureKind::SparseBlobs { density: 0.004 },
            Motion::Composite(vec![Motion::Translation { dx: 0.8, dy: 0.4 }, Motion::Rotation { deg_per_frame: 0.3, center: c }]),
            vec![Illumination::Vignette { strength: 0.4 }, Illumination::Specular { count: 3, radius: 4.0, intensity: 0.5 }],
            SUITE_PAIRS + 1,
        ),
        Regime::Deformation => (
            TextureKind::TissueLike { octaves: 3 },
            Motion::random_deformation(12, 6.0, 12.0, 30.0, 0.3, w, h, s ^ 0xdef0),
            vec![],
            SUITE_PAIRS + 1,
        ),
        Regime::Generic => (TextureKind::DensePerlin, Motion::random_wander(5.0, 0.05, 15.0, c, s ^ 0x6e6e), vec![], GENERIC_PAIRS + 1),
        Regime::Loop => (
            TextureKind::TissueLike { octaves: 4 },
            Motion::Loop { rotation_deg: 5.0, shift: (12.0, 8.0), center: c, period: LOOP_PERIOD },
            vec![],
            LOOP_PERIOD + 1,
        ),
        Regime::LoopSampling => {
            (TextureKind::TissueLike { octaves: 4 }, Motion::random_wander(3.0, 0.03, 10.0, c, s ^ 0x100b), vec![], LOOP_SAMPLING_PAIRS + 1)
        }
    };
    SceneSpec { texture, motion, illumination, frames, width: w, height: h, seed: s }
}

/// A generated regime: the dataset (split, no gold yet) and its exact flows.
#[derive(Debug, Clone)]
pub struct RegimeData {
    pub regime: Regime,
    pub spec: SceneSpec,
    pub dataset: SequenceDataset,
    pub ground_truth: Vec<FlowField>,
}

/// Generates `spec` and splits it in the regime's reference proportions.
pub fn build_regime(regime: Regime, spec: SceneSpec) -> Result<RegimeData> {
    let seq = generate_sequence(&spec)?;
    let pairs = seq.gt_flows.len();
    let [a, b, c] = scale_split(regime.reference_split(), pairs);
    let provenance = format!("synthetic regime={} seed={} frames={}", regime.name(), spec.seed, spec.frames);
    let dataset = SequenceDataset::new(seq.frames, provenance)?.split_dataset(a, b, c)?;
    Ok(RegimeData { regime, spec, dataset, ground_truth: seq.gt_flows })
}

pub fn make_regime(regime: Regime, seed: u64) -> Result<RegimeData> {
    build_regime(regime, regime_spec(regime, seed))
}

/// The four target regimes at 256x192 with 220 pairs each.
pub fn make_regime_suite(seed: u64) -> Result<Vec<RegimeData>> {
    Regime::TARGETS.iter().map(|&r| make_regime(r, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{accumulate_flows, backward_warp};

    fn small(texture: TextureKind, motion: Motion, frames: usize) -> SceneSpec {
        SceneSpec { texture, motion, illumination: vec![], frames, width: 96, height: 64, seed: 5 }
    }

    fn mad(a: &ImageFrame, b: &ImageFrame) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.data().len() as f64
    }

    #[test]
    fn table_proportions_scale_by_largest_remainder() {
        assert_eq!(scale_split([329, 110, 161], 220), [121, 40, 59]);
        assert_eq!(scale_split([600, 240, 397], 220), [107, 43, 70]);
        assert_eq!(scale_split([399, 100, 307], 220), [109, 27, 84]);
        assert_eq!(scale_split([600, 200, 100], 220), [147, 49, 24]);
        assert_eq!(scale_split([329, 110, 161], 600), [329, 110, 161]);
    }

    #[test]
    fn rotation_gt_matches_chord_formula() {
        let spec = small(TextureKind::DensePerlin, Motion::Rotation { deg_per_frame: 1.0, center: (48.0, 32.0) }, 3);
        let seq = generate_sequence(&spec).unwrap();
        let f = &seq.gt_flows[0];
        assert_eq!(f.at(48, 32), (0.0, 0.0));
        let (u, v) = f.at(78, 32);
        let expected = 2.0 * 30.0 * 0.5f64.to_radians().sin();
        assert!(((u as f64).hypot(v as f64) - expected).abs() < 1e-5);
    }

    #[test]
    fn scale_gt_is_similarity_flow() {
        let c = (48.0, 32.0);
        let spec = small(TextureKind::DensePerlin, Motion::Scale { factor: 1.01, center: c, period: None }, 2);
        let seq = generate_sequence(&spec).unwrap();
        let (u, v) = seq.gt_flows[0].at(90, 10);
        assert!((u as f64 - 0.01 * 42.0).abs() < 1e-5 && (v as f64 + 0.01 * 22.0).abs() < 1e-5);
    }

    #[test]
    fn photometric_consistency_on_dense_textures() {
        let c = (48.0, 32.0);
        for motion in [
            Motion::Rotation { deg_per_frame: 1.0, center: c },
            Motion::Scale { factor: 1.01, center: c, period: None },
            Motion::random_deformation(6, 5.0, 10.0, 20.0, 0.3, 96, 64, 3),
        ] {
            for texture in [TextureKind::DensePerlin, TextureKind::TissueLike { octaves: 4 }] {
                let seq = generate_sequence(&small(texture, motion.clone(), 4)).unwrap();
                for n in 0..3 {
                    let warped = backward_warp(&seq.frames[n + 1], &seq.gt_flows[n]).unwrap();
                    let err = mad(&warped, &seq.frames[n]);
                    assert!(err < 0.02, "{motion:?} {texture:?} pair {n}: {err}");
                }
            }
        }
    }

    #[test]
    fn accumulated_gt_matches_analytic_long_range_flow() {
        let c = (48.0, 32.0);
        for motion in [
            Motion::Rotation { deg_per_frame: 0.5, center: c },
            Motion::random_deformation(6, 4.0, 10.0, 40.0, 0.1, 96, 64, 8),
            Motion::Loop { rotation_deg: 3.0, shift: (4.0, 3.0), center: c, period: 100 },
        ] {
            let spec = small(TextureKind::DensePerlin, motion, 51);
            let seq = generate_sequence(&spec).unwrap();
            for n in [1usize, 10, 50] {
                let acc = accumulate_flows(&seq.gt_flows[..n]).unwrap();
                let exact = spec.analytic_flow(0, n);
                // only trajectories that stay inside the frame; elsewhere clamping dominates
                let (mut sum, mut count) = (0.0, 0usize);
                for y in 0..64 {
                    for x in 0..96 {
                        let p = spec.motion.inverse(0.0, (x as f64, y as f64));
                        let inside = (0..=n).all(|k| {
                            let q = spec.motion.forward(k as f64, p);
                            q.0 >= 0.0 && q.1 >= 0.0 && q.0 <= 95.0 && q.1 <= 63.0
                        });
                        if inside {
                            let (a, e) = (acc.at(x, y), exact.at(x, y));
                            sum += ((a.0 - e.0) as f64).hypot((a.1 - e.1) as f64);
                            count += 1;
                        }
                    }
                }
                assert!(count > 96 * 64 / 4);
                let err = sum / count as f64;
                assert!(err < 0.1, "{:?} n={n}: {err}", spec.motion);
            }
        }
    }

    #[test]
    fn illumination_changes_frames_but_never_flows() {
        let base = small(TextureKind::TissueLike { octaves: 3 }, Motion::Translation { dx: 1.0, dy: 0.5 }, 5);
        let lit = SceneSpec {
            illumination: vec![
                Illumination::GainRamp { factor: 1.05, period: 20 },
                Illumination::Specular { count: 2, radius: 3.0, intensity: 0.6 },
            ],
            ..base.clone()
        };
        let (a, b) = (generate_sequence(&base).unwrap(), generate_sequence(&lit).unwrap());
        assert_eq!(a.gt_flows, b.gt_flows);
        assert_ne!(a.frames[3], b.frames[3]);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small(TextureKind::SparseBlobs { density: 0.01 }, Motion::Translation { dx: 0.3, dy: 0.0 }, 3);
        assert_eq!(generate_sequence(&spec).unwrap(), generate_sequence(&spec).unwrap());
    }

    #[test]
    fn excessive_motion_rejected() {
        let spec = small(TextureKind::DensePerlin, Motion::Translation { dx: 20.0, dy: 0.0 }, 2);
        assert!(matches!(generate_sequence(&spec), Err(Error::InvalidConfig(_))));
        let folded = small(TextureKind::DensePerlin, Motion::random_deformation(1, 40.0, 5.0, 4.0, 0.0, 96, 64, 1), 3);
        assert!(generate_sequence(&folded).is_err());
    }

    #[test]
    fn loop_and_sampling_share_texture() {
        let (a, b) = (regime_spec(Regime::Loop, 3), regime_spec(Regime::LoopSampling, 3));
        assert_eq!(a.texture().sample(10.5, 20.5), b.texture().sample(10.5, 20.5));
        assert_ne!(a.motion, b.motion);
    }

    #[test]
    fn regime_names_round_trip() {
        for r in Regime::ALL {
            assert_eq!(Regime::parse(r.name()).unwrap(), r);
        }
        assert!(Regime::parse("spin").is_err());
    }
}

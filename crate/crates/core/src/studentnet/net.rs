//! The student encoder-decoder.
//!
//! With `L = levels`, `B = base_width` and `c_l = B * 2^l`:
//!
//! | layer        | kind                          | in channels            | out  |
//! |--------------|-------------------------------|------------------------|------|
//! | `enc{l}`     | conv k x k, stride 2 (k=7 at l=0, else 3) | `l==0 ? input : c_{l-1}` | `c_l` |
//! | `head{L-1}`  | conv 3x3                      | `c_{L-1}`              | 2    |
//! | `deconv{l}`  | transposed conv 4x4, stride 2 | `feat_{l+1}`           | `c_l / 2` |
//! | `head{l}`    | conv 3x3                      | `feat_l = c_l + c_l/2 + 2` | 2 |
//!
//! for `l < L-1`, where `feat_{L-1} = c_{L-1}`. `feat_l` concatenates the encoder
//! skip, the up-convolved features and the 2x-upsampled coarser flow. Every conv
//! and deconv except the heads is followed by a leaky ReLU (slope 0.1).
//!
//! Heads predict at `H/2^L ... H/2`; the prediction at `H/2` upsampled bilinearly
//! to `H` is appended as the finest level, so the output has `L + 1` scales.
//! Displacements at each scale are in that scale's pixels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{self, ConvGeom, ConvTape, Tensor};
use super::params::ParamSet;
use crate::flowcore::FramePair;
use crate::metrics::{multiscale_l1_loss_and_grad, FlowLevel, MultiScaleFlow};
use crate::{Error, FlowField, Result};

/// Network shape and initialization seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    /// 2 (two grayscale frames) or 6 (two RGB frames).
    pub input_channels: usize,
    pub base_width: usize,
    pub levels: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { input_channels: 2, base_width: 16, levels: 4, seed: 0 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_channels != 2 && self.input_channels != 6 {
            return Err(Error::InvalidConfig(format!("input_channels must be 2 or 6, got {}", self.input_channels)));
        }
        if self.levels < 2 {
            return Err(Error::InvalidConfig(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.levels > 8 {
            return Err(Error::InvalidConfig(format!("levels must be <= 8, got {}", self.levels)));
        }
        if self.base_width < 4 {
            return Err(Error::InvalidConfig(format!("base_width must be >= 4, got {}", self.base_width)));
        }
        Ok(())
    }

    /// Input sides must be divisible by this.
    pub fn multiple(&self) -> usize {
        1 << self.levels
    }

    /// Number of output scales.
    pub fn scales(&self) -> usize {
        self.levels + 1
    }

    fn enc_channels(&self, l: usize) -> usize {
        self.base_width << l
    }

    fn enc_kernel(&self, l: usize) -> usize {
        if l == 0 {
            7
        } else {
            3
        }
    }

    fn deconv_channels(&self, l: usize) -> usize {
        (self.enc_channels(l) / 2).max(2)
    }

    fn feat_channels(&self, l: usize) -> usize {
        if l == self.levels - 1 {
            self.enc_channels(l)
        } else {
            self.enc_channels(l) + self.deconv_channels(l) + 2
        }
    }

    /// `(name, shape)` of every tensor in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = Vec::new();
        for l in 0..self.levels {
            let cin = if l == 0 { self.input_channels } else { self.enc_channels(l - 1) };
            let k = self.enc_kernel(l);
            shapes.push((format!("enc{l}.weight"), vec![self.enc_channels(l), cin, k, k]));
            shapes.push((format!("enc{l}.bias"), vec![self.enc_channels(l)]));
        }
        for l in (0..self.levels).rev() {
            if l + 1 < self.levels {
                let d = self.deconv_channels(l);
                shapes.push((format!("deconv{l}.weight"), vec![self.feat_channels(l + 1), d, 4, 4]));
                shapes.push((format!("deconv{l}.bias"), vec![d]));
            }
            shapes.push((format!("head{l}.weight"), vec![2, self.feat_channels(l), 3, 3]));
            shapes.push((format!("head{l}.bias"), vec![2]));
        }
        shapes
    }
}

/// Layer indices into the parameter set.
#[derive(Debug, Clone, Copy)]
struct Slots {
    weight: usize,
    bias: usize,
}

/// The compact multi-scale flow network `g_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentNet {
    config: NetConfig,
    params: ParamSet,
}

struct EncTape {
    conv: ConvTape,
    out: Tensor,
}

struct DecTape {
    deconv: Option<(Tensor, ConvGeom, Tensor)>,
    head: ConvTape,
}

struct Tape {
    enc: Vec<EncTape>,
    dec: Vec<DecTape>,
}

impl StudentNet {
    /// Deterministic initialization: weights uniform in `+-sqrt(6 / fan_in)` for hidden
    /// layers and `+-0.1 * sqrt(3 / fan_in)` for the flow heads; biases zero.
    pub fn init(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::zeros(config.param_shapes());
        for i in 0..params.len() {
            let (name, shape) = (params.name(i).to_string(), params.shape(i).to_vec());
            if name.ends_with(".bias") {
                continue;
            }
            let fan_in = if name.starts_with("deconv") { shape[0] * 4 } else { shape[1] * shape[2] * shape[3] } as f64;
            let bound = if name.starts_with("head") { 0.1 * (3.0 / fan_in).sqrt() } else { (6.0 / fan_in).sqrt() };
            for v in params.values_mut(i) {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(StudentNet { config, params })
    }

    pub fn from_parts(config: NetConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let expected = config.param_shapes();
        if params.len() != expected.len() {
            return Err(Error::InvalidConfig(format!("{} parameter tensors for a config that needs {}", params.len(), expected.len())));
        }
        for (i, (name, shape)) in expected.iter().enumerate() {
            if params.name(i) != name {
                return Err(Error::InvalidConfig(format!("parameter {i} is `{}`, expected `{name}`", params.name(i))));
            }
            if params.shape(i) != shape.as_slice() {
                return Err(Error::ShapeMismatch { name: name.clone(), expected: shape.clone(), found: params.shape(i).to_vec() });
            }
        }
        if params.iter_values().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameter is not finite".into()));
        }
        Ok(StudentNet { config, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.total_len()
    }

    fn enc_slots(&self, l: usize) -> Slots {
        Slots { weight: 2 * l, bias: 2 * l + 1 }
    }

    fn head_slots(&self, l: usize) -> Slots {
        let base = 2 * self.config.levels;
        // decoder blocks from the top: head{L-1}, then (deconv{l}, head{l}) pairs
        let top = self.config.levels - 1;
        if l == top {
            Slots { weight: base, bias: base + 1 }
        } else {
            let k = base + 2 + 4 * (top - 1 - l);
            Slots { weight: k + 2, bias: k + 3 }
        }
    }

    fn deconv_slots(&self, l: usize) -> Slots {
        let base = 2 * self.config.levels;
        let top = self.config.levels - 1;
        let k = base + 2 + 4 * (top - 1 - l);
        Slots { weight: k, bias: k + 1 }
    }

    /// Stacks the pair into an input tensor, centered at zero.
    pub fn input_tensor(&self, pair: &FramePair) -> Result<Tensor> {
        let (w, h) = (pair.width(), pair.height());
        let m = self.config.multiple();
        if w % m != 0 || h % m != 0 {
            return Err(Error::Dimension(format!("input {w}x{h} must be divisible by {m}; crop with crop_to_multiple first")));
        }
        let plane = w * h;
        let mut t = Tensor::zeros(self.config.input_channels, h, w);
        if self.config.input_channels == 2 {
            for (k, frame) in [pair.first, pair.second].into_iter().enumerate() {
                let luma = frame.to_luma();
                for (dst, &s) in t.data[k * plane..(k + 1) * plane].iter_mut().zip(luma.data()) {
                    *dst = s as f64 - 0.5;
                }
            }
        } else {
            for (k, frame) in [pair.first, pair.second].into_iter().enumerate() {
                if frame.channels() != 3 {
                    return Err(Error::Dimension("a 6-channel network needs RGB frames".into()));
                }
                for (i, px) in frame.data().chunks_exact(3).enumerate() {
                    for (c, &v) in px.iter().enumerate() {
                        t.data[(3 * k + c) * plane + i] = v as f64 - 0.5;
                    }
                }
            }
        }
        Ok(t)
    }

    fn head(&self, feat: &Tensor, s: Slots, keep: bool) -> (Tensor, Option<ConvTape>) {
        let (w, b) = (self.params.values(s.weight), self.params.values(s.bias));
        if keep {
            let (f, tape) = ops::conv_forward(feat, w, b, 2, 3, 1);
            (f, Some(tape))
        } else {
            (ops::conv_infer(feat, w, b, 2, 3, 1), None)
        }
    }

    fn run(&self, input: &Tensor, keep: bool) -> (Vec<Tensor>, Option<Tape>) {
        let cfg = &self.config;
        let top = cfg.levels - 1;
        let mut enc_tapes = Vec::with_capacity(cfg.levels);
        let mut enc_outs: Vec<Tensor> = Vec::with_capacity(cfg.levels);
        for l in 0..cfg.levels {
            let s = self.enc_slots(l);
            let src = if l == 0 { input } else { &enc_outs[l - 1] };
            let (w, b, c, k) = (self.params.values(s.weight), self.params.values(s.bias), cfg.enc_channels(l), cfg.enc_kernel(l));
            let mut out;
            if keep {
                let conv;
                (out, conv) = ops::conv_forward(src, w, b, c, k, 2);
                ops::leaky_relu(&mut out);
                enc_tapes.push(EncTape { conv, out: out.clone() });
            } else {
                out = ops::conv_infer(src, w, b, c, k, 2);
                ops::leaky_relu(&mut out);
            }
            enc_outs.push(out);
        }

        // flows[l] is the prediction at level l; filled from the top down
        let mut flows: Vec<Option<Tensor>> = vec![None; cfg.levels];
        let mut dec_tapes: Vec<Option<DecTape>> = (0..cfg.levels).map(|_| None).collect();
        let s = self.head_slots(top);
        let (f, head) = self.head(&enc_outs[top], s, keep);
        flows[top] = Some(f);
        if let Some(head) = head {
            dec_tapes[top] = Some(DecTape { deconv: None, head });
        }
        let mut feat = enc_outs[top].clone();
        for l in (0..top).rev() {
            let d = self.deconv_slots(l);
            let (mut up, geom) =
                ops::deconv_forward(&feat, self.params.values(d.weight), self.params.values(d.bias), cfg.deconv_channels(l));
            ops::leaky_relu(&mut up);
            let fup = ops::upsample2x(flows[l + 1].as_ref().expect("coarser flow"), 2.0);
            let next = ops::concat_channels(&[&enc_outs[l], &up, &fup]);
            let h = self.head_slots(l);
            let (f, head) = self.head(&next, h, keep);
            flows[l] = Some(f);
            if let Some(head) = head {
                dec_tapes[l] = Some(DecTape { deconv: Some((feat, geom, up)), head });
            }
            feat = next;
        }
        let mut out: Vec<Tensor> = flows.into_iter().rev().map(|f| f.expect("every level predicted")).collect();
        let full = ops::upsample2x(out.last().expect("finest"), 2.0);
        out.push(full);
        let tape = keep.then(|| Tape { enc: enc_tapes, dec: dec_tapes.into_iter().map(|t| t.expect("tape per level")).collect() });
        (out, tape)
    }

    fn to_multiscale(outs: Vec<Tensor>) -> MultiScaleFlow {
        let levels = outs
            .into_iter()
            .map(|t| {
                let plane = t.plane();
                FlowLevel { width: t.w, height: t.h, u: t.data[..plane].to_vec(), v: t.data[plane..].to_vec() }
            })
            .collect();
        MultiScaleFlow::new(levels).expect("network produces a dyadic chain")
    }

    /// Multi-scale prediction, coarsest first.
    pub fn forward(&self, pair: &FramePair) -> Result<MultiScaleFlow> {
        let input = self.input_tensor(pair)?;
        let (outs, _) = self.run(&input, false);
        let msf = Self::to_multiscale(outs);
        check_finite(&msf)?;
        Ok(msf)
    }

    /// Full-resolution flow estimate.
    pub fn predict(&self, pair: &FramePair) -> Result<FlowField> {
        self.forward(pair)?.finest_flow()
    }

    /// Multi-scale L1 loss against `gold` and its exact gradient for every parameter.
    pub fn backward(&self, pair: &FramePair, gold: &FlowField, weights: &[f64]) -> Result<(f64, ParamSet)> {
        let input = self.input_tensor(pair)?;
        let (outs, tape) = self.run(&input, true);
        let tape = tape.expect("tape requested");
        let msf = Self::to_multiscale(outs);
        check_finite(&msf)?;
        let (loss, dlevels) = multiscale_l1_loss_and_grad(&msf, gold, weights)?;
        let mut grads = self.params.zeros_like();
        self.backprop(&tape, &dlevels, &mut grads);
        Ok((loss, grads))
    }

    fn backprop(&self, tape: &Tape, dlevels: &[FlowLevel], grads: &mut ParamSet) {
        let cfg = &self.config;
        let top = cfg.levels - 1;
        let as_tensor = |g: &FlowLevel| {
            let mut data = g.u.clone();
            data.extend_from_slice(&g.v);
            Tensor { c: 2, h: g.height, w: g.width, data }
        };
        // dlevels[0] is the coarsest (level top), dlevels[top] level 0, dlevels[top + 1] full res
        let mut dflow: Vec<Tensor> = (0..cfg.levels).map(|l| as_tensor(&dlevels[top - l])).collect();
        let dfull = ops::upsample2x_backward(&as_tensor(&dlevels[cfg.levels]), 2.0);
        dflow[0].data.iter_mut().zip(&dfull.data).for_each(|(a, b)| *a += b);

        let mut denc: Vec<Option<Tensor>> = (0..cfg.levels).map(|_| None).collect();
        let mut dfeat_from_deconv: Option<Tensor> = None;
        for l in 0..cfg.levels {
            let dec = &tape.dec[l];
            let h = self.head_slots(l);
            let (w_head, rest) = split_two(grads, h.weight, h.bias);
            let mut dfeat =
                ops::conv_backward(&dec.head, &dflow[l], self.params.values(h.weight), w_head, rest, true).expect("input grad requested");
            if let Some(extra) = dfeat_from_deconv.take() {
                dfeat.data.iter_mut().zip(&extra.data).for_each(|(a, b)| *a += b);
            }
            if l == top {
                denc[l] = Some(dfeat);
                break;
            }
            let sizes = [cfg.enc_channels(l), cfg.deconv_channels(l), 2];
            let mut parts = ops::split_channels(&dfeat, &sizes).into_iter();
            denc[l] = parts.next();
            let mut dup = parts.next().expect("deconv part");
            let dfup = parts.next().expect("flow part");
            let dcoarse = ops::upsample2x_backward(&dfup, 2.0);
            dflow[l + 1].data.iter_mut().zip(&dcoarse.data).for_each(|(a, b)| *a += b);
            let (feat_in, geom, up_out) = dec.deconv.as_ref().expect("deconv tape");
            ops::leaky_relu_backward(up_out, &mut dup);
            let d = self.deconv_slots(l);
            let (dw, db) = split_two(grads, d.weight, d.bias);
            dfeat_from_deconv = Some(ops::deconv_backward(feat_in, geom, &dup, self.params.values(d.weight), dw, db));
        }

        let mut carry: Option<Tensor> = None;
        for l in (0..cfg.levels).rev() {
            let mut g = denc[l].take().expect("skip gradient");
            if let Some(c) = carry.take() {
                g.data.iter_mut().zip(&c.data).for_each(|(a, b)| *a += b);
            }
            let enc = &tape.enc[l];
            ops::leaky_relu_backward(&enc.out, &mut g);
            let s = self.enc_slots(l);
            let (dw, db) = split_two(grads, s.weight, s.bias);
            carry = ops::conv_backward(&enc.conv, &g, self.params.values(s.weight), dw, db, l > 0);
        }
    }
}

fn split_two(grads: &mut ParamSet, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    grads.pair_mut(a, b)
}

fn check_finite(msf: &MultiScaleFlow) -> Result<()> {
    if msf.levels().iter().any(|l| l.u.iter().chain(&l.v).any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("network produced a non-finite flow".into()));
    }
    Ok(())
}

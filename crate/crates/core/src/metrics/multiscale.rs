use crate::flowcore::FlowField;
use crate::{Error, Result};

/// One pyramid level in double precision. Displacements are in this level's pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowLevel {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowLevel {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowLevel { width, height, u: vec![0.0; width * height], v: vec![0.0; width * height] }
    }

    pub fn from_flow(flow: &FlowField) -> Self {
        FlowLevel {
            width: flow.width(),
            height: flow.height(),
            u: flow.u().iter().map(|&a| a as f64).collect(),
            v: flow.v().iter().map(|&a| a as f64).collect(),
        }
    }

    pub fn to_flow(&self) -> Result<FlowField> {
        FlowField::new(self.width, self.height, self.u.iter().map(|&a| a as f32).collect(), self.v.iter().map(|&a| a as f32).collect())
    }
}

/// Predictions ordered coarsest to finest, each level half the size of the next.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleFlow {
    levels: Vec<FlowLevel>,
}

impl MultiScaleFlow {
    pub fn new(levels: Vec<FlowLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Dimension("multi-scale flow needs at least one level".into()));
        }
        for pair in levels.windows(2) {
            let (c, f) = (&pair[0], &pair[1]);
            if f.width != 2 * c.width || f.height != 2 * c.height {
                return Err(Error::Dimension(format!(
                    "levels {}x{} -> {}x{} are not a dyadic chain",
                    c.width, c.height, f.width, f.height
                )));
            }
        }
        Ok(MultiScaleFlow { levels })
    }

    pub fn levels(&self) -> &[FlowLevel] {
        &self.levels
    }

    pub fn finest(&self) -> &FlowLevel {
        self.levels.last().expect("nonempty")
    }

    /// The finest level as a storable flow field.
    pub fn finest_flow(&self) -> Result<FlowField> {
        self.finest().to_flow()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Area-averages `factor x factor` blocks and divides displacements by `factor`.
pub fn downsample_flow(gold: &FlowField, factor: usize) -> Result<FlowLevel> {
    let (w, h) = (gold.width(), gold.height());
    if factor == 0 || w % factor != 0 || h % factor != 0 {
        return Err(Error::Dimension(format!("{w}x{h} is not divisible by {factor}")));
    }
    let (ow, oh) = (w / factor, h / factor);
    let mut out = FlowLevel::zeros(ow, oh);
    let norm = 1.0 / (factor * factor * factor) as f64;
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut su, mut sv) = (0.0, 0.0);
            for y in oy * factor..(oy + 1) * factor {
                for x in ox * factor..(ox + 1) * factor {
                    let (a, b) = gold.at(x, y);
                    su += a as f64;
                    sv += b as f64;
                }
            }
            out.u[oy * ow + ox] = su * norm;
            out.v[oy * ow + ox] = sv * norm;
        }
    }
    Ok(out)
}

fn level_targets(pred: &MultiScaleFlow, gold: &FlowField, weights: &[f64]) -> Result<Vec<FlowLevel>> {
    if weights.len() != pred.len() {
        return Err(Error::Dimension(format!("{} loss weights for {} scales", weights.len(), pred.len())));
    }
    let finest = pred.finest();
    if finest.width != gold.width() || finest.height != gold.height() {
        return Err(Error::Dimension(format!(
            "finest prediction {}x{} does not match gold {}x{}",
            finest.width,
            finest.height,
            gold.width(),
            gold.height()
        )));
    }
    let n = pred.len();
    pred.levels()
        .iter()
        .enumerate()
        .map(|(s, _)| {
            let factor = 1usize << (n - 1 - s);
            if factor == 1 {
                Ok(FlowLevel::from_flow(gold))
            } else {
                downsample_flow(gold, factor)
            }
        })
        .collect()
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sum_s weights[s] * mean_pixels(|du| + |dv|)` against the gold flow downsampled to each scale.
pub fn multiscale_l1_loss(pred: &MultiScaleFlow, gold: &FlowField, weights: &[f64]) -> Result<f64> {
    let targets = level_targets(pred, gold, weights)?;
    let mut loss = 0.0;
    for ((p, t), &w) in pred.levels().iter().zip(&targets).zip(weights) {
        let mut sum = 0.0;
        for i in 0..p.u.len() {
            sum += (p.u[i] - t.u[i]).abs() + (p.v[i] - t.v[i]).abs();
        }
        loss += w * sum / p.u.len() as f64;
    }
    Ok(loss)
}

/// Loss plus its subgradient with respect to every level (`sign(0) = 0`).
pub fn multiscale_l1_loss_and_grad(pred: &MultiScaleFlow, gold: &FlowField, weights: &[f64]) -> Result<(f64, Vec<FlowLevel>)> {
    let targets = level_targets(pred, gold, weights)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(pred.len());
    for ((p, t), &w) in pred.levels().iter().zip(&targets).zip(weights) {
        let n = p.u.len() as f64;
        let mut g = FlowLevel::zeros(p.width, p.height);
        let mut sum = 0.0;
        for i in 0..p.u.len() {
            let (du, dv) = (p.u[i] - t.u[i], p.v[i] - t.v[i]);
            sum += du.abs() + dv.abs();
            g.u[i] = w * sign(du) / n;
            g.v[i] = w * sign(dv) / n;
        }
        loss += w * sum / n;
        grads.push(g);
    }
    Ok((loss, grads))
}

use crate::flowcore::FlowField;
use crate::Result;

/// Per-pixel Euclidean norm of `pred - reference`. When `reference` is teacher
/// output rather than ground truth this is the relative error EPE*.
pub fn epe_map(pred: &FlowField, reference: &FlowField) -> Result<Vec<f64>> {
    pred.check_same_size(reference)?;
    Ok(pred
        .u()
        .iter()
        .zip(pred.v())
        .zip(reference.u().iter().zip(reference.v()))
        .map(|((&a, &b), (&p, &q))| (a as f64 - p as f64).hypot(b as f64 - q as f64))
        .collect())
}

pub fn epe_mean(pred: &FlowField, reference: &FlowField) -> Result<f64> {
    epe_mean_with_margin(pred, reference, 0)
}

/// Mean EPE ignoring a border of `margin` pixels on every side.
pub fn epe_mean_with_margin(pred: &FlowField, reference: &FlowField, margin: usize) -> Result<f64> {
    let map = epe_map(pred, reference)?;
    let (w, h) = (pred.width(), pred.height());
    if 2 * margin >= w || 2 * margin >= h {
        return Err(crate::Error::Dimension(format!("margin {margin} covers the whole {w}x{h} field")));
    }
    let mut sum = 0.0;
    for y in margin..h - margin {
        for x in margin..w - margin {
            sum += map[y * w + x];
        }
    }
    Ok(sum / ((w - 2 * margin) * (h - 2 * margin)) as f64)
}

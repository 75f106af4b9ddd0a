//! Backward warping, flow concatenation and long-term stabilization.
//!
//! The border policy everywhere is clamp-to-edge: sample coordinates are clamped
//! into `[0, w-1] x [0, h-1]` before bilinear interpolation, so every function
//! here is total and never produces NaN from finite input.

mod mesh;

pub use mesh::{mesh_drift, render_mesh_overlay, track_mesh, write_trajectory_csv, MeshTrack, TrackedMesh};

use crate::flowcore::{FlowField, ImageFrame};
use crate::{Error, Result};

#[inline]
fn bilinear_weights(size: usize, p: f64) -> (usize, usize, f64) {
    let p = p.clamp(0.0, (size - 1) as f64);
    let i0 = p.floor() as usize;
    let i1 = (i0 + 1).min(size - 1);
    (i0, i1, p - i0 as f64)
}

/// Samples one plane (stride `stride`, offset `offset`) at a sub-pixel location.
#[inline]
pub(crate) fn sample_plane(data: &[f32], width: usize, height: usize, stride: usize, offset: usize, x: f64, y: f64) -> f64 {
    let (x0, x1, fx) = bilinear_weights(width, x);
    let (y0, y1, fy) = bilinear_weights(height, y);
    let at = |xx: usize, yy: usize| data[(yy * width + xx) * stride + offset] as f64;
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear interpolation of every channel at `(x, y)` with border clamping.
pub fn bilinear_sample(frame: &ImageFrame, x: f64, y: f64) -> Vec<f64> {
    (0..frame.channels()).map(|c| sample_plane(frame.data(), frame.width(), frame.height(), frame.channels(), c, x, y)).collect()
}

/// Samples a flow field bilinearly (clamped) at a sub-pixel location.
#[inline]
pub fn sample_flow(flow: &FlowField, x: f64, y: f64) -> (f64, f64) {
    let (w, h) = (flow.width(), flow.height());
    (sample_plane(flow.u(), w, h, 1, 0, x, y), sample_plane(flow.v(), w, h, 1, 0, x, y))
}

fn check_dims(frame: &ImageFrame, flow: &FlowField) -> Result<()> {
    if frame.width() != flow.width() || frame.height() != flow.height() {
        return Err(Error::Dimension(format!("frame {}x{} vs flow {}x{}", frame.width(), frame.height(), flow.width(), flow.height())));
    }
    Ok(())
}

/// `out(x) = frame(x + flow(x))`.
pub fn backward_warp(frame: &ImageFrame, flow: &FlowField) -> Result<ImageFrame> {
    check_dims(frame, flow)?;
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut out = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = flow.at(x, y);
            let sx = x as f64 + du as f64;
            let sy = y as f64 + dv as f64;
            for ch in 0..c {
                out.push(sample_plane(frame.data(), w, h, c, ch, sx, sy) as f32);
            }
        }
    }
    ImageFrame::from_clamped(w, h, c, out)
}

/// Concatenates `a -> b` with `b -> c`: `w_ac(x) = w_ab(x) + w_bc(x + w_ab(x))`.
pub fn compose_flows(w_ab: &FlowField, w_bc: &FlowField) -> Result<FlowField> {
    w_ab.check_same_size(w_bc)?;
    let (w, h) = (w_ab.width(), w_ab.height());
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = w_ab.at(x, y);
            let (su, sv) = sample_flow(w_bc, x as f64 + du as f64, y as f64 + dv as f64);
            u.push((du as f64 + su) as f32);
            v.push((dv as f64 + sv) as f32);
        }
    }
    FlowField::new(w, h, u, v)
}

/// Left fold of [`compose_flows`] over an inter-frame chain `w_12, w_23, ...`.
pub fn accumulate_flows(flows: &[FlowField]) -> Result<FlowField> {
    let (first, rest) = flows.split_first().ok_or_else(|| Error::Dimension("cannot accumulate an empty flow list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| compose_flows(&acc, f))
}

pub(crate) fn mean_abs_diff(a: &ImageFrame, b: &ImageFrame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Dimension("frames differ in shape".into()));
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(&p, &q)| (p as f64 - q as f64).abs()).sum();
    Ok(sum / a.data().len() as f64)
}

/// Photometric drift: for each frame `n`, the mean absolute difference between the
/// first frame and frame `n` warped back through the accumulated flow `w_{0->n}`.
/// Entry 0 compares the first frame with itself.
pub fn stabilization_error(frames: &[ImageFrame], flows: &[FlowField]) -> Result<Vec<f64>> {
    if frames.len() != flows.len() + 1 {
        return Err(Error::Dimension(format!(
            "{} frames need {} flows, got {}",
            frames.len(),
            frames.len().saturating_sub(1),
            flows.len()
        )));
    }
    let first = &frames[0];
    let mut errors = Vec::with_capacity(frames.len());
    errors.push(0.0);
    let mut acc: Option<FlowField> = None;
    for (n, flow) in flows.iter().enumerate() {
        check_dims(first, flow)?;
        let next = match acc {
            None => flow.clone(),
            Some(prev) => compose_flows(&prev, flow)?,
        };
        let frame = &frames[n + 1];
        if !frame.same_shape(first) {
            return Err(Error::Dimension(format!("frame {} differs in shape from frame 0", n + 1)));
        }
        let warped = backward_warp(frame, &next)?;
        errors.push(mean_abs_diff(first, &warped)?);
        acc = Some(next);
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Branch-free reference: clamp, then take floor/ceil neighbours with min().
    fn reference_sample(frame: &ImageFrame, x: f64, y: f64, c: usize) -> f64 {
        let w = frame.width() as f64;
        let h = frame.height() as f64;
        let cx = x.max(0.0).min(w - 1.0);
        let cy = y.max(0.0).min(h - 1.0);
        let x0 = cx.floor();
        let y0 = cy.floor();
        let x1 = (x0 + 1.0).min(w - 1.0);
        let y1 = (y0 + 1.0).min(h - 1.0);
        let tx = cx - x0;
        let ty = cy - y0;
        let g = |xx: f64, yy: f64| frame.get(xx as usize, yy as usize, c) as f64;
        g(x0, y0) * (1.0 - tx) * (1.0 - ty) + g(x1, y0) * tx * (1.0 - ty) + g(x0, y1) * (1.0 - tx) * ty + g(x1, y1) * tx * ty
    }

    fn columns(w: usize, h: usize) -> ImageFrame {
        let data = (0..w * h).map(|i| (i % w) as f32 / w as f32).collect();
        ImageFrame::new(w, h, 1, data).unwrap()
    }

    fn textured(w: usize, h: usize) -> ImageFrame {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f32, (i / w) as f32);
                0.5 + 0.25 * (x * 0.37).sin() * (y * 0.23).cos() + 0.2 * ((x + y) * 0.11).sin()
            })
            .collect();
        ImageFrame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn integer_coordinates_return_stored_values() {
        let f = textured(7, 5);
        for y in 0..5 {
            for x in 0..7 {
                assert_eq!(bilinear_sample(&f, x as f64, y as f64)[0], f.get(x, y, 0) as f64);
            }
        }
    }

    #[test]
    fn midpoint_interpolates() {
        let f = ImageFrame::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&f, 0.5, 0.0)[0], 0.5);
    }

    #[test]
    fn outside_is_clamped_to_border() {
        let f = textured(6, 4);
        assert_eq!(bilinear_sample(&f, -5.0, -5.0)[0], f.get(0, 0, 0) as f64);
        for &(x, y) in &[(-5.0, -5.0), (9.3, 1.2), (2.5, -0.7), (100.0, 100.0), (3.25, 2.75)] {
            let got = bilinear_sample(&f, x, y)[0];
            assert!((got - reference_sample(&f, x, y, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_flow_warp_is_identity() {
        let f = textured(9, 8);
        let out = backward_warp(&f, &FlowField::zeros(9, 8)).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn constant_shift_moves_columns() {
        let w = 10;
        let f = columns(w, 4);
        let out = backward_warp(&f, &FlowField::constant(w, 4, 1.0, 0.0).unwrap()).unwrap();
        for y in 0..4 {
            for c in 0..w - 1 {
                assert_eq!(out.get(c, y, 0), (c + 1) as f32 / w as f32);
            }
        }
    }

    #[test]
    fn flow_outside_frame_samples_border() {
        let f = textured(8, 6);
        let flow = FlowField::constant(8, 6, -50.0, 30.0).unwrap();
        let out = backward_warp(&f, &flow).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let expected = reference_sample(&f, x as f64 - 50.0, y as f64 + 30.0, 0) as f32;
                assert_eq!(out.get(x, y, 0), expected);
                assert_eq!(out.get(x, y, 0), f.get(0, 5, 0));
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = textured(8, 6);
        assert!(backward_warp(&f, &FlowField::zeros(8, 5)).is_err());
        assert!(compose_flows(&FlowField::zeros(3, 3), &FlowField::zeros(3, 4)).is_err());
    }

    #[test]
    fn zero_flow_is_identity_for_composition() {
        let w = FlowField::from_fn(12, 9, |x, y| (0.3 * (y as f64 * 0.5).sin(), 0.2 * (x as f64 * 0.3).cos())).unwrap();
        let z = FlowField::zeros(12, 9);
        assert_eq!(compose_flows(&z, &w).unwrap(), w);
        assert_eq!(compose_flows(&w, &z).unwrap(), w);
    }

    #[test]
    fn constant_translations_add() {
        let a = FlowField::constant(10, 6, 1.0, 0.0).unwrap();
        let c = compose_flows(&a, &a).unwrap();
        for y in 0..6 {
            for x in 0..9 {
                assert_eq!(c.at(x, y), (2.0, 0.0));
            }
            // last column samples the clamped border of the second flow
            assert_eq!(c.at(9, y), (2.0, 0.0));
        }
    }

    fn rotation_flow(n: usize, deg: f64) -> FlowField {
        let c = (n as f64 - 1.0) / 2.0;
        let (s, co) = deg.to_radians().sin_cos();
        FlowField::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            (co * dx - s * dy - dx, s * dx + co * dy - dy)
        })
        .unwrap()
    }

    #[test]
    fn rotations_compose() {
        let composed = compose_flows(&rotation_flow(64, 1.0), &rotation_flow(64, 1.0)).unwrap();
        let expected = rotation_flow(64, 2.0);
        for y in 2..62 {
            for x in 2..62 {
                let (a, b) = composed.at(x, y);
                let (p, q) = expected.at(x, y);
                assert!(((a - p) as f64).hypot((b - q) as f64) < 0.05);
            }
        }
    }

    #[test]
    fn accumulate_chain() {
        assert!(accumulate_flows(&[]).is_err());
        let w = FlowField::from_fn(5, 4, |x, y| (x as f64 * 0.1, -(y as f64) * 0.2)).unwrap();
        assert_eq!(accumulate_flows(std::slice::from_ref(&w)).unwrap(), w);
        let zeros = vec![FlowField::zeros(5, 4); 6];
        assert_eq!(accumulate_flows(&zeros).unwrap(), FlowField::zeros(5, 4));
        let halves = vec![FlowField::constant(30, 4, 0.5, 0.0).unwrap(); 10];
        let acc = accumulate_flows(&halves).unwrap();
        for y in 0..4 {
            for x in 0..20 {
                assert_eq!(acc.at(x, y), (5.0, 0.0));
            }
        }
    }

    #[test]
    fn stabilization_of_static_sequence_is_zero() {
        let f = textured(16, 12);
        let frames = vec![f.clone(), f.clone(), f];
        let flows = vec![FlowField::zeros(16, 12); 2];
        assert_eq!(stabilization_error(&frames, &flows).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(stabilization_error(&frames, &flows[..1]).is_err());
    }
}

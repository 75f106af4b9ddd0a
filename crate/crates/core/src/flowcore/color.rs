//! Middlebury color coding: hue from direction via the 55-entry wheel,
//! saturation from magnitude.

use super::{FlowField, ImageFrame};

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;

pub const COLOR_WHEEL_SIZE: usize = RY + YG + GC + CB + BM + MR;

fn color_wheel() -> [[f64; 3]; COLOR_WHEEL_SIZE] {
    let mut wheel = [[0.0; 3]; COLOR_WHEEL_SIZE];
    let mut k = 0;
    let ramp = |i: usize, n: usize| (255 * i / n) as f64;
    for i in 0..RY {
        wheel[k] = [255.0, ramp(i, RY), 0.0];
        k += 1;
    }
    for i in 0..YG {
        wheel[k] = [255.0 - ramp(i, YG), 255.0, 0.0];
        k += 1;
    }
    for i in 0..GC {
        wheel[k] = [0.0, 255.0, ramp(i, GC)];
        k += 1;
    }
    for i in 0..CB {
        wheel[k] = [0.0, 255.0 - ramp(i, CB), 255.0];
        k += 1;
    }
    for i in 0..BM {
        wheel[k] = [ramp(i, BM), 0.0, 255.0];
        k += 1;
    }
    for i in 0..MR {
        wheel[k] = [255.0, 0.0, 255.0 - ramp(i, MR)];
        k += 1;
    }
    for c in wheel.iter_mut() {
        for s in c.iter_mut() {
            *s /= 255.0;
        }
    }
    wheel
}

/// Renders `flow` as an RGB frame. Magnitudes are normalized by `max_magnitude`,
/// or by the 99th-percentile magnitude of the field when `None`; zero flow is white.
pub fn flow_to_color(flow: &FlowField, max_magnitude: Option<f64>) -> ImageFrame {
    let wheel = color_wheel();
    let mags = flow.magnitudes();
    let norm = match max_magnitude {
        Some(m) => m,
        None => percentile99(&mags),
    };
    let mut data = Vec::with_capacity(mags.len() * 3);
    for (i, &mag) in mags.iter().enumerate() {
        if norm <= 0.0 || !norm.is_finite() || mag == 0.0 {
            data.extend_from_slice(&[1.0, 1.0, 1.0]);
            continue;
        }
        let fu = flow.u()[i] as f64 / norm;
        let fv = flow.v()[i] as f64 / norm;
        let rad = mag / norm;
        let a = (-fv).atan2(-fu) / std::f64::consts::PI;
        let fk = (a + 1.0) / 2.0 * (COLOR_WHEEL_SIZE - 1) as f64;
        let k0 = (fk.floor() as usize).min(COLOR_WHEEL_SIZE - 1);
        let k1 = (k0 + 1) % COLOR_WHEEL_SIZE;
        let f = fk - k0 as f64;
        for (&c0, &c1) in wheel[k0].iter().zip(&wheel[k1]) {
            let col = (1.0 - f) * c0 + f * c1;
            let col = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
            data.push(col.clamp(0.0, 1.0) as f32);
        }
    }
    ImageFrame::new(flow.width(), flow.height(), 3, data).expect("color samples are in range")
}

fn percentile99(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((sorted.len() - 1) as f64 * 0.99).round() as usize;
    sorted[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hue(p: &[f32]) -> Option<f64> {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let d = max - min;
        if d < 1e-9 {
            return None;
        }
        let h = if max == r {
            ((g - b) / d).rem_euclid(6.0)
        } else if max == g {
            (b - r) / d + 2.0
        } else {
            (r - g) / d + 4.0
        };
        Some(h * 60.0)
    }

    #[test]
    fn wheel_has_55_entries() {
        assert_eq!(COLOR_WHEEL_SIZE, 55);
        assert_eq!(color_wheel()[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::zeros(4, 3), None);
        assert!(img.data().iter().all(|&s| s == 1.0));
        let img = flow_to_color(&FlowField::zeros(4, 3), Some(2.0));
        assert!(img.data().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn unit_rightward_vector_is_saturated_wheel_origin() {
        let flow = FlowField::constant(1, 1, 1.0, 0.0).unwrap();
        let img = flow_to_color(&flow, Some(1.0));
        let expected = color_wheel()[0];
        for (&got, want) in img.data().iter().zip(expected) {
            assert!((got as f64 - want).abs() < 1e-6);
        }
    }

    #[test]
    fn scaling_preserves_hue() {
        let flow = FlowField::from_fn(9, 7, |x, y| (x as f64 - 4.0, y as f64 * 0.7 - 2.0)).unwrap();
        let half = flow.scaled(0.5).unwrap();
        let a = flow_to_color(&flow, Some(10.0));
        let b = flow_to_color(&half, Some(10.0));
        for (pa, pb) in a.data().chunks(3).zip(b.data().chunks(3)) {
            match (hue(pa), hue(pb)) {
                (Some(ha), Some(hb)) => assert!((ha - hb).abs() < 1e-3, "{ha} vs {hb}"),
                (None, None) => {}
                other => panic!("hue presence differs: {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn output_is_always_a_valid_frame(vals in proptest::collection::vec(-1e4f32..1e4, 12), max in proptest::option::of(0.0f64..100.0)) {
            let flow = FlowField::new(3, 2, vals[..6].to_vec(), vals[6..].to_vec()).unwrap();
            let img = flow_to_color(&flow, max);
            prop_assert!(img.data().iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }
}

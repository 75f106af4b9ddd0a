use crate::flowcore::ImageFrame;
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable "valid" Gaussian filter: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = line[x..x + SSIM_WINDOW].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += rows[(y + j) * ow + x] * kv;
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5).
/// RGB inputs are converted to luma first.
pub fn ssim(a: &ImageFrame, b: &ImageFrame) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!("ssim inputs differ: {}x{} vs {}x{}", a.width(), a.height(), b.width(), b.height())));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!("{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let x: Vec<f64> = a.to_luma().data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.to_luma().data().iter().map(|&v| v as f64).collect();
    let k = gaussian_kernel();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sxx = e_xx[i] - mx * mx;
        let syy = e_yy[i] - my * my;
        let sxy = e_xy[i] - mx * my;
        let num = (2.0 * (mx * my) + c1) * (2.0 * sxy + c2);
        let den = (mx * mx + my * my + c1) * (sxx + syy + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texture(w: usize, h: usize, phase: f32) -> ImageFrame {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f32, (i / w) as f32);
                (0.5 + 0.3 * (x * 0.4 + phase).sin() * (y * 0.3).cos()).clamp(0.0, 1.0)
            })
            .collect();
        ImageFrame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let a = texture(40, 30, 0.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn constant_patches_follow_closed_form() {
        let a = ImageFrame::filled(20, 20, 1, 0.2).unwrap();
        let b = ImageFrame::filled(20, 20, 1, 0.8).unwrap();
        let (p, q) = (0.2f32 as f64, 0.8f32 as f64);
        let c1 = 0.01f64 * 0.01;
        let expected = (2.0 * p * q + c1) / (p * p + q * q + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn rgb_is_converted_to_luma() {
        let g = texture(16, 16, 0.3);
        let rgb = ImageFrame::new(16, 16, 3, g.data().iter().flat_map(|&v| [v, v, v]).collect()).unwrap();
        assert!((ssim(&rgb, &g).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_or_mismatched_inputs_rejected() {
        let a = ImageFrame::filled(10, 20, 1, 0.5).unwrap();
        assert!(ssim(&a, &a).is_err());
        let b = ImageFrame::filled(20, 20, 1, 0.5).unwrap();
        let c = ImageFrame::filled(21, 20, 1, 0.5).unwrap();
        assert!(ssim(&b, &c).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(pa in 0f32..6.0, pb in 0f32..6.0) {
            let a = texture(24, 18, pa);
            let b = texture(24, 18, pb);
            let s = ssim(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert_eq!(s, ssim(&b, &a).unwrap());
        }
    }
}

//! Photometric perturbations applied after geometric rendering.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::synthdata::motion::triangle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Illumination {
    /// Static radial darkening: `I * (1 - strength * r^2)` with `r = 1` at the corners.
    Vignette { strength: f64 },
    /// Global gain changing by `factor` per frame, reversing every `period / 2` frames.
    GainRamp { factor: f64, period: usize },
    /// Additive clipped Gaussian highlights moving independently of the scene.
    Specular { count: usize, radius: f64, intensity: f64 },
}

struct Spot {
    origin: (f64, f64),
    amplitude: (f64, f64),
    omega: (f64, f64),
    phase: (f64, f64),
}

impl Illumination {
    /// Multiplies/adds the perturbation into `plane` (`width x height`, frame `n`).
    pub(crate) fn apply(&self, plane: &mut [f64], width: usize, height: usize, n: usize, seed: u64) {
        match *self {
            Illumination::Vignette { strength } => {
                let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
                let r2max = cx * cx + cy * cy;
                for (i, v) in plane.iter_mut().enumerate() {
                    let (x, y) = ((i % width) as f64 - cx, (i / width) as f64 - cy);
                    *v *= 1.0 - strength * (x * x + y * y) / r2max;
                }
            }
            Illumination::GainRamp { factor, period } => {
                let g = factor.powf(triangle(n as f64, period as f64));
                plane.iter_mut().for_each(|v| *v *= g);
            }
            Illumination::Specular { count, radius, intensity } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bec_0a12);
                let spots: Vec<Spot> = (0..count)
                    .map(|_| Spot {
                        origin: (rng.random_range(0.0..width as f64), rng.random_range(0.0..height as f64)),
                        amplitude: (rng.random_range(10.0..40.0), rng.random_range(10.0..40.0)),
                        omega: (TAU / rng.random_range(20.0..60.0), TAU / rng.random_range(20.0..60.0)),
                        phase: (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)),
                    })
                    .collect();
                let t = n as f64;
                for s in &spots {
                    let cx = s.origin.0 + s.amplitude.0 * (s.omega.0 * t + s.phase.0).sin();
                    let cy = s.origin.1 + s.amplitude.1 * (s.omega.1 * t + s.phase.1).sin();
                    let reach = 3.0 * radius;
                    let (x0, x1) = ((cx - reach).floor().max(0.0) as usize, ((cx + reach).ceil().max(0.0) as usize).min(width));
                    let (y0, y1) = ((cy - reach).floor().max(0.0) as usize, ((cy + reach).ceil().max(0.0) as usize).min(height));
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                            plane[y * width + x] += intensity * (-r2 / (2.0 * radius * radius)).exp();
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_ramp_starts_neutral_and_changes_per_frame() {
        let ramp = Illumination::GainRamp { factor: 1.05, period: 40 };
        let mut a = vec![0.5; 4];
        ramp.apply(&mut a, 2, 2, 0, 0);
        assert_eq!(a, vec![0.5; 4]);
        let mut b = vec![0.5; 4];
        ramp.apply(&mut b, 2, 2, 2, 0);
        assert!((b[0] - 0.5 * 1.05f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn vignette_keeps_center_and_darkens_corners() {
        let mut p = vec![1.0; 9];
        Illumination::Vignette { strength: 0.5 }.apply(&mut p, 3, 3, 0, 0);
        assert_eq!(p[4], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn specular_spots_move() {
        let s = Illumination::Specular { count: 3, radius: 4.0, intensity: 0.8 };
        let (mut a, mut b) = (vec![0.0; 64 * 64], vec![0.0; 64 * 64]);
        s.apply(&mut a, 64, 64, 0, 1);
        s.apply(&mut b, 64, 64, 5, 1);
        assert!(a.iter().all(|&v| v >= 0.0));
        assert_ne!(a, b);
    }
}

//! Analytic motion models.
//!
//! Each motion is a family of invertible maps `F_n` taking a texture point to its
//! position in frame `n`. Frame `n` shows the texture at `F_n^{-1}(x)`, and the
//! exact flow from frame `a` to frame `b` is `F_b(F_a^{-1}(x)) - x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub type Point = (f64, f64);

/// One Gaussian displacement bump with an oscillating amplitude and a drifting center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Point,
    pub velocity: Point,
    /// Peak displacement direction (unit vector) times amplitude in pixels.
    pub displacement: Point,
    pub sigma: f64,
    pub period: f64,
    pub phase: f64,
}

impl Bump {
    fn at(&self, n: f64, p: Point) -> Point {
        let c = (self.center.0 + self.velocity.0 * n, self.center.1 + self.velocity.1 * n);
        let r2 = (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2);
        let g = (-r2 / (2.0 * self.sigma * self.sigma)).exp() * (TAU * n / self.period + self.phase).sin();
        (self.displacement.0 * g, self.displacement.1 * g)
    }
}

/// Smooth affine wander: rotation, log-scale and shift are sums of two sinusoids each.
#[derive(Debug, Clone, PartialEq)]
pub struct WanderParams {
    pub center: Point,
    /// `(amplitude, angular frequency, phase)` terms.
    pub rotation_deg: [(f64, f64, f64); 2],
    pub log_scale: [(f64, f64, f64); 2],
    pub shift_x: [(f64, f64, f64); 2],
    pub shift_y: [(f64, f64, f64); 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Constant rotation rate about `center`.
    Rotation {
        deg_per_frame: f64,
        center: Point,
    },
    /// Zoom by `factor` per frame about `center`. With `period`, the zoom direction
    /// reverses every `period / 2` frames so the scale stays bounded.
    Scale {
        factor: f64,
        center: Point,
        period: Option<usize>,
    },
    Translation {
        dx: f64,
        dy: f64,
    },
    /// Nonrigid warp `F_n(p) = p + sum_k bump_k(n, p)`.
    Deformation {
        bumps: Vec<Bump>,
    },
    /// Rotation and shift that return exactly to the identity every `period` frames.
    Loop {
        rotation_deg: f64,
        shift: Point,
        center: Point,
        period: usize,
    },
    Wander(WanderParams),
    /// `F_n = M_0 o M_1 o ... o M_k` (the last motion is applied first).
    Composite(Vec<Motion>),
}

fn rotate(p: Point, c: Point, theta: f64) -> Point {
    let (s, co) = theta.sin_cos();
    let (dx, dy) = (p.0 - c.0, p.1 - c.1);
    (c.0 + co * dx - s * dy, c.1 + s * dx + co * dy)
}

fn similarity(p: Point, c: Point, theta: f64, scale: f64, t: Point) -> Point {
    let r = rotate(p, c, theta);
    (c.0 + scale * (r.0 - c.0) + t.0, c.1 + scale * (r.1 - c.1) + t.1)
}

fn similarity_inverse(x: Point, c: Point, theta: f64, scale: f64, t: Point) -> Point {
    let q = (c.0 + (x.0 - t.0 - c.0) / scale, c.1 + (x.1 - t.1 - c.1) / scale);
    rotate(q, c, -theta)
}

fn sines(terms: &[(f64, f64, f64); 2], n: f64) -> f64 {
    terms.iter().map(|&(a, w, ph)| a * (w * n + ph).sin()).sum()
}

/// Triangle wave with unit slope, bounded to `[-period/4, period/4]`.
pub(crate) fn triangle(n: f64, period: f64) -> f64 {
    let q = period / 4.0;
    let t = (n + q).rem_euclid(period);
    if t < 2.0 * q {
        t - q
    } else {
        3.0 * q - t
    }
}

impl Motion {
    /// Random deformation bumps placed over a `width x height` frame.
    #[allow(clippy::too_many_arguments)]
    pub fn random_deformation(
        count: usize,
        amplitude: f64,
        sigma: f64,
        period: f64,
        drift: f64,
        width: usize,
        height: usize,
        seed: u64,
    ) -> Motion {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps = (0..count)
            .map(|_| {
                let dir = rng.random_range(0.0..TAU);
                let vdir = rng.random_range(0.0..TAU);
                Bump {
                    center: (rng.random_range(0.0..width as f64), rng.random_range(0.0..height as f64)),
                    velocity: (drift * vdir.cos(), drift * vdir.sin()),
                    displacement: (amplitude * dir.cos(), amplitude * dir.sin()),
                    sigma,
                    period: period * rng.random_range(0.8..1.25),
                    phase: rng.random_range(0.0..TAU),
                }
            })
            .collect();
        Motion::Deformation { bumps }
    }

    /// Smoothly varying affine motion with the given peak amplitudes.
    pub fn random_wander(rotation_deg: f64, log_scale: f64, shift: f64, center: Point, seed: u64) -> Motion {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = |amp: f64| {
            let mut t = [(0.0, 0.0, 0.0); 2];
            for (k, term) in t.iter_mut().enumerate() {
                let period = rng.random_range(30.0..90.0) * (k + 1) as f64;
                *term = (amp / (k + 1) as f64, TAU / period, rng.random_range(0.0..TAU));
            }
            t
        };
        Motion::Wander(WanderParams {
            center,
            rotation_deg: terms(rotation_deg),
            log_scale: terms(log_scale),
            shift_x: terms(shift),
            shift_y: terms(shift),
        })
    }

    /// Largest Lipschitz constant of a deformation's displacement; must stay below 1.
    pub fn deformation_lipschitz(&self) -> f64 {
        match self {
            Motion::Deformation { bumps } => {
                bumps.iter().map(|b| b.displacement.0.hypot(b.displacement.1) / (b.sigma * std::f64::consts::E.sqrt())).sum()
            }
            Motion::Composite(ms) => ms.iter().map(Motion::deformation_lipschitz).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Position in frame `n` of texture point `p`.
    pub fn forward(&self, n: f64, p: Point) -> Point {
        match self {
            Motion::Rotation { deg_per_frame, center } => rotate(p, *center, (deg_per_frame * n).to_radians()),
            Motion::Scale { factor, center, period } => {
                let s = self.scale_at(n, *factor, *period);
                (center.0 + s * (p.0 - center.0), center.1 + s * (p.1 - center.1))
            }
            Motion::Translation { dx, dy } => (p.0 + dx * n, p.1 + dy * n),
            Motion::Deformation { bumps } => {
                let mut q = p;
                for b in bumps {
                    let d = b.at(n, p);
                    q.0 += d.0;
                    q.1 += d.1;
                }
                q
            }
            Motion::Loop { rotation_deg, shift, center, period } => {
                let (theta, t) = loop_params(n, *rotation_deg, *shift, *period);
                similarity(p, *center, theta, 1.0, t)
            }
            Motion::Wander(w) => {
                let (theta, s, t) = wander_params(w, n);
                similarity(p, w.center, theta, s, t)
            }
            Motion::Composite(ms) => ms.iter().rev().fold(p, |q, m| m.forward(n, q)),
        }
    }

    /// Texture point shown at position `x` of frame `n`.
    pub fn inverse(&self, n: f64, x: Point) -> Point {
        match self {
            Motion::Rotation { deg_per_frame, center } => rotate(x, *center, -(deg_per_frame * n).to_radians()),
            Motion::Scale { factor, center, period } => {
                let s = self.scale_at(n, *factor, *period);
                (center.0 + (x.0 - center.0) / s, center.1 + (x.1 - center.1) / s)
            }
            Motion::Translation { dx, dy } => (x.0 - dx * n, x.1 - dy * n),
            Motion::Deformation { .. } => {
                // p = x - D(p) is a contraction while the Lipschitz bound stays below 1
                let mut p = x;
                for _ in 0..200 {
                    let f = self.forward(n, p);
                    let next = (p.0 - (f.0 - x.0), p.1 - (f.1 - x.1));
                    let step = (next.0 - p.0).abs() + (next.1 - p.1).abs();
                    p = next;
                    if step < 1e-12 {
                        break;
                    }
                }
                p
            }
            Motion::Loop { rotation_deg, shift, center, period } => {
                let (theta, t) = loop_params(n, *rotation_deg, *shift, *period);
                similarity_inverse(x, *center, theta, 1.0, t)
            }
            Motion::Wander(w) => {
                let (theta, s, t) = wander_params(w, n);
                similarity_inverse(x, w.center, theta, s, t)
            }
            Motion::Composite(ms) => ms.iter().fold(x, |q, m| m.inverse(n, q)),
        }
    }

    fn scale_at(&self, n: f64, factor: f64, period: Option<usize>) -> f64 {
        let steps = match period {
            Some(p) => triangle(n, p as f64),
            None => n,
        };
        factor.powf(steps)
    }

    /// Exact flow at pixel `x` from frame `a` to frame `b`.
    pub fn flow_between(&self, a: f64, b: f64, x: Point) -> Point {
        let q = self.forward(b, self.inverse(a, x));
        (q.0 - x.0, q.1 - x.1)
    }
}

fn loop_params(n: f64, rotation_deg: f64, shift: Point, period: usize) -> (f64, Point) {
    let phase = TAU * n / period as f64;
    let theta = rotation_deg.to_radians() * phase.sin();
    (theta, (shift.0 * phase.sin(), shift.1 * (1.0 - phase.cos()) / 2.0))
}

fn wander_params(w: &WanderParams, n: f64) -> (f64, f64, Point) {
    (sines(&w.rotation_deg, n).to_radians(), sines(&w.log_scale, n).exp(), (sines(&w.shift_x, n), sines(&w.shift_y, n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
    }

    fn all_motions() -> Vec<Motion> {
        let c = (128.0, 96.0);
        vec![
            Motion::Rotation { deg_per_frame: 1.0, center: c },
            Motion::Scale { factor: 1.01, center: c, period: Some(40) },
            Motion::Translation { dx: 1.5, dy: -0.5 },
            Motion::random_deformation(8, 5.0, 10.0, 30.0, 0.3, 256, 192, 4),
            Motion::Loop { rotation_deg: 4.0, shift: (10.0, 6.0), center: c, period: 100 },
            Motion::random_wander(5.0, 0.05, 20.0, c, 2),
            Motion::Composite(vec![
                Motion::Translation { dx: 1.0, dy: 0.2 },
                Motion::random_deformation(4, 3.0, 12.0, 25.0, 0.0, 256, 192, 9),
            ]),
        ]
    }

    #[test]
    fn inverse_undoes_forward() {
        for m in all_motions() {
            for n in [0.0, 1.0, 17.0, 63.0] {
                for p in [(0.0, 0.0), (100.5, 40.25), (255.0, 191.0)] {
                    assert!(close(m.inverse(n, m.forward(n, p)), p, 1e-9), "{m:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn rotation_flow_has_chord_length() {
        let m = Motion::Rotation { deg_per_frame: 1.0, center: (128.0, 96.0) };
        assert!(close(m.flow_between(0.0, 1.0, (128.0, 96.0)), (0.0, 0.0), 1e-12));
        let r = 50.0;
        let f = m.flow_between(3.0, 4.0, (128.0 + r, 96.0));
        let expected = 2.0 * r * 0.5f64.to_radians().sin();
        assert!((f.0.hypot(f.1) - expected).abs() < 1e-9);
    }

    #[test]
    fn scale_flow_is_linear_in_offset() {
        let c = (128.0, 96.0);
        let m = Motion::Scale { factor: 1.01, center: c, period: None };
        let p = (200.0, 30.0);
        let f = m.flow_between(5.0, 6.0, p);
        assert!(close(f, (0.01 * (p.0 - c.0), 0.01 * (p.1 - c.1)), 1e-9));
    }

    #[test]
    fn loop_returns_to_identity() {
        let m = Motion::Loop { rotation_deg: 4.0, shift: (10.0, 6.0), center: (128.0, 96.0), period: 100 };
        for p in [(10.0, 10.0), (200.0, 150.0)] {
            assert!(close(m.forward(100.0, p), p, 1e-9));
            assert!(close(m.forward(0.0, p), p, 1e-12));
            assert!(!close(m.forward(30.0, p), p, 1.0));
        }
    }

    #[test]
    fn triangle_wave_is_bounded() {
        for i in 0..200 {
            assert!(triangle(i as f64, 40.0).abs() <= 10.0);
        }
        assert_eq!(triangle(0.0, 40.0), 0.0);
        assert_eq!(triangle(3.0, 40.0), 3.0);
        assert_eq!(triangle(15.0, 40.0), 5.0);
    }

    #[test]
    fn deformation_is_the_bump_field() {
        let b = Bump { center: (50.0, 50.0), velocity: (0.0, 0.0), displacement: (4.0, 0.0), sigma: 10.0, period: 40.0, phase: 0.0 };
        let m = Motion::Deformation { bumps: vec![b] };
        let n = 10.0; // sin(pi/2) = 1
        let q = m.forward(n, (60.0, 50.0));
        assert!(close(q, (60.0 + 4.0 * (-0.5f64).exp(), 50.0), 1e-12));
        assert!(m.deformation_lipschitz() < 1.0);
    }
}

//! Continuous procedural base textures, sampled at arbitrary real coordinates.

/// Texture families used by the regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TextureKind {
    /// Band-limited fractal gradient noise.
    DensePerlin,
    /// Small Gaussian blobs on a flat background; `density` is the expected blob count per pixel.
    SparseBlobs { density: f64 },
    /// Low-frequency fractal noise with dark ridged "vessels".
    TissueLike { octaves: u32 },
}

/// Flat level of [`TextureKind::SparseBlobs`] between blobs.
pub const SPARSE_BACKGROUND: f64 = 0.25;
const BLOB_AMPLITUDE: f64 = 0.5;
const BLOB_SIGMA: f64 = 1.0;
const BLOB_CELL: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    kind: TextureKind,
    seed: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash2(seed: u64, ix: i64, iy: i64) -> u64 {
    mix(seed ^ mix((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)))
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// 2-D gradient noise in roughly [-0.7, 0.7].
fn gradient_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let corner = |dx: i64, dy: i64| {
        let a = unit(hash2(seed, ix + dx, iy + dy)) * std::f64::consts::TAU;
        a.cos() * (fx - dx as f64) + a.sin() * (fy - dy as f64)
    };
    let (u, v) = (fade(fx), fade(fy));
    let top = corner(0, 0) + u * (corner(1, 0) - corner(0, 0));
    let bottom = corner(0, 1) + u * (corner(1, 1) - corner(0, 1));
    top + v * (bottom - top)
}

fn fbm(seed: u64, x: f64, y: f64, octaves: u32, persistence: f64) -> f64 {
    let (mut amp, mut freq, mut sum, mut norm) = (1.0, 1.0, 0.0, 0.0);
    for o in 0..octaves {
        sum += amp * gradient_noise(seed.wrapping_add(o as u64 * 0x1000_0001), x * freq, y * freq);
        norm += amp;
        amp *= persistence;
        freq *= 2.0;
    }
    sum / norm
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl Texture {
    pub fn new(kind: TextureKind, seed: u64) -> Self {
        Texture { kind, seed }
    }

    pub fn kind(&self) -> TextureKind {
        self.kind
    }

    /// Intensity in [0, 1] at texture coordinates `(x, y)` in pixels.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let v = match self.kind {
            TextureKind::DensePerlin => 0.5 + 1.1 * fbm(self.seed, x / 40.0, y / 40.0, 4, 0.6),
            TextureKind::SparseBlobs { density } => self.blobs(x, y, density),
            TextureKind::TissueLike { octaves } => {
                let base = 0.55 + 0.8 * fbm(self.seed, x / 56.0, y / 56.0, octaves.max(1), 0.55);
                let wx = 6.0 * gradient_noise(self.seed ^ 0xa5a5, x / 64.0, y / 64.0);
                let ridge = gradient_noise(self.seed ^ 0x5a5a, (x + wx) / 36.0, (y - wx) / 36.0).abs();
                let vessel = 1.0 - smoothstep(0.015, 0.06, ridge);
                base * (1.0 - 0.4 * vessel)
            }
        };
        v.clamp(0.0, 1.0)
    }

    fn blobs(&self, x: f64, y: f64, density: f64) -> f64 {
        let p = (density * BLOB_CELL * BLOB_CELL).clamp(0.0, 1.0);
        let (cx, cy) = ((x / BLOB_CELL).floor() as i64, (y / BLOB_CELL).floor() as i64);
        let mut v = SPARSE_BACKGROUND;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let h = hash2(self.seed, cx + dx, cy + dy);
                if unit(h) >= p {
                    continue;
                }
                let bx = ((cx + dx) as f64 + unit(mix(h ^ 1))) * BLOB_CELL;
                let by = ((cy + dy) as f64 + unit(mix(h ^ 2))) * BLOB_CELL;
                let r2 = (x - bx).powi(2) + (y - by).powi(2);
                v += BLOB_AMPLITUDE * (-r2 / (2.0 * BLOB_SIGMA * BLOB_SIGMA)).exp();
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(t: &Texture, w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|i| t.sample((i % w) as f64, (i / w) as f64)).collect()
    }

    #[test]
    fn sparse_blobs_leave_background_mostly_flat() {
        let t = Texture::new(TextureKind::SparseBlobs { density: 0.002 }, 11);
        let img = render(&t, 256, 192);
        let flat = img.iter().filter(|&&v| (v - SPARSE_BACKGROUND).abs() <= 0.05).count();
        assert!(flat as f64 >= 0.95 * img.len() as f64, "{flat} of {}", img.len());
        assert!(img.iter().any(|&v| v > SPARSE_BACKGROUND + 0.3));
    }

    #[test]
    fn dense_textures_have_contrast_and_stay_in_range() {
        for kind in [TextureKind::DensePerlin, TextureKind::TissueLike { octaves: 4 }] {
            let img = render(&Texture::new(kind, 3), 128, 128);
            let mean = img.iter().sum::<f64>() / img.len() as f64;
            let var = img.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / img.len() as f64;
            assert!(var.sqrt() > 0.05, "{kind:?} std {}", var.sqrt());
            assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn texture_is_deterministic_and_seed_dependent() {
        let a = Texture::new(TextureKind::DensePerlin, 1);
        let b = Texture::new(TextureKind::DensePerlin, 1);
        let c = Texture::new(TextureKind::DensePerlin, 2);
        assert_eq!(a.sample(10.3, -4.2), b.sample(10.3, -4.2));
        assert_ne!(a.sample(10.3, -4.2), c.sample(10.3, -4.2));
    }

    #[test]
    fn texture_is_continuous() {
        let t = Texture::new(TextureKind::TissueLike { octaves: 4 }, 5);
        for i in 0..200 {
            let (x, y) = (i as f64 * 1.37, i as f64 * 0.81);
            assert!((t.sample(x, y) - t.sample(x + 1e-6, y)).abs() < 1e-3);
        }
    }
}

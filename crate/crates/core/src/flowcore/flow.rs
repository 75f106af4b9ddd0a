use crate::{Error, Result};

/// Dense displacement field in pixels. Positive `u` points right, positive `v` down.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty flow {width}x{height}")));
        }
        let n = width * height;
        if u.len() != n || v.len() != n {
            return Err(Error::Dimension(format!(
                "flow {width}x{height} needs {n} components per channel, got u={} v={}",
                u.len(),
                v.len()
            )));
        }
        if let Some(i) = u.iter().chain(v.iter()).position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("flow component {i} is not finite")));
        }
        Ok(FlowField { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        FlowField { width, height, u: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn constant(width: usize, height: usize, du: f32, dv: f32) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![du; n], vec![dv; n])
    }

    /// Evaluates `f(x, y)` at every pixel center.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Result<Self> {
        let n = width * height;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a as f32);
                v.push(b as f32);
            }
        }
        Self::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn same_size(&self, other: &FlowField) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_size(&self, other: &FlowField) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!("flow sizes differ: {}x{} vs {}x{}", self.width, self.height, other.width, other.height)))
        }
    }

    /// Per-pixel displacement magnitudes.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(&a, &b)| (a as f64).hypot(b as f64)).collect()
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.magnitudes().iter().sum::<f64>() / (self.width * self.height) as f64
    }

    pub fn scaled(&self, factor: f32) -> Result<FlowField> {
        Self::new(self.width, self.height, self.u.iter().map(|a| a * factor).collect(), self.v.iter().map(|a| a * factor).collect())
    }

    pub fn into_components(self) -> (Vec<f32>, Vec<f32>) {
        (self.u, self.v)
    }
}

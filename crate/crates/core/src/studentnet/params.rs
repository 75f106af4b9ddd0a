//! Named parameter tensors; also used for gradients and optimizer moments.

/// An ordered collection of named, shaped `f64` tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

impl ParamSet {
    pub fn zeros(shapes: Vec<(String, Vec<usize>)>) -> Self {
        let mut set = ParamSet { names: Vec::new(), shapes: Vec::new(), values: Vec::new() };
        for (name, shape) in shapes {
            let n = shape.iter().product();
            set.names.push(name);
            set.shapes.push(shape);
            set.values.push(vec![0.0; n]);
        }
        set
    }

    /// Builds from explicit tensors; `None` if any value count disagrees with its shape.
    pub fn from_tensors(tensors: Vec<(String, Vec<usize>, Vec<f64>)>) -> Option<Self> {
        let mut set = ParamSet { names: Vec::new(), shapes: Vec::new(), values: Vec::new() };
        for (name, shape, values) in tensors {
            if shape.iter().product::<usize>() != values.len() {
                return None;
            }
            set.names.push(name);
            set.shapes.push(shape);
            set.values.push(values);
        }
        Some(set)
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            names: self.names.clone(),
            shapes: self.shapes.clone(),
            values: self.values.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn total_len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn values_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i]
    }

    pub fn iter_values(&self) -> impl Iterator<Item = &[f64]> {
        self.values.iter().map(Vec::as_slice)
    }

    pub fn iter_values_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.values.iter_mut().map(Vec::as_mut_slice)
    }

    /// Two distinct tensors mutably at once.
    pub(crate) fn pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert_ne!(a, b);
        if a < b {
            let (lo, hi) = self.values.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        } else {
            let (lo, hi) = self.values.split_at_mut(a);
            (&mut hi[0], &mut lo[b])
        }
    }

    /// `self += other`; tensors must line up.
    pub fn add_assign(&mut self, other: &ParamSet) {
        debug_assert_eq!(self.shapes, other.shapes);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().flatten().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

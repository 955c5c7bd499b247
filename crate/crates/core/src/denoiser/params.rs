//! Flat, ordered parameter storage shared by every architecture.

use crate::numerics::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

pub enum Init {
    Zeros,
    Ones,
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            shapes: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, shape: &[usize], init: Init, rng: &mut RngState) -> ParamId {
        let n: usize = shape.iter().product();
        let values = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Normal(sd) => (0..n).map(|_| sd * rng.normal()).collect(),
        };
        self.names.push(name.into());
        self.shapes.push(shape.to_vec());
        self.values.push(values);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn tensor(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i]
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn zeros_like(&self) -> Grads {
        Grads(self.values.iter().map(|v| vec![0.0; v.len()]).collect())
    }

    /// Flat view `(tensor index, offset)` of scalar number `k`.
    pub fn locate(&self, mut k: usize) -> (usize, usize) {
        for (i, v) in self.values.iter().enumerate() {
            if k < v.len() {
                return (i, k);
            }
            k -= v.len();
        }
        panic!("scalar index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients laid out exactly like the [`ParamSet`] they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.0[id.0]
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    /// Disjoint mutable views of two distinct tensors.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [f64], &mut [f64]) {
        assert_ne!(a.0, b.0);
        if a.0 < b.0 {
            let (lo, hi) = self.0.split_at_mut(b.0);
            (&mut lo[a.0], &mut hi[0])
        } else {
            let (lo, hi) = self.0.split_at_mut(a.0);
            (&mut hi[0], &mut lo[b.0])
        }
    }

    pub fn scalar(&self, tensor: usize, offset: usize) -> f64 {
        self.0[tensor][offset]
    }
}

//! Named parameter arrays and their gradients.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered collection of named parameter arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Mat::all_finite)
    }

    /// Flat view of scalar `k` across all arrays, in insertion order.
    pub fn scalar_mut(&mut self, mut k: usize) -> &mut f64 {
        for v in &mut self.values {
            if k < v.len() {
                return &mut v.data[k];
            }
            k -= v.len();
        }
        panic!("scalar index out of range");
    }

    /// Replaces every value from `other`; names and shapes must agree.
    pub fn assign_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(NeuralError::Shape("parameter layouts differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            if a.shape() != b.shape() {
                return Err(NeuralError::Shape("parameter shapes differ".into()));
            }
            a.data.copy_from_slice(&b.data);
        }
        Ok(())
    }
}

/// Registers parameters with deterministic initialization.
pub struct ParamBuilder<'a, R: Rng> {
    pub set: &'a mut ParamSet,
    pub rng: &'a mut R,
}

impl<R: Rng> ParamBuilder<'_, R> {
    /// Uniform in ±1/√fan_in.
    pub fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        self.uniform(name, fan_in, fan_out, bound)
    }

    pub fn uniform(&mut self, name: &str, rows: usize, cols: usize, bound: f64) -> ParamId {
        let data = (0..rows * cols)
            .map(|_| self.rng.gen_range(-bound..=bound))
            .collect();
        self.set.insert(name, Mat::from_vec(rows, cols, data))
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.set.insert(name, Mat::zeros(rows, cols))
    }

    pub fn ones(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.set.insert(name, Mat::filled(rows, cols, 1.0))
    }
}

/// Gradients laid out like a [`ParamSet`]; arrays untouched by a loss stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub values: Vec<Option<Mat>>,
}

impl Grads {
    pub fn empty(n: usize) -> Self {
        Grads {
            values: vec![None; n],
        }
    }

    pub fn for_params(params: &ParamSet) -> Self {
        Self::empty(params.len())
    }

    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.values[id.0].as_ref()
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Mat, alpha: f64) {
        match &mut self.values[id.0] {
            Some(acc) => acc.add_scaled(g, alpha),
            slot @ None => {
                let mut m = g.clone();
                if alpha != 1.0 {
                    m.scale_in_place(alpha);
                }
                *slot = Some(m);
            }
        }
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, other: &Grads, alpha: f64) {
        assert_eq!(self.values.len(), other.values.len());
        for (i, g) in other.values.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g, alpha);
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(Mat::sq_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for g in self.values.iter_mut().flatten() {
            g.scale_in_place(alpha);
        }
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
        n
    }

    /// Errors with the name of the first array holding a non-finite entry.
    pub fn check_finite(&self, params: &ParamSet) -> Result<()> {
        for (i, g) in self.values.iter().enumerate() {
            if let Some(g) = g {
                if !g.all_finite() {
                    return Err(NeuralError::NonFiniteGradient(
                        params.name(ParamId(i)).to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Flat gradient vector in the [`ParamSet::scalar_mut`] order (zeros where absent).
    pub fn flatten(&self, params: &ParamSet) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.num_scalars());
        for id in params.ids() {
            match self.get(id) {
                Some(g) => out.extend_from_slice(&g.data),
                None => out.extend(std::iter::repeat(0.0).take(params.get(id).len())),
            }
        }
        out
    }
}

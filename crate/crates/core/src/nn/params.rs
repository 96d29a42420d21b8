//! Flat named parameter storage shared by all layers.

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// Running statistics are stored here as non-trainable buffers.
    pub trainable: bool,
}

/// All parameters and buffers of a model, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], value: Vec<f64>, trainable: bool) -> ParamId {
        let n: usize = shape.iter().product();
        assert_eq!(n, value.len(), "parameter value does not match shape");
        let name = name.into();
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    /// Kaiming-uniform initialization: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    pub fn add_kaiming(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let value = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, shape, value, true)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn tensor(&self, id: ParamId) -> Tensor {
        let p = &self.params[id.0];
        Tensor::from_vec(&p.shape, p.value.clone()).expect("shape checked on insert")
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        let g = &mut self.params[id.0].grad;
        assert_eq!(g.len(), grad.len(), "gradient shape mismatch for {}", self.params[id.0].name);
        for (a, b) in g.iter_mut().zip(grad) {
            *a += b;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn num_trainable(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// Concatenated values of all trainable parameters.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    /// Concatenated gradients of all trainable parameters.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .flat_map(|p| p.grad.iter().copied())
            .collect()
    }

    pub fn set_flat_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_trainable() {
            return Err(Error::invalid("flat parameter vector has the wrong length"));
        }
        let mut off = 0;
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            let n = p.value.len();
            p.value.copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Copies values (trainable and buffers) from a store with identical
    /// layout.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::invalid("parameter stores differ in layout"));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::invalid(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
            a.value.copy_from_slice(&b.value);
        }
        Ok(())
    }
}

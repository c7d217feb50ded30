//! Trainable parameters grouped per model.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{contract_err, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

static NEXT_STORE_TAG: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub requires_grad: bool,
}

/// Ordered collection of a model's parameters with unique names.
#[derive(Debug)]
pub struct ParamStore<T> {
    tag: u64,
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> Clone for ParamStore<T> {
    fn clone(&self) -> Self {
        Self { tag: NEXT_STORE_TAG.fetch_add(1, Ordering::Relaxed), params: self.params.clone() }
    }
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { tag: NEXT_STORE_TAG.fetch_add(1, Ordering::Relaxed), params: Vec::new() }
    }

    pub(crate) fn tag(&self) -> u64 {
        self.tag
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(contract_err!("duplicate parameter name `{name}`"));
        }
        self.params.push(Parameter { name, value, grad: None, requires_grad: true });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Adds a parameter drawn from `N(0, std²)`.
    pub fn add_normal(&mut self, name: impl Into<String>, shape: Vec<usize>, std: f64, rng: &mut Rng) -> Result<ParamId> {
        let mut buf = vec![0.0; shape.iter().product()];
        rng.fill_normal(&mut buf);
        let value = Tensor::new(shape, buf.into_iter().map(|v| T::lit(v * std)).collect())?;
        self.add(name, value)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Tensor<T>) {
        let p = &mut self.params[id.0];
        if !p.requires_grad {
            return;
        }
        match &mut p.grad {
            Some(existing) => {
                for (a, &b) in existing.data_mut().iter_mut().zip(g.data()) {
                    *a = *a + b;
                }
            }
            None => p.grad = Some(g.clone()),
        }
    }
}

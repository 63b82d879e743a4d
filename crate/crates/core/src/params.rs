//! Named trainable parameters with gradient accumulators.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Ordered collection of parameters. Insertion order is the checkpoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter `{name}`")));
        }
        let id = self.params.len();
        let grad = Tensor::new(value.shape().to_vec(), vec![T::zero(); value.len()])?;
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    /// Inserts a `[rows, cols]` parameter drawn uniformly from `[-scale, scale]`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let data = (0..rows * cols)
            .map(|_| T::of(rng.gen_range(-scale..=scale)))
            .collect();
        self.insert(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    /// Adds `scale * grads` into the parameter gradient accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>, scale: T) -> Result<(), TensorError> {
        for (i, g) in grads.by_param.iter().enumerate() {
            if let Some(g) = g {
                self.params[i].grad.scale_add_assign(g, scale)?;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Global 2-norm of all accumulated gradients.
    pub fn grad_norm(&self) -> T {
        self.params
            .iter()
            .map(|p| p.grad.norm_sq())
            .sum::<T>()
            .sqrt()
    }

    /// Copies all values into a flat vector, in parameter order.
    pub fn flat_values(&self) -> Vec<T> {
        self.params
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<T> {
        self.params
            .iter()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }

    /// Mutable access to the `k`-th scalar in flat order.
    pub fn flat_value_mut(&mut self, mut k: usize) -> &mut T {
        for p in &mut self.params {
            let n = p.value.len();
            if k < n {
                return &mut p.value.data_mut()[k];
            }
            k -= n;
        }
        panic!("flat index out of range");
    }
}

/// Gradients of one backward pass, indexed by parameter.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub(crate) by_param: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// All-zero gradients for `n` parameters.
    pub fn none(n: usize) -> Self {
        Self {
            by_param: vec![None; n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.by_param
            .iter()
            .flatten()
            .all(|g| g.data().iter().all(|v| v.is_zero()))
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.by_param.get(id.0).and_then(|g| g.as_ref())
    }
}

//! Named parameter storage.

use indexmap::IndexMap;

use crate::tensor::{Element, Shape, Tensor, TensorError};

/// A named tensor the optimizer may update. Gradients live in `value.grad()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub trainable: bool,
}

impl<T: Element> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter { name: name.into(), value, trainable: true }
    }

    pub fn frozen(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter { name: name.into(), value, trainable: false }
    }
}

/// Insertion-ordered registry with unique names.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamRegistry<T> {
    params: IndexMap<String, Parameter<T>>,
}

impl<T: Element> ParamRegistry<T> {
    pub fn new() -> Self {
        ParamRegistry { params: IndexMap::new() }
    }

    pub fn insert(&mut self, param: Parameter<T>) -> Result<(), TensorError> {
        if self.params.contains_key(&param.name) {
            return Err(TensorError::shape("registry", format!("duplicate parameter `{}`", param.name)));
        }
        self.params.insert(param.name.clone(), param);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Parameter<T>, TensorError> {
        self.params.get(name).ok_or_else(|| TensorError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Parameter<T>, TensorError> {
        self.params.get_mut(name).ok_or_else(|| TensorError::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    /// Removes a parameter, keeping the order of the rest.
    pub fn remove(&mut self, name: &str) -> Option<Parameter<T>> {
        self.params.shift_remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.values_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of stored scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(|p| p.value.zero_grad());
    }

    pub fn clear_grads(&mut self) {
        self.params.values_mut().for_each(|p| p.value.clear_grad());
    }

    /// `(name, shape)` pairs in registry order.
    pub fn signature(&self) -> Vec<(String, Shape)> {
        self.params.values().map(|p| (p.name.clone(), p.value.shape())).collect()
    }

    pub fn cast<U: Element>(&self) -> ParamRegistry<U> {
        ParamRegistry {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (k.clone(), Parameter { name: p.name.clone(), value: p.value.cast(), trainable: p.trainable })
                })
                .collect(),
        }
    }
}

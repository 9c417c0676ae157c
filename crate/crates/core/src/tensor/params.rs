//! Named parameter storage and its binding onto a tape.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Gradients, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T: Real> {
    pub tensor: Tensor<T>,
    /// Whether decoupled weight decay applies.
    pub decay: bool,
}

/// Ordered map of named parameters. Insertion order is the serialization
/// and optimizer order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T: Real = f64> {
    params: IndexMap<String, Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: IndexMap::new() }
    }

    /// Registers a trainable parameter.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>, decay: bool) {
        let tensor = tensor.with_requires_grad(true);
        self.params.insert(name.into(), Param { tensor, decay });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .map(|p| &p.tensor)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.params
            .get_mut(name)
            .map(|p| &mut p.tensor)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn set_trainable(&mut self, name: &str, flag: bool) -> Result<()> {
        self.get_mut(name)?.set_requires_grad(flag);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.params.values_mut().for_each(|p| p.tensor.zero_grad());
    }

    pub fn numel(&self) -> usize {
        self.params.values().map(|p| p.tensor.numel()).sum()
    }

    /// Records every parameter as a tape leaf.
    pub fn bind(&self, tape: &Tape<T>) -> Bindings {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| (name.clone(), tape.leaf(p.tensor.clone())))
            .collect();
        Bindings { vars }
    }

    /// Adds the gradients of bound leaves into the parameters' buffers.
    pub fn accumulate(&mut self, bindings: &Bindings, grads: &mut Gradients<T>) -> Result<()> {
        for (name, &var) in &bindings.vars {
            let Some(g) = grads.take(var) else { continue };
            let param = self.get_mut(name)?;
            if !param.requires_grad() {
                continue;
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient for {name}")));
            }
            param.accumulate_grad(&g)?;
        }
        Ok(())
    }
}

/// Name → tape leaf map produced by [`ParamStore::bind`].
#[derive(Clone, Debug)]
pub struct Bindings {
    vars: IndexMap<String, Var>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::contract(format!("parameter {name:?} is not bound")))
    }

    /// Points `name` at another tape value, e.g. a probe in a gradient
    /// check.
    pub fn rebind(&mut self, name: &str, var: Var) -> Result<()> {
        let slot = self
            .vars
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("parameter {name:?} is not bound")))?;
        *slot = var;
        Ok(())
    }
}

use std::collections::HashMap;

use crate::autodiff::{BackwardFault, Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub trainable: bool,
}

/// Ordered, uniquely named collection of model parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            trainable: true,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.id_of(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }
}

/// A value recorded by an attention site during a traced forward pass.
#[derive(Clone, Debug)]
pub struct AttentionTrace {
    pub site: String,
    /// Attended rows `[T, d]`.
    pub values: Var,
    pub weights: Var,
    pub context: Var,
}

/// One forward pass: a fresh tape with every parameter bound as a leaf.
#[derive(Debug)]
pub struct Frame<T> {
    pub tape: Tape<T>,
    vars: Vec<Var>,
    trace: Option<Vec<AttentionTrace>>,
}

impl<T: Scalar> Frame<T> {
    pub fn bind(store: &ParamStore<T>) -> Self {
        Self::bind_on(Tape::new(), store)
    }

    #[doc(hidden)]
    pub fn bind_with_fault(store: &ParamStore<T>, fault: BackwardFault) -> Self {
        Self::bind_on(Tape::with_fault(fault), store)
    }

    fn bind_on(mut tape: Tape<T>, store: &ParamStore<T>) -> Self {
        let vars = store
            .iter()
            .map(|p| tape.leaf(p.value.clone(), p.trainable))
            .collect();
        Self {
            tape,
            vars,
            trace: None,
        }
    }

    /// Records every attention site evaluated from now on.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn traces(&self) -> &[AttentionTrace] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub(crate) fn record(&mut self, trace: impl FnOnce() -> AttentionTrace) {
        if let Some(t) = self.trace.as_mut() {
            t.push(trace());
        }
    }

    pub fn p(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.tape.value(v)
    }

    /// Gradient of every bound parameter, in store order.
    pub fn param_grads(&self, grads: &mut Gradients<T>) -> Vec<Option<Tensor<T>>> {
        self.vars.iter().map(|&v| grads.take(v)).collect()
    }
}

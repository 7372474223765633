use crate::autodiff::tape::{Gradients, Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named parameter tensors for a whole model, in insertion order. Naming
/// uses slash-separated sections ("ll/l1/w", "task0/hl/lstm/b") so groups
/// can be frozen, hashed, or extracted by prefix.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::DuplicateParam { name });
        }
        self.entries.push(ParamEntry {
            name,
            tensor,
            trainable,
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamEntry {
        &mut self.entries[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.entries
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.name.starts_with(prefix))
            .map(|(i, _)| ParamId(i))
    }

    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) {
        for e in self.entries.iter_mut().filter(|e| e.name.starts_with(prefix)) {
            e.trainable = trainable;
        }
    }

    /// Number of scalar values across all parameters with the given prefix.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .map(|e| e.tensor.len())
            .sum()
    }

    /// Registers every parameter as a leaf on the tape; frozen entries come
    /// in as constants so no adjoint storage is spent on them.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let vars = self
            .entries
            .iter()
            .map(|e| {
                if e.trainable {
                    tape.leaf(e.tensor.clone())
                } else {
                    tape.constant(e.tensor.clone())
                }
            })
            .collect();
        BoundParams { vars }
    }
}

/// Tape handles for one binding of a [`ParamStore`], aligned by [`ParamId`].
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }

    /// Pulls per-parameter gradients out of a backward pass. Entries the
    /// loss does not touch are zero; frozen parameters always read zero.
    pub fn collect(&self, grads: &Gradients) -> GradSet {
        let by_param = self.vars.iter().map(|&v| grads.get(v).cloned()).collect();
        GradSet { by_param }
    }
}

/// Gradients aligned with a [`ParamStore`]; `None` means identically zero.
#[derive(Clone, Debug)]
pub struct GradSet {
    by_param: Vec<Option<Tensor>>,
}

impl GradSet {
    pub fn zeros(store: &ParamStore) -> Self {
        GradSet {
            by_param: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(id.index()).and_then(|g| g.as_ref())
    }

    pub fn set(&mut self, id: ParamId, grad: Option<Tensor>) {
        self.by_param[id.index()] = grad;
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    /// Adds another gradient set elementwise (for accumulating across
    /// segments before one update).
    pub fn add_assign(&mut self, other: &GradSet) {
        assert_eq!(self.by_param.len(), other.by_param.len());
        for (dst, src) in self.by_param.iter_mut().zip(&other.by_param) {
            match (dst.as_mut(), src) {
                (_, None) => {}
                (Some(d), Some(s)) => {
                    for (a, b) in d.data_mut().iter_mut().zip(s.data()) {
                        *a += b;
                    }
                }
                (None, Some(s)) => *dst = Some(s.clone()),
            }
        }
    }

    /// L2 norm over the concatenation of every gradient.
    pub fn global_norm(&self) -> f64 {
        self.by_param
            .iter()
            .flatten()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.by_param.iter_mut().flatten() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}

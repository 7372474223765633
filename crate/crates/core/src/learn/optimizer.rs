use crate::autodiff::{GradSet, ParamStore, Tensor};
use crate::error::{Error, Result};

/// RMSProp with global gradient-norm clipping. Keeps one running
/// second-moment accumulator per parameter tensor, indexed like the
/// parameter store.
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    pub clip: f64,
    cache: Vec<Option<Tensor>>,
}

impl RmsProp {
    pub fn new(lr: f64, clip: f64) -> Self {
        RmsProp {
            lr,
            decay: 0.99,
            eps: 1e-5,
            clip,
            cache: Vec::new(),
        }
    }

    /// Applies one update to every trainable parameter that has a
    /// gradient. The whole gradient set is rescaled first when its
    /// global norm exceeds the clip threshold. A gradient aimed at a
    /// frozen parameter is refused outright: frozen entries bind to the
    /// tape as constants, so one can only appear here through a wiring
    /// bug, and silently applying it would break the freeze contract.
    pub fn step(&mut self, store: &mut ParamStore, grads: &GradSet) -> Result<()> {
        let mut ids = Vec::new();
        for (id, entry) in store.iter() {
            if entry.trainable {
                ids.push(id);
            } else if grads.get(id).is_some() {
                return Err(Error::FrozenParam {
                    name: entry.name.clone(),
                });
            }
        }
        for &id in &ids {
            if let Some(g) = grads.get(id) {
                if g.data().iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient {
                        name: store.get(id).name.clone(),
                    });
                }
            }
        }
        let norm = grads.global_norm();
        let scale = if norm > self.clip {
            self.clip / norm
        } else {
            1.0
        };
        if self.cache.len() < store.len() {
            self.cache.resize(store.len(), None);
        }
        for &id in &ids {
            let Some(g) = grads.get(id) else { continue };
            let slot = &mut self.cache[id.index()];
            if slot.is_none() {
                *slot = Some(Tensor::zeros(g.shape()));
            }
            let s = slot.as_mut().unwrap();
            let theta = store.get_mut(id).tensor.data_mut();
            for ((t, s), g) in theta.iter_mut().zip(s.data_mut()).zip(g.data()) {
                let g = g * scale;
                *s = self.decay * *s + (1.0 - self.decay) * g * g;
                *t -= self.lr * g / (*s + self.eps).sqrt();
            }
        }
        Ok(())
    }
}

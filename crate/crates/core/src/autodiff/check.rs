use crate::autodiff::params::{GradSet, ParamStore};
use crate::autodiff::tensor::Tensor;
use crate::error::Result;

/// Central finite-difference gradient of `loss` with respect to every
/// trainable parameter in `store`. The closure must rebuild the loss from
/// scratch on each call; everything it does not read from the store
/// (inputs, sampled actions, advantages) stays fixed across evaluations.
pub fn central_difference<F>(store: &ParamStore, h: f64, mut loss: F) -> Result<GradSet>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut work = store.clone();
    let mut out = GradSet::zeros(store);
    for (id, entry) in store.iter() {
        if !entry.trainable {
            continue;
        }
        let mut g = Tensor::zeros(entry.tensor.shape());
        for i in 0..entry.tensor.len() {
            let orig = entry.tensor.data()[i];
            work.get_mut(id).tensor.data_mut()[i] = orig + h;
            let plus = loss(&work)?;
            work.get_mut(id).tensor.data_mut()[i] = orig - h;
            let minus = loss(&work)?;
            work.get_mut(id).tensor.data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        out.set(id, Some(g));
    }
    Ok(out)
}

/// Worst disagreement between two gradient sets, scored so that a return
/// value below `rel_tol` means every coordinate satisfies either the
/// relative tolerance or, near zero, the absolute tolerance `abs_tol`.
pub fn gradient_error(
    store: &ParamStore,
    a: &GradSet,
    b: &GradSet,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let floor = abs_tol / rel_tol;
    let mut worst: f64 = 0.0;
    for (id, entry) in store.iter() {
        if !entry.trainable {
            continue;
        }
        let n = entry.tensor.len();
        let zeros = vec![0.0; n];
        let ga = a.get(id).map_or(&zeros[..], |t| t.data());
        let gb = b.get(id).map_or(&zeros[..], |t| t.data());
        for (x, y) in ga.iter().zip(gb) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

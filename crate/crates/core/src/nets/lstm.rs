use crate::autodiff::{BoundParams, ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::nets::init_weight;
use rand::Rng;

/// LSTM cell with a forget gate and no peepholes. The four gates share one
/// weight matrix over [x; h], ordered input, forget, candidate, output.
/// Forget-gate biases start at 1 so early training does not flush state.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub w: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub cells: usize,
}

impl LstmCell {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        cells: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = init_weight(store, format!("{prefix}/w"), 4 * cells, input_dim + cells, rng)?;
        let mut bias = vec![0.0; 4 * cells];
        bias[cells..2 * cells].fill(1.0);
        let b = store.add(
            format!("{prefix}/b"),
            crate::autodiff::Tensor::vector(bias)?,
            true,
        )?;
        Ok(LstmCell { w, b, input_dim, cells })
    }

    /// One step: returns (h_next, c_next) as tape nodes.
    pub fn step(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let joined = tape.concat(&[x, h])?;
        let pre = tape.matvec(bound.var(self.w), joined)?;
        let pre = tape.add(pre, bound.var(self.b))?;
        let n = self.cells;
        let i_pre = tape.slice(pre, 0, n)?;
        let f_pre = tape.slice(pre, n, n)?;
        let g_pre = tape.slice(pre, 2 * n, n)?;
        let o_pre = tape.slice(pre, 3 * n, n)?;
        let i = tape.sigmoid(i_pre)?;
        let f = tape.sigmoid(f_pre)?;
        let g = tape.tanh(g_pre)?;
        let o = tape.sigmoid(o_pre)?;
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let c_act = tape.tanh(c_next)?;
        let h_next = tape.mul(o, c_act)?;
        Ok((h_next, c_next))
    }
}

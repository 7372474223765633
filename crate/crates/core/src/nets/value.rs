use crate::autodiff::{BoundParams, ParamStore, Tape, Var};
use crate::error::Result;
use crate::nets::layers::Linear;
use crate::nets::lstm::LstmCell;
use rand::Rng;

/// State-value estimator for recurrent policies: its own encoder and LSTM
/// over the full observation stream, with a scalar head. It never receives
/// the control signal; its input signature admits only the observation.
#[derive(Clone, Copy, Debug)]
pub struct RecurrentValue {
    pub enc: Linear,
    pub lstm: LstmCell,
    pub head: Linear,
    pub obs_dim: usize,
    pub cells: usize,
}

/// Detached value-network LSTM state carried across truncation windows.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentValueState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl RecurrentValueState {
    pub fn zeros(cells: usize) -> Self {
        RecurrentValueState {
            h: vec![0.0; cells],
            c: vec![0.0; cells],
        }
    }
}

impl RecurrentValue {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        encoder_dim: usize,
        cells: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let enc = Linear::new(store, &format!("{prefix}/enc"), encoder_dim, obs_dim, rng)?;
        let lstm = LstmCell::new(store, &format!("{prefix}/lstm"), encoder_dim, cells, rng)?;
        let head = Linear::new(store, &format!("{prefix}/head"), 1, cells, rng)?;
        Ok(RecurrentValue {
            enc,
            lstm,
            head,
            obs_dim,
            cells,
        })
    }

    /// Advances the recurrence and returns (value, h_next, c_next).
    pub fn step(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        obs: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var, Var)> {
        let encoded = self.enc.forward_tanh(tape, bound, obs)?;
        let (h_next, c_next) = self.lstm.step(tape, bound, encoded, h, c)?;
        let value = self.head.forward(tape, bound, h_next)?;
        Ok((value, h_next, c_next))
    }
}

/// Value estimator for feedforward policies: two tanh layers and a scalar
/// head over the full observation.
#[derive(Clone, Copy, Debug)]
pub struct FfValue {
    pub l1: Linear,
    pub l2: Linear,
    pub head: Linear,
    pub obs_dim: usize,
}

impl FfValue {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let l1 = Linear::new(store, &format!("{prefix}/l1"), hidden, obs_dim, rng)?;
        let l2 = Linear::new(store, &format!("{prefix}/l2"), hidden, hidden, rng)?;
        let head = Linear::new(store, &format!("{prefix}/head"), 1, hidden, rng)?;
        Ok(FfValue { l1, l2, head, obs_dim })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, obs: Var) -> Result<Var> {
        let h1 = self.l1.forward_tanh(tape, bound, obs)?;
        let h2 = self.l2.forward_tanh(tape, bound, h1)?;
        self.head.forward(tape, bound, h2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recurrent_value_emits_scalars_and_carries_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let v = RecurrentValue::new(&mut store, "value", 6, 5, 3, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut h = tape.constant(Tensor::vector(vec![0.0; 3]).unwrap());
        let mut c = tape.constant(Tensor::vector(vec![0.0; 3]).unwrap());
        let mut last = None;
        for step in 0..4 {
            let obs = tape.constant(Tensor::vector(vec![0.1 * step as f64; 6]).unwrap());
            let (val, h2, c2) = v.step(&mut tape, &bound, obs, h, c).unwrap();
            assert_eq!(tape.value(val).len(), 1);
            h = h2;
            c = c2;
            last = Some(val);
        }
        assert!(last.is_some());
    }

    #[test]
    fn ff_value_is_a_scalar_function_of_the_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let v = FfValue::new(&mut store, "value", 4, 8, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let obs = tape.constant(Tensor::vector(vec![0.3, -0.7, 0.2, 0.9]).unwrap());
        let val = v.forward(&mut tape, &bound, obs).unwrap();
        assert_eq!(tape.value(val).len(), 1);
    }
}

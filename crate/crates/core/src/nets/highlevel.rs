use crate::autodiff::{BoundParams, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::nets::layers::{Linear, SigmaHead};
use crate::nets::lstm::LstmCell;
use crate::nets::CONTROL_DIM;
use rand::Rng;

/// Recurrent controller over the full observation: a tanh encoder feeding
/// an LSTM, with heads that parameterize the control signal. The heads are
/// evaluated only at clock ticks; the recurrence advances every step.
/// A deterministic variant (no sigma head) is used during pretraining.
#[derive(Clone, Copy, Debug)]
pub struct HighLevelController {
    pub enc: Linear,
    pub lstm: LstmCell,
    pub mu: Linear,
    pub sigma: Option<SigmaHead>,
    pub obs_dim: usize,
    pub cells: usize,
}

/// Detached LSTM state (h, c), carried across truncation windows.
#[derive(Clone, Debug, PartialEq)]
pub struct HlState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl HlState {
    pub fn zeros(cells: usize) -> Self {
        HlState {
            h: vec![0.0; cells],
            c: vec![0.0; cells],
        }
    }
}

impl HighLevelController {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        encoder_dim: usize,
        cells: usize,
        stochastic: bool,
        sigma_min: f64,
        sigma_max: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let enc = Linear::new(store, &format!("{prefix}/enc"), encoder_dim, obs_dim, rng)?;
        let lstm = LstmCell::new(store, &format!("{prefix}/lstm"), encoder_dim, cells, rng)?;
        let mu = Linear::new(store, &format!("{prefix}/mu"), CONTROL_DIM, cells, rng)?;
        let sigma = if stochastic {
            Some(SigmaHead::new(
                store,
                &format!("{prefix}/sigma"),
                CONTROL_DIM,
                cells,
                sigma_min,
                sigma_max,
                rng,
            )?)
        } else {
            None
        };
        Ok(HighLevelController {
            enc,
            lstm,
            mu,
            sigma,
            obs_dim,
            cells,
        })
    }

    /// Advances the recurrence by one observation. Head outputs are not
    /// computed here; latching happens only at clock ticks.
    pub fn step(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        obs: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let encoded = self.enc.forward_tanh(tape, bound, obs)?;
        self.lstm.step(tape, bound, encoded, h, c)
    }

    /// Mean of the control distribution, bounded to (-1, 1) so the frozen
    /// low level keeps operating in the range it was trained on.
    pub fn mu_head(&self, tape: &mut Tape, bound: &BoundParams, z: Var) -> Result<Var> {
        let pre = self.mu.forward(tape, bound, z)?;
        tape.tanh(pre)
    }

    pub fn sigma_head(&self, tape: &mut Tape, bound: &BoundParams, z: Var) -> Result<Option<Var>> {
        match &self.sigma {
            Some(head) => Ok(Some(head.forward(tape, bound, z)?)),
            None => Ok(None),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.sigma.is_some()
    }
}

/// c = mu + sigma * eps with eps drawn outside the tape, so the sampled
/// control stays differentiable with respect to both head outputs.
pub fn reparam_sample(tape: &mut Tape, mu: Var, sigma: Var, eps: &[f64]) -> Result<Var> {
    let eps_var = tape.constant(Tensor::vector(eps.to_vec())?);
    let scaled = tape.mul(sigma, eps_var)?;
    tape.add(mu, scaled)
}

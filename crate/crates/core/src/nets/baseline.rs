use crate::autodiff::{BoundParams, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::nets::layers::{Linear, SigmaHead};
use crate::nets::lowlevel::LowLevelController;
use crate::nets::lstm::LstmCell;
use crate::nets::CONTROL_DIM;
use rand::Rng;

/// Flat feedforward policy over the full observation: two tanh layers with
/// mean and sigma heads. Used as the from-scratch baseline and, with its
/// first layer re-initialized for a new observation size, as the
/// pretrained-then-transplanted baseline.
#[derive(Clone, Copy, Debug)]
pub struct FfPolicy {
    pub l1: Linear,
    pub l2: Linear,
    pub mu: Linear,
    pub sigma: SigmaHead,
    pub obs_dim: usize,
    pub hidden: usize,
    pub action_dim: usize,
}

impl FfPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        hidden: usize,
        action_dim: usize,
        sigma_min: f64,
        sigma_max: f64,
        sigma_init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let l1 = Linear::new(store, &format!("{prefix}/l1"), hidden, obs_dim, rng)?;
        let l2 = Linear::new(store, &format!("{prefix}/l2"), hidden, hidden, rng)?;
        let mu = Linear::new(store, &format!("{prefix}/mu"), action_dim, hidden, rng)?;
        let sigma = SigmaHead::with_initial_sigma(
            store,
            &format!("{prefix}/sigma"),
            action_dim,
            hidden,
            sigma_min,
            sigma_max,
            sigma_init,
            rng,
        )?;
        Ok(FfPolicy {
            l1,
            l2,
            mu,
            sigma,
            obs_dim,
            hidden,
            action_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, obs: Var) -> Result<(Var, Var)> {
        let h1 = self.l1.forward_tanh(tape, bound, obs)?;
        let h2 = self.l2.forward_tanh(tape, bound, h1)?;
        let mu = self.mu.forward(tape, bound, h2)?;
        let sigma = self.sigma.forward(tape, bound, h2)?;
        Ok((mu, sigma))
    }
}

/// Recurrent from-scratch baseline: the full observation runs through an
/// encoder and an LSTM, with action heads on the cell output every step.
#[derive(Clone, Copy, Debug)]
pub struct RecurrentPolicy {
    pub enc: Linear,
    pub lstm: LstmCell,
    pub mu: Linear,
    pub sigma: SigmaHead,
    pub obs_dim: usize,
    pub cells: usize,
    pub action_dim: usize,
}

impl RecurrentPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        encoder_dim: usize,
        cells: usize,
        action_dim: usize,
        sigma_min: f64,
        sigma_max: f64,
        sigma_init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let enc = Linear::new(store, &format!("{prefix}/enc"), encoder_dim, obs_dim, rng)?;
        let lstm = LstmCell::new(store, &format!("{prefix}/lstm"), encoder_dim, cells, rng)?;
        let mu = Linear::new(store, &format!("{prefix}/mu"), action_dim, cells, rng)?;
        let sigma = SigmaHead::with_initial_sigma(
            store,
            &format!("{prefix}/sigma"),
            action_dim,
            cells,
            sigma_min,
            sigma_max,
            sigma_init,
            rng,
        )?;
        Ok(RecurrentPolicy {
            enc,
            lstm,
            mu,
            sigma,
            obs_dim,
            cells,
            action_dim,
        })
    }

    /// Advances the recurrence one step and reads the action heads.
    /// Returns (mu, sigma, h', c').
    pub fn step(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        obs: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var, Var, Var)> {
        let x = self.enc.forward_tanh(tape, bound, obs)?;
        let (h, c) = self.lstm.step(tape, bound, x, h, c)?;
        let mu = self.mu.forward(tape, bound, h)?;
        let sigma = self.sigma.forward(tape, bound, h)?;
        Ok((mu, sigma, h, c))
    }
}

/// The transplant baseline: the body of a pretrained motor controller
/// with a fresh input layer for the transfer observation. The body keeps
/// its parameter handles (typically frozen); only the input layer and
/// the sigma head are new. The body's control port is pinned to zero.
#[derive(Clone, Copy, Debug)]
pub struct InitFfPolicy {
    pub input: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub mu: Linear,
    pub sigma: SigmaHead,
    pub obs_dim: usize,
    pub hidden: usize,
    pub action_dim: usize,
}

impl InitFfPolicy {
    pub fn graft(
        store: &mut ParamStore,
        prefix: &str,
        obs_dim: usize,
        ll: &LowLevelController,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let input = Linear::new(store, &format!("{prefix}/input"), ll.hidden, obs_dim, rng)?;
        Ok(InitFfPolicy {
            input,
            l2: ll.l2,
            l3: ll.l3,
            mu: ll.mu,
            sigma: ll.sigma,
            obs_dim,
            hidden: ll.hidden,
            action_dim: ll.action_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, obs: Var) -> Result<(Var, Var)> {
        let h1 = self.input.forward_tanh(tape, bound, obs)?;
        let h2 = self.l2.forward_tanh(tape, bound, h1)?;
        let pad = tape.constant(Tensor::vector(vec![0.0; CONTROL_DIM])?);
        let joined = tape.concat(&[h2, pad])?;
        let h3 = self.l3.forward_tanh(tape, bound, joined)?;
        let mu = self.mu.forward(tape, bound, h3)?;
        let sigma = self.sigma.forward(tape, bound, h3)?;
        Ok((mu, sigma))
    }
}

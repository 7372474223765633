use crate::autodiff::{BoundParams, ParamStore, Tape, Var};
use crate::error::Result;
use crate::nets::layers::{Linear, SigmaHead};
use crate::nets::CONTROL_DIM;
use rand::Rng;

/// Feedforward motor controller. Reads only the proprioceptive observation
/// and the held control signal; exteroceptive features never reach it, by
/// construction of this signature. Three tanh layers, with the control
/// signal joined to the second hidden layer's output.
#[derive(Clone, Copy, Debug)]
pub struct LowLevelController {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub mu: Linear,
    pub sigma: SigmaHead,
    pub proprio_dim: usize,
    pub hidden: usize,
    pub action_dim: usize,
}

impl LowLevelController {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        proprio_dim: usize,
        hidden: usize,
        action_dim: usize,
        sigma_min: f64,
        sigma_max: f64,
        sigma_init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let l1 = Linear::new(store, &format!("{prefix}/l1"), hidden, proprio_dim, rng)?;
        let l2 = Linear::new(store, &format!("{prefix}/l2"), hidden, hidden, rng)?;
        let l3 = Linear::new(store, &format!("{prefix}/l3"), hidden, hidden + CONTROL_DIM, rng)?;
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
        Ok(LowLevelController {
            l1,
            l2,
            l3,
            mu,
            sigma,
            proprio_dim,
            hidden,
            action_dim,
        })
    }

    /// (mu, sigma) of the action distribution for one step.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        proprio: Var,
        control: Var,
    ) -> Result<(Var, Var)> {
        let h1 = self.l1.forward_tanh(tape, bound, proprio)?;
        let h2 = self.l2.forward_tanh(tape, bound, h1)?;
        let joined = tape.concat(&[h2, control])?;
        let h3 = self.l3.forward_tanh(tape, bound, joined)?;
        let mu = self.mu.forward(tape, bound, h3)?;
        let sigma = self.sigma.forward(tape, bound, h3)?;
        Ok((mu, sigma))
    }
}

use crate::autodiff::{BoundParams, Tape, Tensor, Var};
use crate::env::{Observation, SwimEnv};
use crate::error::{Error, Result};
use crate::nets::{
    ClockState, ClockedHierarchy, FfPolicy, FfValue, HlState, InitFfPolicy, RecurrentPolicy,
    RecurrentValue, RecurrentValueState,
};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// The policy being trained: the clocked two-level controller, or one of
/// the end-to-end baselines (flat, recurrent, or grafted feedforward).
#[derive(Clone, Debug)]
pub enum PolicyNet {
    Clocked(ClockedHierarchy),
    Feedforward(FfPolicy),
    Recurrent(RecurrentPolicy),
    InitFf(InitFfPolicy),
}

impl PolicyNet {
    pub fn action_dim(&self) -> usize {
        match self {
            PolicyNet::Clocked(h) => h.ll.action_dim,
            PolicyNet::Feedforward(p) => p.action_dim,
            PolicyNet::Recurrent(p) => p.action_dim,
            PolicyNet::InitFf(p) => p.action_dim,
        }
    }

    /// Width of the full observation the policy consumes.
    pub fn obs_dim(&self) -> usize {
        match self {
            PolicyNet::Clocked(h) => match &h.hl {
                Some(hl) => hl.obs_dim,
                None => h.ll.proprio_dim,
            },
            PolicyNet::Feedforward(p) => p.obs_dim,
            PolicyNet::Recurrent(p) => p.obs_dim,
            PolicyNet::InitFf(p) => p.obs_dim,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ValueNet {
    Recurrent(RecurrentValue),
    Feedforward(FfValue),
}

impl ValueNet {
    pub fn obs_dim(&self) -> usize {
        match self {
            ValueNet::Recurrent(v) => v.obs_dim,
            ValueNet::Feedforward(v) => v.obs_dim,
        }
    }
}

/// Policy plus critic. The two see the same full observation; the value
/// function never sees the control signal, so bootstrapping cannot leak
/// modulation information.
#[derive(Clone, Debug)]
pub struct Actor {
    pub policy: PolicyNet,
    pub value: ValueNet,
}

impl Actor {
    pub fn new(policy: PolicyNet, value: ValueNet) -> Result<Self> {
        if policy.obs_dim() != value.obs_dim() {
            return Err(Error::BadOperand {
                op: "actor",
                message: format!(
                    "policy reads {} observation dims but the value net reads {}",
                    policy.obs_dim(),
                    value.obs_dim()
                ),
            });
        }
        Ok(Actor { policy, value })
    }

    pub fn begin_episode(&self, tape: &mut Tape) -> Result<ActorState> {
        Ok(ActorState {
            clock: match &self.policy {
                PolicyNet::Clocked(h) => Some(h.begin_episode(tape)?),
                _ => None,
            },
            rnn: match &self.policy {
                PolicyNet::Recurrent(p) => Some(HlState::zeros(p.cells)),
                _ => None,
            },
            value: match &self.value {
                ValueNet::Recurrent(v) => Some(RecurrentValueState::zeros(v.cells)),
                ValueNet::Feedforward(_) => None,
            },
        })
    }

    /// Re-enters carried recurrent state on a fresh tape. Gradients stop
    /// here: the previous window's history enters as constants.
    pub fn carry(&self, tape: &mut Tape, state: &mut ActorState) -> Result<()> {
        if let (PolicyNet::Clocked(h), Some(clock)) = (&self.policy, state.clock.as_mut()) {
            h.carry_window(tape, clock)?;
        }
        Ok(())
    }
}

/// Recurrent state carried across window boundaries within one episode.
#[derive(Debug)]
pub struct ActorState {
    pub clock: Option<ClockState>,
    pub rnn: Option<HlState>,
    pub value: Option<RecurrentValueState>,
}

/// One environment step as the learner saw it: raw numbers for replay
/// and bookkeeping, tape nodes for everything the losses differentiate.
#[derive(Debug)]
pub struct RolloutStep {
    pub obs: Observation,
    pub action: Vec<f64>,
    pub reward: f64,
    pub control: Vec<f64>,
    pub eps: Option<Vec<f64>>,
    pub mu: Var,
    pub sigma: Var,
    pub value: Var,
    pub value_est: f64,
    pub done: bool,
}

/// A truncation window of at most W steps from a single episode,
/// with the recurrent state it started from and the bootstrap value at
/// its far edge (zero when the episode ended inside the window).
#[derive(Debug)]
pub struct RolloutSegment {
    pub hl_start: Option<HlState>,
    pub value_start: Option<RecurrentValueState>,
    pub steps: Vec<RolloutStep>,
    pub bootstrap: f64,
    pub terminal: bool,
}

impl RolloutSegment {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    /// Per-step value estimates followed by the bootstrap slot, shaped
    /// for the return computations.
    pub fn values_with_bootstrap(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.value_est).collect();
        v.push(self.bootstrap);
        v
    }
}

/// Rolls up to `window` steps of one episode on the tape, sampling
/// actions when `explore` is a generator and acting at the distribution
/// mode otherwise. The caller is responsible for having entered carried
/// state on this tape (begin_episode or carry) beforehand.
pub fn roll_window(
    tape: &mut Tape,
    bound: &BoundParams,
    actor: &Actor,
    state: &mut ActorState,
    env: &mut SwimEnv,
    obs: &mut Observation,
    window: usize,
    mut explore: Option<&mut dyn RngCore>,
) -> Result<RolloutSegment> {
    if window == 0 {
        return Err(Error::BadOperand {
            op: "roll_window",
            message: "window must be at least one step".into(),
        });
    }
    let hl_start = state
        .clock
        .as_ref()
        .map(|c| c.recurrent().clone())
        .or_else(|| state.rnn.clone());
    let value_start = state.value.clone();

    let mut value_vars = match (&actor.value, &state.value) {
        (ValueNet::Recurrent(_), Some(vs)) => {
            let h = tape.constant(Tensor::vector(vs.h.clone())?);
            let c = tape.constant(Tensor::vector(vs.c.clone())?);
            Some((h, c))
        }
        (ValueNet::Feedforward(_), None) => None,
        _ => unreachable!("actor state built by begin_episode"),
    };
    let mut rnn_vars = match &state.rnn {
        Some(rs) => {
            let h = tape.constant(Tensor::vector(rs.h.clone())?);
            let c = tape.constant(Tensor::vector(rs.c.clone())?);
            Some((h, c))
        }
        None => None,
    };

    let mut steps = Vec::with_capacity(window);
    let mut terminal = false;
    for _ in 0..window {
        let full = obs.full();
        let (value, vh, vc) = eval_value(tape, bound, &actor.value, &full, value_vars)?;
        value_vars = vh.map(|h| (h, vc.unwrap()));
        let value_est = tape.value(value).item();

        let (mu, sigma, action, control, eps) = match &actor.policy {
            PolicyNet::Clocked(h) => {
                let clock = state.clock.as_mut().unwrap();
                let out = match explore.as_deref_mut() {
                    Some(rng) => h.act(tape, bound, clock, &obs.proprio, &full, rng)?,
                    None => h.act_greedy(tape, bound, clock, &obs.proprio, &full)?,
                };
                (out.mu, out.sigma, out.action, out.control_value, out.eps)
            }
            PolicyNet::Feedforward(p) => {
                let x = tape.constant(Tensor::vector(full.clone())?);
                let (mu, sigma) = p.forward(tape, bound, x)?;
                let action = sample_action(tape, mu, sigma, &mut explore);
                (mu, sigma, action, Vec::new(), None)
            }
            PolicyNet::InitFf(p) => {
                let x = tape.constant(Tensor::vector(full.clone())?);
                let (mu, sigma) = p.forward(tape, bound, x)?;
                let action = sample_action(tape, mu, sigma, &mut explore);
                (mu, sigma, action, Vec::new(), None)
            }
            PolicyNet::Recurrent(p) => {
                let x = tape.constant(Tensor::vector(full.clone())?);
                let (h, c) = rnn_vars.expect("recurrent policy state");
                let (mu, sigma, h, c) = p.step(tape, bound, x, h, c)?;
                rnn_vars = Some((h, c));
                let action = sample_action(tape, mu, sigma, &mut explore);
                (mu, sigma, action, Vec::new(), None)
            }
        };

        let out = env.step(&action)?;
        steps.push(RolloutStep {
            obs: std::mem::replace(obs, out.obs),
            action,
            reward: out.reward,
            control,
            eps,
            mu,
            sigma,
            value,
            value_est,
            done: out.done,
        });
        if out.done {
            terminal = true;
            break;
        }
    }

    if let (Some(vs), Some((h, c))) = (state.value.as_mut(), value_vars) {
        vs.h = tape.value(h).data().to_vec();
        vs.c = tape.value(c).data().to_vec();
    }
    if let (Some(rs), Some((h, c))) = (state.rnn.as_mut(), rnn_vars) {
        rs.h = tape.value(h).data().to_vec();
        rs.c = tape.value(c).data().to_vec();
    }

    let bootstrap = if terminal {
        0.0
    } else {
        let full = obs.full();
        let (value, _, _) = eval_value(tape, bound, &actor.value, &full, value_vars)?;
        tape.value(value).item()
    };

    Ok(RolloutSegment {
        hl_start,
        value_start,
        steps,
        bootstrap,
        terminal,
    })
}

fn sample_action(
    tape: &Tape,
    mu: Var,
    sigma: Var,
    explore: &mut Option<&mut dyn RngCore>,
) -> Vec<f64> {
    let m = tape.value(mu).data().to_vec();
    match explore.as_deref_mut() {
        Some(rng) => m
            .iter()
            .zip(tape.value(sigma).data())
            .map(|(m, s)| {
                let xi: f64 = StandardNormal.sample(rng);
                m + s * xi
            })
            .collect(),
        None => m,
    }
}

#[allow(clippy::type_complexity)]
fn eval_value(
    tape: &mut Tape,
    bound: &BoundParams,
    net: &ValueNet,
    full_obs: &[f64],
    state: Option<(Var, Var)>,
) -> Result<(Var, Option<Var>, Option<Var>)> {
    let x = tape.constant(Tensor::vector(full_obs.to_vec())?);
    match net {
        ValueNet::Recurrent(v) => {
            let (h, c) = state.expect("recurrent value state");
            let (value, h, c) = v.step(tape, bound, x, h, c)?;
            Ok((value, Some(h), Some(c)))
        }
        ValueNet::Feedforward(v) => Ok((v.forward(tape, bound, x)?, None, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::env::{Swimmer, SwimmerParams, TaskKind, TaskSpec};
    use crate::nets::{ClockedHierarchy, FfPolicy, HighLevelController, HlMode, LowLevelController};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_env(horizon: usize) -> SwimEnv {
        let swimmer = Swimmer::new(SwimmerParams {
            n_links: 3,
            ..SwimmerParams::default()
        })
        .unwrap();
        let task = TaskSpec {
            horizon,
            kind: TaskKind::PretrainTarget {
                radius_min: 2.0,
                radius_max: 5.0,
            },
        };
        SwimEnv::new(swimmer, task).unwrap()
    }

    fn clocked_actor(store: &mut ParamStore, k: usize) -> Actor {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let proprio = 10;
        let obs_dim = proprio + 2;
        let ll =
            LowLevelController::new(store, "ll", proprio, 12, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let hl = HighLevelController::new(store, "hl", obs_dim, 10, 6, true, 1e-3, 1.0, &mut rng)
            .unwrap();
        let hier = ClockedHierarchy::new(ll, Some(hl), k, HlMode::Stochastic, None).unwrap();
        let value = RecurrentValue::new(store, "value", obs_dim, 10, 6, &mut rng).unwrap();
        Actor::new(PolicyNet::Clocked(hier), ValueNet::Recurrent(value)).unwrap()
    }

    fn ff_actor(store: &mut ParamStore) -> Actor {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let obs_dim = 12;
        let policy =
            FfPolicy::new(store, "pi", obs_dim, 12, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let value = FfValue::new(store, "v", obs_dim, 12, &mut rng).unwrap();
        Actor::new(PolicyNet::Feedforward(policy), ValueNet::Feedforward(value)).unwrap()
    }

    fn roll_episode(
        actor: &Actor,
        env: &mut SwimEnv,
        store: &ParamStore,
        window: usize,
        seed: u64,
        explore: bool,
    ) -> Vec<RolloutSegment> {
        let mut tape = Tape::new();
        let mut state = actor.begin_episode(&mut tape).unwrap();
        let mut obs = env.reset(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let mut segments = Vec::new();
        loop {
            let bound = store.bind(&mut tape);
            let seg = roll_window(
                &mut tape,
                &bound,
                actor,
                &mut state,
                env,
                &mut obs,
                window,
                if explore { Some(&mut rng) } else { None },
            )
            .unwrap();
            let done = seg.terminal;
            segments.push(seg);
            if done {
                break;
            }
            tape.clear();
            actor.carry(&mut tape, &mut state).unwrap();
        }
        segments
    }

    #[test]
    fn windows_tile_the_episode_with_a_short_tail() {
        let mut store = ParamStore::new();
        let actor = clocked_actor(&mut store, 5);
        let mut env = small_env(20);
        let segments = roll_episode(&actor, &mut env, &store, 8, 9, true);

        let lens: Vec<usize> = segments.iter().map(|s| s.steps.len()).collect();
        assert_eq!(lens, vec![8, 8, 4]);
        assert!(!segments[0].terminal && !segments[1].terminal);
        assert!(segments[2].terminal);
        assert_eq!(segments[2].bootstrap, 0.0);
        assert!(segments[0].bootstrap.is_finite());
        assert!(segments[2].steps.last().unwrap().done);
        assert!(segments.iter().flat_map(|s| &s.steps).filter(|s| s.done).count() == 1);
    }

    #[test]
    fn noise_is_recorded_exactly_at_clock_ticks() {
        let k = 5;
        let mut store = ParamStore::new();
        let actor = clocked_actor(&mut store, k);
        let mut env = small_env(20);
        let segments = roll_episode(&actor, &mut env, &store, 8, 9, true);

        let steps: Vec<&RolloutStep> = segments.iter().flat_map(|s| &s.steps).collect();
        for (i, step) in steps.iter().enumerate() {
            let is_tick = i % k == 0;
            assert_eq!(step.eps.is_some(), is_tick, "step {i}");
            let held_since = i - i % k;
            assert_eq!(
                step.control, steps[held_since].control,
                "control must hold between ticks (step {i})"
            );
            if !is_tick {
                assert_eq!(step.eps, None);
            }
        }
        assert_ne!(steps[0].control, steps[k].control);
    }

    #[test]
    fn recurrent_state_snapshots_mark_window_starts() {
        let mut store = ParamStore::new();
        let actor = clocked_actor(&mut store, 5);
        let mut env = small_env(20);
        let segments = roll_episode(&actor, &mut env, &store, 8, 9, true);

        let first = segments[0].hl_start.as_ref().unwrap();
        assert!(first.h.iter().all(|&v| v == 0.0) && first.c.iter().all(|&v| v == 0.0));
        let second = segments[1].hl_start.as_ref().unwrap();
        assert!(second.h.iter().any(|&v| v != 0.0));

        let v_first = segments[0].value_start.as_ref().unwrap();
        assert!(v_first.h.iter().all(|&v| v == 0.0));
        let v_second = segments[1].value_start.as_ref().unwrap();
        assert!(v_second.h.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn bootstrap_is_the_value_of_the_next_observation() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store);
        let mut env = small_env(20);

        let mut tape = Tape::new();
        let mut state = actor.begin_episode(&mut tape).unwrap();
        let mut obs = env.reset(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bound = store.bind(&mut tape);
        let seg = roll_window(
            &mut tape, &bound, &actor, &mut state, &mut env, &mut obs, 10,
            Some(&mut rng),
        )
        .unwrap();
        assert!(!seg.terminal);

        let mut check_tape = Tape::new();
        let check_bound = store.bind(&mut check_tape);
        let x = check_tape.constant(Tensor::vector(obs.full()).unwrap());
        let v = match &actor.value {
            ValueNet::Feedforward(net) => net.forward(&mut check_tape, &check_bound, x).unwrap(),
            _ => unreachable!(),
        };
        assert_eq!(seg.bootstrap, check_tape.value(v).item());
    }

    #[test]
    fn observations_and_values_line_up_per_step() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store);
        let mut env = small_env(6);

        let mut tape = Tape::new();
        let mut state = actor.begin_episode(&mut tape).unwrap();
        let first_obs = env.reset(3);
        let mut obs = first_obs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bound = store.bind(&mut tape);
        let seg = roll_window(
            &mut tape, &bound, &actor, &mut state, &mut env, &mut obs, 10,
            Some(&mut rng),
        )
        .unwrap();

        assert_eq!(seg.steps.len(), 6);
        assert_eq!(seg.steps[0].obs, first_obs);
        for step in &seg.steps {
            assert_eq!(step.value_est, tape.value(step.value).item());
            assert_eq!(step.action.len(), 2);
            assert!(step.control.is_empty() && step.eps.is_none());
        }
        let values = seg.values_with_bootstrap();
        assert_eq!(values.len(), 7);
        assert_eq!(values[6], 0.0);
    }

    #[test]
    fn greedy_rollouts_repeat_and_exploring_ones_vary() {
        let mut store = ParamStore::new();
        let actor = clocked_actor(&mut store, 5);

        let mut env = small_env(15);
        let greedy_a: Vec<Vec<f64>> = roll_episode(&actor, &mut env, &store, 8, 2, false)
            .iter()
            .flat_map(|s| s.steps.iter().map(|st| st.action.clone()))
            .collect();
        let greedy_b: Vec<Vec<f64>> = roll_episode(&actor, &mut env, &store, 8, 2, false)
            .iter()
            .flat_map(|s| s.steps.iter().map(|st| st.action.clone()))
            .collect();
        assert_eq!(greedy_a, greedy_b);

        let explore: Vec<Vec<f64>> = roll_episode(&actor, &mut env, &store, 8, 2, true)
            .iter()
            .flat_map(|s| s.steps.iter().map(|st| st.action.clone()))
            .collect();
        assert_ne!(greedy_a, explore);
        for seg in roll_episode(&actor, &mut env, &store, 8, 2, false) {
            for step in seg.steps.iter().filter(|s| s.eps.is_some()) {
                let eps = step.eps.as_ref().unwrap();
                assert!(
                    eps.iter().all(|&e| e == 0.0),
                    "the mode corresponds to zero control noise"
                );
            }
        }
    }

    #[test]
    fn recurrent_baseline_carries_state_between_windows() {
        use crate::nets::RecurrentPolicy;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let obs_dim = 12;
        let policy = RecurrentPolicy::new(
            &mut store, "pi", obs_dim, 10, 6, 2, 1e-3, 1.0, 0.3, &mut rng,
        )
        .unwrap();
        let value = RecurrentValue::new(&mut store, "v", obs_dim, 10, 6, &mut rng).unwrap();
        let actor =
            Actor::new(PolicyNet::Recurrent(policy), ValueNet::Recurrent(value)).unwrap();

        let mut env = small_env(20);
        let segments = roll_episode(&actor, &mut env, &store, 8, 9, true);
        assert_eq!(segments.len(), 3);
        let first = segments[0].hl_start.as_ref().unwrap();
        assert!(first.h.iter().all(|&v| v == 0.0));
        let second = segments[1].hl_start.as_ref().unwrap();
        assert!(second.h.iter().any(|&v| v != 0.0));

        let replayed = roll_episode(&actor, &mut env, &store, 8, 9, true);
        for (a, b) in segments.iter().zip(&replayed) {
            for (x, y) in a.steps.iter().zip(&b.steps) {
                assert_eq!(x.action, y.action);
            }
        }
    }

    #[test]
    fn mismatched_observation_widths_are_rejected() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let policy = FfPolicy::new(&mut store, "pi", 12, 8, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let value = FfValue::new(&mut store, "v", 13, 8, &mut rng).unwrap();
        let err = Actor::new(PolicyNet::Feedforward(policy), ValueNet::Feedforward(value))
            .unwrap_err();
        assert!(matches!(err, Error::BadOperand { op: "actor", .. }));
    }

    #[test]
    fn empty_windows_are_rejected() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store);
        let mut env = small_env(6);
        let mut tape = Tape::new();
        let mut state = actor.begin_episode(&mut tape).unwrap();
        let mut obs = env.reset(3);
        let bound = store.bind(&mut tape);
        let err = roll_window(
            &mut tape, &bound, &actor, &mut state, &mut env, &mut obs, 0, None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadOperand { .. }));
    }
}

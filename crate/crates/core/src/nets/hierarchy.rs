use crate::autodiff::{BoundParams, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nets::highlevel::{reparam_sample, HighLevelController, HlState};
use crate::nets::lowlevel::LowLevelController;
use crate::nets::CONTROL_DIM;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Latest tick at or before step `t`: ⌊(t−1)/k⌋·k + 1. Steps are 1-based
/// and the first step of every episode is a tick.
pub fn tau(t: usize, k: usize) -> Result<usize> {
    if t == 0 {
        return Err(Error::Clock {
            message: "step index is 1-based".into(),
        });
    }
    if k == 0 {
        return Err(Error::Clock {
            message: "control interval must be at least 1".into(),
        });
    }
    Ok((t - 1) / k * k + 1)
}

/// How the control signal is produced at each tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HlMode {
    /// c = tanh head of the recurrent controller. Pretraining.
    Deterministic,
    /// c = mu + sigma * eps, reparameterized. Transfer training.
    Stochastic,
    /// c = sigma_in * eps with no network behind it. Primitive analysis.
    Noise { sigma_in: f64 },
}

impl HlMode {
    fn draws_noise(self) -> bool {
        !matches!(self, HlMode::Deterministic)
    }
}

/// Per-rollout mutable state: the step counter, the recurrent state of the
/// high level, and the control signal held since the last tick. Tape
/// handles are only valid for the tape the state was last bound to; values
/// are cached so the state can be re-entered as constants on a fresh tape.
#[derive(Debug)]
pub struct ClockState {
    t: usize,
    hl_h: Option<Var>,
    hl_c: Option<Var>,
    hl_values: HlState,
    held_var: Option<Var>,
    held_value: Vec<f64>,
    held_eps: Vec<f64>,
}

impl ClockState {
    /// 1-based index of the next step to act.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Detached copy of the high-level recurrent state.
    pub fn recurrent(&self) -> &HlState {
        &self.hl_values
    }

    /// Control signal currently held (empty before the first step).
    pub fn held_control(&self) -> &[f64] {
        &self.held_value
    }

    pub fn held_eps(&self) -> &[f64] {
        &self.held_eps
    }
}

/// One action step of the combined controller.
#[derive(Debug)]
pub struct StepOutput {
    /// Torque command handed to the environment.
    pub action: Vec<f64>,
    /// Action distribution heads on the tape, for the log-likelihood.
    pub mu: Var,
    pub sigma: Var,
    /// Control signal in effect this step. Between ticks this is the same
    /// tape node as at the tick, so likelihood gradients from the whole
    /// interval accumulate into one draw.
    pub control: Var,
    pub control_value: Vec<f64>,
    /// Noise behind the held control; present exactly at ticks of the
    /// noise-driven modes.
    pub eps: Option<Vec<f64>>,
    pub updated: bool,
}

enum Drive<'a> {
    /// Sample the control noise and the action.
    Explore(&'a mut dyn RngCore),
    /// Zero control noise, action = mu. Evaluation episodes.
    Exploit,
    /// Re-enact a recorded step so the same graph can be rebuilt.
    Replay {
        eps: Option<&'a [f64]>,
        action: &'a [f64],
    },
}

/// Frozen-format pairing of one low-level controller with at most one
/// high-level controller and a control clock. The structs only carry
/// parameter ids, so copies driving several rollouts share parameters.
#[derive(Clone, Debug)]
pub struct ClockedHierarchy {
    pub ll: LowLevelController,
    pub hl: Option<HighLevelController>,
    pub k: usize,
    pub mode: HlMode,
    /// When set, replaces the action sigma head output. The primitive
    /// analysis pins this to the start-of-pretraining value.
    pub action_sigma: Option<f64>,
}

impl ClockedHierarchy {
    pub fn new(
        ll: LowLevelController,
        hl: Option<HighLevelController>,
        k: usize,
        mode: HlMode,
        action_sigma: Option<f64>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Clock {
                message: "control interval must be at least 1".into(),
            });
        }
        match (mode, &hl) {
            (HlMode::Noise { sigma_in }, None) => {
                if !(sigma_in >= 0.0) || !sigma_in.is_finite() {
                    return Err(Error::Clock {
                        message: format!("noise amplitude must be finite and >= 0, got {sigma_in}"),
                    });
                }
            }
            (HlMode::Noise { .. }, Some(_)) => {
                return Err(Error::Clock {
                    message: "noise mode drives the low level directly; drop the high level".into(),
                });
            }
            (_, None) => {
                return Err(Error::Clock {
                    message: "deterministic and stochastic modes need a high-level network".into(),
                });
            }
            (HlMode::Stochastic, Some(hl)) if !hl.is_stochastic() => {
                return Err(Error::Clock {
                    message: "stochastic mode needs a high level with a sigma head".into(),
                });
            }
            _ => {}
        }
        if let Some(s) = action_sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::SigmaNotPositive { value: s });
            }
        }
        Ok(ClockedHierarchy {
            ll,
            hl,
            k,
            mode,
            action_sigma,
        })
    }

    /// Fresh per-episode state bound to `tape`.
    pub fn begin_episode(&self, tape: &mut Tape) -> Result<ClockState> {
        let (hl_h, hl_c, hl_values) = match &self.hl {
            Some(hl) => {
                let zeros = HlState::zeros(hl.cells);
                let h = tape.constant(Tensor::vector(zeros.h.clone())?);
                let c = tape.constant(Tensor::vector(zeros.c.clone())?);
                (Some(h), Some(c), zeros)
            }
            None => (None, None, HlState { h: vec![], c: vec![] }),
        };
        Ok(ClockState {
            t: 1,
            hl_h,
            hl_c,
            hl_values,
            held_var: None,
            held_value: vec![],
            held_eps: vec![],
        })
    }

    /// Re-enters carried state as constants on a fresh tape. Call after the
    /// previous window's tape is dropped: the recurrent state and the held
    /// control keep their values but stop carrying gradients, which is the
    /// truncation boundary of backpropagation through time.
    pub fn carry_window(&self, tape: &mut Tape, state: &mut ClockState) -> Result<()> {
        if self.hl.is_some() {
            state.hl_h = Some(tape.constant(Tensor::vector(state.hl_values.h.clone())?));
            state.hl_c = Some(tape.constant(Tensor::vector(state.hl_values.c.clone())?));
        }
        state.held_var = if state.held_value.is_empty() {
            None
        } else {
            Some(tape.constant(Tensor::vector(state.held_value.clone())?))
        };
        Ok(())
    }

    /// Training step: samples the control noise at ticks and the action
    /// every step.
    pub fn act(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        state: &mut ClockState,
        o_p: &[f64],
        o_f: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<StepOutput> {
        self.drive(tape, bound, state, o_p, o_f, Drive::Explore(rng))
    }

    /// Evaluation step: control at ticks is the head mean, action is mu.
    pub fn act_greedy(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        state: &mut ClockState,
        o_p: &[f64],
        o_f: &[f64],
    ) -> Result<StepOutput> {
        self.drive(tape, bound, state, o_p, o_f, Drive::Exploit)
    }

    /// Rebuilds a recorded step: `eps` must be given exactly at ticks of
    /// the noise-driven modes and the action is taken as given. Lets a
    /// rollout be re-enacted as a deterministic function of the parameters.
    pub fn replay(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        state: &mut ClockState,
        o_p: &[f64],
        o_f: &[f64],
        eps: Option<&[f64]>,
        action: &[f64],
    ) -> Result<StepOutput> {
        self.drive(tape, bound, state, o_p, o_f, Drive::Replay { eps, action })
    }

    fn drive(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        state: &mut ClockState,
        o_p: &[f64],
        o_f: &[f64],
        drive: Drive,
    ) -> Result<StepOutput> {
        if o_p.len() != self.ll.proprio_dim {
            return Err(Error::BadOperand {
                op: "hierarchy",
                message: format!(
                    "proprioceptive observation has {} components, the low level expects {}",
                    o_p.len(),
                    self.ll.proprio_dim
                ),
            });
        }
        let mut drive = drive;
        let updated = (state.t - 1) % self.k == 0;

        if let Some(hl) = &self.hl {
            if o_f.len() != hl.obs_dim {
                return Err(Error::BadOperand {
                    op: "hierarchy",
                    message: format!(
                        "full observation has {} components, the high level expects {}",
                        o_f.len(),
                        hl.obs_dim
                    ),
                });
            }
            let obs = tape.constant(Tensor::vector(o_f.to_vec())?);
            let (h, c) = hl.step(tape, bound, obs, state.hl_h.unwrap(), state.hl_c.unwrap())?;
            state.hl_h = Some(h);
            state.hl_c = Some(c);
            state.hl_values = HlState {
                h: tape.value(h).data().to_vec(),
                c: tape.value(c).data().to_vec(),
            };
        }

        let eps_out = if updated {
            let eps = self.draw_eps(&mut drive)?;
            let control = match (self.mode, &self.hl) {
                (HlMode::Deterministic, Some(hl)) => {
                    hl.mu_head(tape, bound, state.hl_h.unwrap())?
                }
                (HlMode::Stochastic, Some(hl)) => {
                    let mu = hl.mu_head(tape, bound, state.hl_h.unwrap())?;
                    let sigma = hl
                        .sigma_head(tape, bound, state.hl_h.unwrap())?
                        .expect("checked at construction");
                    reparam_sample(tape, mu, sigma, eps.as_deref().expect("noise mode draws"))?
                }
                (HlMode::Noise { sigma_in }, _) => {
                    let eps = eps.as_deref().expect("noise mode draws");
                    let held: Vec<f64> = eps.iter().map(|e| sigma_in * e).collect();
                    tape.constant(Tensor::vector(held)?)
                }
                _ => unreachable!("checked at construction"),
            };
            state.held_var = Some(control);
            state.held_value = tape.value(control).data().to_vec();
            state.held_eps = eps.clone().unwrap_or_default();
            eps
        } else {
            if let Drive::Replay { eps: Some(_), .. } = drive {
                return Err(Error::Clock {
                    message: format!("step {} is not a tick but replay carries noise", state.t),
                });
            }
            None
        };

        let control = state.held_var.expect("first step is always a tick");
        let proprio = tape.constant(Tensor::vector(o_p.to_vec())?);
        let (mu, mut sigma) = self.ll.forward(tape, bound, proprio, control)?;
        if let Some(s) = self.action_sigma {
            sigma = tape.constant(Tensor::vector(vec![s; self.ll.action_dim])?);
        }

        let action = match &mut drive {
            Drive::Explore(rng) => {
                let mu_v = tape.value(mu).data();
                let sigma_v = tape.value(sigma).data();
                mu_v.iter()
                    .zip(sigma_v)
                    .map(|(m, s)| {
                        let xi: f64 = StandardNormal.sample(rng);
                        m + s * xi
                    })
                    .collect()
            }
            Drive::Exploit => tape.value(mu).data().to_vec(),
            Drive::Replay { action, .. } => {
                if action.len() != self.ll.action_dim {
                    return Err(Error::BadAction {
                        got: action.len(),
                        expected: self.ll.action_dim,
                        n_links: self.ll.action_dim + 1,
                    });
                }
                action.to_vec()
            }
        };

        state.t += 1;
        Ok(StepOutput {
            action,
            mu,
            sigma,
            control,
            control_value: state.held_value.clone(),
            eps: eps_out,
            updated,
        })
    }

    fn draw_eps(&self, drive: &mut Drive) -> Result<Option<Vec<f64>>> {
        if !self.mode.draws_noise() {
            if let Drive::Replay { eps: Some(_), .. } = drive {
                return Err(Error::Clock {
                    message: "deterministic mode takes no control noise".into(),
                });
            }
            return Ok(None);
        }
        match drive {
            Drive::Explore(rng) => Ok(Some(
                (0..CONTROL_DIM).map(|_| StandardNormal.sample(rng)).collect(),
            )),
            Drive::Exploit => Ok(Some(vec![0.0; CONTROL_DIM])),
            Drive::Replay { eps: Some(e), .. } => {
                if e.len() != CONTROL_DIM {
                    return Err(Error::Clock {
                        message: format!(
                            "control noise has {} components, expected {CONTROL_DIM}",
                            e.len()
                        ),
                    });
                }
                Ok(Some(e.to_vec()))
            }
            Drive::Replay { eps: None, .. } => Err(Error::Clock {
                message: "tick reached but replay carries no control noise".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check, ParamStore};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tau_pins_each_step_to_the_latest_tick() {
        for t in 1..=10 {
            assert_eq!(tau(t, 10).unwrap(), 1);
        }
        assert_eq!(tau(11, 10).unwrap(), 11);
        assert_eq!(tau(25, 10).unwrap(), 21);
        for t in [1, 7, 100] {
            assert_eq!(tau(t, 1).unwrap(), t);
        }
        assert!(tau(0, 10).is_err());
        assert!(tau(3, 0).is_err());
    }

    proptest! {
        #[test]
        fn tau_is_the_latest_tick_not_after_t(t in 1usize..10_000, k in 1usize..50) {
            let tick = tau(t, k).unwrap();
            prop_assert!(tick >= 1 && tick <= t);
            prop_assert_eq!((tick - 1) % k, 0);
            prop_assert!(t - tick < k);
            prop_assert_eq!(tau(tick, k).unwrap(), tick);
        }
    }

    fn small_ll(store: &mut ParamStore, rng: &mut ChaCha8Rng) -> LowLevelController {
        LowLevelController::new(store, "ll", 4, 6, 2, 1e-3, 1.0, 0.3, rng).unwrap()
    }

    fn small_hl(store: &mut ParamStore, stochastic: bool, rng: &mut ChaCha8Rng) -> HighLevelController {
        HighLevelController::new(store, "hl", 6, 5, 4, stochastic, 1e-3, 1.0, rng).unwrap()
    }

    #[test]
    fn construction_rejects_mismatched_mode_and_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let det = small_hl(&mut store, false, &mut rng);
        assert!(ClockedHierarchy::new(ll, None, 10, HlMode::Stochastic, None).is_err());
        assert!(ClockedHierarchy::new(ll, Some(det), 10, HlMode::Stochastic, None).is_err());
        assert!(ClockedHierarchy::new(ll, Some(det), 10, HlMode::Noise { sigma_in: 0.4 }, None).is_err());
        assert!(ClockedHierarchy::new(ll, Some(det), 0, HlMode::Deterministic, None).is_err());
        assert!(ClockedHierarchy::new(ll, Some(det), 10, HlMode::Deterministic, Some(0.0)).is_err());
        assert!(ClockedHierarchy::new(ll, Some(det), 10, HlMode::Deterministic, None).is_ok());
    }

    #[test]
    fn noise_mode_holds_the_draw_bitwise_for_k_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let policy =
            ClockedHierarchy::new(ll, None, 10, HlMode::Noise { sigma_in: 0.4 }, Some(0.3)).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        let o_p = [0.1, -0.2, 0.3, 0.0];
        let mut controls = Vec::new();
        let mut vars = Vec::new();
        for t in 1..=35 {
            let out = policy
                .act(&mut tape, &bound, &mut state, &o_p, &[], &mut rng)
                .unwrap();
            assert_eq!(out.updated, (t - 1) % 10 == 0);
            assert_eq!(out.eps.is_some(), out.updated);
            controls.push(out.control_value.clone());
            vars.push(out.control);
        }
        for t in 1..=35usize {
            let tick = tau(t, 10).unwrap();
            assert_eq!(controls[t - 1], controls[tick - 1]);
            assert_eq!(vars[t - 1], vars[tick - 1]);
        }
        assert_ne!(controls[0], controls[10]);
    }

    #[test]
    fn zero_noise_amplitude_pins_the_control_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let policy =
            ClockedHierarchy::new(ll, None, 10, HlMode::Noise { sigma_in: 0.0 }, Some(0.3)).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        for _ in 1..=23 {
            let out = policy
                .act(&mut tape, &bound, &mut state, &[0.0; 4], &[], &mut rng)
                .unwrap();
            assert!(out.control_value.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pinned_action_sigma_overrides_the_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let policy =
            ClockedHierarchy::new(ll, None, 5, HlMode::Noise { sigma_in: 0.2 }, Some(0.3)).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        let out = policy
            .act(&mut tape, &bound, &mut state, &[0.2; 4], &[], &mut rng)
            .unwrap();
        assert_eq!(tape.value(out.sigma).data(), &[0.3, 0.3]);
    }

    #[test]
    fn greedy_steps_use_the_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, true, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 3, HlMode::Stochastic, None).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        for t in 1..=7 {
            let o_f: Vec<f64> = (0..6).map(|i| 0.1 * (t * (i + 1)) as f64).collect();
            let out = policy
                .act_greedy(&mut tape, &bound, &mut state, &o_f[..4], &o_f)
                .unwrap();
            assert_eq!(out.action, tape.value(out.mu).data());
            if let Some(eps) = out.eps {
                assert!(eps.iter().all(|e| *e == 0.0));
            }
        }
    }

    #[test]
    fn exteroceptive_changes_cannot_reach_the_action_between_ticks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, false, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 5, HlMode::Deterministic, None).unwrap();

        let run = |task_feature: f64| {
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape);
            let mut state = policy.begin_episode(&mut tape).unwrap();
            let mut actions = Vec::new();
            for t in 1..=6 {
                let o_p = [0.1 * t as f64, -0.05, 0.2, 0.0];
                let mut o_f = vec![0.0; 6];
                o_f[..4].copy_from_slice(&o_p);
                // The last two components stand in for task features the
                // low level must never see. They are perturbed only between
                // ticks; at ticks (t = 1, 6) both runs observe the same
                // thing, so any influence before t = 6 would have to leak
                // around the control channel.
                if t != 1 && t != 6 {
                    o_f[4] = task_feature;
                    o_f[5] = -task_feature;
                }
                let out = policy
                    .act_greedy(&mut tape, &bound, &mut state, &o_p, &o_f)
                    .unwrap();
                actions.push(out.action);
            }
            actions
        };

        let a = run(0.0);
        let b = run(1.0);
        // Identical held control, identical proprioception: identical
        // actions until the diverged recurrent state is latched at t = 6.
        for t in 0..5 {
            assert_eq!(a[t], b[t], "step {}", t + 1);
        }
        assert_ne!(a[5], b[5]);
    }

    #[test]
    fn replay_rebuilds_the_recorded_rollout_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, true, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 3, HlMode::Stochastic, None).unwrap();
        let obs: Vec<Vec<f64>> = (0..8)
            .map(|t| (0..6).map(|i| ((t * 7 + i) as f64 * 0.37).sin()).collect())
            .collect();

        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        let mut recorded = Vec::new();
        for o_f in &obs {
            let out = policy
                .act(&mut tape, &bound, &mut state, &o_f[..4], o_f, &mut rng)
                .unwrap();
            recorded.push((
                out.action.clone(),
                out.eps.clone(),
                out.control_value.clone(),
                tape.value(out.mu).data().to_vec(),
                tape.value(out.sigma).data().to_vec(),
            ));
        }

        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        for (o_f, (action, eps, control, mu, sigma)) in obs.iter().zip(&recorded) {
            let out = policy
                .replay(
                    &mut tape,
                    &bound,
                    &mut state,
                    &o_f[..4],
                    o_f,
                    eps.as_deref(),
                    action,
                )
                .unwrap();
            assert_eq!(&out.control_value, control);
            assert_eq!(tape.value(out.mu).data(), mu);
            assert_eq!(tape.value(out.sigma).data(), sigma);
        }
    }

    #[test]
    fn replay_rejects_misaligned_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, true, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 3, HlMode::Stochastic, None).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        let o_f = [0.1; 6];
        let eps = vec![0.0; CONTROL_DIM];
        policy
            .replay(&mut tape, &bound, &mut state, &o_f[..4], &o_f, Some(&eps), &[0.0, 0.0])
            .unwrap();
        // Step 2 is not a tick: carrying noise must fail, omitting it must pass.
        let err = policy
            .replay(&mut tape, &bound, &mut state, &o_f[..4], &o_f, Some(&eps), &[0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, Error::Clock { .. }));
    }

    #[test]
    fn window_carry_keeps_values_but_stops_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, true, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 4, HlMode::Stochastic, None).unwrap();
        let o_f = [0.3, -0.1, 0.2, 0.05, 0.7, -0.4];

        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        for _ in 1..=5 {
            policy
                .act(&mut tape, &bound, &mut state, &o_f[..4], &o_f, &mut rng)
                .unwrap();
        }
        let held_before = state.held_control().to_vec();
        let recurrent_before = state.recurrent().clone();

        // New window: steps 6..=8 sit inside the tick interval that started
        // at step 5, so the held control must survive the tape swap.
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        policy.carry_window(&mut tape, &mut state).unwrap();
        assert_eq!(state.held_control(), held_before.as_slice());
        assert_eq!(state.recurrent(), &recurrent_before);

        let mut logps = Vec::new();
        for _ in 6..=8 {
            let out = policy
                .act(&mut tape, &bound, &mut state, &o_f[..4], &o_f, &mut rng)
                .unwrap();
            assert_eq!(out.control_value, held_before);
            let action = tape.constant(Tensor::vector(out.action.clone()).unwrap());
            let logp = tape.gaussian_logp(action, out.mu, out.sigma).unwrap();
            logps.push(logp);
        }
        let joined = tape.concat(&logps).unwrap();
        let loss = tape.sum(joined).unwrap();
        let grads = tape.backward(loss).unwrap();
        let grad_set = bound.collect(&grads);

        let hl_norm: f64 = store
            .ids_with_prefix("hl/")
            .filter_map(|id| grad_set.get(id))
            .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
            .sum();
        let ll_norm: f64 = store
            .ids_with_prefix("ll/")
            .filter_map(|id| grad_set.get(id))
            .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
            .sum();
        // No tick inside this window: the high level is cut off by the
        // carried constants while the low level still learns.
        assert_eq!(hl_norm, 0.0);
        assert!(ll_norm > 0.0);
    }

    #[test]
    fn unrolled_hierarchy_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let ll = small_ll(&mut store, &mut rng);
        let hl = small_hl(&mut store, true, &mut rng);
        let policy = ClockedHierarchy::new(ll, Some(hl), 4, HlMode::Stochastic, None).unwrap();
        let steps = 12;
        let obs: Vec<Vec<f64>> = (0..steps)
            .map(|t| (0..6).map(|i| ((t * 5 + i) as f64 * 0.61).cos() * 0.5).collect())
            .collect();
        let weights: Vec<f64> = (0..steps).map(|t| ((t as f64) * 0.3).sin() + 0.2).collect();

        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let mut state = policy.begin_episode(&mut tape).unwrap();
        let mut record = Vec::new();
        for o_f in &obs {
            let out = policy
                .act(&mut tape, &bound, &mut state, &o_f[..4], o_f, &mut rng)
                .unwrap();
            record.push((out.action.clone(), out.eps.clone()));
        }

        let run = |store: &ParamStore| -> (Tape, crate::autodiff::BoundParams, Var) {
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape);
            let mut state = policy.begin_episode(&mut tape).unwrap();
            let mut terms = Vec::new();
            for (o_f, (action, eps)) in obs.iter().zip(&record) {
                let out = policy
                    .replay(&mut tape, &bound, &mut state, &o_f[..4], o_f, eps.as_deref(), action)
                    .unwrap();
                let a = tape.constant(Tensor::vector(action.clone()).unwrap());
                let logp = tape.gaussian_logp(a, out.mu, out.sigma).unwrap();
                terms.push(logp);
            }
            let joined = tape.concat(&terms).unwrap();
            let w = tape.constant(Tensor::vector(weights.clone()).unwrap());
            let weighted = tape.mul(joined, w).unwrap();
            let loss = tape.sum(weighted).unwrap();
            (tape, bound, loss)
        };

        let (tape, bound, loss) = run(&store);
        let grads = tape.backward(loss).unwrap();
        let analytic = bound.collect(&grads);
        let numeric = check::central_difference(&store, 1e-5, |s| {
            let (tape, _, loss) = run(s);
            Ok(tape.value(loss).item())
        })
        .unwrap();
        let err = check::gradient_error(&store, &analytic, &numeric, 1e-4, 1e-6);
        assert!(err < 1e-4, "relative error {err}");
    }
}

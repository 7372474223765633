use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{GradSet, ParamStore, Tape, Tensor, Var};
use crate::env::SwimEnv;
use crate::error::{Error, Result};
use crate::learn::loss::{gaussian_entropy, policy_loss, value_loss};
use crate::learn::optimizer::RmsProp;
use crate::learn::returns::lambda_returns;
use crate::learn::rollout::{roll_window, Actor};

const STREAM_TRAIN_ENV: u64 = 1;
const STREAM_TRAIN_POLICY: u64 = 2;
const STREAM_EVAL_ENV: u64 = 3;

/// Hyperparameters for the actor-critic learner.
#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub gamma: f64,
    /// Mixing parameter for the policy's returns.
    pub lambda: f64,
    /// Mixing parameter for the value-regression targets, tuned separately.
    pub lambda_value: f64,
    pub learning_rate: f64,
    /// Scale on the value loss relative to the policy loss.
    pub value_scale: f64,
    pub entropy_weight: f64,
    /// Backpropagation-through-time truncation window, in steps.
    pub window: usize,
    pub workers: usize,
    pub episodes: usize,
    /// Evaluate (at the distribution mode) before every eval_every-th
    /// episode, and once more after the last.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub grad_clip: f64,
    /// Initial action standard deviation for policies trained from
    /// scratch. Consumed where networks are built, not by the loop.
    pub sigma_init: Option<f64>,
    /// When set, workers refresh their parameter snapshot once per
    /// episode instead of after every shared update, trading gradient
    /// staleness for less lock traffic.
    pub async_updates: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.99,
            lambda: 0.9,
            lambda_value: 0.95,
            learning_rate: 1e-3,
            value_scale: 0.5,
            entropy_weight: 1e-3,
            window: 20,
            workers: 1,
            episodes: 1000,
            eval_every: 100,
            eval_episodes: 5,
            grad_clip: 40.0,
            sigma_init: None,
            async_updates: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool, &str); 12] = [
            ("gamma", self.gamma >= 0.0 && self.gamma < 1.0, "must lie in [0, 1)"),
            ("lambda", (0.0..=1.0).contains(&self.lambda), "must lie in [0, 1]"),
            (
                "lambda_value",
                (0.0..=1.0).contains(&self.lambda_value),
                "must lie in [0, 1]",
            ),
            (
                "learning_rate",
                self.learning_rate > 0.0 && self.learning_rate.is_finite(),
                "must be positive and finite",
            ),
            (
                "value_scale",
                self.value_scale > 0.0 && self.value_scale.is_finite(),
                "must be positive and finite",
            ),
            (
                "entropy_weight",
                self.entropy_weight >= 0.0 && self.entropy_weight.is_finite(),
                "must be nonnegative and finite",
            ),
            ("window", self.window >= 1, "must be at least 1"),
            ("workers", self.workers >= 1, "must be at least 1"),
            ("eval_every", self.eval_every >= 1, "must be at least 1"),
            ("eval_episodes", self.eval_episodes >= 1, "must be at least 1"),
            (
                "grad_clip",
                self.grad_clip > 0.0 && self.grad_clip.is_finite(),
                "must be positive and finite",
            ),
            (
                "sigma_init",
                self.sigma_init.map_or(true, |s| s > 0.0 && s.is_finite()),
                "must be positive and finite",
            ),
        ];
        for (field, ok, message) in checks {
            if !ok {
                return Err(Error::ConfigValue {
                    field: field.into(),
                    message: message.into(),
                });
            }
        }
        Ok(())
    }
}

/// One evaluation entry on the learning curve. `episode` counts training
/// episodes finished before the evaluation ran.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_return: f64,
    pub mean_episode_length: f64,
    pub sigma_mean: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub curve: Vec<CurvePoint>,
    pub total_updates: u64,
    pub per_worker_updates: Vec<u64>,
    pub episodes_run: usize,
}

/// Builds a fresh environment for the given lane. Lanes let several
/// actors that share parameters (for instance one low-level controller
/// under several track tasks) take turns: episode i runs lane i mod L.
pub type EnvFactory<'a> = dyn Fn(usize) -> Result<SwimEnv> + Sync + 'a;

/// Receives the curve so far (sorted by episode) after every evaluation,
/// so long runs can persist progress as they go.
pub type EvalSink<'a> = dyn Fn(&[CurvePoint]) -> Result<()> + Sync + 'a;

/// Runs the training loop: episodes are dealt round-robin over lanes,
/// rolled in `window`-step segments, and scored with λ-returns; policy
/// and value gradients from each segment are applied as one RMSProp
/// step. With one worker the loop runs inline and is bit-reproducible
/// for a fixed seed. With several, workers roll out on private
/// environments and apply updates to the shared parameters behind a
/// lock, each computing gradients on its own snapshot.
pub fn train(
    store: &mut ParamStore,
    actors: &[Actor],
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_logged(store, actors, make_env, cfg, seed, None)
}

/// [`train`] with a progress sink.
pub fn train_logged(
    store: &mut ParamStore,
    actors: &[Actor],
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    sink: Option<&EvalSink>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if actors.is_empty() {
        return Err(Error::BadOperand {
            op: "train",
            message: "at least one actor lane is required".into(),
        });
    }
    let mut outcome = if cfg.workers == 1 {
        train_single(store, actors, make_env, cfg, seed, sink)?
    } else {
        train_threaded(store, actors, make_env, cfg, seed, sink)?
    };

    let mut envs = LaneEnvs::new(actors.len());
    let point = evaluate(store, actors, &mut envs, make_env, cfg, seed, cfg.episodes)?;
    outcome.curve.push(point);
    emit(&outcome.curve, sink)?;
    Ok(outcome)
}

fn emit(curve: &[CurvePoint], sink: Option<&EvalSink>) -> Result<()> {
    if let Some(sink) = sink {
        let mut sorted = curve.to_vec();
        sorted.sort_by_key(|p| p.episode);
        sink(&sorted)?;
    }
    Ok(())
}

struct LaneEnvs {
    envs: Vec<Option<SwimEnv>>,
}

impl LaneEnvs {
    fn new(lanes: usize) -> Self {
        LaneEnvs {
            envs: (0..lanes).map(|_| None).collect(),
        }
    }

    fn get(&mut self, lane: usize, make_env: &EnvFactory) -> Result<&mut SwimEnv> {
        let slot = &mut self.envs[lane];
        if slot.is_none() {
            *slot = Some(make_env(lane)?);
        }
        Ok(slot.as_mut().unwrap())
    }
}

fn train_single(
    store: &mut ParamStore,
    actors: &[Actor],
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    sink: Option<&EvalSink>,
) -> Result<TrainOutcome> {
    let mut opt = RmsProp::new(cfg.learning_rate, cfg.grad_clip);
    let mut envs = LaneEnvs::new(actors.len());
    let mut curve = Vec::new();
    let mut updates: u64 = 0;

    for episode in 0..cfg.episodes {
        if episode % cfg.eval_every == 0 {
            curve.push(evaluate(store, actors, &mut envs, make_env, cfg, seed, episode)?);
            emit(&curve, sink)?;
        }
        let lane = episode % actors.len();
        let env = envs.get(lane, make_env)?;
        run_training_episode(
            store,
            &actors[lane],
            env,
            cfg,
            seed,
            episode,
            &mut |local, grads| {
                opt.step(local, &grads)?;
                updates += 1;
                Ok(())
            },
        )?;
    }

    Ok(TrainOutcome {
        curve,
        total_updates: updates,
        per_worker_updates: vec![updates],
        episodes_run: cfg.episodes,
    })
}

struct Shared {
    store: ParamStore,
    opt: RmsProp,
    next_episode: usize,
    episodes_run: usize,
    total_updates: u64,
    per_worker_updates: Vec<u64>,
    curve: Vec<CurvePoint>,
    error: Option<Error>,
}

fn train_threaded(
    store: &mut ParamStore,
    actors: &[Actor],
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    sink: Option<&EvalSink>,
) -> Result<TrainOutcome> {
    let shared = Mutex::new(Shared {
        store: std::mem::take(store),
        opt: RmsProp::new(cfg.learning_rate, cfg.grad_clip),
        next_episode: 0,
        episodes_run: 0,
        total_updates: 0,
        per_worker_updates: vec![0; cfg.workers],
        curve: Vec::new(),
        error: None,
    });

    let mut panics = Vec::new();
    let shared_ref = &shared;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|w| {
                scope.spawn(move || worker_loop(w, shared_ref, actors, make_env, cfg, seed, sink))
            })
            .collect();
        for (w, handle) in handles.into_iter().enumerate() {
            if let Err(payload) = handle.join() {
                panics.push(Error::WorkerPanic {
                    index: w,
                    message: panic_message(payload),
                });
            }
        }
    });

    let mut sh = shared.into_inner().expect("workers finished");
    *store = std::mem::take(&mut sh.store);
    if let Some(panic) = panics.into_iter().next() {
        return Err(panic);
    }
    if let Some(err) = sh.error {
        return Err(err);
    }
    sh.curve.sort_by_key(|p| p.episode);
    Ok(TrainOutcome {
        curve: sh.curve,
        total_updates: sh.total_updates,
        per_worker_updates: sh.per_worker_updates,
        episodes_run: sh.episodes_run,
    })
}

#[allow(clippy::too_many_arguments)]
fn worker_loop(
    worker: usize,
    shared: &Mutex<Shared>,
    actors: &[Actor],
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    sink: Option<&EvalSink>,
) {
    let mut envs = LaneEnvs::new(actors.len());
    let mut local = ParamStore::new();
    loop {
        let episode = {
            let mut sh = shared.lock().expect("parameter lock");
            if sh.error.is_some() || sh.next_episode >= cfg.episodes {
                return;
            }
            let episode = sh.next_episode;
            sh.next_episode += 1;
            local.clone_from(&sh.store);
            episode
        };

        let result = worker_episode(
            worker, shared, actors, &mut envs, &mut local, make_env, cfg, seed, episode, sink,
        );
        let mut sh = shared.lock().expect("parameter lock");
        match result {
            Ok(()) => sh.episodes_run += 1,
            Err(err) => {
                if sh.error.is_none() {
                    sh.error = Some(err);
                }
                return;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn worker_episode(
    worker: usize,
    shared: &Mutex<Shared>,
    actors: &[Actor],
    envs: &mut LaneEnvs,
    local: &mut ParamStore,
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    episode: usize,
    sink: Option<&EvalSink>,
) -> Result<()> {
    if episode % cfg.eval_every == 0 {
        let point = evaluate(local, actors, envs, make_env, cfg, seed, episode)?;
        let mut sh = shared.lock().expect("parameter lock");
        sh.curve.push(point);
        emit(&sh.curve, sink)?;
    }
    let lane = episode % actors.len();
    let env = envs.get(lane, make_env)?;
    run_training_episode(
        local,
        &actors[lane],
        env,
        cfg,
        seed,
        episode,
        &mut |local, grads| {
            let mut guard = shared.lock().expect("parameter lock");
            let sh = &mut *guard;
            sh.opt.step(&mut sh.store, &grads)?;
            sh.total_updates += 1;
            sh.per_worker_updates[worker] += 1;
            if !cfg.async_updates {
                local.clone_from(&sh.store);
            }
            Ok(())
        },
    )
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".into()
    }
}

/// Rolls one full episode in truncation windows, applying one optimizer
/// step per window through `apply`, which may also refresh `store` from
/// shared parameters.
fn run_training_episode(
    store: &mut ParamStore,
    actor: &Actor,
    env: &mut SwimEnv,
    cfg: &LearnerConfig,
    seed: u64,
    episode: usize,
    apply: &mut dyn FnMut(&mut ParamStore, GradSet) -> Result<()>,
) -> Result<()> {
    let mut tape = Tape::new();
    let mut state = actor.begin_episode(&mut tape)?;
    let mut obs = env.reset(mix(seed, STREAM_TRAIN_ENV, episode as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_TRAIN_POLICY, episode as u64));

    loop {
        let bound = store.bind(&mut tape);
        let seg = roll_window(
            &mut tape,
            &bound,
            actor,
            &mut state,
            env,
            &mut obs,
            cfg.window,
            Some(&mut rng),
        )?;

        let rewards = seg.rewards();
        let values = seg.values_with_bootstrap();
        let policy_returns = lambda_returns(&rewards, &values, cfg.gamma, cfg.lambda)?;
        let value_targets = lambda_returns(&rewards, &values, cfg.gamma, cfg.lambda_value)?;
        let advantages: Vec<f64> = policy_returns
            .iter()
            .zip(&seg.steps)
            .map(|(ret, step)| ret - step.value_est)
            .collect();

        let mut logps = Vec::with_capacity(seg.steps.len());
        let mut entropies = Vec::new();
        let mut value_vars: Vec<Var> = Vec::with_capacity(seg.steps.len());
        for step in &seg.steps {
            let a = tape.constant(Tensor::vector(step.action.clone())?);
            logps.push(tape.gaussian_logp(a, step.mu, step.sigma)?);
            if cfg.entropy_weight != 0.0 {
                entropies.push(gaussian_entropy(&mut tape, step.sigma)?);
            }
            value_vars.push(step.value);
        }

        let pl = policy_loss(&mut tape, &logps, &advantages, &entropies, cfg.entropy_weight)?;
        let vl = value_loss(&mut tape, &value_vars, &value_targets)?;
        let vl_scaled = tape.affine(vl, cfg.value_scale, 0.0)?;
        let total = tape.add(pl, vl_scaled)?;
        let grads = tape.backward(total)?;
        apply(store, bound.collect(&grads))?;

        if seg.terminal {
            return Ok(());
        }
        tape.clear();
        actor.carry(&mut tape, &mut state)?;
    }
}

/// Runs the fixed evaluation suite at the distribution mode (actions and
/// control at their means) and reduces it to one curve point. The same
/// seeds are reused at every evaluation so curve points are comparable.
fn evaluate(
    store: &ParamStore,
    actors: &[Actor],
    envs: &mut LaneEnvs,
    make_env: &EnvFactory,
    cfg: &LearnerConfig,
    seed: u64,
    episode: usize,
) -> Result<CurvePoint> {
    let mut total_return = 0.0;
    let mut total_len = 0usize;
    let mut sigma_sum = 0.0;
    let mut sigma_steps = 0usize;

    for j in 0..cfg.eval_episodes {
        let lane = j % actors.len();
        let actor = &actors[lane];
        let env = envs.get(lane, make_env)?;

        let mut tape = Tape::new();
        let mut state = actor.begin_episode(&mut tape)?;
        let mut obs = env.reset(mix(seed, STREAM_EVAL_ENV, j as u64));
        loop {
            let bound = store.bind(&mut tape);
            let seg = roll_window(
                &mut tape, &bound, actor, &mut state, env, &mut obs, cfg.window, None,
            )?;
            for step in &seg.steps {
                total_return += step.reward;
                let s = tape.value(step.sigma).data();
                sigma_sum += s.iter().sum::<f64>() / s.len() as f64;
            }
            total_len += seg.steps.len();
            sigma_steps += seg.steps.len();
            if seg.terminal {
                break;
            }
            tape.clear();
            actor.carry(&mut tape, &mut state)?;
        }
    }

    let n = cfg.eval_episodes as f64;
    Ok(CurvePoint {
        episode,
        mean_return: total_return / n,
        mean_episode_length: total_len as f64 / n,
        sigma_mean: sigma_sum / sigma_steps.max(1) as f64,
    })
}

/// Derives independent per-episode seeds from the run seed; `stream`
/// separates environment, policy-noise, and evaluation draws.
pub(crate) fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Swimmer, SwimmerParams, TaskKind, TaskSpec};
    use crate::learn::rollout::{PolicyNet, ValueNet};
    use crate::nets::{
        ClockedHierarchy, FfPolicy, FfValue, HighLevelController, HlMode, LowLevelController,
        RecurrentValue,
    };

    fn small_swimmer() -> Swimmer {
        Swimmer::new(SwimmerParams {
            n_links: 3,
            ..SwimmerParams::default()
        })
        .unwrap()
    }

    fn reach_task(horizon: usize) -> TaskSpec {
        TaskSpec {
            horizon,
            kind: TaskKind::PretrainTarget {
                radius_min: 2.0,
                radius_max: 5.0,
            },
        }
    }

    fn reach_factory(horizon: usize) -> impl Fn(usize) -> Result<SwimEnv> + Sync {
        move |_| SwimEnv::new(small_swimmer(), reach_task(horizon))
    }

    fn hierarchy_actor(store: &mut ParamStore, seed: u64) -> Actor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proprio = small_swimmer().proprio_dim();
        let obs_dim = proprio + 2;
        let ll =
            LowLevelController::new(store, "ll", proprio, 16, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let hl = HighLevelController::new(store, "hl", obs_dim, 12, 8, true, 1e-3, 1.0, &mut rng)
            .unwrap();
        let hier = ClockedHierarchy::new(ll, Some(hl), 5, HlMode::Stochastic, None).unwrap();
        let value = RecurrentValue::new(store, "value", obs_dim, 12, 8, &mut rng).unwrap();
        Actor::new(PolicyNet::Clocked(hier), ValueNet::Recurrent(value)).unwrap()
    }

    fn ff_actor(store: &mut ParamStore, seed: u64) -> Actor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs_dim = small_swimmer().proprio_dim() + 2;
        let policy =
            FfPolicy::new(store, "pi", obs_dim, 16, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let value = FfValue::new(store, "v", obs_dim, 16, &mut rng).unwrap();
        Actor::new(PolicyNet::Feedforward(policy), ValueNet::Feedforward(value)).unwrap()
    }

    #[test]
    fn one_worker_runs_are_bit_identical() {
        let run = || {
            let mut store = ParamStore::new();
            let actor = hierarchy_actor(&mut store, 7);
            let cfg = LearnerConfig {
                episodes: 4,
                window: 10,
                eval_every: 2,
                eval_episodes: 2,
                ..LearnerConfig::default()
            };
            let make = reach_factory(40);
            let out = train(&mut store, &[actor], &make, &cfg, 99).unwrap();
            (out, store)
        };
        let (a, store_a) = run();
        let (b, store_b) = run();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.total_updates, b.total_updates);
        for (id, entry) in store_a.iter() {
            assert_eq!(entry.tensor.data(), store_b.get(id).tensor.data(), "{}", entry.name);
        }
        let episodes: Vec<usize> = a.curve.iter().map(|p| p.episode).collect();
        assert_eq!(episodes, vec![0, 2, 4]);
    }

    #[test]
    fn shared_update_counts_reconcile() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store, 3);
        let cfg = LearnerConfig {
            episodes: 9,
            window: 10,
            workers: 3,
            eval_every: 4,
            eval_episodes: 1,
            ..LearnerConfig::default()
        };
        let make = reach_factory(20);
        let out = train(&mut store, &[actor], &make, &cfg, 5).unwrap();

        assert_eq!(out.episodes_run, 9);
        assert_eq!(out.per_worker_updates.len(), 3);
        assert_eq!(out.per_worker_updates.iter().sum::<u64>(), out.total_updates);
        assert_eq!(out.total_updates, 18);
        let episodes: Vec<usize> = out.curve.iter().map(|p| p.episode).collect();
        assert_eq!(episodes, vec![0, 4, 8, 9]);
    }

    #[test]
    fn async_snapshots_also_reconcile() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store, 11);
        let cfg = LearnerConfig {
            episodes: 6,
            window: 10,
            workers: 2,
            eval_every: 10,
            eval_episodes: 1,
            async_updates: true,
            ..LearnerConfig::default()
        };
        let make = reach_factory(20);
        let out = train(&mut store, &[actor], &make, &cfg, 17).unwrap();
        assert_eq!(out.episodes_run, 6);
        assert_eq!(out.total_updates, 12);
        assert_eq!(out.per_worker_updates.iter().sum::<u64>(), 12);
    }

    #[test]
    fn worker_panics_abort_the_run() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store, 3);
        let cfg = LearnerConfig {
            episodes: 4,
            workers: 2,
            eval_every: 100,
            ..LearnerConfig::default()
        };
        let make = |_: usize| -> Result<SwimEnv> { panic!("bad lane wiring") };
        let err = train(&mut store, &[actor], &make, &cfg, 5).unwrap_err();
        match err {
            Error::WorkerPanic { message, .. } => assert!(message.contains("bad lane wiring")),
            other => panic!("expected a worker panic, got {other:?}"),
        }
    }

    #[test]
    fn factory_errors_stop_every_worker() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store, 3);
        let cfg = LearnerConfig {
            episodes: 4,
            workers: 2,
            eval_every: 100,
            ..LearnerConfig::default()
        };
        let make = |_: usize| -> Result<SwimEnv> {
            Err(Error::BadOperand {
                op: "test factory",
                message: "no environments today".into(),
            })
        };
        let err = train(&mut store, &[actor], &make, &cfg, 5).unwrap_err();
        assert!(matches!(err, Error::BadOperand { .. }));
    }

    #[test]
    fn lanes_take_turns_round_robin() {
        let mut store = ParamStore::new();
        let actor_a = ff_actor(&mut store, 3);
        let actor_b = Actor::new(actor_a.policy.clone(), actor_a.value.clone()).unwrap();
        let cfg = LearnerConfig {
            episodes: 4,
            window: 10,
            eval_every: 10,
            eval_episodes: 2,
            ..LearnerConfig::default()
        };
        let hits = Mutex::new(vec![0usize; 2]);
        let make = |lane: usize| -> Result<SwimEnv> {
            hits.lock().unwrap()[lane] += 1;
            SwimEnv::new(small_swimmer(), reach_task(20))
        };
        train(&mut store, &[actor_a, actor_b], &make, &cfg, 5).unwrap();
        let hits = hits.into_inner().unwrap();
        assert!(hits[0] >= 1 && hits[1] >= 1, "both lanes should be exercised: {hits:?}");
    }

    #[test]
    fn dense_speed_reward_improves_with_training() {
        use crate::env::TrackShape;
        let track = TaskSpec {
            horizon: 40,
            kind: TaskKind::MultiTrack {
                shape: TrackShape::Straight,
                radius: 5.0,
                weight: 1.0,
                speed_cap: 2.5,
            },
        };
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let obs_dim = small_swimmer().proprio_dim() + 4;
        let policy =
            FfPolicy::new(&mut store, "pi", obs_dim, 16, 2, 1e-3, 1.0, 0.3, &mut rng).unwrap();
        let value = FfValue::new(&mut store, "v", obs_dim, 16, &mut rng).unwrap();
        let actor =
            Actor::new(PolicyNet::Feedforward(policy), ValueNet::Feedforward(value)).unwrap();

        let cfg = LearnerConfig {
            episodes: 400,
            window: 20,
            learning_rate: 2e-3,
            eval_every: 400,
            eval_episodes: 3,
            ..LearnerConfig::default()
        };
        let make = move |_: usize| SwimEnv::new(small_swimmer(), track.clone());
        let out = train(&mut store, &[actor], &make, &cfg, 40).unwrap();
        let first = out.curve.first().unwrap().mean_return;
        let last = out.curve.last().unwrap().mean_return;
        assert!(
            last > first,
            "mean return should improve: start {first:.2}, end {last:.2}"
        );
    }

    #[test]
    fn the_sink_sees_the_curve_grow_in_order() {
        let mut store = ParamStore::new();
        let actor = ff_actor(&mut store, 3);
        let cfg = LearnerConfig {
            episodes: 4,
            window: 10,
            eval_every: 2,
            eval_episodes: 1,
            ..LearnerConfig::default()
        };
        let make = reach_factory(20);
        let seen = Mutex::new(Vec::new());
        let sink = |curve: &[CurvePoint]| {
            seen.lock().unwrap().push(curve.to_vec());
            Ok(())
        };
        let out = train_logged(&mut store, &[actor], &make, &cfg, 5, Some(&sink)).unwrap();

        let seen = seen.into_inner().unwrap();
        let lens: Vec<usize> = seen.iter().map(|c| c.len()).collect();
        assert_eq!(lens, vec![1, 2, 3]);
        assert_eq!(seen.last().unwrap(), &out.curve);
        for snapshot in &seen {
            assert!(snapshot.windows(2).all(|w| w[0].episode < w[1].episode));
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let bad = [
            LearnerConfig { gamma: 1.0, ..LearnerConfig::default() },
            LearnerConfig { lambda: 1.2, ..LearnerConfig::default() },
            LearnerConfig { lambda_value: -0.1, ..LearnerConfig::default() },
            LearnerConfig { learning_rate: 0.0, ..LearnerConfig::default() },
            LearnerConfig { value_scale: -1.0, ..LearnerConfig::default() },
            LearnerConfig { entropy_weight: -1e-3, ..LearnerConfig::default() },
            LearnerConfig { window: 0, ..LearnerConfig::default() },
            LearnerConfig { workers: 0, ..LearnerConfig::default() },
            LearnerConfig { eval_every: 0, ..LearnerConfig::default() },
            LearnerConfig { eval_episodes: 0, ..LearnerConfig::default() },
            LearnerConfig { grad_clip: f64::INFINITY, ..LearnerConfig::default() },
            LearnerConfig { sigma_init: Some(0.0), ..LearnerConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert!(LearnerConfig::default().validate().is_ok());
    }
}

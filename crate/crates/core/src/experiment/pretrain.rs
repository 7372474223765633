//! Pretraining: the low-level controller learns to swim under a
//! provisional deterministic high-level controller, either on the
//! shaped go-to-target task or on the three-track set. Only the
//! low-level section of the resulting checkpoint is meant to outlive
//! this phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tensor};
use crate::env::{SwimEnv, Swimmer, TaskSpec, TrackShape};
use crate::error::Result;
use crate::io::{Checkpoint, Config};
use crate::learn::{train_logged, Actor, EvalSink, PolicyNet, TrainOutcome, ValueNet};
use crate::nets::{
    ClockedHierarchy, HighLevelController, HlMode, LowLevelController, RecurrentValue,
};

/// Non-trainable store entry riding along with the low-level weights so
/// a checkpoint section is enough to rebuild the sigma head's band.
pub const SIGMA_BOUNDS_KEY: &str = "ll/meta/sigma_bounds";

/// Track lanes of the multi-track variant, in episode round-robin order.
pub const TRACKS: [TrackShape; 3] = [
    TrackShape::Straight,
    TrackShape::LeftCircle,
    TrackShape::RightCircle,
];

pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    pub training: TrainOutcome,
}

pub fn pretrain(
    cfg: &Config,
    seed: u64,
    config_hash: u64,
    sink: Option<&EvalSink>,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let params = cfg.swimmer_params();
    let proprio_dim = Swimmer::new(params)?.proprio_dim();
    let action_dim = params.n_links - 1;

    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ll = build_low_level(&mut store, cfg, proprio_dim, action_dim, &mut rng)?;
    let (actors, tasks) = if cfg.experiment.multi_track {
        multi_track_actors(&mut store, cfg, ll, proprio_dim, &mut rng)?
    } else {
        single_task_actors(&mut store, cfg, ll, proprio_dim, &mut rng)?
    };

    let learner = cfg.learner();
    let make_env =
        move |lane: usize| SwimEnv::new(Swimmer::new(params)?, tasks[lane].clone());
    let training = train_logged(&mut store, &actors, &make_env, &learner, seed, sink)?;

    let checkpoint =
        Checkpoint::from_store(&store, "pretrain", learner.episodes as u64, config_hash);
    Ok(PretrainOutcome {
        checkpoint,
        training,
    })
}

/// Builds the shared motor controller plus the sigma-band rider entry.
pub(crate) fn build_low_level(
    store: &mut ParamStore,
    cfg: &Config,
    proprio_dim: usize,
    action_dim: usize,
    rng: &mut impl Rng,
) -> Result<LowLevelController> {
    let p = &cfg.policy;
    let ll = LowLevelController::new(
        store,
        "ll",
        proprio_dim,
        p.ll_hidden,
        action_dim,
        p.sigma_min,
        p.sigma_max,
        p.action_sigma_init,
        rng,
    )?;
    store.add(
        SIGMA_BOUNDS_KEY,
        Tensor::vector(vec![p.sigma_min, p.sigma_max])?,
        false,
    )?;
    Ok(ll)
}

fn pretrain_task(cfg: &Config) -> TaskSpec {
    let mut task = TaskSpec::pretrain();
    if let Some(h) = cfg.env.horizon {
        task.horizon = h;
    }
    task
}

fn single_task_actors(
    store: &mut ParamStore,
    cfg: &Config,
    ll: LowLevelController,
    proprio_dim: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<Actor>, Vec<TaskSpec>)> {
    let task = pretrain_task(cfg);
    let obs_dim = proprio_dim + task.feature_dim();
    let p = &cfg.policy;
    let hl = HighLevelController::new(
        store, "hl", obs_dim, p.encoder, p.cells, false, p.sigma_min, p.sigma_max, rng,
    )?;
    let hier = ClockedHierarchy::new(ll, Some(hl), p.k, HlMode::Deterministic, None)?;
    let value = RecurrentValue::new(store, "value", obs_dim, p.encoder, p.cells, rng)?;
    let actor = Actor::new(PolicyNet::Clocked(hier), ValueNet::Recurrent(value))?;
    Ok((vec![actor], vec![task]))
}

/// One high-level controller and one value function per track, all
/// modulating the same low-level controller.
fn multi_track_actors(
    store: &mut ParamStore,
    cfg: &Config,
    ll: LowLevelController,
    proprio_dim: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<Actor>, Vec<TaskSpec>)> {
    let p = &cfg.policy;
    let mut actors = Vec::with_capacity(TRACKS.len());
    let mut tasks = Vec::with_capacity(TRACKS.len());
    for (i, shape) in TRACKS.iter().enumerate() {
        let mut task = TaskSpec::multi_track(*shape);
        if let Some(h) = cfg.env.horizon {
            task.horizon = h;
        }
        let obs_dim = proprio_dim + task.feature_dim();
        let hl = HighLevelController::new(
            store,
            &format!("hl{i}"),
            obs_dim,
            p.encoder,
            p.cells,
            false,
            p.sigma_min,
            p.sigma_max,
            rng,
        )?;
        let hier = ClockedHierarchy::new(ll, Some(hl), p.k, HlMode::Deterministic, None)?;
        let value =
            RecurrentValue::new(store, &format!("value{i}"), obs_dim, p.encoder, p.cells, rng)?;
        actors.push(Actor::new(PolicyNet::Clocked(hier), ValueNet::Recurrent(value))?);
        tasks.push(task);
    }
    Ok((actors, tasks))
}

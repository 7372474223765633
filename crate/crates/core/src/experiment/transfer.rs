//! Transfer phase: training a controller on the configured task, either
//! a fresh recurrent policy on top of a frozen pretrained motor
//! controller, or one of the end-to-end baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParamStore;
use crate::env::{SwimEnv, Swimmer};
use crate::error::{Error, Result};
use crate::io::{BaselineKind, Checkpoint, Config};
use crate::learn::{train_logged, Actor, EvalSink, PolicyNet, TrainOutcome, ValueNet};
use crate::nets::{
    ClockedHierarchy, FfPolicy, FfValue, HighLevelController, HlMode, InitFfPolicy,
    RecurrentPolicy, RecurrentValue,
};

use super::freeze::{body_hash, check_body_fits, extract_and_freeze, wire_low_level};

#[derive(Debug)]
pub struct TransferOutcome {
    pub checkpoint: Checkpoint,
    pub training: TrainOutcome,
    /// CRC of the immutable motor-controller body before and after
    /// training; equal halves prove the freeze held. `None` for
    /// controllers without a frozen body.
    pub body_hash: Option<(u64, u64)>,
}

pub fn transfer(
    cfg: &Config,
    pretrained: Option<&Checkpoint>,
    seed: u64,
    config_hash: u64,
    sink: Option<&EvalSink>,
) -> Result<TransferOutcome> {
    cfg.validate()?;
    let params = cfg.swimmer_params();
    let task = cfg.task();
    let swimmer = Swimmer::new(params)?;
    let proprio_dim = swimmer.proprio_dim();
    let obs_dim = proprio_dim + task.feature_dim();
    let action_dim = params.n_links - 1;
    let p = &cfg.policy;
    let sigma_init = cfg.learner.sigma_init.unwrap_or(p.action_sigma_init);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mut store, actor, frozen_body) = match cfg.experiment.baseline {
        BaselineKind::Hierarchy => {
            let ck = require(pretrained, "the hierarchical controller")?;
            let frozen = extract_and_freeze(ck, &mut rng)?;
            check_body_fits(&frozen.ll, Some(proprio_dim), action_dim)?;
            let mut store = frozen.store;
            if cfg.learner.sigma_init.is_some() {
                frozen.ll.sigma.rebias(&mut store, sigma_init);
            }
            let hl = HighLevelController::new(
                &mut store,
                "hl",
                obs_dim,
                p.encoder,
                p.cells,
                true,
                p.sigma_min,
                p.sigma_max,
                &mut rng,
            )?;
            let value = RecurrentValue::new(&mut store, "value", obs_dim, p.encoder, p.cells, &mut rng)?;
            let policy = ClockedHierarchy::new(frozen.ll, Some(hl), p.k, HlMode::Stochastic, None)?;
            let actor = Actor::new(PolicyNet::Clocked(policy), ValueNet::Recurrent(value))?;
            (store, actor, true)
        }
        BaselineKind::FfScratch => {
            let mut store = ParamStore::new();
            let policy = FfPolicy::new(
                &mut store,
                "pi",
                obs_dim,
                p.ff_hidden,
                action_dim,
                p.sigma_min,
                p.sigma_max,
                sigma_init,
                &mut rng,
            )?;
            let value = FfValue::new(&mut store, "value", obs_dim, p.ff_hidden, &mut rng)?;
            let actor = Actor::new(PolicyNet::Feedforward(policy), ValueNet::Feedforward(value))?;
            (store, actor, false)
        }
        BaselineKind::LstmScratch => {
            let mut store = ParamStore::new();
            let policy = RecurrentPolicy::new(
                &mut store,
                "pi",
                obs_dim,
                p.encoder,
                p.cells,
                action_dim,
                p.sigma_min,
                p.sigma_max,
                sigma_init,
                &mut rng,
            )?;
            let value = RecurrentValue::new(&mut store, "value", obs_dim, p.encoder, p.cells, &mut rng)?;
            let actor = Actor::new(PolicyNet::Recurrent(policy), ValueNet::Recurrent(value))?;
            (store, actor, false)
        }
        BaselineKind::InitFf => {
            let ck = require(pretrained, "the transplanted feedforward baseline")?;
            let mut store = ck.section("ll/").to_store()?;
            let ll = wire_low_level(&store)?;
            check_body_fits(&ll, None, action_dim)?;
            // Only the input layer is new; the inherited stack trains too.
            store.set_trainable_prefix("ll/", true);
            store.set_trainable_prefix(super::pretrain::SIGMA_BOUNDS_KEY, false);
            let policy = InitFfPolicy::graft(&mut store, "initff", obs_dim, &ll, &mut rng)?;
            let value = FfValue::new(&mut store, "value", obs_dim, p.ff_hidden, &mut rng)?;
            let actor = Actor::new(PolicyNet::InitFf(policy), ValueNet::Feedforward(value))?;
            (store, actor, false)
        }
    };

    let learner = cfg.learner();
    let actors = vec![actor];
    let make_env = move |_lane: usize| SwimEnv::new(Swimmer::new(params)?, task.clone());
    let before = frozen_body.then(|| body_hash(&store));
    let training = train_logged(&mut store, &actors, &make_env, &learner, seed, sink)?;
    let after = frozen_body.then(|| body_hash(&store));

    let checkpoint = Checkpoint::from_store(&store, "transfer", learner.episodes as u64, config_hash);
    Ok(TransferOutcome {
        checkpoint,
        training,
        body_hash: before.zip(after),
    })
}

fn require<'a>(pretrained: Option<&'a Checkpoint>, what: &str) -> Result<&'a Checkpoint> {
    pretrained.ok_or_else(|| Error::Config {
        message: format!("{what} needs a pretrained low-level checkpoint"),
    })
}

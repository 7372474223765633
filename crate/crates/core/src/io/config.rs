//! TOML run configuration. Every key has a default, unknown keys are
//! rejected, and all numeric ranges are checked up front so a bad file
//! fails before any compute starts. `configs/reference.toml` documents
//! the full schema.

use std::path::Path;

use serde::Deserialize;

use crate::env::{SwimmerParams, TaskSpec, TrackShape};
use crate::error::{Error, Result};
use crate::learn::LearnerConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub env: EnvSection,
    pub policy: PolicySection,
    pub learner: LearnerSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub n_links: usize,
    pub dt: f64,
    pub substeps: usize,
    pub link_length: f64,
    pub link_mass: f64,
    pub k_normal: f64,
    pub k_tangent: f64,
    pub torque_gain: f64,
    pub joint_limit_degrees: f64,
    pub limit_stiffness: f64,
    pub task: TaskName,
    /// Episode length override; each task carries its own default.
    pub horizon: Option<usize>,
}

impl Default for EnvSection {
    fn default() -> Self {
        let p = SwimmerParams::default();
        EnvSection {
            n_links: p.n_links,
            dt: p.dt,
            substeps: p.substeps,
            link_length: p.link_length,
            link_mass: p.link_mass,
            k_normal: p.k_normal,
            k_tangent: p.k_tangent,
            torque_gain: p.torque_gain,
            joint_limit_degrees: p.joint_limit.to_degrees(),
            limit_stiffness: p.limit_stiffness,
            task: TaskName::Pretrain,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Pretrain,
    SparseEasy,
    SparseHard,
    Canyon,
    TrackStraight,
    TrackLeft,
    TrackRight,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    /// Hidden width of the low-level controller's layers.
    pub ll_hidden: usize,
    /// Width of the high-level perceptual encoder.
    pub encoder: usize,
    /// LSTM cells in the high-level core and the recurrent value net.
    pub cells: usize,
    /// Hidden width of the flat feedforward baseline and its value net.
    pub ff_hidden: usize,
    /// Steps each control signal is held.
    pub k: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Initial action standard deviation of a freshly built policy head.
    pub action_sigma_init: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            ll_hidden: 150,
            encoder: 100,
            cells: 50,
            ff_hidden: 300,
            k: 10,
            sigma_min: 1e-3,
            sigma_max: 1.0,
            action_sigma_init: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub gamma: f64,
    pub lambda: f64,
    pub lambda_value: f64,
    pub learning_rate: f64,
    pub value_scale: f64,
    pub entropy_weight: f64,
    pub window: usize,
    pub workers: usize,
    pub episodes: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub grad_clip: f64,
    pub sigma_init: Option<f64>,
    pub async_updates: bool,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let c = LearnerConfig::default();
        LearnerSection {
            gamma: c.gamma,
            lambda: c.lambda,
            lambda_value: c.lambda_value,
            learning_rate: c.learning_rate,
            value_scale: c.value_scale,
            entropy_weight: c.entropy_weight,
            window: c.window,
            workers: c.workers,
            episodes: c.episodes,
            eval_every: c.eval_every,
            eval_episodes: c.eval_episodes,
            grad_clip: c.grad_clip,
            sigma_init: c.sigma_init,
            async_updates: c.async_updates,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    /// Pretrain on the three-track task set instead of the single
    /// shaped-reaching task.
    pub multi_track: bool,
    /// Which controller the transfer phase trains.
    pub baseline: BaselineKind,
    /// Held-noise scales for the exploration analysis; 0 means no
    /// modulation.
    pub sigma_in: Vec<f64>,
    /// Hold lengths (steps) for the exploration analysis.
    pub hold: Vec<usize>,
    /// Scales for the i.i.d. per-step action-noise control condition.
    pub iid_sigma: Vec<f64>,
    /// Constant action standard deviation pinned during the analysis.
    pub action_sigma: f64,
    pub trajectories: usize,
    pub analysis_steps: usize,
    pub grid: GridSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seeds: vec![1, 2, 3, 4, 5],
            multi_track: false,
            baseline: BaselineKind::Hierarchy,
            sigma_in: vec![0.0, 0.2, 0.4, 0.8],
            hold: vec![1, 10],
            iid_sigma: vec![0.2, 0.4, 0.8],
            action_sigma: 0.3,
            trajectories: 20,
            analysis_steps: 2000,
            grid: GridSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Hierarchy,
    FfScratch,
    LstmScratch,
    InitFf,
}

/// Axes of the hyperparameter grid. An empty axis means "use the value
/// from the learner section", so any subset of axes can be swept.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    pub window: Vec<usize>,
    pub sigma_init: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config {
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.swimmer_params().validate()?;
        self.task().validate()?;
        self.learner().validate()?;

        let p = &self.policy;
        let counts = [
            ("policy.ll_hidden", p.ll_hidden),
            ("policy.encoder", p.encoder),
            ("policy.cells", p.cells),
            ("policy.ff_hidden", p.ff_hidden),
            ("policy.k", p.k),
        ];
        for (field, n) in counts {
            if n == 0 {
                return Err(bad(field, "must be at least 1"));
            }
        }
        if !(p.sigma_min > 0.0 && p.sigma_max > p.sigma_min && p.sigma_max.is_finite()) {
            return Err(bad(
                "policy.sigma_min",
                &format!("need 0 < sigma_min < sigma_max, got [{}, {}]", p.sigma_min, p.sigma_max),
            ));
        }
        if !(p.action_sigma_init > p.sigma_min && p.action_sigma_init < p.sigma_max) {
            return Err(bad(
                "policy.action_sigma_init",
                &format!("must lie strictly inside the sigma bounds, got {}", p.action_sigma_init),
            ));
        }
        if let Some(s) = self.learner.sigma_init {
            if !(s > p.sigma_min && s < p.sigma_max) {
                return Err(bad(
                    "learner.sigma_init",
                    &format!("must lie strictly inside the sigma bounds, got {s}"),
                ));
            }
        }

        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(bad("experiment.seeds", "need at least one seed"));
        }
        if e.trajectories == 0 {
            return Err(bad("experiment.trajectories", "must be at least 1"));
        }
        if e.analysis_steps == 0 {
            return Err(bad("experiment.analysis_steps", "must be at least 1"));
        }
        if !(e.action_sigma > 0.0 && e.action_sigma.is_finite()) {
            return Err(bad("experiment.action_sigma", "must be positive and finite"));
        }
        if e.sigma_in.is_empty() || e.sigma_in.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(bad(
                "experiment.sigma_in",
                "need at least one nonnegative finite scale",
            ));
        }
        if e.hold.is_empty() || e.hold.contains(&0) {
            return Err(bad("experiment.hold", "need at least one positive hold length"));
        }
        if e.iid_sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(bad("experiment.iid_sigma", "scales must be positive and finite"));
        }

        let g = &e.grid;
        if g.alpha.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(bad("experiment.grid.alpha", "learning rates must be positive"));
        }
        if g.beta.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(bad("experiment.grid.beta", "value-loss scales must be positive"));
        }
        for (field, axis) in [
            ("experiment.grid.lambda", &g.lambda),
            ("experiment.grid.lambda_prime", &g.lambda_prime),
        ] {
            if axis.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad(field, "mixing parameters must lie in [0, 1]"));
            }
        }
        if g.window.contains(&0) {
            return Err(bad("experiment.grid.window", "windows must be at least 1"));
        }
        if g.sigma_init.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(bad("experiment.grid.sigma_init", "must be positive and finite"));
        }
        if g.eta.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(bad("experiment.grid.eta", "entropy weights must be nonnegative"));
        }
        Ok(())
    }

    pub fn swimmer_params(&self) -> SwimmerParams {
        let e = &self.env;
        SwimmerParams {
            n_links: e.n_links,
            dt: e.dt,
            substeps: e.substeps,
            link_length: e.link_length,
            link_mass: e.link_mass,
            k_normal: e.k_normal,
            k_tangent: e.k_tangent,
            torque_gain: e.torque_gain,
            joint_limit: e.joint_limit_degrees.to_radians(),
            limit_stiffness: e.limit_stiffness,
        }
    }

    /// The configured task; `env.task` picks the kind and `env.horizon`
    /// optionally overrides its episode length.
    pub fn task(&self) -> TaskSpec {
        let mut task = match self.env.task {
            TaskName::Pretrain => TaskSpec::pretrain(),
            TaskName::SparseEasy => TaskSpec::sparse_seek_easy(),
            TaskName::SparseHard => TaskSpec::sparse_seek_hard(),
            TaskName::Canyon => TaskSpec::canyon_default(),
            TaskName::TrackStraight => TaskSpec::multi_track(TrackShape::Straight),
            TaskName::TrackLeft => TaskSpec::multi_track(TrackShape::LeftCircle),
            TaskName::TrackRight => TaskSpec::multi_track(TrackShape::RightCircle),
        };
        if let Some(h) = self.env.horizon {
            task.horizon = h;
        }
        task
    }

    pub fn learner(&self) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            gamma: l.gamma,
            lambda: l.lambda,
            lambda_value: l.lambda_value,
            learning_rate: l.learning_rate,
            value_scale: l.value_scale,
            entropy_weight: l.entropy_weight,
            window: l.window,
            workers: l.workers,
            episodes: l.episodes,
            eval_every: l.eval_every,
            eval_episodes: l.eval_episodes,
            grad_clip: l.grad_clip,
            sigma_init: l.sigma_init,
            async_updates: l.async_updates,
        }
    }
}

fn bad(field: &str, message: &str) -> Error {
    Error::ConfigValue {
        field: field.into(),
        message: message.into(),
    }
}

/// FNV-1a fingerprint of the raw config text, stamped into checkpoints
/// so a file can be traced back to the exact configuration that made it.
pub fn fingerprint(text: &str) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

//! Exploration analysis of a frozen motor controller: roll it out driven
//! by pure modulation noise, held for one or more steps, and compare the
//! resulting head trajectories against zero-mean noise applied directly
//! to the torques.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tape;
use crate::env::{Swimmer, SwimmerState};
use crate::error::Result;
use crate::io::{Checkpoint, Config, ExperimentSection};
use crate::learn::mix;
use crate::nets::{ClockedHierarchy, HlMode};

use super::freeze::{check_body_fits, extract_and_freeze, FrozenLowLevel};

const STREAM_ANALYSIS_ENV: u64 = 11;
const STREAM_ANALYSIS_POLICY: u64 = 12;

/// Tapes are rebuilt at this stride during analysis rollouts so memory
/// stays flat over thousands of steps; nothing is differentiated here.
const REBIND_EVERY: usize = 50;

/// One rollout setting. `hold` carries the modulation interval for the
/// held-noise conditions and is `None` for direct action noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseCondition {
    pub sigma: f64,
    pub hold: Option<usize>,
}

impl NoiseCondition {
    /// File-name-safe identifier, e.g. "held-s0.4-k10" or "iid-s0.4".
    pub fn label(&self) -> String {
        match self.hold {
            Some(k) => format!("held-s{}-k{}", self.sigma, k),
            None => format!("iid-s{}", self.sigma),
        }
    }
}

/// States visited by one rollout (initial state first) and the reward
/// collected on each step; analysis rollouts have no task, so their
/// rewards are identically zero.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<SwimmerState>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn endpoint(&self) -> (f64, f64) {
        self.states.last().expect("rollouts record at least the start").head()
    }

    pub fn displacement(&self) -> f64 {
        let (x0, y0) = self.states.first().expect("non-empty").head();
        let (x1, y1) = self.endpoint();
        ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConditionStats {
    pub displacement_mean: f64,
    pub displacement_max: f64,
    /// RMS distance of the endpoints from their centroid.
    pub endpoint_spread: f64,
    /// Circular standard deviation of the final headings.
    pub heading_spread: f64,
}

#[derive(Clone, Debug)]
pub struct ConditionResult {
    pub condition: NoiseCondition,
    pub stats: ConditionStats,
    pub trajectories: Vec<Trajectory>,
}

/// Rolls every configured condition with a shared set of per-trajectory
/// seeds: trajectory j starts from the same joint configuration in every
/// condition, so spreads are comparable across rows.
pub fn analyze_noise(cfg: &Config, ck: &Checkpoint, seed: u64) -> Result<Vec<ConditionResult>> {
    cfg.validate()?;
    let params = cfg.swimmer_params();
    let swimmer = Swimmer::new(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frozen = extract_and_freeze(ck, &mut rng)?;
    check_body_fits(&frozen.ll, Some(swimmer.proprio_dim()), params.n_links - 1)?;

    let e = &cfg.experiment;
    conditions(e)
        .into_iter()
        .map(|condition| {
            let trajectories = match condition.hold {
                Some(k) => held_rollouts(
                    &frozen,
                    &swimmer,
                    condition.sigma,
                    k,
                    e.action_sigma,
                    e.analysis_steps,
                    e.trajectories,
                    seed,
                )?,
                None => iid_rollouts(&swimmer, condition.sigma, e.analysis_steps, e.trajectories, seed)?,
            };
            Ok(ConditionResult {
                condition,
                stats: condition_stats(&trajectories),
                trajectories,
            })
        })
        .collect()
}

/// Held conditions for every (sigma_in, hold) pair, then the direct
/// action-noise controls. sigma_in = 0 pins the modulation to zero, so
/// the hold length is irrelevant and the condition appears exactly once.
pub fn conditions(e: &ExperimentSection) -> Vec<NoiseCondition> {
    let mut out = Vec::new();
    for &sigma in &e.sigma_in {
        if sigma == 0.0 {
            let still = NoiseCondition { sigma: 0.0, hold: Some(e.hold[0]) };
            if !out.contains(&still) {
                out.push(still);
            }
        } else {
            for &k in &e.hold {
                out.push(NoiseCondition { sigma, hold: Some(k) });
            }
        }
    }
    for &sigma in &e.iid_sigma {
        out.push(NoiseCondition { sigma, hold: None });
    }
    out
}

/// Origin, heading along the x-axis, joints uniform within ±30°, at rest.
fn initial_state(swimmer: &Swimmer, seed: u64, j: u64) -> Result<SwimmerState> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_ANALYSIS_ENV, j));
    let bound = 30f64.to_radians();
    let joints: Vec<f64> = (0..swimmer.params.n_links - 1)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    swimmer.rest_state(0.0, &joints)
}

#[allow(clippy::too_many_arguments)]
fn held_rollouts(
    frozen: &FrozenLowLevel,
    swimmer: &Swimmer,
    sigma_in: f64,
    hold: usize,
    action_sigma: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let hier = ClockedHierarchy::new(
        frozen.ll,
        None,
        hold,
        HlMode::Noise { sigma_in },
        Some(action_sigma),
    )?;
    (0..n as u64)
        .map(|j| {
            let mut state = initial_state(swimmer, seed, j)?;
            let mut noise = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_ANALYSIS_POLICY, j));
            let mut tape = Tape::new();
            let mut bound = frozen.store.bind(&mut tape);
            let mut clock = hier.begin_episode(&mut tape)?;
            let mut states = Vec::with_capacity(steps + 1);
            states.push(state.clone());
            for t in 0..steps {
                if t > 0 && t % REBIND_EVERY == 0 {
                    tape = Tape::new();
                    bound = frozen.store.bind(&mut tape);
                    hier.carry_window(&mut tape, &mut clock)?;
                }
                let o_p = swimmer.proprio(&state);
                let out = hier.act(&mut tape, &bound, &mut clock, &o_p, &[], &mut noise)?;
                swimmer.step(&mut state, &out.action)?;
                states.push(state.clone());
            }
            Ok(Trajectory { states, rewards: vec![0.0; steps] })
        })
        .collect()
}

fn iid_rollouts(
    swimmer: &Swimmer,
    sigma: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let joints = swimmer.params.n_links - 1;
    (0..n as u64)
        .map(|j| {
            let mut state = initial_state(swimmer, seed, j)?;
            let mut noise = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_ANALYSIS_POLICY, j));
            let mut states = Vec::with_capacity(steps + 1);
            states.push(state.clone());
            for _ in 0..steps {
                let action: Vec<f64> = (0..joints)
                    .map(|_| {
                        let xi: f64 = StandardNormal.sample(&mut noise);
                        sigma * xi
                    })
                    .collect();
                swimmer.step(&mut state, &action)?;
                states.push(state.clone());
            }
            Ok(Trajectory { states, rewards: vec![0.0; steps] })
        })
        .collect()
}

pub(crate) fn condition_stats(trajectories: &[Trajectory]) -> ConditionStats {
    let n = trajectories.len() as f64;
    let displacements: Vec<f64> = trajectories.iter().map(Trajectory::displacement).collect();
    let endpoints: Vec<(f64, f64)> = trajectories.iter().map(Trajectory::endpoint).collect();

    let (cx, cy) = endpoints
        .iter()
        .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x / n, ay + y / n));
    let endpoint_spread = (endpoints
        .iter()
        .map(|(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let (mc, ms) = trajectories
        .iter()
        .map(|t| t.states.last().expect("non-empty").heading())
        .fold((0.0, 0.0), |(c, s), h| (c + h.cos() / n, s + h.sin() / n));
    let r = (mc * mc + ms * ms).sqrt().clamp(f64::MIN_POSITIVE, 1.0);
    let heading_spread = (-2.0 * r.ln()).sqrt();

    ConditionStats {
        displacement_mean: displacements.iter().sum::<f64>() / n,
        displacement_max: displacements.iter().fold(f64::NEG_INFINITY, |a, d| a.max(*d)),
        endpoint_spread,
        heading_spread,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::experiment::pretrain::build_low_level;

    fn tiny_checkpoint() -> Checkpoint {
        let cfg = Config::parse(
            "[env]\nn_links = 3\n[policy]\nll_hidden = 8\nencoder = 6\ncells = 4\n",
        )
        .unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        build_low_level(&mut store, &cfg, 10, 2, &mut rng).unwrap();
        Checkpoint::from_store(&store, "pretrain", 0, 0)
    }

    fn analysis_config() -> Config {
        Config::parse(
            "[env]\nn_links = 3\n\
             [experiment]\nsigma_in = [0.0, 0.3, 0.0]\nhold = [2, 3]\niid_sigma = [0.3]\n\
             trajectories = 2\nanalysis_steps = 6\n",
        )
        .unwrap()
    }

    #[test]
    fn the_condition_list_covers_the_grid_and_folds_zero() {
        let cfg = analysis_config();
        let got = conditions(&cfg.experiment);
        let want = [
            NoiseCondition { sigma: 0.0, hold: Some(2) },
            NoiseCondition { sigma: 0.3, hold: Some(2) },
            NoiseCondition { sigma: 0.3, hold: Some(3) },
            NoiseCondition { sigma: 0.3, hold: None },
        ];
        assert_eq!(got, want);
        assert_eq!(got[0].label(), "held-s0-k2");
        assert_eq!(got[3].label(), "iid-s0.3");
    }

    #[test]
    fn every_condition_starts_trajectory_j_in_the_same_pose() {
        let results = analyze_noise(&analysis_config(), &tiny_checkpoint(), 5).unwrap();
        assert_eq!(results.len(), 4);
        for r in &results {
            assert_eq!(r.trajectories.len(), 2);
            for t in &r.trajectories {
                assert_eq!(t.states.len(), 7);
                assert_eq!(t.rewards, vec![0.0; 6]);
                let start = &t.states[0];
                assert_eq!((start.x, start.y), (0.0, 0.0));
                assert_eq!(start.heading(), 0.0);
            }
        }
        for j in 0..2 {
            let reference = &results[0].trajectories[j].states[0];
            for r in &results[1..] {
                assert_eq!(&r.trajectories[j].states[0], reference);
            }
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = analysis_config();
        let ck = tiny_checkpoint();
        let a = analyze_noise(&cfg, &ck, 9).unwrap();
        let b = analyze_noise(&cfg, &ck, 9).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (ta, tb) in ra.trajectories.iter().zip(&rb.trajectories) {
                assert_eq!(ta.states, tb.states);
            }
        }
    }

    #[test]
    fn statistics_match_hand_computation() {
        let make = |x: f64, y: f64, heading: f64| {
            let mut s = SwimmerState {
                x: 0.0,
                y: 0.0,
                vx: 0.0,
                vy: 0.0,
                phi: vec![0.0; 3],
                phi_dot: vec![0.0; 3],
            };
            let mut end = s.clone();
            end.x = x;
            end.y = y;
            end.phi[0] = heading;
            s.phi[0] = 0.0;
            Trajectory { states: vec![s, end], rewards: vec![0.0] }
        };
        let stats = condition_stats(&[make(1.0, 0.0, 0.0), make(-1.0, 0.0, std::f64::consts::FRAC_PI_2)]);
        assert!((stats.displacement_mean - 1.0).abs() < 1e-15);
        assert!((stats.displacement_max - 1.0).abs() < 1e-15);
        assert!((stats.endpoint_spread - 1.0).abs() < 1e-15);
        let want = (-2.0 * (0.5f64.powi(2) + 0.5f64.powi(2)).sqrt().ln()).sqrt();
        assert!((stats.heading_spread - want).abs() < 1e-15, "{}", stats.heading_spread);
    }

    #[test]
    fn a_single_heading_has_zero_spread() {
        let straight = SwimmerState {
            x: 3.0,
            y: 0.0,
            vx: 0.0,
            vy: 0.0,
            phi: vec![0.4; 3],
            phi_dot: vec![0.0; 3],
        };
        let t = Trajectory {
            states: vec![straight.clone(), straight],
            rewards: vec![0.0],
        };
        let stats = condition_stats(&[t.clone(), t]);
        assert!(stats.heading_spread.abs() < 1e-7, "{}", stats.heading_spread);
        assert_eq!(stats.endpoint_spread, 0.0);
    }
}

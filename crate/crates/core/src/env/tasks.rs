use super::dynamics::{Swimmer, SwimmerState};
use super::geometry::Canyon;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which track the multi-track variant follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackShape {
    Straight,
    LeftCircle,
    RightCircle,
}

/// Task on top of the swimmer: reward rule, episode length, and the
/// task features appended to the proprioceptive observation.
#[derive(Clone, Debug)]
pub enum TaskKind {
    /// Dense shaping: reward is the negative head-to-target distance,
    /// target in an annulus around the start.
    PretrainTarget { radius_min: f64, radius_max: f64 },
    /// Reward 1 on every step the head is inside the target region;
    /// the target is only sensed inside a vision cone about the heading.
    SparseSeek {
        distance: f64,
        region_radius: f64,
        cone_half_angle: f64,
    },
    /// One reward of 10 for crossing the exit; the episode ends a fixed
    /// number of steps afterwards. Sensing is a depth strip.
    Canyon {
        canyon: Canyon,
        exit_grace: usize,
        n_rays: usize,
        fan: f64,
        max_range: f64,
    },
    /// Dense velocity tracking along a line or circle.
    MultiTrack {
        shape: TrackShape,
        radius: f64,
        weight: f64,
        speed_cap: f64,
    },
}

#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub horizon: usize,
    pub kind: TaskKind,
}

impl TaskSpec {
    pub fn pretrain() -> Self {
        TaskSpec {
            horizon: 300,
            kind: TaskKind::PretrainTarget {
                radius_min: 2.0,
                radius_max: 5.0,
            },
        }
    }

    pub fn sparse_seek(distance: f64) -> Self {
        TaskSpec {
            horizon: 800,
            kind: TaskKind::SparseSeek {
                distance,
                region_radius: 0.3,
                cone_half_angle: 60f64.to_radians(),
            },
        }
    }

    pub fn sparse_seek_easy() -> Self {
        Self::sparse_seek(2.0)
    }

    pub fn sparse_seek_hard() -> Self {
        Self::sparse_seek(6.0)
    }

    pub fn canyon_default() -> Self {
        let canyon = Canyon::new(
            vec![(0.0, 0.0), (7.0, 0.0), (7.0, 7.0), (14.0, 7.0)],
            1.5,
        )
        .expect("default canyon geometry is valid");
        TaskSpec {
            horizon: 3000,
            kind: TaskKind::Canyon {
                canyon,
                exit_grace: 25,
                n_rays: 10,
                fan: 120f64.to_radians(),
                max_range: 5.0,
            },
        }
    }

    pub fn multi_track(shape: TrackShape) -> Self {
        TaskSpec {
            horizon: 300,
            kind: TaskKind::MultiTrack {
                shape,
                radius: 5.0,
                weight: 1.0,
                speed_cap: 2.5,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::ConfigValue {
                field: "horizon".into(),
                message: "must be positive".into(),
            });
        }
        let bad = |field: &str, message: String| Error::ConfigValue {
            field: field.into(),
            message,
        };
        match &self.kind {
            TaskKind::PretrainTarget {
                radius_min,
                radius_max,
            } => {
                if !(*radius_min > 0.0 && radius_max >= radius_min && radius_max.is_finite()) {
                    return Err(bad(
                        "radius",
                        format!("need 0 < min <= max, got [{radius_min}, {radius_max}]"),
                    ));
                }
            }
            TaskKind::SparseSeek {
                distance,
                region_radius,
                cone_half_angle,
            } => {
                if !(*distance > 0.0 && distance.is_finite()) {
                    return Err(bad("distance", format!("must be positive, got {distance}")));
                }
                if !(*region_radius > 0.0 && region_radius.is_finite()) {
                    return Err(bad(
                        "region_radius",
                        format!("must be positive, got {region_radius}"),
                    ));
                }
                if !(*cone_half_angle > 0.0 && *cone_half_angle <= std::f64::consts::PI) {
                    return Err(bad(
                        "cone_half_angle",
                        format!("must be in (0, pi], got {cone_half_angle}"),
                    ));
                }
            }
            TaskKind::Canyon {
                exit_grace,
                n_rays,
                fan,
                max_range,
                ..
            } => {
                if *n_rays < 2 {
                    return Err(bad("n_rays", format!("need at least 2, got {n_rays}")));
                }
                if !(*fan > 0.0 && *fan < std::f64::consts::TAU) {
                    return Err(bad("fan", format!("must be in (0, 2pi), got {fan}")));
                }
                if !(*max_range > 0.0 && max_range.is_finite()) {
                    return Err(bad(
                        "max_range",
                        format!("must be positive, got {max_range}"),
                    ));
                }
                if *exit_grace == 0 {
                    return Err(bad("exit_grace", "must be positive".into()));
                }
            }
            TaskKind::MultiTrack {
                radius,
                weight,
                speed_cap,
                ..
            } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(bad("radius", format!("must be positive, got {radius}")));
                }
                if !(*weight >= 0.0 && weight.is_finite()) {
                    return Err(bad(
                        "weight",
                        format!("must be nonnegative, got {weight}"),
                    ));
                }
                if !(*speed_cap > 0.0) {
                    return Err(bad(
                        "speed_cap",
                        format!("must be positive, got {speed_cap}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Width of the task-feature block appended to the proprioceptive
    /// observation.
    pub fn feature_dim(&self) -> usize {
        match &self.kind {
            TaskKind::PretrainTarget { .. } => 2,
            TaskKind::SparseSeek { .. } => 3,
            TaskKind::Canyon { n_rays, .. } => *n_rays,
            TaskKind::MultiTrack { .. } => 4,
        }
    }
}

/// What the controllers see: the proprioceptive block (low level) and
/// the task block; the high level gets both, concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub proprio: Vec<f64>,
    pub features: Vec<f64>,
}

impl Observation {
    pub fn full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.proprio.len() + self.features.len());
        v.extend_from_slice(&self.proprio);
        v.extend_from_slice(&self.features);
        v
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
}

/// One episode-stepped environment instance.
#[derive(Clone, Debug)]
pub struct SwimEnv {
    swimmer: Swimmer,
    task: TaskSpec,
    state: SwimmerState,
    target: (f64, f64),
    t: usize,
    done: bool,
    exit_at: Option<usize>,
}

impl SwimEnv {
    pub fn new(swimmer: Swimmer, task: TaskSpec) -> Result<Self> {
        task.validate()?;
        let state = swimmer.rest_state(0.0, &vec![0.0; swimmer.params.n_links - 1])?;
        Ok(SwimEnv {
            swimmer,
            task,
            state,
            target: (0.0, 0.0),
            t: 0,
            done: true,
            exit_at: None,
        })
    }

    pub fn swimmer(&self) -> &Swimmer {
        &self.swimmer
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn state(&self) -> &SwimmerState {
        &self.state
    }

    pub fn target(&self) -> (f64, f64) {
        self.target
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn obs_dim(&self) -> usize {
        self.swimmer.proprio_dim() + self.task.feature_dim()
    }

    /// Starts a fresh episode; everything random is a pure function of
    /// the seed.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.swimmer.params.n_links;
        let joint_bound = 30f64.to_radians();
        let joints: Vec<f64> = (0..n - 1)
            .map(|_| rng.gen_range(-joint_bound..joint_bound))
            .collect();

        match &self.task.kind {
            TaskKind::Canyon { canyon, .. } => {
                let (sx, sy) = canyon.start();
                let (dx, dy) = canyon.start_direction();
                let heading = dy.atan2(dx);
                self.state = self.swimmer.rest_state(heading, &joints).unwrap();
                self.state.x = sx + dx;
                self.state.y = sy + dy;
                self.target = (0.0, 0.0);
            }
            TaskKind::MultiTrack { .. } => {
                self.state = self.swimmer.rest_state(0.0, &joints).unwrap();
                self.target = (0.0, 0.0);
            }
            TaskKind::PretrainTarget {
                radius_min,
                radius_max,
            } => {
                let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                self.state = self.swimmer.rest_state(heading, &joints).unwrap();
                let r = rng.gen_range(*radius_min..=*radius_max);
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                self.target = (r * theta.cos(), r * theta.sin());
            }
            TaskKind::SparseSeek { distance, .. } => {
                let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                self.state = self.swimmer.rest_state(heading, &joints).unwrap();
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                self.target = (distance * theta.cos(), distance * theta.sin());
            }
        }
        self.t = 0;
        self.done = false;
        self.exit_at = None;
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        self.swimmer.step(&mut self.state, action)?;
        self.t += 1;
        let reward = self.reward();
        if self.t >= self.task.horizon {
            self.done = true;
        }
        if let TaskKind::Canyon { exit_grace, .. } = &self.task.kind {
            if let Some(at) = self.exit_at {
                if self.t >= at + exit_grace {
                    self.done = true;
                }
            }
        }
        Ok(StepResult {
            obs: self.observe(),
            reward,
            done: self.done,
        })
    }

    fn reward(&mut self) -> f64 {
        let (hx, hy) = self.state.head();
        match &self.task.kind {
            TaskKind::PretrainTarget { .. } => {
                let (tx, ty) = self.target;
                -((hx - tx).powi(2) + (hy - ty).powi(2)).sqrt()
            }
            TaskKind::SparseSeek { region_radius, .. } => {
                let (tx, ty) = self.target;
                let d2 = (hx - tx).powi(2) + (hy - ty).powi(2);
                if d2 <= region_radius * region_radius {
                    1.0
                } else {
                    0.0
                }
            }
            TaskKind::Canyon { canyon, .. } => {
                if self.exit_at.is_none() && canyon.past_exit(hx, hy) {
                    self.exit_at = Some(self.t);
                    10.0
                } else {
                    0.0
                }
            }
            TaskKind::MultiTrack {
                shape,
                radius,
                weight,
                speed_cap,
            } => {
                let frame = track_frame(*shape, *radius, hx, hy);
                let v_along = self.state.vx * frame.tangent.0 + self.state.vy * frame.tangent.1;
                v_along.min(*speed_cap) - weight * frame.dist * frame.dist
            }
        }
    }

    fn observe(&self) -> Observation {
        let proprio = self.swimmer.proprio(&self.state);
        let (hx, hy) = self.state.head();
        let heading = self.state.heading();
        let (sin, cos) = heading.sin_cos();
        let ego = |wx: f64, wy: f64| (wx * cos + wy * sin, -wx * sin + wy * cos);

        let features = match &self.task.kind {
            TaskKind::PretrainTarget { .. } => {
                let (ex, ey) = ego(self.target.0 - hx, self.target.1 - hy);
                vec![ex, ey]
            }
            TaskKind::SparseSeek {
                cone_half_angle, ..
            } => {
                let (ex, ey) = ego(self.target.0 - hx, self.target.1 - hy);
                if ey.atan2(ex).abs() <= *cone_half_angle {
                    vec![ex, ey, 1.0]
                } else {
                    vec![0.0, 0.0, 0.0]
                }
            }
            TaskKind::Canyon {
                canyon,
                n_rays,
                fan,
                max_range,
                ..
            } => canyon.depth_strip(hx, hy, heading, *n_rays, *fan, *max_range),
            TaskKind::MultiTrack { shape, radius, .. } => {
                let frame = track_frame(*shape, *radius, hx, hy);
                let (nx, ny) = ego(frame.nearest.0 - hx, frame.nearest.1 - hy);
                let (tx, ty) = ego(frame.tangent.0, frame.tangent.1);
                vec![nx, ny, tx, ty]
            }
        };
        Observation { proprio, features }
    }
}

struct TrackFrame {
    dist: f64,
    nearest: (f64, f64),
    tangent: (f64, f64),
}

/// Nearest track point, desired direction of travel there, and the
/// lateral deviation, for each track shape. Circles sit left and right
/// of the start so that all three tracks begin at the origin heading +x.
fn track_frame(shape: TrackShape, radius: f64, hx: f64, hy: f64) -> TrackFrame {
    match shape {
        TrackShape::Straight => TrackFrame {
            dist: hy.abs(),
            nearest: (hx, 0.0),
            tangent: (1.0, 0.0),
        },
        TrackShape::LeftCircle | TrackShape::RightCircle => {
            let cy = if shape == TrackShape::LeftCircle {
                radius
            } else {
                -radius
            };
            let dx = hx;
            let dy = hy - cy;
            let len = (dx * dx + dy * dy).sqrt();
            let (rx, ry) = if len > 1e-9 {
                (dx / len, dy / len)
            } else {
                (0.0, -cy.signum())
            };
            let tangent = if shape == TrackShape::LeftCircle {
                (-ry, rx)
            } else {
                (ry, -rx)
            };
            TrackFrame {
                dist: (len - radius).abs(),
                nearest: (radius * rx, cy + radius * ry),
                tangent,
            }
        }
    }
}

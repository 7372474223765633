use crate::error::{Error, Result};

/// Physical constants of the chain. Lengths in meters, masses in kg,
/// torques in N·m, drag coefficients in N·s/m per link.
#[derive(Clone, Copy, Debug)]
pub struct SwimmerParams {
    pub n_links: usize,
    /// Control timestep; each call to `step` advances this far.
    pub dt: f64,
    /// Integration substeps per control timestep.
    pub substeps: usize,
    pub link_length: f64,
    pub link_mass: f64,
    /// Drag against motion normal to a link. Much larger than the
    /// tangential drag; the asymmetry is what lets undulation push the
    /// body forward.
    pub k_normal: f64,
    pub k_tangent: f64,
    pub torque_gain: f64,
    /// Joint angle (rad) beyond which the limit spring engages.
    pub joint_limit: f64,
    pub limit_stiffness: f64,
}

impl Default for SwimmerParams {
    fn default() -> Self {
        SwimmerParams {
            n_links: 6,
            dt: 0.01,
            substeps: 4,
            link_length: 0.1,
            link_mass: 1.0,
            k_normal: 10.0,
            k_tangent: 0.1,
            torque_gain: 1.0,
            joint_limit: 100f64.to_radians(),
            limit_stiffness: 5.0,
        }
    }
}

impl SwimmerParams {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 8] = [
            ("dt", self.dt),
            ("link_length", self.link_length),
            ("link_mass", self.link_mass),
            ("k_normal", self.k_normal),
            ("k_tangent", self.k_tangent),
            ("torque_gain", self.torque_gain),
            ("joint_limit", self.joint_limit),
            ("limit_stiffness", self.limit_stiffness),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::ConfigValue {
                    field: field.into(),
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if self.n_links < 2 {
            return Err(Error::ConfigValue {
                field: "n_links".into(),
                message: format!("a chain needs at least 2 links, got {}", self.n_links),
            });
        }
        if self.substeps == 0 {
            return Err(Error::ConfigValue {
                field: "substeps".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Generalized coordinates and their rates. (x, y) is the center of the
/// head link; phi are world-frame link angles, head first; joint angles
/// are the differences q_i = phi_{i+1} - phi_i.
#[derive(Clone, Debug, PartialEq)]
pub struct SwimmerState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
}

impl SwimmerState {
    pub fn heading(&self) -> f64 {
        self.phi[0]
    }

    pub fn head(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn joint_angles(&self) -> Vec<f64> {
        self.phi.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn joint_rates(&self) -> Vec<f64> {
        self.phi_dot.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.vx, self.vy]
            .iter()
            .all(|v| v.is_finite())
            && self.phi.iter().all(|v| v.is_finite())
            && self.phi_dot.iter().all(|v| v.is_finite())
    }
}

/// Dynamics engine. Holds the chain coefficients c[i][j] such that link
/// center i sits at (x, y) + sum_j c_ij u(phi_j) with u = (cos, sin);
/// they depend only on the link count and length, so they are fixed at
/// construction along with their column sums and products.
#[derive(Clone, Debug)]
pub struct Swimmer {
    pub params: SwimmerParams,
    c: Vec<f64>,
    col_sum: Vec<f64>,
    col_prod: Vec<f64>,
}

impl Swimmer {
    pub fn new(params: SwimmerParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_links;
        let l = params.link_length;
        let mut c = vec![0.0; n * n];
        for i in 1..n {
            c[i * n] = -l / 2.0;
            for j in 1..i {
                c[i * n + j] = -l;
            }
            c[i * n + i] = -l / 2.0;
        }
        let mut col_sum = vec![0.0; n];
        let mut col_prod = vec![0.0; n * n];
        for j in 0..n {
            col_sum[j] = (0..n).map(|i| c[i * n + j]).sum();
            for k in 0..n {
                col_prod[j * n + k] = (0..n).map(|i| c[i * n + j] * c[i * n + k]).sum();
            }
        }
        Ok(Swimmer {
            params,
            c,
            col_sum,
            col_prod,
        })
    }

    /// State at rest: head center at the origin, link angles built up from
    /// the heading and the given joint angles, everything still.
    pub fn rest_state(&self, heading: f64, joints: &[f64]) -> Result<SwimmerState> {
        let n = self.params.n_links;
        if joints.len() != n - 1 {
            return Err(Error::BadAction {
                got: joints.len(),
                expected: n - 1,
                n_links: n,
            });
        }
        let mut phi = Vec::with_capacity(n);
        phi.push(heading);
        for q in joints {
            phi.push(phi.last().unwrap() + q);
        }
        Ok(SwimmerState {
            x: 0.0,
            y: 0.0,
            vx: 0.0,
            vy: 0.0,
            phi,
            phi_dot: vec![0.0; n],
        })
    }

    pub fn link_centers(&self, s: &SwimmerState) -> Vec<(f64, f64)> {
        let n = self.params.n_links;
        (0..n)
            .map(|i| {
                let mut gx = s.x;
                let mut gy = s.y;
                for j in 0..=i {
                    gx += self.c[i * n + j] * s.phi[j].cos();
                    gy += self.c[i * n + j] * s.phi[j].sin();
                }
                (gx, gy)
            })
            .collect()
    }

    pub fn link_velocities(&self, s: &SwimmerState) -> Vec<(f64, f64)> {
        let n = self.params.n_links;
        (0..n)
            .map(|i| {
                let mut vx = s.vx;
                let mut vy = s.vy;
                for j in 0..=i {
                    let cw = self.c[i * n + j] * s.phi_dot[j];
                    vx += cw * -s.phi[j].sin();
                    vy += cw * s.phi[j].cos();
                }
                (vx, vy)
            })
            .collect()
    }

    /// Proprioceptive observation: joint angles, joint rates, then each
    /// link's center velocity in its own frame (tangential, normal).
    /// Contains no absolute position, orientation, or task information.
    pub fn proprio(&self, s: &SwimmerState) -> Vec<f64> {
        let n = self.params.n_links;
        let mut out = Vec::with_capacity(4 * n - 2);
        out.extend(s.joint_angles());
        out.extend(s.joint_rates());
        for (i, (vx, vy)) in self.link_velocities(s).iter().enumerate() {
            let (sin, cos) = s.phi[i].sin_cos();
            out.push(vx * cos + vy * sin);
            out.push(-vx * sin + vy * cos);
        }
        out
    }

    pub fn proprio_dim(&self) -> usize {
        4 * self.params.n_links - 2
    }

    pub fn kinetic_energy(&self, s: &SwimmerState) -> f64 {
        let p = &self.params;
        let rod = p.link_mass * p.link_length * p.link_length / 12.0;
        let translation: f64 = self
            .link_velocities(s)
            .iter()
            .map(|(vx, vy)| 0.5 * p.link_mass * (vx * vx + vy * vy))
            .sum();
        let rotation: f64 = s.phi_dot.iter().map(|w| 0.5 * rod * w * w).sum();
        translation + rotation
    }

    /// Advances the state by one control timestep under the given joint
    /// torque command (clipped to [-1, 1] before the gain).
    pub fn step(&self, s: &mut SwimmerState, action: &[f64]) -> Result<()> {
        let n = self.params.n_links;
        if action.len() != n - 1 {
            return Err(Error::BadAction {
                got: action.len(),
                expected: n - 1,
                n_links: n,
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                context: "torque command".into(),
            });
        }
        let torques: Vec<f64> = action
            .iter()
            .map(|a| a.clamp(-1.0, 1.0) * self.params.torque_gain)
            .collect();
        let h = self.params.dt / self.params.substeps as f64;
        for _ in 0..self.params.substeps {
            self.substep(s, &torques, h)?;
        }
        if !s.is_finite() {
            return Err(Error::NonFiniteState);
        }
        Ok(())
    }

    fn substep(&self, s: &mut SwimmerState, torques: &[f64], h: f64) -> Result<()> {
        let n = self.params.n_links;
        let p = &self.params;
        let dim = n + 2;
        let m = p.link_mass;
        let rod = m * p.link_length * p.link_length / 12.0;

        let cos: Vec<f64> = s.phi.iter().map(|a| a.cos()).collect();
        let sin: Vec<f64> = s.phi.iter().map(|a| a.sin()).collect();

        // Link center velocities and centripetal terms w_i = J̇_i q̇.
        let mut vel = vec![(0.0, 0.0); n];
        let mut cent = vec![(0.0, 0.0); n];
        for i in 0..n {
            let mut vx = s.vx;
            let mut vy = s.vy;
            let mut wx = 0.0;
            let mut wy = 0.0;
            for j in 0..=i {
                let cij = self.c[i * n + j];
                vx += cij * s.phi_dot[j] * -sin[j];
                vy += cij * s.phi_dot[j] * cos[j];
                let sq = cij * s.phi_dot[j] * s.phi_dot[j];
                wx -= sq * cos[j];
                wy -= sq * sin[j];
            }
            vel[i] = (vx, vy);
            cent[i] = (wx, wy);
        }

        // Anisotropic viscous drag on each link center.
        let mut force = vec![(0.0, 0.0); n];
        for i in 0..n {
            let (vx, vy) = vel[i];
            let vt = vx * cos[i] + vy * sin[i];
            let vn = -vx * sin[i] + vy * cos[i];
            let ft = -p.k_tangent * vt;
            let fn_ = -p.k_normal * vn;
            force[i] = (ft * cos[i] - fn_ * sin[i], ft * sin[i] + fn_ * cos[i]);
        }

        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            rhs[0] += force[i].0 - m * cent[i].0;
            rhs[1] += force[i].1 - m * cent[i].1;
        }
        for j in 0..n {
            let mut acc = 0.0;
            for i in j..n {
                let cij = self.c[i * n + j];
                if cij != 0.0 {
                    let (fx, fy) = force[i];
                    let (wx, wy) = cent[i];
                    acc += cij * (-sin[j] * (fx - m * wx) + cos[j] * (fy - m * wy));
                }
            }
            // Distributed drag also resists the link's own spin.
            acc -= p.k_normal * p.link_length * p.link_length / 12.0 * s.phi_dot[j];
            rhs[2 + j] = acc;
        }
        for jt in 0..n - 1 {
            let q = s.phi[jt + 1] - s.phi[jt];
            let over = q - q.clamp(-p.joint_limit, p.joint_limit);
            let tau = torques[jt] - p.limit_stiffness * over;
            rhs[2 + jt + 1] += tau;
            rhs[2 + jt] -= tau;
        }

        let mut mass = vec![0.0; dim * dim];
        mass[0] = n as f64 * m;
        mass[dim + 1] = n as f64 * m;
        for j in 0..n {
            let sx = m * self.col_sum[j] * -sin[j];
            let sy = m * self.col_sum[j] * cos[j];
            mass[2 + j] = sx;
            mass[(2 + j) * dim] = sx;
            mass[dim + 2 + j] = sy;
            mass[(2 + j) * dim + 1] = sy;
            for k in 0..n {
                let angle = cos[j] * cos[k] + sin[j] * sin[k];
                let mut v = m * self.col_prod[j * n + k] * angle;
                if j == k {
                    v += rod;
                }
                mass[(2 + j) * dim + 2 + k] = v;
            }
        }

        solve_spd(&mut mass, &mut rhs, dim)?;

        s.vx += h * rhs[0];
        s.vy += h * rhs[1];
        for j in 0..n {
            s.phi_dot[j] += h * rhs[2 + j];
        }
        s.x += h * s.vx;
        s.y += h * s.vy;
        for j in 0..n {
            s.phi[j] += h * s.phi_dot[j];
        }
        Ok(())
    }
}

/// Solves a x = b in place for symmetric positive definite a (row-major,
/// n x n) via Cholesky; b becomes the solution.
fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NonFiniteState);
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

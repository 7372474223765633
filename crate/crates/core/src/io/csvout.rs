//! CSV emission for trajectories, learning curves, and grid tables.
//! Files are always rewritten whole through [`write_atomic`], so readers
//! never observe a partial file; numbers use Rust's shortest
//! round-trippable float formatting.

use std::fmt::Write as _;
use std::path::Path;

use super::checkpoint::write_atomic;
use crate::env::SwimmerState;
use crate::error::Result;
use crate::learn::CurvePoint;

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub const CURVE_HEADER: &str = "episode,mean_return,mean_episode_length,sigma_mean";

pub fn curve_row(p: &CurvePoint) -> String {
    format!(
        "{},{},{},{}",
        p.episode, p.mean_return, p.mean_episode_length, p.sigma_mean
    )
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let rows: Vec<String> = curve.iter().map(curve_row).collect();
    write_csv(path, CURVE_HEADER, &rows)
}

/// `t,x_head,y_head,phi_1..phi_N,q_1..q_{N-1},reward` for an N-link body.
pub fn trajectory_header(n_links: usize) -> String {
    let mut h = String::from("t,x_head,y_head");
    for i in 1..=n_links {
        write!(h, ",phi_{i}").unwrap();
    }
    for i in 1..n_links {
        write!(h, ",q_{i}").unwrap();
    }
    h.push_str(",reward");
    h
}

pub fn trajectory_row(t: usize, state: &SwimmerState, reward: f64) -> String {
    let mut row = format!("{},{},{}", t, state.x, state.y);
    for phi in &state.phi {
        write!(row, ",{phi}").unwrap();
    }
    for q in state.joint_angles() {
        write!(row, ",{q}").unwrap();
    }
    write!(row, ",{reward}").unwrap();
    row
}

pub const GRID_HEADER: &str = "cell_id,alpha,beta,lambda,lambda_prime,W,seed,final_return";

#[derive(Clone, Copy, Debug)]
pub struct GridRow {
    pub cell_id: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub window: usize,
    pub seed: u64,
    /// NaN marks a run that crashed; the CSV cell is left empty.
    pub final_return: f64,
}

pub fn grid_row(r: &GridRow) -> String {
    let score = if r.final_return.is_nan() {
        String::new()
    } else {
        format!("{}", r.final_return)
    };
    format!(
        "{},{},{},{},{},{},{},{}",
        r.cell_id, r.alpha, r.beta, r.lambda, r.lambda_prime, r.window, r.seed, score
    )
}

pub fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    let rows: Vec<String> = rows.iter().map(grid_row).collect();
    write_csv(path, GRID_HEADER, &rows)
}

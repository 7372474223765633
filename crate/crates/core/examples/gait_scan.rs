//! Sweeps open-loop sinusoidal gaits over drive frequency and phase lag,
//! printing the distance covered in 500 and 800 control steps. Used to
//! choose the scripted gait in the propulsion tests and to sanity-check
//! what speeds the chain can reach at all.

use spinal_core::env::{Swimmer, SwimmerParams};

fn run(sw: &Swimmer, omega: f64, lag: f64, amp: f64, square: bool, steps: usize) -> (f64, f64) {
    let n = sw.params.n_links;
    let mut s = sw.rest_state(0.0, &vec![0.0; n - 1]).unwrap();
    let mut at_500 = 0.0;
    for step in 0..steps {
        let t = step as f64 * sw.params.dt;
        let action: Vec<f64> = (0..n - 1)
            .map(|j| {
                let w = (omega * t + j as f64 * lag).sin();
                amp * if square { w.signum() } else { w }
            })
            .collect();
        sw.step(&mut s, &action).unwrap();
        if step + 1 == 500 {
            at_500 = (s.x * s.x + s.y * s.y).sqrt();
        }
    }
    ((s.x * s.x + s.y * s.y).sqrt(), at_500)
}

fn main() {
    let n_links: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(3);
    let sw = Swimmer::new(SwimmerParams {
        n_links,
        ..SwimmerParams::default()
    })
    .unwrap();
    let body = n_links as f64 * sw.params.link_length;
    println!("links={n_links} body_length={body:.2}m");
    println!("omega  lag   amp   d(500)  d(800)  bodies/500");

    let square = std::env::args().nth(2).as_deref() == Some("square");
    let amp: f64 = std::env::args()
        .nth(3)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1.0);
    let mut best = (0.0, 0.0, 0.0);
    let mut best500 = (0.0, 0.0, 0.0);
    let omegas: Vec<f64> = (0..24).map(|i| 4.0 + i as f64).collect();
    let lags: Vec<f64> = (0..14).map(|i| 0.4 + 0.2 * i as f64).collect();
    for &omega in &omegas {
        for &lag in &lags {
            let (d800, d500) = run(&sw, omega, lag, amp, square, 800);
            if d500 / body > 1.5 {
                println!(
                    "{omega:5.1} {lag:5.2} {amp:5.2} {d500:7.3} {d800:7.3} {:9.2}",
                    d500 / body
                );
            }
            if d800 > best.2 {
                best = (omega, lag, d800);
            }
            if d500 > best500.2 {
                best500 = (omega, lag, d500);
            }
        }
    }
    println!(
        "best800: omega={} lag={} -> {:.3} m ({:.3} m/s), square={square} amp={amp}",
        best.0,
        best.1,
        best.2,
        best.2 / 8.0
    );
    println!(
        "best500: omega={} lag={} -> {:.3} m = {:.2} bodies",
        best500.0,
        best500.1,
        best500.2,
        best500.2 / body
    );
}

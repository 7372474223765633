use crate::error::{Error, Result};

fn check_window(rewards: &[f64], values: &[f64], gamma: f64) -> Result<()> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::BadOperand {
            op: "lambda_returns",
            message: format!(
                "need one value per step plus a bootstrap: {} rewards, {} values",
                rewards.len(),
                values.len()
            ),
        });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::BadOperand {
            op: "lambda_returns",
            message: format!("gamma must be in [0, 1), got {gamma}"),
        });
    }
    if rewards.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "return computation inputs".into(),
        });
    }
    Ok(())
}

/// k-step bootstrapped return from step t: the discounted reward sum
/// r_t .. r_{t+k} plus gamma^{k+1} times the value at t+k+1. `values[i]`
/// is the state value before reward i, with one extra trailing entry for
/// the bootstrap (zero if the window ends the episode).
pub fn k_step_return(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    k: usize,
    t: usize,
) -> Result<f64> {
    check_window(rewards, values, gamma)?;
    if t + k + 1 >= values.len() {
        return Err(Error::BadOperand {
            op: "k_step_return",
            message: format!(
                "t + k + 1 = {} reaches past the window of {} steps",
                t + k + 1,
                rewards.len()
            ),
        });
    }
    let mut acc = 0.0;
    let mut disc = 1.0;
    for j in 0..=k {
        acc += disc * rewards[t + j];
        disc *= gamma;
    }
    Ok(acc + disc * values[t + k + 1])
}

/// Lambda-returns for a whole window by the backward recursion
/// R_t = r_t + gamma ((1 - lambda) V_{t+1} + lambda R_{t+1}), seeded with
/// the bootstrap value. Equivalent to the normalized mixture of k-step
/// returns truncated at the window edge.
pub fn lambda_returns(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_window(rewards, values, gamma)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::BadOperand {
            op: "lambda_returns",
            message: format!("lambda must be in [0, 1], got {lambda}"),
        });
    }
    let w = rewards.len();
    let mut out = vec![0.0; w];
    let mut next = values[w];
    for t in (0..w).rev() {
        next = rewards[t] + gamma * ((1.0 - lambda) * values[t + 1] + lambda * next);
        out[t] = next;
    }
    Ok(out)
}

/// The same mixture written out longhand: (1 - lambda) sum_k lambda^k R^k_t
/// over the k that fit in the window, with the tail mass lambda^K on the
/// longest return. Exists as an independent check on the recursion.
pub fn lambda_return_mixture(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
    t: usize,
) -> Result<f64> {
    check_window(rewards, values, gamma)?;
    let k_max = rewards.len() - 1 - t;
    let mut acc = 0.0;
    let mut weight = 1.0;
    for k in 0..k_max {
        acc += (1.0 - lambda) * weight * k_step_return(rewards, values, gamma, k, t)?;
        weight *= lambda;
    }
    acc += weight * k_step_return(rewards, values, gamma, k_max, t)?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_summed_two_step_return() {
        let rewards = [1.0, 0.0, 1.0];
        let values = [0.5, 0.5, 0.5, 0.5];
        let r = k_step_return(&rewards, &values, 0.9, 2, 0).unwrap();
        assert!((r - 2.1745).abs() < 1e-12, "{r}");
    }

    #[test]
    fn zero_step_return_is_one_step_td() {
        let rewards = [2.0, -1.0];
        let values = [0.0, 3.0, 5.0];
        let r = k_step_return(&rewards, &values, 0.5, 0, 0).unwrap();
        assert_eq!(r, 2.0 + 0.5 * 3.0);
        let r = k_step_return(&rewards, &values, 0.5, 0, 1).unwrap();
        assert_eq!(r, -1.0 + 0.5 * 5.0);
    }

    #[test]
    fn terminal_window_bootstraps_zero() {
        let rewards = [3.0];
        let values = [0.7, 0.0];
        assert_eq!(k_step_return(&rewards, &values, 0.9, 0, 0).unwrap(), 3.0);
    }

    #[test]
    fn out_of_range_indices_are_errors() {
        let rewards = [1.0, 1.0];
        let values = [0.0, 0.0, 0.0];
        assert!(k_step_return(&rewards, &values, 0.9, 2, 0).is_err());
        assert!(k_step_return(&rewards, &values, 0.9, 0, 2).is_err());
        assert!(lambda_returns(&rewards, &values[..2], 0.9, 0.5).is_err());
        assert!(lambda_returns(&rewards, &values, 1.0, 0.5).is_err());
        assert!(lambda_returns(&rewards, &values, 0.9, 1.5).is_err());
    }

    #[test]
    fn lambda_zero_is_one_step_td_everywhere() {
        let rewards = [1.0, 2.0, 3.0];
        let values = [0.1, 0.2, 0.3, 0.4];
        let out = lambda_returns(&rewards, &values, 0.8, 0.0).unwrap();
        for t in 0..3 {
            assert!((out[t] - (rewards[t] + 0.8 * values[t + 1])).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_one_terminal_window_is_the_monte_carlo_return() {
        let rewards = [1.0, 0.0, 2.0];
        let values = [9.0, 9.0, 9.0, 0.0];
        let gamma = 0.9;
        let out = lambda_returns(&rewards, &values, gamma, 1.0).unwrap();
        assert!((out[0] - (1.0 + 0.0 + gamma * gamma * 2.0)).abs() < 1e-15);
        assert!((out[1] - gamma * 2.0).abs() < 1e-15);
        assert!((out[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spec_example_window_matches_the_mixture() {
        let rewards = [1.0, 0.0, 1.0];
        let values = [0.2, 0.2, 0.2, 0.0];
        let rec = lambda_returns(&rewards, &values, 0.9, 0.5).unwrap();
        for t in 0..3 {
            let mixture = lambda_return_mixture(&rewards, &values, 0.9, 0.5, t).unwrap();
            assert!((rec[t] - mixture).abs() < 1e-12, "t={t}: {} vs {mixture}", rec[t]);
        }
    }

    #[test]
    fn recursion_equals_mixture_on_random_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let w = 10;
            let rewards: Vec<f64> = (0..w).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut values: Vec<f64> = (0..=w).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if rng.gen_bool(0.5) {
                values[w] = 0.0;
            }
            let gamma = rng.gen_range(0.0..0.999);
            let lambda = rng.gen_range(0.0..=1.0);
            let rec = lambda_returns(&rewards, &values, gamma, lambda).unwrap();
            for t in 0..w {
                let mixture =
                    lambda_return_mixture(&rewards, &values, gamma, lambda, t).unwrap();
                assert!(
                    (rec[t] - mixture).abs() < 1e-12,
                    "t={t} gamma={gamma} lambda={lambda}: {} vs {mixture}",
                    rec[t]
                );
            }
        }
    }
}

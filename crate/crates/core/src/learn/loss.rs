use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Entropy of a diagonal Gaussian with the given sigma vector:
/// sum_i ln sigma_i + d/2 ln(2 pi e).
pub fn gaussian_entropy(tape: &mut Tape, sigma: Var) -> Result<Var> {
    let d = tape.value(sigma).len() as f64;
    let logs = tape.ln(sigma)?;
    let total = tape.sum(logs)?;
    tape.affine(
        total,
        1.0,
        0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln(),
    )
}

/// Score-function surrogate with entropy bonus:
/// -sum_t logp_t * adv_t - eta * sum_t H_t.
///
/// Advantages are plain numbers, never tape nodes, so no gradient can
/// flow through them by construction. The log-probabilities carry the
/// whole differentiable structure: the action heads directly, and the
/// held control pathwise where it was reparameterized.
pub fn policy_loss(
    tape: &mut Tape,
    logps: &[Var],
    advantages: &[f64],
    entropies: &[Var],
    eta: f64,
) -> Result<Var> {
    if logps.is_empty() || logps.len() != advantages.len() {
        return Err(Error::BadOperand {
            op: "policy_loss",
            message: format!(
                "need matching nonempty logps and advantages, got {} and {}",
                logps.len(),
                advantages.len()
            ),
        });
    }
    if eta != 0.0 && entropies.len() != logps.len() {
        return Err(Error::BadOperand {
            op: "policy_loss",
            message: format!(
                "entropy bonus needs one entropy per step, got {} for {} steps",
                entropies.len(),
                logps.len()
            ),
        });
    }
    if !(eta >= 0.0) || advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            context: "policy loss coefficients".into(),
        });
    }
    let mut terms = Vec::with_capacity(2 * logps.len());
    for (logp, adv) in logps.iter().zip(advantages) {
        terms.push(tape.affine(*logp, -adv, 0.0)?);
    }
    if eta != 0.0 {
        for h in entropies {
            terms.push(tape.affine(*h, -eta, 0.0)?);
        }
    }
    let stack = tape.concat(&terms)?;
    tape.sum(stack)
}

/// Half sum of squared errors against fixed targets:
/// 1/2 sum_t (V_t - target_t)^2. Targets are plain numbers (the paper's
/// "we do not differentiate with respect to them" is enforced by type).
pub fn value_loss(tape: &mut Tape, values: &[Var], targets: &[f64]) -> Result<Var> {
    if values.is_empty() || values.len() != targets.len() {
        return Err(Error::BadOperand {
            op: "value_loss",
            message: format!(
                "need matching nonempty values and targets, got {} and {}",
                values.len(),
                targets.len()
            ),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite {
            context: "value targets".into(),
        });
    }
    let mut terms = Vec::with_capacity(values.len());
    for (v, target) in values.iter().zip(targets) {
        let d = tape.affine(*v, 1.0, -target)?;
        terms.push(tape.mul(d, d)?);
    }
    let stack = tape.concat(&terms)?;
    let total = tape.sum(stack)?;
    tape.affine(total, 0.5, 0.0)
}

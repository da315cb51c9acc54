use crate::error::{Error, Result};

/// Generalized advantage estimates for one environment's sequence.
///
/// `values` carries one trailing bootstrap entry. A done flag at `t` ends
/// the episode, so neither the bootstrap nor later advantages leak back.
pub fn gae_advantages(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(Error::dim("gae values", n + 1, values.len()));
    }
    if dones.len() != n {
        return Err(Error::dim("gae dones", n, dones.len()));
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * values[t + 1] - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    Ok(adv)
}

/// Lambda-return value targets, `A_t + V_t`.
pub fn td_lambda_targets(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let adv = gae_advantages(rewards, values, dones, gamma, lambda)?;
    Ok(adv.iter().zip(values).map(|(a, v)| a + v).collect())
}

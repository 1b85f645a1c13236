/// Raw advantages and value targets.
///
/// `δ_t = r_t + γ (1 − terminal_t) V(s'_t) − V(s_t)` and
/// `A_t = δ_t + γλ A_{t+1}`, with the recursion cut at episode boundaries
/// and at the end of the batch. Truncated episodes bootstrap through
/// `V(s'_t)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminated: &[bool],
    boundary: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(
        values.len() == n && next_values.len() == n && terminated.len() == n && boundary.len() == n,
        "batch columns differ in length"
    );
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let bootstrap = if terminated[t] { 0.0 } else { gamma * next_values[t] };
        let delta = rewards[t] + bootstrap - values[t];
        if boundary[t] || t + 1 == n {
            running = 0.0;
        }
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// Shifts and scales to zero mean and unit population variance.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Normalized advantages plus unnormalized value targets.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminated: &[bool],
    boundary: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (mut adv, targets) = gae(rewards, values, next_values, terminated, boundary, gamma, lambda);
    normalize_advantages(&mut adv);
    (adv, targets)
}

use super::env::Trajectory;
use super::policy::PolicyParams;
use super::GrpoError;

/// The trajectories sampled for one prompt and their advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub trajectories: Vec<Trajectory>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `-Σ A Σ_t log π` part.
    pub policy_term: f64,
    /// Mean per-state KL(π_θ ‖ π_ref) over visited states.
    pub kl: f64,
    pub grad: Vec<f64>,
}

/// Policy-gradient loss with KL anchoring:
///
/// `L = -Σ_groups Σ_i A_i Σ_t log π_θ(a_t | s_t) + β · KL`
///
/// where KL is the exact KL(π_θ(·|s) ‖ π_ref(·|s)) averaged over every state
/// occurrence in the batch. Returns the analytic gradient with respect to
/// `policy.theta`.
pub fn grpo_loss(groups: &[Group], policy: &PolicyParams, beta: f64) -> Result<LossOutput, GrpoError> {
    let layout = &policy.layout;
    let t = policy.temperature;
    let mut grad = vec![0.0; layout.n_params()];
    let mut policy_term = 0.0;
    let mut kl_sum = 0.0;
    let mut n_states = 0usize;
    let mut kl_grads: Vec<(usize, f64)> = Vec::new();

    for group in groups {
        for (traj, &adv) in group.trajectories.iter().zip(&group.advantages) {
            for (state, &action) in traj.states().iter().zip(&traj.actions) {
                let logp = layout.log_probs(&policy.theta, state, t);
                let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
                policy_term -= adv * logp[action];
                // d(-A log π_a)/dz_j = -A (1{j=a} - π_j); z = θ·φ / T.
                for (j, pj) in p.iter().enumerate() {
                    let dz = -adv * (f64::from(u8::from(j == action)) - pj) / t;
                    for i in layout.active(state, j) {
                        grad[i] += dz;
                    }
                }

                let logr = layout.log_probs(policy.reference(), state, t);
                let kl: f64 = p.iter().zip(logp.iter().zip(&logr)).map(|(pj, (lp, lr))| pj * (lp - lr)).sum();
                kl_sum += kl;
                n_states += 1;
                // dKL/dz_j = π_j (log π_j - log ρ_j - KL).
                for (j, pj) in p.iter().enumerate() {
                    let dz = pj * (logp[j] - logr[j] - kl) / t;
                    for i in layout.active(state, j) {
                        kl_grads.push((i, dz));
                    }
                }
            }
        }
    }

    let kl = if n_states == 0 { 0.0 } else { kl_sum / n_states as f64 };
    if n_states > 0 {
        let w = beta / n_states as f64;
        for (i, g) in kl_grads {
            grad[i] += w * g;
        }
    }
    let loss = policy_term + beta * kl;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(GrpoError::NonFiniteLoss {
            step: None,
            checkpoint: Box::new(policy.clone()),
        });
    }
    Ok(LossOutput {
        loss,
        policy_term,
        kl,
        grad,
    })
}

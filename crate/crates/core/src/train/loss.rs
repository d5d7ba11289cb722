use serde::{Deserialize, Serialize};

use crate::nn::{entropy, LstmState, NnError, OptimStep, PolicyNet, RmsProp, StepGrad, Tape};

/// n-step discounted returns and advantages. `dones[t]` marks an episode
/// ending after step `t`, which cuts the recursion there.
pub fn n_step_returns(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    bootstrap: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(rewards.len() == values.len() && rewards.len() == dones.len(), "sequence lengths differ");
    let mut returns = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            next = 0.0;
        }
        next = rewards[t] + gamma * next;
        returns[t] = next;
    }
    let advantages = returns.iter().zip(values).map(|(r, v)| r - v).collect();
    (returns, advantages)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Chosen index per head; `None` for heads that did not act (the
    /// target bins of a NoOp).
    pub actions: Vec<Option<usize>>,
    pub probs: Vec<Vec<f64>>,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// One recurrent sequence: the forward tape recorded while acting, the
/// state it started from and the per-step outcomes.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: LstmState,
    pub tape: Tape,
    pub steps: Vec<StepRecord>,
    /// Value estimate after the last step; ignored when it is terminal.
    pub bootstrap: f64,
}

impl Trajectory {
    pub fn new(start: LstmState) -> Self {
        Self { start, tape: Tape::new(), steps: Vec::new(), bootstrap: 0.0 }
    }

    pub fn is_closed(&self) -> bool {
        self.steps.last().is_some_and(|s| s.done)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 0.99, entropy_coef: 0.01, value_coef: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    /// `−Σ log π(a|s)·A`
    pub policy_loss: f64,
    /// `Σ (R − v)²`
    pub value_loss: f64,
    /// `Σ H(π)` over acting heads.
    pub entropy: f64,
    pub total: f64,
    pub steps: usize,
}

impl LossStats {
    pub fn add(&mut self, o: &LossStats) {
        self.policy_loss += o.policy_loss;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.total += o.total;
        self.steps += o.steps;
    }

    pub fn is_finite(&self) -> bool {
        self.policy_loss.is_finite() && self.value_loss.is_finite() && self.entropy.is_finite()
    }
}

/// A2C loss over a batch and its parameter gradient, accumulated into
/// `grads`. Advantages are constants; the policy term is the summed
/// log-probability of every acting head.
pub fn a2c_gradients(
    net: &PolicyNet,
    batch: &[Trajectory],
    cfg: &LossConfig,
    grads: &mut [f64],
) -> Result<LossStats, NnError> {
    let mut stats = LossStats::default();
    let sizes = net.head_sizes();
    for traj in batch.iter().filter(|t| !t.steps.is_empty()) {
        let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = traj.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = traj.steps.iter().map(|s| s.done).collect();
        let (returns, advantages) = n_step_returns(&rewards, &values, &dones, cfg.gamma, traj.bootstrap);
        let mut step_grads = Vec::with_capacity(traj.steps.len());
        for ((s, r), a) in traj.steps.iter().zip(&returns).zip(&advantages) {
            let mut sg = StepGrad::zeros(&sizes);
            for ((act, p), dz) in s.actions.iter().zip(&s.probs).zip(&mut sg.logits) {
                let Some(act) = *act else { continue };
                let h = entropy(p);
                stats.policy_loss -= a * p[act].ln();
                stats.entropy += h;
                for (j, (d, &pj)) in dz.iter_mut().zip(p).enumerate() {
                    let onehot = if j == act { 1.0 } else { 0.0 };
                    let log_p = if pj > 0.0 { pj.ln() } else { 0.0 };
                    *d = -a * (onehot - pj) + cfg.entropy_coef * pj * (log_p + h);
                }
            }
            stats.value_loss += (r - s.value).powi(2);
            sg.value = 2.0 * cfg.value_coef * (s.value - r);
            step_grads.push(sg);
        }
        stats.steps += traj.steps.len();
        net.backward(&traj.tape, &step_grads, grads)?;
    }
    stats.total = stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * stats.entropy;
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    /// True when the loss or gradient was non-finite and nothing changed.
    pub skipped: bool,
}

/// Apply one optimizer step from an already accumulated gradient.
pub fn apply_update(net: &mut PolicyNet, opt: &mut RmsProp, loss: LossStats, grads: &[f64]) -> UpdateStats {
    if !loss.is_finite() {
        log::warn!("non-finite loss; update skipped");
        return UpdateStats { loss, grad_norm: f64::NAN, skipped: true };
    }
    match opt.step(net.params_mut(), grads) {
        Ok(OptimStep { grad_norm, .. }) => UpdateStats { loss, grad_norm, skipped: false },
        Err(e) => {
            log::warn!("update skipped: {e}");
            UpdateStats { loss, grad_norm: f64::NAN, skipped: true }
        }
    }
}

/// Loss, gradient and one optimizer step over `batch`.
pub fn a2c_update(
    net: &mut PolicyNet,
    opt: &mut RmsProp,
    batch: &[Trajectory],
    cfg: &LossConfig,
) -> Result<UpdateStats, NnError> {
    let mut grads = vec![0.0; net.param_count()];
    let loss = a2c_gradients(net, batch, cfg, &mut grads)?;
    Ok(apply_update(net, opt, loss, &grads))
}

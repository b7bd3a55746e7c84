//! Soft actor-critic with twin critics, automatic temperature, and a
//! quantization-aware actor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::adam::Adam;
use super::buffer::{ReplayBuffer, Transition};
use super::mlp::{Mlp, Tape};
use super::policy::{normalize_obs, TrainingView, TwinPolicy};
use super::TwinError;
use crate::qnet::{PolicyHead, LOG_STD_MAX, LOG_STD_MIN};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub grad_steps: usize,
    pub target_entropy: f64,
    pub init_alpha: f64,
    pub critic_hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub fake_quant: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 100,
            grad_steps: 80,
            target_entropy: -2.0,
            init_alpha: 0.1,
            critic_hidden: vec![32, 64],
            buffer_capacity: 100_000,
            fake_quant: true,
        }
    }
}

/// Trainable entropy temperature, `alpha = exp(log_alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyTemp {
    pub log_alpha: f64,
    pub target_entropy: f64,
}

impl EntropyTemp {
    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }
}

/// Losses of one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub alpha: f64,
    pub entropy: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - tanh(u)^2)`, stable for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Reparameterized tanh-Gaussian draw. Returns `(action, log_prob)`.
pub fn tanh_gaussian_sample(head: PolicyHead, eps: f64) -> (f64, f64) {
    let u = head.mean + head.std * eps;
    let logp = -0.5 * eps * eps - head.log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u);
    (u.tanh(), logp)
}

/// Log density of `a = tanh(u)`, `u ~ N(mean, std)`, at a given action.
pub fn squashed_log_density(a: f64, head: PolicyHead) -> f64 {
    let u = a.atanh();
    let z = (u - head.mean) / head.std;
    -0.5 * z * z - head.log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u)
}

/// Soft Bellman targets `r + gamma (1 - done) (min Q' - alpha log pi')`.
pub fn critic_targets(
    rewards: &[f64],
    dones: &[bool],
    next_min_q: &[f64],
    next_logp: &[f64],
    gamma: f64,
    alpha: f64,
) -> Result<Vec<f64>, TwinError> {
    if rewards.is_empty() {
        return Err(TwinError::EmptyBatch);
    }
    Ok(rewards
        .iter()
        .zip(dones)
        .zip(next_min_q.iter().zip(next_logp))
        .map(|((&r, &d), (&q, &lp))| {
            if d {
                r
            } else {
                r + gamma * (q - alpha * lp)
            }
        })
        .collect())
}

/// Critic input: normalized observation plus the squashed action.
pub fn critic_input(obs_volts: [f64; 2], action: f64) -> [f64; 3] {
    let o = normalize_obs(obs_volts);
    [o[0], o[1], action]
}

/// Mean squared error to fixed targets; accumulates the parameter gradient.
pub fn critic_loss_and_grad(q: &Mlp, inputs: &[[f64; 3]], targets: &[f64], grad: &mut [f64]) -> f64 {
    let n = inputs.len() as f64;
    let mut tape = Tape::default();
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let out = q.forward(x, None, &mut tape)[0];
        let err = out - y;
        loss += err * err / n;
        q.backward(&tape, &[2.0 * err / n], Some(grad), None);
    }
    loss
}

/// Inputs of one actor step.
pub struct ActorBatch<'a> {
    /// Policy network inputs (already quantized when fake quant is on).
    pub policy_inputs: &'a [[f64; 2]],
    /// Observations in volts, for the critics.
    pub obs: &'a [[f64; 2]],
    pub eps: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorStats {
    pub loss: f64,
    pub mean_logp: f64,
}

/// `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterized,
/// backpropagated through both critics into the policy parameters.
pub fn actor_loss_and_grad(
    policy: &TrainingView<'_>,
    q1: &Mlp,
    q2: &Mlp,
    batch: &ActorBatch<'_>,
    alpha: f64,
    grad: &mut [f64],
) -> ActorStats {
    let n = batch.policy_inputs.len() as f64;
    let mut ptape = Tape::default();
    let mut qtape1 = Tape::default();
    let mut qtape2 = Tape::default();
    let mut dq = [0.0; 3];
    let mut loss = 0.0;
    let mut sum_logp = 0.0;
    for ((x, obs), &eps) in batch.policy_inputs.iter().zip(batch.obs).zip(batch.eps) {
        let out = policy.forward(x, &mut ptape);
        let (mean, raw_log_std) = (out[0], out[1]);
        let head = PolicyHead::new(mean, raw_log_std);
        let u = head.mean + head.std * eps;
        let (a, logp) = tanh_gaussian_sample(head, eps);

        let input = critic_input(*obs, a);
        let v1 = q1.forward(&input, None, &mut qtape1)[0];
        let v2 = q2.forward(&input, None, &mut qtape2)[0];
        let (qmin, qnet, qtape) = if v1 <= v2 { (v1, q1, &qtape1) } else { (v2, q2, &qtape2) };
        qnet.backward(qtape, &[1.0], None, Some(&mut dq));
        let dl_da = -dq[2];

        loss += (alpha * logp - qmin) / n;
        sum_logp += logp;

        let th = u.tanh();
        let da_du = 1.0 - a * a;
        let dl_du_q = dl_da * da_du;
        let dl_dmean = (alpha * 2.0 * th + dl_du_q) / n;
        let in_range = raw_log_std > LOG_STD_MIN && raw_log_std < LOG_STD_MAX;
        let dl_dlogstd = if in_range {
            (alpha * (-1.0 + 2.0 * th * head.std * eps) + dl_du_q * head.std * eps) / n
        } else {
            0.0
        };
        policy
            .net()
            .backward(&ptape, &[dl_dmean, dl_dlogstd], Some(grad), None);
    }
    ActorStats {
        loss,
        mean_logp: sum_logp / n,
    }
}

/// Temperature loss `-log_alpha (mean log pi + target_entropy)` and its
/// derivative with respect to `log_alpha`.
pub fn temperature_loss_and_grad(log_alpha: f64, mean_logp: f64, target_entropy: f64) -> (f64, f64) {
    let g = -(mean_logp + target_entropy);
    (log_alpha * g, g)
}

/// Learner state: policy twin, critics with targets, temperature, optimizers.
pub struct SacAgent {
    pub cfg: SacConfig,
    pub policy: TwinPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub temp: EntropyTemp,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: Adam,
    rng: ChaCha8Rng,
    steps: u64,
}

impl SacAgent {
    pub fn new(cfg: SacConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = TwinPolicy::new(&mut rng, cfg.fake_quant);
        let mut critic_dims = vec![3];
        critic_dims.extend(&cfg.critic_hidden);
        critic_dims.push(1);
        let q1 = Mlp::new(&critic_dims, &mut rng);
        let q2 = Mlp::new(&critic_dims, &mut rng);
        let np = policy.net.params().len();
        let nq = q1.params().len();
        Self {
            temp: EntropyTemp {
                log_alpha: cfg.init_alpha.ln(),
                target_entropy: cfg.target_entropy,
            },
            opt_policy: Adam::new(np, cfg.lr),
            opt_q1: Adam::new(nq, cfg.lr),
            opt_q2: Adam::new(nq, cfg.lr),
            opt_alpha: Adam::new(1, cfg.lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            policy,
            rng,
            steps: 0,
            cfg,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Run `grad_steps` updates on mini-batches drawn from `buffer`.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<Vec<LossRecord>, TwinError> {
        if buffer.len() < self.cfg.batch_size {
            return Err(TwinError::BufferTooSmall {
                have: buffer.len(),
                need: self.cfg.batch_size,
            });
        }
        let mut trace = Vec::with_capacity(self.cfg.grad_steps);
        for _ in 0..self.cfg.grad_steps {
            let batch = buffer.sample(self.cfg.batch_size, &mut self.rng);
            trace.push(self.train_step(&batch)?);
        }
        Ok(trace)
    }

    pub fn train_step(&mut self, batch: &[Transition]) -> Result<LossRecord, TwinError> {
        if batch.is_empty() {
            return Err(TwinError::EmptyBatch);
        }
        let alpha = self.temp.alpha();
        let view = self.policy.training_view()?;

        // Soft targets from the target critics at freshly sampled next actions.
        let mut tape = Tape::default();
        let mut next_q = Vec::with_capacity(batch.len());
        let mut next_logp = Vec::with_capacity(batch.len());
        for t in batch {
            let out = view.forward(&self.policy.input(t.next_obs), &mut tape);
            let head = PolicyHead::new(out[0], out[1]);
            let eps: f64 = StandardNormal.sample(&mut self.rng);
            let (a, lp) = tanh_gaussian_sample(head, eps);
            let x = critic_input(t.next_obs, a);
            let v1 = self.q1_target.forward(&x, None, &mut tape)[0];
            let v2 = self.q2_target.forward(&x, None, &mut tape)[0];
            next_q.push(v1.min(v2));
            next_logp.push(lp);
        }
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let targets = critic_targets(&rewards, &dones, &next_q, &next_logp, self.cfg.gamma, alpha)?;

        let inputs: Vec<[f64; 3]> = batch.iter().map(|t| critic_input(t.obs, t.action)).collect();
        let mut g1 = vec![0.0; self.q1.params().len()];
        let mut g2 = vec![0.0; self.q2.params().len()];
        let l1 = critic_loss_and_grad(&self.q1, &inputs, &targets, &mut g1);
        let l2 = critic_loss_and_grad(&self.q2, &inputs, &targets, &mut g2);
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(self.diverged("critic", l1, l2));
        }
        self.opt_q1.step(self.q1.params_mut(), &g1);
        self.opt_q2.step(self.q2.params_mut(), &g2);

        let policy_inputs: Vec<[f64; 2]> = batch.iter().map(|t| self.policy.input(t.obs)).collect();
        let obs: Vec<[f64; 2]> = batch.iter().map(|t| t.obs).collect();
        let eps: Vec<f64> = (0..batch.len()).map(|_| StandardNormal.sample(&mut self.rng)).collect();
        let mut gp = vec![0.0; self.policy.net.params().len()];
        let stats = actor_loss_and_grad(
            &view,
            &self.q1,
            &self.q2,
            &ActorBatch {
                policy_inputs: &policy_inputs,
                obs: &obs,
                eps: &eps,
            },
            alpha,
            &mut gp,
        );
        drop(view);
        if !(stats.loss.is_finite() && gp.iter().all(|g| g.is_finite())) {
            return Err(self.diverged("actor", stats.loss, stats.mean_logp));
        }
        self.opt_policy.step(self.policy.net.params_mut(), &gp);

        let (_, ga) = temperature_loss_and_grad(self.temp.log_alpha, stats.mean_logp, self.temp.target_entropy);
        let mut la = [self.temp.log_alpha];
        self.opt_alpha.step(&mut la, &[ga]);
        self.temp.log_alpha = la[0];

        self.q1_target.polyak_from(&self.q1, self.cfg.tau);
        self.q2_target.polyak_from(&self.q2, self.cfg.tau);
        self.steps += 1;

        Ok(LossRecord {
            critic1: l1,
            critic2: l2,
            actor: stats.loss,
            alpha: self.temp.alpha(),
            entropy: -stats.mean_logp,
        })
    }

    fn diverged(&self, stage: &'static str, a: f64, b: f64) -> TwinError {
        TwinError::NonFinite {
            stage,
            step: self.steps,
            detail: format!("values ({a}, {b}), log_alpha {}", self.temp.log_alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_discount_targets_equal_rewards() {
        let y = critic_targets(&[0.1, 0.5], &[false, false], &[3.0, 4.0], &[0.2, 0.1], 0.0, 0.3).unwrap();
        assert_eq!(y, vec![0.1, 0.5]);
    }

    #[test]
    fn done_target_is_reward() {
        let y = critic_targets(&[0.4], &[true], &[10.0], &[1.0], 0.99, 0.2).unwrap();
        assert_eq!(y, vec![0.4]);
    }

    #[test]
    fn empty_batch_is_error() {
        assert!(matches!(
            critic_targets(&[], &[], &[], &[], 0.99, 0.1),
            Err(TwinError::EmptyBatch)
        ));
    }

    #[test]
    fn constant_critic_target() {
        // Critic with zero weights and output bias c evaluates to c everywhere.
        let c = 2.5;
        let mut q = Mlp::zeros(&[3, 4, 1]);
        let (_, b) = q.layer_mut(1);
        b[0] = c;
        let mut tape = Tape::default();
        let qv = q.forward(&critic_input([4.0, 1.0], 0.3), None, &mut tape)[0];
        let y = critic_targets(&[0.7], &[false], &[qv], &[-1.3], 0.99, 0.0).unwrap();
        assert!((y[0] - (0.7 + 0.99 * c)).abs() < 1e-15);
    }

    #[test]
    fn temperature_gradient_vanishes_at_target() {
        let (_, g) = temperature_loss_and_grad(0.3, 2.0, -2.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn temperature_step_direction() {
        // Entropy below target (log pi + target > 0): alpha must grow.
        let mut opt = Adam::new(1, 1e-2);
        let mut la = [0.0];
        let (_, g) = temperature_loss_and_grad(la[0], 3.0, -2.0);
        opt.step(&mut la, &[g]);
        assert!(la[0] > 0.0);
        let mut opt = Adam::new(1, 1e-2);
        let mut la = [0.0];
        let (_, g) = temperature_loss_and_grad(la[0], 1.0, -2.0);
        opt.step(&mut la, &[g]);
        assert!(la[0] < 0.0);
    }

    #[test]
    fn sample_and_density_agree() {
        let head = PolicyHead::new(0.3, -0.4);
        let (a, lp) = tanh_gaussian_sample(head, 0.8);
        assert!((squashed_log_density(a, head) - lp).abs() < 1e-9);
    }
}

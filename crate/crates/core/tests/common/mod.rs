//! Test-only oracles, written from the model equations without calling the
//! implementation under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use weldloop::qnet::{PolicyHead, POLICY_DIMS};
use weldloop::twin::{
    actor_loss_and_grad, critic_input, critic_loss_and_grad, grad_check, temperature_loss_and_grad, ActorBatch, Mlp,
    TrainingView, TwinPolicy,
};

/// Random policy with per-layer magnitudes spread over three decades.
pub fn random_twin(rng: &mut ChaCha8Rng) -> TwinPolicy {
    let mut net = Mlp::new(&POLICY_DIMS, rng);
    for l in 0..net.n_layers() {
        let wscale = 10f64.powf(rng.random_range(-1.5..1.0));
        let bscale = 10f64.powf(rng.random_range(-2.0..0.5));
        let (w, b) = net.layer_mut(l);
        w.iter_mut().for_each(|v| *v *= wscale);
        b.iter_mut().for_each(|v| *v = bscale * rng.random_range(-1.0..1.0));
    }
    TwinPolicy::from_net(net, true)
}

/// One segment of a weld line as (length_mm, sa_um).
pub type Seg = (f64, f64);

pub const BRUSHED: &[Seg] = &[(40.0, 1.47)];
pub const SANDBLASTED: &[Seg] = &[(40.0, 1.20)];
pub const MIXED: &[Seg] = &[(10.0, 1.47), (20.0, 1.23), (10.0, 1.47)];

/// Noise-free surrogate written out from its defining equations with the
/// default coefficients. Returns per-step (OR, OE, keyhole).
pub fn oracle_rollout(segs: &[Seg], powers: &[f64]) -> Vec<(f64, f64, bool)> {
    let (lambda, c, a0, kappa, sa_ref, rho0, w) = (0.7, 0.0035, 0.8, 0.25, 1.47, 0.3, 0.5);
    let (m_kh, m_max, or_peak, kh_factor, b0, e0, e1) = (1.0, 2.0, 8.0, 0.15, 1.0, 5.0, 2.0);
    let sa_at = |x: f64| {
        let mut end = 0.0;
        for &(len, sa) in segs {
            end += len;
            if x < end {
                return sa;
            }
        }
        segs[segs.len() - 1].1
    };
    let mut m: f64 = 0.0;
    let mut kh = false;
    let mut out = Vec::new();
    for (t, &p) in powers.iter().enumerate() {
        let sa = sa_at(0.5 * t as f64);
        let a = a0 * (1.0 + kappa * sa / sa_ref);
        m = (lambda * m + c * a * p).clamp(0.0, m_max);
        if m >= m_kh {
            kh = true;
        } else if m <= 0.8 * m_kh {
            kh = false;
        }
        let rho = rho0 * (sa / sa_ref) * (1.0 - w * m.min(1.0));
        let level = if kh { kh_factor } else { m / m_kh };
        let or = (b0 * (p / 100.0) * (1.0 - rho) + or_peak * level * (1.0 - rho)).clamp(0.0, 10.0);
        let oe = (e0 * m.min(1.0) + e1 * if kh { 1.0 } else { 0.0 }).clamp(0.0, 10.0);
        out.push((or, oe, kh));
    }
    out
}

pub fn oracle_return(segs: &[Seg], powers: &[f64]) -> f64 {
    oracle_rollout(segs, powers).iter().map(|s| s.0 / 10.0).sum()
}

/// Brute-force argmax of the noise-free constant-power return over a grid;
/// ties go to the lower power.
pub fn oracle_best_constant(segs: &[Seg], grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &p in grid {
        let r = oracle_return(segs, &[p; 80]);
        if r > best.1 {
            best = (p, r);
        }
    }
    best
}

fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of `tanh(U)`, `U ~ N(mean, std)`, at `a`, as the probability mass of
/// a small action interval divided by its width. The mass is integrated in
/// u-space with composite Simpson.
pub fn oracle_squashed_density(a: f64, mean: f64, std: f64) -> f64 {
    let h = 1e-7;
    let (lo, hi) = ((a - h).atanh(), (a + h).atanh());
    let n = 200;
    let dx = (hi - lo) / n as f64;
    let f = |u: f64| std_normal_pdf((u - mean) / std) / std;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + dx * i as f64);
    }
    s * dx / 3.0 / (2.0 * h)
}

const KINK_MARGIN: f64 = 1e-3;

/// Smallest hidden pre-activation magnitude of `net` at `x`.
pub fn min_abs_preactivation(net: &Mlp, x: &[f64]) -> f64 {
    let dims = net.dims();
    let mut act = x.to_vec();
    let mut min = f64::INFINITY;
    for (l, &in_dim) in dims.iter().enumerate().take(dims.len() - 2) {
        let (w, b) = net.layer(l);
        act = w
            .chunks_exact(in_dim)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&act).map(|(a, c)| a * c).sum::<f64>() + bias)
            .inspect(|z| min = min.min(z.abs()))
            .map(|z| z.max(0.0))
            .collect();
    }
    min
}

/// Max relative errors (actor, critic, temperature) of analytic against
/// central-difference gradients on small nets built from `seed`.
pub fn small_net_grad_errors(seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = Mlp::new(&[2, 6, 2], &mut rng);
    let q1 = Mlp::new(&[3, 8, 6, 1], &mut rng);
    let q2 = Mlp::new(&[3, 8, 6, 1], &mut rng);
    assert!(policy.params().len() <= 200 && q1.params().len() <= 200);
    let n = 8;
    let obs: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
    let inputs: Vec<[f64; 2]> = obs.iter().map(|o| [(o[0] - 5.0) / 5.0, (o[1] - 5.0) / 5.0]).collect();
    let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let alpha = rng.random_range(0.05..0.5);
    let batch = ActorBatch {
        policy_inputs: &inputs,
        obs: &obs,
        eps: &eps,
    };

    let mut g = vec![0.0; policy.params().len()];
    actor_loss_and_grad(&TrainingView::Float(&policy), &q1, &q2, &batch, alpha, &mut g);
    let actor = grad_check(policy.params(), &g, |p| {
        let net = Mlp::from_params(&[2, 6, 2], p.to_vec());
        let mut scratch = vec![0.0; p.len()];
        actor_loss_and_grad(&TrainingView::Float(&net), &q1, &q2, &batch, alpha, &mut scratch).loss
    });

    // Central differences are only meaningful away from ReLU kinks.
    let cin: Vec<[f64; 3]> = (0..n)
        .map(|_| loop {
            let o = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let x = critic_input(o, rng.random_range(-1.0..1.0));
            if min_abs_preactivation(&q1, &x) > KINK_MARGIN {
                break x;
            }
        })
        .collect();
    let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut gq = vec![0.0; q1.params().len()];
    critic_loss_and_grad(&q1, &cin, &targets, &mut gq);
    let critic = grad_check(q1.params(), &gq, |p| {
        let net = Mlp::from_params(&[3, 8, 6, 1], p.to_vec());
        let mut scratch = vec![0.0; p.len()];
        critic_loss_and_grad(&net, &cin, &targets, &mut scratch)
    });

    let log_alpha = rng.random_range(-3.0..0.5);
    let mean_logp = rng.random_range(-3.0..3.0);
    let (_, ga) = temperature_loss_and_grad(log_alpha, mean_logp, -2.0);
    let temp = grad_check(&[log_alpha], &[ga], |p| temperature_loss_and_grad(p[0], mean_logp, -2.0).0);
    (actor, critic, temp)
}

/// Gaussian head with mean in a moderate range.
pub fn random_head(rng: &mut ChaCha8Rng) -> PolicyHead {
    PolicyHead::new(rng.random_range(-1.5..1.5), rng.random_range(-2.0..0.5))
}

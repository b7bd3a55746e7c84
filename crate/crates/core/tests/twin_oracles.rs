mod common;

use common::{oracle_squashed_density, random_head, random_twin, small_net_grad_errors};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weldloop::qnet::{infer, quantize_obs, QuantizedPolicy, POLICY_DIMS};
use weldloop::twin::{
    critic_input, critic_loss_and_grad, critic_targets, grad_check, squashed_log_density, tanh_gaussian_sample,
    temperature_loss_and_grad, IntPlan, Mlp, ReplayBuffer, SacAgent, SacConfig, Tape, Transition, TwinPolicy,
};

#[test]
fn device_and_twin_agree_on_random_policies() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let twin = random_twin(&mut rng);
        let plan = twin.plan().unwrap();
        let policy = twin.export(3).unwrap();
        for _ in 0..40 {
            let obs_q = [rng.random::<i8>().max(-127), rng.random::<i8>().max(-127)];
            let dev = policy.forward_int(obs_q).acc;
            let acc = plan.forward_acc(obs_q);
            assert_eq!([dev[0] as i64, dev[1] as i64], [acc[0], acc[1]]);
        }
    }
}

#[test]
fn fake_quant_forward_matches_device_inference_in_volts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let twin = random_twin(&mut rng);
    let policy = twin.export(1).unwrap();
    for _ in 0..100 {
        let v = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
        let head = twin.fake_quant_forward(v).unwrap();
        let out = policy.forward_int(quantize_obs(v));
        let s = policy.output_scale() as f64;
        assert_eq!(head.mean.to_bits(), (out.acc[0] as f64 * s).to_bits());
        assert_eq!(head.log_std.to_bits(), weldloop::qnet::PolicyHead::new(0.0, out.acc[1] as f64 * s).log_std.to_bits());
        let eps = rng.random_range(-2.0..2.0);
        let a = infer(&policy, quantize_obs(v), eps);
        let b = weldloop::qnet::sample_action(head, eps);
        assert_eq!(a.power_watts.to_bits(), b.power_watts.to_bits());
    }
}

/// Master weights sitting on the quantization lattice (±127/128, one per row,
/// zero biases) and inputs on multiples of 64 keep every accumulator
/// divisible by its requantization divisor. The two paths then agree up to
/// the f32 output scale.
#[test]
fn fake_quant_off_equals_on_for_lattice_weights() {
    let mut params = Vec::new();
    for l in 0..3 {
        let (i, o) = (POLICY_DIMS[l], POLICY_DIMS[l + 1]);
        for r in 0..o {
            for c in 0..i {
                params.push(if c == r % i { 127.0 / 128.0 } else { 0.0 });
            }
        }
        params.extend(std::iter::repeat_n(0.0, o));
    }
    let net = Mlp::from_params(&POLICY_DIMS, params);
    let on = TwinPolicy::from_net(net.clone(), true);
    let off = TwinPolicy::from_net(net, false);
    let plan = on.plan().unwrap();
    assert_eq!(plan.shifts[..2], [3, 3]);
    assert_eq!(plan.dequantized().params(), on.net.params());
    for q0 in [-64i32, 0, 64] {
        for q1 in [-64i32, 0, 64] {
            let v = [5.0 + 5.0 * q0 as f64 / 127.0, 5.0 + 5.0 * q1 as f64 / 127.0];
            assert_eq!(quantize_obs(v), [q0 as i8, q1 as i8]);
            let a = off.head(v).unwrap();
            let b = on.fake_quant_forward(v).unwrap();
            for (x, y) in [(a.mean, b.mean), (a.log_std, b.log_std)] {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-9), "{q0},{q1}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn export_import_export_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let twin = random_twin(&mut rng);
    let blob = twin.export_blob(7).unwrap();
    let back = QuantizedPolicy::from_blob(&blob).unwrap();
    assert_eq!(back.to_blob(), blob);
    assert_eq!(IntPlan::from_policy(&back).to_policy(7).unwrap().to_blob(), blob);
}

#[test]
fn zero_policy_blob_is_all_zero_weights() {
    let p = TwinPolicy::zeros().export(1).unwrap();
    for l in p.layers() {
        assert!(l.weights.iter().all(|&w| w == 0));
        assert!(l.biases.iter().all(|&b| b == 0));
    }
}

#[test]
fn gradients_match_finite_differences_on_small_nets() {
    for seed in 0..5 {
        let (a, c, t) = small_net_grad_errors(seed);
        assert!(a < 1e-4 && c < 1e-4 && t < 1e-4, "seed {seed}: {a} {c} {t}");
    }
}

#[test]
fn linear_two_param_mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Mlp::new(&[1, 1], &mut rng);
    assert_eq!(net.params().len(), 2);
    let xs = [-1.0, 0.3, 2.0];
    let ys = [0.5, -0.2, 1.0];
    let loss = |p: &[f64]| xs.iter().zip(&ys).map(|(x, y)| (p[0] * x + p[1] - y).powi(2)).sum::<f64>() / 3.0;
    let mut g = vec![0.0; 2];
    let mut tape = Tape::default();
    for (x, y) in xs.iter().zip(&ys) {
        let out = net.forward(&[*x], None, &mut tape)[0];
        net.backward(&tape, &[2.0 * (out - y) / 3.0], Some(&mut g), None);
    }
    assert!(grad_check(net.params(), &g, loss) < 1e-4);
}

#[test]
fn constant_loss_has_zero_gradient() {
    let inputs = [critic_input([5.0, 5.0], 0.0)];
    let q = Mlp::zeros(&[3, 4, 1]);
    let mut g = vec![0.0; q.params().len()];
    critic_loss_and_grad(&q, &inputs, &[0.0], &mut g);
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn squashed_log_prob_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let head = random_head(&mut rng);
        let eps: f64 = rng.random_range(-2.0..2.0);
        let f = |p: &[f64]| tanh_gaussian_sample(weldloop::qnet::PolicyHead::new(p[0], p[1]), eps).1;
        let u = head.mean + head.std * eps;
        let th = u.tanh();
        let analytic = [2.0 * th, -1.0 + 2.0 * th * head.std * eps];
        assert!(grad_check(&[head.mean, head.log_std], &analytic, f) < 1e-4);
    }
}

#[test]
fn log_prob_matches_integration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 200 {
        let head = random_head(&mut rng);
        let a: f64 = rng.random_range(-0.999..0.999);
        let oracle = oracle_squashed_density(a, head.mean, head.std);
        if oracle < 1e-12 {
            continue;
        }
        let lp = squashed_log_density(a, head);
        assert!((lp - oracle.ln()).abs() < 1e-6, "a {a} head {head:?}: {lp} vs {}", oracle.ln());
        checked += 1;
    }
}

#[test]
fn sampled_log_prob_equals_density_at_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let head = random_head(&mut rng);
        let (a, lp) = tanh_gaussian_sample(head, rng.random_range(-2.0..2.0));
        if a.abs() < 0.999 {
            assert!((lp - squashed_log_density(a, head)).abs() < 1e-8);
        }
    }
}

#[test]
fn critic_loss_decreases_on_identical_transitions() {
    let cfg = SacConfig {
        batch_size: 4,
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(cfg, 3);
    let t = Transition {
        obs: [4.0, 5.5],
        action: 0.2,
        reward: 0.4,
        next_obs: [4.2, 5.6],
        done: true,
    };
    let batch = vec![t; 4];
    let losses: Vec<f64> = (0..50).map(|_| agent.train_step(&batch).unwrap().critic1).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn temperature_stationary_at_target_entropy() {
    let (_, g) = temperature_loss_and_grad(-1.3, 2.0, -2.0);
    assert!(g.abs() < 1e-15);
}

#[test]
fn constant_critic_target_hand_value() {
    let y = critic_targets(&[0.3], &[false], &[2.0], &[0.7], 0.99, 0.0).unwrap();
    assert!((y[0] - (0.3 + 0.99 * 2.0)).abs() < 1e-15);
}

#[test]
fn update_rejects_small_buffer() {
    let mut agent = SacAgent::new(SacConfig::default(), 1);
    let buf = ReplayBuffer::new(1000);
    assert!(agent.update(&buf).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn twin_bit_exact_on_any_observation(seed in any::<u64>(), q0 in -127i8..=127, q1 in -127i8..=127) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let twin = random_twin(&mut rng);
        let plan = twin.plan().unwrap();
        let dev = twin.export(1).unwrap().forward_int([q0, q1]).acc;
        let acc = plan.forward_acc([q0, q1]);
        prop_assert_eq!([dev[0] as i64, dev[1] as i64], [acc[0], acc[1]]);
    }

    #[test]
    fn buffer_keeps_last_capacity(cap in 1usize..40, n in 0usize..120) {
        let mut b = ReplayBuffer::new(cap);
        for i in 0..n {
            b.push(Transition { obs: [i as f64, 0.0], action: 0.0, reward: 0.0, next_obs: [0.0; 2], done: false });
        }
        let kept: Vec<f64> = b.iter_ordered().map(|t| t.obs[0]).collect();
        let want: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
        prop_assert_eq!(kept, want);
    }

    #[test]
    fn temperature_step_sign(log_alpha in -5.0f64..2.0, mean_logp in -5.0f64..5.0) {
        let (_, g) = temperature_loss_and_grad(log_alpha, mean_logp, -2.0);
        // A descent step moves log_alpha by -lr * g.
        let excess = mean_logp - 2.0;
        if excess > 0.0 { prop_assert!(-g > 0.0) } else if excess < 0.0 { prop_assert!(-g < 0.0) }
    }
}

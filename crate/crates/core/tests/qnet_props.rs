use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use weldloop::qnet::{
    infer, op_count_for, quantize_obs, quantize_tensor, tanh_poly, Action, PolicyHead, QuantizedPolicy, POLICY_DIMS,
};
use weldloop::twin::{Mlp, TwinPolicy};

fn seeded(seed: u64) -> QuantizedPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TwinPolicy::from_net(Mlp::new(&POLICY_DIMS, &mut rng), true).export(1).unwrap()
}

#[test]
fn op_count_for_policy_dims() {
    // One multiply-accumulate per weight plus bias add, requant and ReLU per unit.
    let macs: u64 = POLICY_DIMS.windows(2).map(|w| (w[0] * w[1]) as u64).sum();
    assert!(op_count_for(&POLICY_DIMS) >= macs);
    assert_eq!(seeded(1).op_count(), op_count_for(&POLICY_DIMS));
}

#[test]
fn tanh_grid_budget() {
    let step = 2f64.powi(-12);
    let mut worst: f64 = 0.0;
    let mut x = -4.0;
    while x <= 4.0 {
        worst = worst.max((tanh_poly(x) - x.tanh()).abs());
        x += step;
    }
    assert!(worst <= 2f64.powi(-7), "{worst}");
    for x in [4.0, 4.5, 10.0, 1e6, f64::INFINITY] {
        assert_eq!(tanh_poly(x), 1.0);
        assert_eq!(tanh_poly(-x), -1.0);
    }
}

proptest! {
    #[test]
    fn quantization_error_is_half_a_step(values in prop::collection::vec(-1e3f64..1e3, 1..64)) {
        let (q, scale) = quantize_tensor(&values).unwrap();
        prop_assert!(scale > 0.0);
        for (&v, &qi) in values.iter().zip(&q) {
            prop_assert!(qi != i8::MIN);
            prop_assert!((v - qi as f64 * scale).abs() <= scale / 2.0 + 1e-9 * scale);
        }
    }

    #[test]
    fn tanh_poly_is_odd_monotone_bounded(a in -6.0f64..6.0, b in -6.0f64..6.0) {
        prop_assert_eq!(tanh_poly(-a), -tanh_poly(a));
        prop_assert!(tanh_poly(a).abs() <= 1.0);
        if a < b { prop_assert!(tanh_poly(a) <= tanh_poly(b)); }
    }

    #[test]
    fn blob_round_trip(seed in any::<u64>(), version in any::<u32>()) {
        let p = seeded(seed).with_version(version);
        let back = QuantizedPolicy::from_blob(&p.to_blob()).unwrap();
        prop_assert_eq!(back.to_blob(), p.to_blob());
        prop_assert_eq!(back.version(), version);
    }

    #[test]
    fn blob_parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = QuantizedPolicy::from_blob(&bytes);
    }

    #[test]
    fn inference_is_pure_and_in_range(seed in 0u64..64, v0 in 0.0f64..10.0, v1 in 0.0f64..10.0, eps in -4.0f64..4.0) {
        let p = seeded(seed);
        let q = quantize_obs([v0, v1]);
        let a = infer(&p, q, eps);
        prop_assert_eq!(a, infer(&p, q, eps));
        prop_assert!((25.0..=100.0).contains(&a.power_watts));
        prop_assert!((0.0..=5.0).contains(&a.control_volts));
    }

    #[test]
    fn head_clamps_log_std(mean in -10.0f64..10.0, log_std in -50.0f64..50.0) {
        let h = PolicyHead::new(mean, log_std);
        prop_assert!((-5.0..=2.0).contains(&h.log_std));
        prop_assert!((h.std - h.log_std.exp()).abs() < 1e-12);
    }

    #[test]
    fn action_units_agree(p in 25.0f64..=100.0) {
        let a = Action::from_power(p);
        prop_assert!((Action::from_volts(a.control_volts).power_watts - p).abs() < 1e-9);
        prop_assert!((Action::from_squashed(a.squashed).power_watts - p).abs() < 1e-9);
    }
}

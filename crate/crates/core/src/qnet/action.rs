use super::{tanh_poly, QuantizedPolicy};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const POWER_MIN_W: f64 = 25.0;
const POWER_MAX_W: f64 = 100.0;
const VOLTS_MAX: f64 = 5.0;

/// Mean and spread of the pre-squash Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyHead {
    pub mean: f64,
    pub log_std: f64,
    pub std: f64,
}

impl PolicyHead {
    /// Clamps `log_std` into `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn new(mean: f64, log_std: f64) -> Self {
        let log_std = log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
        Self {
            mean,
            log_std,
            std: log_std.exp(),
        }
    }
}

/// A laser command in the three equivalent units the system uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub squashed: f64,
    pub power_watts: f64,
    pub control_volts: f64,
}

impl Action {
    pub fn from_squashed(squashed: f64) -> Self {
        let squashed = squashed.clamp(-1.0, 1.0);
        let power_watts = 62.5 + 37.5 * squashed;
        Self {
            squashed,
            power_watts,
            control_volts: VOLTS_MAX * (power_watts - POWER_MIN_W) / (POWER_MAX_W - POWER_MIN_W),
        }
    }

    pub fn from_power(power_watts: f64) -> Self {
        let power_watts = power_watts.clamp(POWER_MIN_W, POWER_MAX_W);
        Self {
            squashed: (power_watts - 62.5) / 37.5,
            power_watts,
            control_volts: VOLTS_MAX * (power_watts - POWER_MIN_W) / (POWER_MAX_W - POWER_MIN_W),
        }
    }

    pub fn from_volts(control_volts: f64) -> Self {
        Self::from_power(POWER_MIN_W + (POWER_MAX_W - POWER_MIN_W) * control_volts / VOLTS_MAX)
    }
}

/// Reparameterized draw: `squash(mean + std * epsilon)`. `epsilon = 0` gives
/// the deterministic (test-episode) action.
pub fn sample_action(head: PolicyHead, epsilon: f64) -> Action {
    Action::from_squashed(tanh_poly(head.mean + head.std * epsilon))
}

/// Full device inference: integer forward, float rescale, sampling.
pub fn infer(policy: &QuantizedPolicy, obs_q: [i8; 2], epsilon: f64) -> Action {
    let out = policy.forward_int(obs_q);
    let scale = policy.output_scale() as f64;
    let head = PolicyHead::new(out.acc[0] as f64 * scale, out.acc[1] as f64 * scale);
    sample_action(head, epsilon)
}

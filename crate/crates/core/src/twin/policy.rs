use rand::Rng;

use super::mlp::{Mlp, Tape};
use super::TwinError;
use crate::qnet::{
    quantize_obs, quantize_tensor, required_shift, round_half_away, PolicyHead, QuantLayer,
    QuantizedPolicy, ACTIVATION_BITS, POLICY_DIMS,
};

/// Bias magnitude cap in accumulator units.
const BIAS_LIMIT: f64 = (1 << 24) as f64;

/// Input lattice step: int8 observation `q` stands for `q / 127`.
pub const INPUT_STEP: f64 = 1.0 / 127.0;

/// Normalized, unquantized observation in `[-1, 1]`.
pub fn normalize_obs(volts: [f64; 2]) -> [f64; 2] {
    volts.map(|v| ((v - 5.0) / 5.0).clamp(-1.0, 1.0))
}

/// Integer program derived from the float master weights: exactly what the
/// device executes, plus the float scales the trainer needs for fake
/// quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct IntPlan {
    pub weights: Vec<Vec<i8>>,
    pub biases: Vec<Vec<i32>>,
    pub shifts: Vec<u8>,
    pub weight_scales: Vec<f64>,
    /// Float value of one accumulator LSB, per layer.
    pub acc_scales: Vec<f64>,
    pub output_scale: f32,
    pub dims: Vec<usize>,
}

impl IntPlan {
    /// Rebuild a plan from a device policy (scales other than the output
    /// scale are unknown and left at zero).
    pub fn from_policy(policy: &QuantizedPolicy) -> Self {
        let layers = policy.layers();
        let mut dims = vec![layers[0].in_dim];
        dims.extend(layers.iter().map(|l| l.out_dim));
        Self {
            weights: layers.iter().map(|l| l.weights.clone()).collect(),
            biases: layers.iter().map(|l| l.biases.clone()).collect(),
            shifts: layers.iter().map(|l| l.requant_shift).collect(),
            weight_scales: vec![0.0; layers.len()],
            acc_scales: vec![0.0; layers.len()],
            output_scale: policy.output_scale(),
            dims,
        }
    }

    /// Integer-semantics forward pass, evaluated in i64 with floor division
    /// for the requantization.
    pub fn forward_acc(&self, obs_q: [i8; 2]) -> Vec<i64> {
        let mut x: Vec<i64> = obs_q.iter().map(|&v| v as i64).collect();
        let n = self.weights.len();
        for l in 0..n {
            let in_dim = self.dims[l];
            let divisor = 1i64 << self.shifts[l];
            x = self.weights[l]
                .chunks_exact(in_dim)
                .zip(&self.biases[l])
                .map(|(row, &b)| {
                    let acc = b as i64 + row.iter().zip(&x).map(|(&w, &xi)| w as i64 * xi).sum::<i64>();
                    if l + 1 < n {
                        acc.max(0).div_euclid(divisor)
                    } else {
                        acc
                    }
                })
                .collect();
        }
        x
    }

    pub fn head(&self, obs_q: [i8; 2]) -> PolicyHead {
        let acc = self.forward_acc(obs_q);
        let s = self.output_scale as f64;
        PolicyHead::new(acc[0] as f64 * s, acc[1] as f64 * s)
    }

    /// Hidden activation step sizes in float units, for the fake-quant pass.
    pub fn activation_steps(&self) -> Vec<f64> {
        (0..self.shifts.len() - 1)
            .map(|l| self.acc_scales[l] * (1u64 << self.shifts[l]) as f64)
            .collect()
    }

    /// Float network whose weights and biases sit exactly on the integer lattice.
    pub fn dequantized(&self) -> Mlp {
        let mut params = Vec::new();
        for l in 0..self.weights.len() {
            params.extend(self.weights[l].iter().map(|&w| w as f64 * self.weight_scales[l]));
            params.extend(self.biases[l].iter().map(|&b| b as f64 * self.acc_scales[l]));
        }
        Mlp::from_params(&self.dims, params)
    }

    pub fn to_policy(&self, version: u32) -> Result<QuantizedPolicy, TwinError> {
        let layers = (0..self.weights.len())
            .map(|l| QuantLayer {
                out_dim: self.dims[l + 1],
                in_dim: self.dims[l],
                weights: self.weights[l].clone(),
                biases: self.biases[l].clone(),
                requant_shift: if l + 1 < self.weights.len() { self.shifts[l] } else { 0 },
            })
            .collect();
        Ok(QuantizedPolicy::new(layers, self.output_scale, version)?)
    }
}

/// Float master copy of the deployed policy network.
#[derive(Debug, Clone)]
pub struct TwinPolicy {
    pub net: Mlp,
    pub fake_quant: bool,
}

impl TwinPolicy {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, fake_quant: bool) -> Self {
        let mut net = Mlp::new(&POLICY_DIMS, rng);
        // Start near the middle of the power range with a moderate spread.
        let last = net.n_layers() - 1;
        let (w, b) = net.layer_mut(last);
        w.iter_mut().for_each(|v| *v *= 0.1);
        b.iter_mut().for_each(|v| *v = 0.0);
        Self { net, fake_quant }
    }

    pub fn from_net(net: Mlp, fake_quant: bool) -> Self {
        assert_eq!(net.dims(), &POLICY_DIMS, "policy net must be {POLICY_DIMS:?}");
        Self { net, fake_quant }
    }

    pub fn zeros() -> Self {
        Self::from_net(Mlp::zeros(&POLICY_DIMS), true)
    }

    /// Derive the integer program: per-tensor int8 weights, int32 biases in
    /// accumulator units, and the smallest shifts that keep every hidden
    /// activation inside its bitwidth for all inputs.
    pub fn plan(&self) -> Result<IntPlan, TwinError> {
        plan_for(&self.net)
    }

    pub fn export(&self, version: u32) -> Result<QuantizedPolicy, TwinError> {
        self.plan()?.to_policy(version)
    }

    pub fn export_blob(&self, version: u32) -> Result<Vec<u8>, TwinError> {
        Ok(self.export(version)?.to_blob())
    }

    /// Integer-exact prediction of the device's policy head for raw volts.
    pub fn fake_quant_forward(&self, obs_volts: [f64; 2]) -> Result<PolicyHead, TwinError> {
        Ok(self.plan()?.head(quantize_obs(obs_volts)))
    }

    /// Network input the trainer uses for this observation.
    pub fn input(&self, obs_volts: [f64; 2]) -> [f64; 2] {
        if self.fake_quant {
            quantize_obs(obs_volts).map(|q| q as f64 * INPUT_STEP)
        } else {
            normalize_obs(obs_volts)
        }
    }

    /// Differentiable view used for training: the dequantized lattice network
    /// and activation steps with fake quant on, the master net otherwise.
    pub fn training_view(&self) -> Result<TrainingView<'_>, TwinError> {
        if self.fake_quant {
            let plan = self.plan()?;
            Ok(TrainingView::FakeQuant {
                net: plan.dequantized(),
                steps: plan.activation_steps(),
            })
        } else {
            Ok(TrainingView::Float(&self.net))
        }
    }

    /// Float-path head (not integer exact), for training-side diagnostics.
    pub fn head(&self, obs_volts: [f64; 2]) -> Result<PolicyHead, TwinError> {
        let view = self.training_view()?;
        let mut tape = Tape::default();
        let out = view.forward(&self.input(obs_volts), &mut tape);
        Ok(PolicyHead::new(out[0], out[1]))
    }
}

/// Borrowed or lattice-projected network used in a training step.
pub enum TrainingView<'a> {
    Float(&'a Mlp),
    FakeQuant { net: Mlp, steps: Vec<f64> },
}

impl TrainingView<'_> {
    pub fn net(&self) -> &Mlp {
        match self {
            TrainingView::Float(n) => n,
            TrainingView::FakeQuant { net, .. } => net,
        }
    }

    pub fn steps(&self) -> Option<&[f64]> {
        match self {
            TrainingView::Float(_) => None,
            TrainingView::FakeQuant { steps, .. } => Some(steps),
        }
    }

    pub fn forward<'t>(&self, x: &[f64], tape: &'t mut Tape) -> &'t [f64] {
        self.net().forward(x, self.steps(), tape)
    }
}

pub(crate) fn plan_for(net: &Mlp) -> Result<IntPlan, TwinError> {
    let n = net.n_layers();
    let dims = net.dims().to_vec();
    let mut plan = IntPlan {
        weights: Vec::with_capacity(n),
        biases: Vec::with_capacity(n),
        shifts: Vec::with_capacity(n),
        weight_scales: Vec::with_capacity(n),
        acc_scales: Vec::with_capacity(n),
        output_scale: 1.0,
        dims: dims.clone(),
    };
    let mut in_step = INPUT_STEP;
    for l in 0..n {
        let (w, b) = net.layer(l);
        let (wq, ws) = quantize_tensor(w)?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(crate::qnet::QnetError::NonFiniteWeight.into());
        }
        let acc_scale = ws * in_step;
        let bq: Vec<i32> = b
            .iter()
            .map(|&v| round_half_away(v / acc_scale).clamp(-BIAS_LIMIT, BIAS_LIMIT) as i32)
            .collect();
        let shift = if l + 1 < n {
            let max_in = (1i64 << (ACTIVATION_BITS[l] - 1)) - 1;
            let bound = wq
                .chunks_exact(dims[l])
                .zip(&bq)
                .map(|(row, &bi)| row.iter().map(|&q| (q as i64).abs() * max_in).sum::<i64>() + (bi as i64).max(0))
                .max()
                .unwrap_or(0);
            required_shift(bound, ACTIVATION_BITS[l + 1])
        } else {
            0
        };
        in_step = acc_scale * (1u64 << shift) as f64;
        plan.weights.push(wq);
        plan.biases.push(bq);
        plan.shifts.push(shift);
        plan.weight_scales.push(ws);
        plan.acc_scales.push(acc_scale);
    }
    plan.output_scale = plan.acc_scales[n - 1] as f32;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::infer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_policy_head() {
        let t = TwinPolicy::zeros();
        let h = t.fake_quant_forward([3.0, 4.0]).unwrap();
        assert_eq!(h.mean, 0.0);
        assert_eq!(h.log_std, 0.0);
        let plan = t.plan().unwrap();
        assert!(plan.weights.iter().flatten().all(|&w| w == 0));
        assert!(plan.biases.iter().flatten().all(|&b| b == 0));
        assert!(plan.weight_scales.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn seeded_policy_matches_device_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = TwinPolicy::new(&mut rng, true);
        let device = t.export(1).unwrap();
        let obs = [3.3, 1.1];
        let head = t.fake_quant_forward(obs).unwrap();
        let q = quantize_obs(obs);
        let acc = device.forward_int(q).acc;
        let s = device.output_scale() as f64;
        assert_eq!(head.mean.to_bits(), (acc[0] as f64 * s).to_bits());
        let dev = infer(&device, q, 0.5);
        let twin = crate::qnet::sample_action(head, 0.5);
        assert_eq!(dev.power_watts.to_bits(), twin.power_watts.to_bits());
    }

    #[test]
    fn lattice_weights_are_lossless() {
        // Master weights already on the lattice: float and fake-quant agree.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = TwinPolicy::new(&mut rng, true);
        let lattice = t.plan().unwrap().dequantized();
        let on = TwinPolicy::from_net(lattice.clone(), true);
        let again = on.plan().unwrap().dequantized();
        assert_eq!(lattice, again);
        let obs = [6.0, 2.0];
        let plan = on.plan().unwrap();
        let mut tape = Tape::default();
        let fq = lattice.forward(&on.input(obs), Some(&plan.activation_steps()), &mut tape)[0];
        let exact = plan.head(quantize_obs(obs)).mean;
        assert!((fq - exact).abs() <= 1e-9 * exact.abs().max(1.0));
    }

    #[test]
    fn rejects_nan_master_weights() {
        let mut t = TwinPolicy::zeros();
        t.net.params_mut()[3] = f64::NAN;
        assert!(t.plan().is_err());
    }
}

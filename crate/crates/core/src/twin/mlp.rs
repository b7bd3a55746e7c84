use rand::Rng;

/// Dense ReLU network with a linear output layer and flat parameter storage.
///
/// Parameters are laid out layer by layer as row-major weights followed by
/// biases, so optimizers and target-network updates operate on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations, for the ReLU mask.
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform `+-1/sqrt(fan_in)` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self {
            dims: dims.to_vec(),
            params,
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        }
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Self {
        assert_eq!(params.len(), param_count(dims), "parameter count mismatch");
        Self {
            dims: dims.to_vec(),
            params,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.dims[..=layer])
    }

    /// `(weights, biases)` of one layer.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let start = self.offset(l);
        let w = &self.params[start..start + i * o];
        let b = &self.params[start + i * o..start + i * o + o];
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let start = self.offset(l);
        let (w, b) = self.params[start..start + i * o + o].split_at_mut(i * o);
        (w, b)
    }

    /// Forward pass. When `act_steps` is given, each hidden activation is
    /// floored to a multiple of its step after the ReLU (fake quantization).
    pub fn forward<'t>(&self, x: &[f64], act_steps: Option<&[f64]>, tape: &'t mut Tape) -> &'t [f64] {
        let n = self.n_layers();
        tape.inputs.resize_with(n + 1, Vec::new);
        tape.pre.resize_with(n.saturating_sub(1), Vec::new);
        tape.inputs[0].clear();
        tape.inputs[0].extend_from_slice(x);
        for l in 0..n {
            let (w, b) = self.layer(l);
            let in_dim = self.dims[l];
            let (head, tail) = tape.inputs.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.clear();
            for (row, &bias) in w.chunks_exact(in_dim).zip(b) {
                let z: f64 = row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>() + bias;
                out.push(z);
            }
            if l + 1 < n {
                tape.pre[l].clear();
                tape.pre[l].extend_from_slice(out);
                let step = act_steps.map(|s| s[l]);
                for v in out.iter_mut() {
                    let r = v.max(0.0);
                    *v = match step {
                        Some(s) => s * (r / s).floor(),
                        None => r,
                    };
                }
            }
        }
        tape.output()
    }

    /// Backpropagates `dout` through the recorded pass. Parameter gradients
    /// are accumulated into `grad` when given; the input gradient is written
    /// to `dx` when given. ReLU and fake-quant floors pass gradients straight
    /// through wherever the pre-activation is positive.
    pub fn backward(&self, tape: &Tape, dout: &[f64], mut grad: Option<&mut [f64]>, dx: Option<&mut [f64]>) {
        let n = self.n_layers();
        let mut delta = dout.to_vec();
        let mut next = Vec::new();
        for l in (0..n).rev() {
            let (w, _) = self.layer(l);
            let in_dim = self.dims[l];
            let input = &tape.inputs[l];
            if let Some(g) = grad.as_deref_mut() {
                let start = self.offset(l);
                let (gw, gb) = g[start..start + in_dim * delta.len() + delta.len()]
                    .split_at_mut(in_dim * delta.len());
                for ((grow, gbias), &d) in gw.chunks_exact_mut(in_dim).zip(gb.iter_mut()).zip(&delta) {
                    if d != 0.0 {
                        for (gwi, &xi) in grow.iter_mut().zip(input) {
                            *gwi += d * xi;
                        }
                    }
                    *gbias += d;
                }
            }
            if l == 0 && dx.is_none() {
                break;
            }
            next.clear();
            next.resize(in_dim, 0.0);
            for (row, &d) in w.chunks_exact(in_dim).zip(&delta) {
                if d != 0.0 {
                    for (ni, &wi) in next.iter_mut().zip(row) {
                        *ni += d * wi;
                    }
                }
            }
            if l > 0 {
                for (ni, &z) in next.iter_mut().zip(&tape.pre[l - 1]) {
                    if z <= 0.0 {
                        *ni = 0.0;
                    }
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
        if let Some(dx) = dx {
            dx.copy_from_slice(&delta);
        }
    }

    /// `target <- tau * online + (1 - tau) * target`.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_forward() {
        // [2] -> [2] linear: W = [[1,2],[3,4]], b = [0.5, -1]
        let m = Mlp::from_params(&[2, 2], vec![1.0, 2.0, 3.0, 4.0, 0.5, -1.0]);
        let mut tape = Tape::default();
        assert_eq!(m.forward(&[10.0, 20.0], None, &mut tape), &[50.5, 109.0]);
    }

    #[test]
    fn relu_masks_gradient() {
        // 1 -> 1 (relu) -> 1
        let m = Mlp::from_params(&[1, 1, 1], vec![1.0, 0.0, 2.0, 0.0]);
        let mut tape = Tape::default();
        m.forward(&[-3.0], None, &mut tape);
        let mut g = vec![0.0; 4];
        let mut dx = [0.0];
        m.backward(&tape, &[1.0], Some(&mut g), Some(&mut dx));
        assert_eq!(dx, [0.0]);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn polyak_tau_one_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mlp::new(&[3, 4, 1], &mut rng);
        let mut b = Mlp::new(&[3, 4, 1], &mut rng);
        b.polyak_from(&a, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn fake_quant_floors_hidden() {
        let m = Mlp::from_params(&[1, 1, 1], vec![1.0, 0.0, 1.0, 0.0]);
        let mut tape = Tape::default();
        assert_eq!(m.forward(&[0.77], Some(&[0.25]), &mut tape), &[0.75]);
    }
}

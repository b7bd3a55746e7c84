use super::QnetError;

/// Layer widths of the deployed policy: 2 inputs, hidden [32, 64], 2 outputs.
pub const POLICY_DIMS: [usize; 4] = [2, 32, 64, 2];

/// Signed bitwidth of the activation entering each layer.
pub const ACTIVATION_BITS: [u32; 3] = [8, 12, 16];

/// One fully connected layer in the integer domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<i8>,
    pub biases: Vec<i32>,
    /// Right shift applied after ReLU. Ignored on the output layer.
    pub requant_shift: u8,
}

impl QuantLayer {
    /// Largest post-accumulation value for any input with entries in
    /// `[-max_in, max_in]` (or `[0, max_in]` when `nonneg_inputs`).
    ///
    /// Returns `(max positive accumulator, max |accumulator|)`.
    pub fn worst_case(&self, max_in: i64) -> (i64, i64) {
        let mut pos = 0i64;
        let mut abs = 0i64;
        for (row, &b) in self.weights.chunks(self.in_dim).zip(&self.biases) {
            let dot: i64 = row.iter().map(|&w| (w as i64).abs() * max_in).sum();
            pos = pos.max(dot + (b as i64).max(0));
            abs = abs.max(dot + (b as i64).abs());
        }
        (pos, abs)
    }
}

/// Smallest right shift that brings `bound` into a signed `bits`-wide register.
pub fn required_shift(bound: i64, bits: u32) -> u8 {
    let limit = (1i64 << (bits - 1)) - 1;
    let mut s = 0u8;
    while (bound >> s) > limit {
        s += 1;
    }
    s
}

/// Operation count of one forward pass: multiply-accumulates, bias adds, and
/// one ReLU plus one shift per hidden unit. Depends on the dimensions only.
pub fn op_count_for(dims: &[usize]) -> u64 {
    let n_layers = dims.len() - 1;
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (inp, out) = (w[0] as u64, w[1] as u64);
            let hidden_ops = if i + 1 < n_layers { 2 * out } else { 0 };
            inp * out + out + hidden_ops
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOutput {
    pub acc: [i32; 2],
    pub op_count: u64,
}

/// The deployable int8 policy. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPolicy {
    layers: Vec<QuantLayer>,
    output_scale: f32,
    version: u32,
}

impl QuantizedPolicy {
    /// Validates dimensions, weight range, and the worst-case bitwidth of every
    /// activation before accepting the layers.
    pub fn new(
        layers: Vec<QuantLayer>,
        output_scale: f32,
        version: u32,
    ) -> Result<Self, QnetError> {
        let expected_layers = POLICY_DIMS.len() - 1;
        if layers.len() != expected_layers {
            return Err(QnetError::LayerCount {
                expected: expected_layers,
                got: layers.len(),
            });
        }
        if !(output_scale.is_finite() && output_scale > 0.0) {
            return Err(QnetError::OutputScale(output_scale));
        }
        for (i, layer) in layers.iter().enumerate() {
            let (ein, eout) = (POLICY_DIMS[i], POLICY_DIMS[i + 1]);
            if layer.in_dim != ein
                || layer.out_dim != eout
                || layer.weights.len() != ein * eout
                || layer.biases.len() != eout
            {
                return Err(QnetError::Shape {
                    layer: i,
                    expected_out: eout,
                    expected_in: ein,
                    out_dim: layer.out_dim,
                    in_dim: layer.in_dim,
                });
            }
            if let Some(&w) = layer.weights.iter().find(|&&w| w == i8::MIN) {
                return Err(QnetError::WeightRange { layer: i, value: w });
            }
            let max_in = (1i64 << (ACTIVATION_BITS[i] - 1)) - 1;
            let (pos, abs) = layer.worst_case(max_in);
            if abs > i32::MAX as i64 {
                return Err(QnetError::AccumulatorOverflow { layer: i, bound: abs });
            }
            if i + 1 < expected_layers {
                let bits = ACTIVATION_BITS[i + 1];
                if required_shift(pos, bits) > layer.requant_shift {
                    return Err(QnetError::ShiftTooSmall {
                        layer: i,
                        shift: layer.requant_shift,
                        bound: pos,
                        bits,
                    });
                }
            }
        }
        Ok(Self {
            layers,
            output_scale,
            version,
        })
    }

    /// Policy with every weight and bias zero.
    pub fn zeros(version: u32) -> Self {
        let layers = POLICY_DIMS
            .windows(2)
            .map(|w| QuantLayer {
                out_dim: w[1],
                in_dim: w[0],
                weights: vec![0; w[0] * w[1]],
                biases: vec![0; w[1]],
                requant_shift: 0,
            })
            .collect();
        Self::new(layers, 1.0, version).expect("zero policy is valid")
    }

    pub fn layers(&self) -> &[QuantLayer] {
        &self.layers
    }

    pub fn output_scale(&self) -> f32 {
        self.output_scale
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn with_version(mut self, version: u32) -> Self {
        self.version = version;
        self
    }

    pub fn op_count(&self) -> u64 {
        op_count_for(&POLICY_DIMS)
    }

    /// Integer forward pass. Hidden layers apply ReLU then an arithmetic right
    /// shift; the output layer returns raw accumulators.
    pub fn forward_int(&self, obs_q: [i8; 2]) -> ForwardOutput {
        let mut ops = 0u64;
        let mut x: Vec<i32> = obs_q.iter().map(|&v| v as i32).collect();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.out_dim);
            for (row, &b) in layer.weights.chunks(layer.in_dim).zip(&layer.biases) {
                let mut acc = b;
                ops += 1;
                for (&w, &xi) in row.iter().zip(&x) {
                    acc += w as i32 * xi;
                    ops += 1;
                }
                if i < last {
                    acc = acc.max(0) >> layer.requant_shift;
                    ops += 2;
                }
                next.push(acc);
            }
            x = next;
        }
        ForwardOutput {
            acc: [x[0], x[1]],
            op_count: ops,
        }
    }

    /// Serialize to the weight blob layout: per layer `out:u16 in:u16`,
    /// row-major int8 weights, int32 LE biases, `shift:u8`; then
    /// `output_scale:f32` and `version:u32`, all little-endian.
    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&(layer.out_dim as u16).to_le_bytes());
            out.extend_from_slice(&(layer.in_dim as u16).to_le_bytes());
            out.extend(layer.weights.iter().map(|&w| w as u8));
            for b in &layer.biases {
                out.extend_from_slice(&b.to_le_bytes());
            }
            out.push(layer.requant_shift);
        }
        out.extend_from_slice(&self.output_scale.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self, QnetError> {
        let mut r = BlobReader { bytes, pos: 0 };
        let mut layers = Vec::new();
        while bytes.len() - r.pos > 8 {
            let out_dim = r.u16()? as usize;
            let in_dim = r.u16()? as usize;
            let weights = r.take(out_dim * in_dim)?.iter().map(|&b| b as i8).collect();
            let mut biases = Vec::with_capacity(out_dim);
            for _ in 0..out_dim {
                biases.push(i32::from_le_bytes(r.array()?));
            }
            let requant_shift = r.take(1)?[0];
            layers.push(QuantLayer {
                out_dim,
                in_dim,
                weights,
                biases,
                requant_shift,
            });
            if layers.len() > POLICY_DIMS.len() {
                break;
            }
        }
        let output_scale = f32::from_le_bytes(r.array()?);
        let version = u32::from_le_bytes(r.array()?);
        if r.pos != bytes.len() {
            return Err(QnetError::TrailingBytes(bytes.len() - r.pos));
        }
        Self::new(layers, output_scale, version)
    }
}

struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], QnetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(QnetError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], QnetError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, QnetError> {
        Ok(u16::from_le_bytes(self.array()?))
    }
}

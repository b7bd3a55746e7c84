//! Integer MLP inference as executed on the controller board.
//!
//! Weights and biases are symmetric int8 / int32, hidden activations widen
//! from 8 bits at the input to 12 and then 16 bits, and the two output
//! accumulators are scaled back to floats to parameterize the action
//! distribution.

mod action;
mod policy;
mod quant;
mod tanh;

pub use action::{infer, sample_action, Action, PolicyHead, LOG_STD_MAX, LOG_STD_MIN};
pub use policy::{
    op_count_for, required_shift, ForwardOutput, QuantLayer, QuantizedPolicy, ACTIVATION_BITS,
    POLICY_DIMS,
};
pub use quant::{quantize_obs, quantize_tensor, round_half_away, OBS_FULL_SCALE, OBS_OFFSET_VOLTS};
pub use tanh::tanh_poly;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnetError {
    #[error("non-finite weight")]
    NonFiniteWeight,
    #[error("layer {layer}: expected {expected_out}x{expected_in}, got {out_dim}x{in_dim}")]
    Shape {
        layer: usize,
        expected_out: usize,
        expected_in: usize,
        out_dim: usize,
        in_dim: usize,
    },
    #[error("expected {expected} layers, got {got}")]
    LayerCount { expected: usize, got: usize },
    #[error("layer {layer}: weight {value} outside [-127, 127]")]
    WeightRange { layer: usize, value: i8 },
    #[error("layer {layer}: shift {shift} leaves worst-case activation {bound} above {bits}-bit range")]
    ShiftTooSmall {
        layer: usize,
        shift: u8,
        bound: i64,
        bits: u32,
    },
    #[error("layer {layer}: worst-case accumulator {bound} overflows int32")]
    AccumulatorOverflow { layer: usize, bound: i64 },
    #[error("output scale must be finite and positive, got {0}")]
    OutputScale(f32),
    #[error("weight blob truncated at byte {0}")]
    Truncated(usize),
    #[error("weight blob has {0} trailing bytes")]
    TrailingBytes(usize),
}

use super::QnetError;

/// Observation volts mapped to zero in the int8 domain.
pub const OBS_OFFSET_VOLTS: f64 = 5.0;
/// Half-range of the photodiode input, in volts.
pub const OBS_FULL_SCALE: f64 = 5.0;

/// Round to nearest, ties away from zero.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    // f64::round already breaks ties away from zero.
    x.round()
}

/// Symmetric per-tensor int8 quantization.
///
/// `scale = max|w| / 127`, so the largest magnitude lands on +-127 and -128 is
/// never emitted. An all-zero tensor gets scale 1.
pub fn quantize_tensor(values: &[f64]) -> Result<(Vec<i8>, f64), QnetError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QnetError::NonFiniteWeight);
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok((vec![0; values.len()], 1.0));
    }
    let scale = max_abs / 127.0;
    let q = values
        .iter()
        .map(|&v| round_half_away(v / scale).clamp(-127.0, 127.0) as i8)
        .collect();
    Ok((q, scale))
}

/// Map window-mean photodiode voltages (0..10 V) onto the int8 input lattice.
pub fn quantize_obs(volts: [f64; 2]) -> [i8; 2] {
    volts.map(|v| {
        let v = if v.is_finite() { v } else { 0.0 };
        round_half_away(127.0 * (v - OBS_OFFSET_VOLTS) / OBS_FULL_SCALE).clamp(-127.0, 127.0) as i8
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_rounding() {
        let (q, s) = quantize_tensor(&[-1.0, 0.5, 1.0]).unwrap();
        assert_eq!(q, vec![-127, 64, 127]);
        assert_eq!(s, 1.0 / 127.0);
    }

    #[test]
    fn all_zero() {
        let (q, s) = quantize_tensor(&[0.0, 0.0]).unwrap();
        assert_eq!(q, vec![0, 0]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn single_element() {
        let (q, s) = quantize_tensor(&[2.0]).unwrap();
        assert_eq!(q, vec![127]);
        assert_eq!(s, 2.0 / 127.0);
    }

    #[test]
    fn rejects_nan() {
        assert_eq!(
            quantize_tensor(&[1.0, f64::NAN]),
            Err(QnetError::NonFiniteWeight)
        );
        assert_eq!(
            quantize_tensor(&[f64::INFINITY]),
            Err(QnetError::NonFiniteWeight)
        );
    }

    #[test]
    fn never_emits_minus_128() {
        let (q, _) = quantize_tensor(&[-3.0, 3.0, -2.999, 1e-9]).unwrap();
        assert!(q.iter().all(|&v| v >= -127));
    }

    #[test]
    fn ties_go_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1.0);
        assert_eq!(round_half_away(-0.5), -1.0);
        assert_eq!(round_half_away(2.5), 3.0);
    }

    #[test]
    fn observation_endpoints() {
        assert_eq!(quantize_obs([0.0, 10.0]), [-127, 127]);
        assert_eq!(quantize_obs([5.0, 12.0]), [0, 127]);
    }
}

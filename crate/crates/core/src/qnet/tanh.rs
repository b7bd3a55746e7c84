/// Segment width of the piecewise cubic on [0, 4).
const SEGMENT: f64 = 0.5;
/// Inputs at or beyond this magnitude saturate to +-1.
const SATURATION: f64 = 4.0;

/// Cubic Hermite pieces of tanh on [k/2, (k+1)/2), local variable t = |x| - k/2.
/// Coefficients are c0 + c1 t + c2 t^2 + c3 t^3.
const COEFFS: [[f64; 4]; 8] = [
    [0.0, 1.0, -0.02748957881173819, -0.24808358429644617],
    [0.46211715726000974, 0.7864477329659274, -0.3920156307427003, 0.03405631918773233],
    [0.7615941559557649, 0.41997434161402614, -0.3186614720341814, 0.10585835912507147],
    [0.9051482536448665, 0.18070663892364836, -0.15757628822951752, 0.0633606322120448],
    [0.9640275800758169, 0.07065082485316443, -0.06474713587161784, 0.027584716935485254],
    [0.9866142981514303, 0.026592226683160525, -0.02481551463992071, 0.01078576682960053],
    [0.9950547536867305, 0.009866037165440211, -0.009268191009117022, 0.004057384752218951],
    [0.9981778976111987, 0.003640884720487403, -0.003428614713581135, 0.0015049075681594637],
];

/// Piecewise-polynomial tanh used for action squashing on the device.
///
/// Odd by construction (evaluated on |x|, sign reapplied), exactly +-1 for
/// |x| >= 4, and within 7e-4 of tanh elsewhere.
pub fn tanh_poly(x: f64) -> f64 {
    if x.is_nan() {
        return 0.0;
    }
    let a = x.abs();
    let y = if a >= SATURATION {
        1.0
    } else {
        let k = ((a / SEGMENT) as usize).min(COEFFS.len() - 1);
        let t = a - k as f64 * SEGMENT;
        let [c0, c1, c2, c3] = COEFFS[k];
        (c0 + t * (c1 + t * (c2 + t * c3))).min(1.0)
    };
    if x < 0.0 {
        -y
    } else if x > 0.0 {
        y
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_saturation() {
        assert_eq!(tanh_poly(0.0), 0.0);
        assert_eq!(tanh_poly(10.0), 1.0);
        assert_eq!(tanh_poly(-10.0), -1.0);
        assert_eq!(tanh_poly(4.0), 1.0);
    }

    #[test]
    fn half_is_close() {
        assert!((tanh_poly(0.5) - 0.46211715726).abs() <= 2f64.powi(-7));
    }

    #[test]
    fn dense_grid_budget_and_monotone() {
        let step = 2f64.powi(-12);
        let n = (8.0 / step) as i64;
        let mut prev = -1.0f64;
        let mut worst = 0.0f64;
        for i in 0..=n {
            let x = -4.0 + i as f64 * step;
            let y = tanh_poly(x);
            assert!((-1.0..=1.0).contains(&y));
            assert!(y >= prev, "not monotone at {x}");
            assert_eq!(tanh_poly(-x), -y);
            worst = worst.max((y - x.tanh()).abs());
            prev = y;
        }
        assert!(worst <= 2f64.powi(-7), "max error {worst}");
    }
}

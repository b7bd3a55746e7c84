/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Central finite-difference gradient of `loss` at `params`.
pub fn numeric_gradient(params: &[f64], mut loss: impl FnMut(&[f64]) -> f64, h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest relative error between `analytic` and central differences of `loss`.
pub fn grad_check(params: &[f64], analytic: &[f64], loss: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(params.len(), analytic.len());
    numeric_gradient(params, loss, FD_STEP)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}

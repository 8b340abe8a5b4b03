/// Relative error with the `0/0 := 0` convention for values below `1e-12`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale <= 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Central-difference gradient of `loss` at `params`.
pub fn finite_diff_gradient<F>(loss: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = loss(&p);
            p[i] = orig - h;
            let minus = loss(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Maximum coordinatewise relative error between `analytic` and the
/// central-difference gradient of `loss` at `params`.
pub fn finite_diff_check<F>(loss: F, analytic: &[f64], params: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), params.len(), "gradient/parameter length mismatch");
    finite_diff_gradient(loss, params, h)
        .iter()
        .zip(analytic)
        .map(|(n, a)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

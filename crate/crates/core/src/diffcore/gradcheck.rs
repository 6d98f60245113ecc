use super::Tensor;

/// Compares an analytic gradient against central differences.
///
/// `f` maps a parameter list to `(value, analytic gradient)`; only the value
/// is used at the perturbed points. The result is the maximum over every
/// coordinate of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(params: &[Tensor], h: f64, mut f: F) -> f64
where
    F: FnMut(&[Tensor]) -> (f64, Vec<Tensor>),
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient list length");
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for (ti, tensor) in params.iter().enumerate() {
        for i in 0..tensor.len() {
            let orig = tensor.data()[i];
            probe[ti].data_mut()[i] = orig + h;
            let (plus, _) = f(&probe);
            probe[ti].data_mut()[i] = orig - h;
            let (minus, _) = f(&probe);
            probe[ti].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[ti].data()[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let w = vec![Tensor::scalar(3.0)];
        let err = grad_check(&w, 1e-5, |p| {
            let x = p[0].item();
            (x * x, vec![Tensor::scalar(2.0 * x)])
        });
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let w = vec![Tensor::scalar(3.0)];
        let err = grad_check(&w, 1e-5, |p| {
            let x = p[0].item();
            (x * x, vec![Tensor::scalar(x)])
        });
        assert!((err - 0.5).abs() < 1e-6, "{err}");
    }
}

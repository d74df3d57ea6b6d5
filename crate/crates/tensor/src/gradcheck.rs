//! Central finite differences, used as the oracle for reverse-mode gradients.

use crate::Tensor;

/// Numerical gradient of `f` at `x` by central differences with the given step.
pub fn central_difference(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, step: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    Tensor::new(x.shape().to_vec(), grad).expect("finite differences of a finite function")
}

/// Elementwise `|a - b| / max(|a|, |b|, floor)`, maximized.
///
/// `floor` keeps entries whose true gradient is ~0 from dividing roundoff by roundoff.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

//! Finite-difference gradient checking.
//!
//! Central differences over a flat parameter vector give an oracle that is
//! independent of the tape's backward rules: it only ever calls the forward
//! evaluation. Used by the per-op unit tests and the acceptance suite.

use crate::scalar::Scalar;

/// Default step for central differences on f64 data.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`: `(f(x+h e_i) - f(x-h e_i)) / 2h`.
pub fn central_diff_grad<T, F>(f: F, x: &[T], h: T) -> Vec<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut xs = x.to_vec();
    let two = T::one() + T::one();
    (0..x.len())
        .map(|i| {
            let orig = xs[i];
            xs[i] = orig + h;
            let fp = f(&xs);
            xs[i] = orig - h;
            let fm = f(&xs);
            xs[i] = orig;
            (fp - fm) / (two * h)
        })
        .collect()
}

/// Relative disagreement of two gradients: `max|a-b| / max(max|b|, floor)`.
///
/// The infinity-norm ratio is robust to individual near-zero entries while
/// still catching any wrong component.
pub fn relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> T {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut max_diff = T::zero();
    let mut max_ref = T::zero();
    for (&a, &n) in analytic.iter().zip(numeric) {
        let d = (a - n).abs();
        if d > max_diff {
            max_diff = d;
        }
        let r = n.abs();
        if r > max_ref {
            max_ref = r;
        }
    }
    let floor = T::from_f64(1e-10).unwrap();
    max_diff / max_ref.max(floor)
}

/// Run a central-difference check and return the relative error.
pub fn check_gradient<T, F>(f: F, x: &[T], analytic: &[T], h: T) -> T
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let numeric = central_diff_grad(f, x, h);
    relative_error(analytic, &numeric)
}

//! Numerical Riemannian diagnostics: Christoffel symbols from a metric
//! field by central differences, geodesic integration with classical RK4,
//! pullback metrics of learned maps, and a scale-free flatness residual.
//!
//! Everything here is verification machinery over analytic test metrics and
//! trained transfer maps; nothing feeds back into the training losses.

use crate::error::{GateError, Result};
use crate::scalar::{lit, Scalar};

/// Default central-difference step for metric derivatives on f64.
pub const DEFAULT_METRIC_STEP: f64 = 1e-5;

/// A metric field: point in R^D to a symmetric positive-definite D x D
/// matrix (row-major).
pub struct MetricField<T> {
    pub dim: usize,
    eval: Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>,
}

impl<T: Scalar> MetricField<T> {
    pub fn new(dim: usize, eval: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        MetricField { dim, eval: Box::new(eval) }
    }

    /// Flat Euclidean metric: the identity at every point.
    pub fn euclidean(dim: usize) -> Self {
        MetricField::new(dim, move |_| {
            let mut g = vec![T::zero(); dim * dim];
            for i in 0..dim {
                g[i * dim + i] = T::one();
            }
            g
        })
    }

    /// Unit 2-sphere in (theta, phi) coordinates: diag(1, sin^2 theta).
    pub fn unit_sphere() -> Self {
        MetricField::new(2, |x: &[T]| {
            let s = x[0].sin();
            vec![T::one(), T::zero(), T::zero(), s * s]
        })
    }

    /// Constant positive multiple of another metric.
    pub fn scaled(factor: f64, inner: MetricField<T>) -> Self {
        let c = lit::<T>(factor);
        MetricField::new(inner.dim, move |x: &[T]| {
            inner.evaluate(x).into_iter().map(|v| c * v).collect()
        })
    }

    /// Pullback metric `J^T J` of a smooth map, with the Jacobian taken by
    /// central differences at each query point.
    pub fn pullback(
        dim: usize,
        map: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        step: T,
    ) -> Self {
        MetricField::new(dim, move |x: &[T]| pullback_metric(&map, x, step))
    }

    pub fn evaluate(&self, x: &[T]) -> Vec<T> {
        (self.eval)(x)
    }

    fn evaluate_checked(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(GateError::dimension("metric point", x.len(), self.dim));
        }
        let g = (self.eval)(x);
        if g.len() != self.dim * self.dim {
            return Err(GateError::dimension("metric matrix", g.len(), self.dim * self.dim));
        }
        let tol = lit::<T>(1e-12);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (g[i * self.dim + j] - g[j * self.dim + i]).abs() > tol {
                    return Err(GateError::Contract(format!(
                        "metric not symmetric at entry ({i},{j})"
                    )));
                }
            }
        }
        Ok(g)
    }
}

/// Christoffel symbols at a point, flattened `[lambda][mu][nu]`.
#[derive(Clone, Debug)]
pub struct Christoffel<T> {
    pub dim: usize,
    data: Vec<T>,
    /// Infinity-norm condition estimate of the metric at the point.
    pub condition: f64,
}

impl<T: Scalar> Christoffel<T> {
    pub fn get(&self, lambda: usize, mu: usize, nu: usize) -> T {
        self.data[(lambda * self.dim + mu) * self.dim + nu]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Largest absolute symbol, useful as a flatness check.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Connection coefficients from the metric:
/// `Gamma^l_mn = 1/2 g^{lr} (d_m g_nr + d_n g_rm - d_r g_mn)`,
/// with metric derivatives by central differences of step `h` and the
/// inverse metric by Gaussian elimination with partial pivoting. The lower
/// indices are symmetric by construction.
pub fn christoffel<T: Scalar>(g: &MetricField<T>, x: &[T], h: T) -> Result<Christoffel<T>> {
    let d = g.dim;
    let g0 = g.evaluate_checked(x)?;
    let (inv, condition) = invert_spd(&g0, d)?;

    // dg[sigma] = d g / d x^sigma, each a d x d matrix.
    let mut dg = Vec::with_capacity(d);
    let two_h = lit::<T>(2.0) * h;
    for sigma in 0..d {
        let mut xp = x.to_vec();
        xp[sigma] = xp[sigma] + h;
        let gp = g.evaluate_checked(&xp)?;
        let mut xm = x.to_vec();
        xm[sigma] = xm[sigma] - h;
        let gm = g.evaluate_checked(&xm)?;
        let grad: Vec<T> = gp.iter().zip(&gm).map(|(&p, &m)| (p - m) / two_h).collect();
        dg.push(grad);
    }

    let half = lit::<T>(0.5);
    let mut data = vec![T::zero(); d * d * d];
    for lambda in 0..d {
        for mu in 0..d {
            for nu in mu..d {
                let mut acc = T::zero();
                for rho in 0..d {
                    let term = dg[mu][nu * d + rho] + dg[nu][rho * d + mu] - dg[rho][mu * d + nu];
                    acc = acc + inv[lambda * d + rho] * term;
                }
                let value = half * acc;
                data[(lambda * d + mu) * d + nu] = value;
                data[(lambda * d + nu) * d + mu] = value;
            }
        }
    }
    Ok(Christoffel { dim: d, data, condition })
}

/// Invert a symmetric positive-definite matrix by Gaussian elimination with
/// partial pivoting; returns the inverse and an infinity-norm condition
/// estimate.
fn invert_spd<T: Scalar>(g: &[T], d: usize) -> Result<(Vec<T>, f64)> {
    let mut a = g.to_vec();
    let mut inv = vec![T::zero(); d * d];
    for i in 0..d {
        inv[i * d + i] = T::one();
    }
    let norm_inf = |m: &[T]| {
        (0..d)
            .map(|i| m[i * d..(i + 1) * d].iter().map(|v| v.abs()).fold(T::zero(), |s, v| s + v))
            .fold(T::zero(), |mx, v| mx.max(v))
    };
    let g_norm = norm_inf(g);

    for col in 0..d {
        let mut pivot = col;
        for row in (col + 1)..d {
            if a[row * d + col].abs() > a[pivot * d + col].abs() {
                pivot = row;
            }
        }
        let p = a[pivot * d + col];
        if p.abs() < lit::<T>(1e-300) {
            return Err(GateError::LinearAlgebra {
                message: "singular metric".into(),
                condition: f64::INFINITY,
            });
        }
        if pivot != col {
            for j in 0..d {
                a.swap(col * d + j, pivot * d + j);
                inv.swap(col * d + j, pivot * d + j);
            }
        }
        let p = a[col * d + col];
        for j in 0..d {
            a[col * d + j] = a[col * d + j] / p;
            inv[col * d + j] = inv[col * d + j] / p;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let f = a[row * d + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..d {
                let delta_a = f * a[col * d + j];
                a[row * d + j] = a[row * d + j] - delta_a;
                let delta_i = f * inv[col * d + j];
                inv[row * d + j] = inv[row * d + j] - delta_i;
            }
        }
    }
    let condition = (g_norm * norm_inf(&inv)).to_f64().unwrap_or(f64::INFINITY);
    Ok((inv, condition))
}

/// A sampled geodesic: parameter, position, velocity triples.
#[derive(Clone, Debug)]
pub struct GeodesicPath<T> {
    pub samples: Vec<(T, Vec<T>, Vec<T>)>,
    pub step: T,
}

impl<T: Scalar> GeodesicPath<T> {
    pub fn end_position(&self) -> &[T] {
        &self.samples.last().unwrap().1
    }

    /// Metric norm of the velocity, `g(v, v)`, at every sample. Constant
    /// along an exact geodesic.
    pub fn tangent_norms(&self, g: &MetricField<T>) -> Result<Vec<T>> {
        self.samples
            .iter()
            .map(|(_, x, v)| {
                let gm = g.evaluate_checked(x)?;
                let d = g.dim;
                let mut acc = T::zero();
                for i in 0..d {
                    for j in 0..d {
                        acc = acc + gm[i * d + j] * v[i] * v[j];
                    }
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Integrate the geodesic equation `x'' + Gamma(x)(x', x') = 0` with
/// classical fourth-order Runge-Kutta on the first-order system `(x, v)`.
pub fn geodesic_integrate<T: Scalar>(
    g: &MetricField<T>,
    x0: &[T],
    v0: &[T],
    tau_span: (T, T),
    steps: usize,
) -> Result<GeodesicPath<T>> {
    if steps < 2 {
        return Err(GateError::Parameter(format!("need at least 2 steps, got {steps}")));
    }
    if x0.len() != g.dim || v0.len() != g.dim {
        return Err(GateError::dimension("geodesic initial conditions", x0.len(), g.dim));
    }
    let d = g.dim;
    let h_fd = lit::<T>(DEFAULT_METRIC_STEP);
    let dt = (tau_span.1 - tau_span.0) / lit::<T>(steps as f64);

    let accel = |x: &[T], v: &[T], tau: T| -> Result<Vec<T>> {
        let gamma = christoffel(g, x, h_fd).map_err(|e| GateError::Integration {
            message: e.to_string(),
            last_tau: tau.to_f64().unwrap_or(f64::NAN),
        })?;
        let mut a = vec![T::zero(); d];
        for rho in 0..d {
            let mut acc = T::zero();
            for l in 0..d {
                for n in 0..d {
                    acc = acc + gamma.get(rho, l, n) * v[l] * v[n];
                }
            }
            a[rho] = -acc;
        }
        Ok(a)
    };

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut tau = tau_span.0;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push((tau, x.clone(), v.clone()));

    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let two = lit::<T>(2.0);
    for _ in 0..steps {
        let k1x = v.clone();
        let k1v = accel(&x, &v, tau)?;

        let x2: Vec<T> = x.iter().zip(&k1x).map(|(&a, &b)| a + half * dt * b).collect();
        let v2: Vec<T> = v.iter().zip(&k1v).map(|(&a, &b)| a + half * dt * b).collect();
        let k2x = v2.clone();
        let k2v = accel(&x2, &v2, tau)?;

        let x3: Vec<T> = x.iter().zip(&k2x).map(|(&a, &b)| a + half * dt * b).collect();
        let v3: Vec<T> = v.iter().zip(&k2v).map(|(&a, &b)| a + half * dt * b).collect();
        let k3x = v3.clone();
        let k3v = accel(&x3, &v3, tau)?;

        let x4: Vec<T> = x.iter().zip(&k3x).map(|(&a, &b)| a + dt * b).collect();
        let v4: Vec<T> = v.iter().zip(&k3v).map(|(&a, &b)| a + dt * b).collect();
        let k4x = v4.clone();
        let k4v = accel(&x4, &v4, tau)?;

        for i in 0..d {
            x[i] = x[i] + sixth * dt * (k1x[i] + two * k2x[i] + two * k3x[i] + k4x[i]);
            v[i] = v[i] + sixth * dt * (k1v[i] + two * k2v[i] + two * k3v[i] + k4v[i]);
        }
        tau = tau + dt;
        samples.push((tau, x.clone(), v.clone()));
    }
    Ok(GeodesicPath { samples, step: dt })
}

/// Pullback metric `g = J^T J` of a map at a point, with the Jacobian by
/// central differences. Symmetric positive semi-definite by construction.
pub fn pullback_metric<T: Scalar>(
    map: &(impl Fn(&[T]) -> Vec<T> + ?Sized),
    z: &[T],
    step: T,
) -> Vec<T> {
    let d = z.len();
    let two_h = lit::<T>(2.0) * step;
    // Columns of J: one per input coordinate.
    let mut columns = Vec::with_capacity(d);
    for j in 0..d {
        let mut zp = z.to_vec();
        zp[j] = zp[j] + step;
        let fp = map(&zp);
        let mut zm = z.to_vec();
        zm[j] = zm[j] - step;
        let fm = map(&zm);
        let col: Vec<T> = fp.iter().zip(&fm).map(|(&p, &m)| (p - m) / two_h).collect();
        columns.push(col);
    }
    let mut g = vec![T::zero(); d * d];
    for i in 0..d {
        for j in i..d {
            let dot = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(&a, &b)| a * b)
                .fold(T::zero(), |s, v| s + v);
            g[i * d + j] = dot;
            g[j * d + i] = dot;
        }
    }
    g
}

/// Scale-invariant flatness diagnostic: `||g / mean(diag g) - I||_F`.
///
/// Zero for any positive multiple of the identity. A zero matrix (mean
/// diagonal 0) is reported as `sqrt(D)`, its unscaled distance from the
/// identity.
pub fn flatness_residual<T: Scalar>(g: &[T], dim: usize) -> T {
    let mean_diag = (0..dim).map(|i| g[i * dim + i]).fold(T::zero(), |s, v| s + v)
        / lit::<T>(dim as f64);
    if mean_diag == T::zero() {
        return lit::<T>(dim as f64).sqrt();
    }
    let mut acc = T::zero();
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { T::one() } else { T::zero() };
            let v = g[i * dim + j] / mean_diag - target;
            acc = acc + v * v;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const H: f64 = DEFAULT_METRIC_STEP;

    #[test]
    fn euclidean_christoffel_vanishes() {
        let g = MetricField::<f64>::euclidean(3);
        let gamma = christoffel(&g, &[0.3, -1.0, 2.0], H).unwrap();
        assert!(gamma.max_abs() <= 1e-9, "max |Gamma| = {}", gamma.max_abs());
        assert!((gamma.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_christoffel_closed_form() {
        // At theta = pi/4: Gamma^theta_phiphi = -sin cos = -0.5 and
        // Gamma^phi_thetaphi = cot = 1.
        let g = MetricField::<f64>::unit_sphere();
        let gamma = christoffel(&g, &[FRAC_PI_4, 0.3], H).unwrap();
        assert!((gamma.get(0, 1, 1) + 0.5).abs() < 1e-6, "{}", gamma.get(0, 1, 1));
        assert!((gamma.get(1, 0, 1) - 1.0).abs() < 1e-6, "{}", gamma.get(1, 0, 1));
        // Lower-index symmetry is constructional and exact.
        assert_eq!(gamma.get(1, 0, 1), gamma.get(1, 1, 0));
    }

    #[test]
    fn christoffel_invariant_under_constant_scaling() {
        let base = MetricField::<f64>::unit_sphere();
        let scaled = MetricField::scaled(7.5, MetricField::unit_sphere());
        let point = [1.1, 0.4];
        let a = christoffel(&base, &point, H).unwrap();
        let b = christoffel(&scaled, &point, H).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let g = MetricField::<f64>::new(2, |_| vec![1.0, 0.5, -0.5, 1.0]);
        assert!(matches!(christoffel(&g, &[0.0, 0.0], H), Err(GateError::Contract(_))));
    }

    #[test]
    fn euclidean_geodesic_is_straight_line() {
        let g = MetricField::<f64>::euclidean(2);
        let path = geodesic_integrate(&g, &[1.0, -2.0], &[0.5, 0.25], (0.0, 2.0), 100).unwrap();
        let end = path.end_position();
        // Gamma = 0 within fd tolerance: x(tau) = x0 + tau v0.
        assert!((end[0] - 2.0).abs() < 1e-9);
        assert!((end[1] + 1.5).abs() < 1e-9);
    }

    #[test]
    fn equatorial_great_circle_advances_in_longitude() {
        let g = MetricField::<f64>::unit_sphere();
        let path = geodesic_integrate(
            &g,
            &[FRAC_PI_2, 0.0],
            &[0.0, 1.0],
            (0.0, FRAC_PI_2),
            1000,
        )
        .unwrap();
        let end = path.end_position();
        assert!((end[0] - FRAC_PI_2).abs() < 1e-3, "theta drift {}", end[0] - FRAC_PI_2);
        assert!((end[1] - FRAC_PI_2).abs() < 1e-3, "longitude {}", end[1]);
    }

    #[test]
    fn sphere_geodesic_preserves_tangent_norm_and_radius() {
        let g = MetricField::<f64>::unit_sphere();
        // Tilted start so the path is a nontrivial great circle.
        let x0 = [FRAC_PI_4, 0.0];
        let speed_sq = 0.6 * 0.6 + (FRAC_PI_4.sin() * 0.9).powi(2);
        let v0 = [0.6, 0.9];
        let path = geodesic_integrate(&g, &x0, &v0, (0.0, PI), 1000).unwrap();
        let norms = path.tangent_norms(&g).unwrap();
        for n in &norms {
            assert!((n - speed_sq).abs() < 1e-4, "tangent norm drift {}", n - speed_sq);
        }
        // Embedded in R^3, every sample sits on the unit sphere.
        for (_, x, _) in &path.samples {
            let (theta, phi) = (x[0], x[1]);
            let p = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn geodesic_rejects_too_few_steps() {
        let g = MetricField::<f64>::euclidean(2);
        assert!(geodesic_integrate(&g, &[0.0, 0.0], &[1.0, 0.0], (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn pullback_of_identity_and_scaling() {
        let id = |z: &[f64]| z.to_vec();
        let g = pullback_metric(&id, &[0.2, -0.4, 1.0], 1e-5);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[i * 3 + j] - expect).abs() < 1e-9);
            }
        }
        let twice = |z: &[f64]| z.iter().map(|&v| 2.0 * v).collect::<Vec<_>>();
        let g = pullback_metric(&twice, &[0.2, -0.4], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-9);
        assert!((g[3] - 4.0).abs() < 1e-9);
        assert!(g[1].abs() < 1e-9);
    }

    #[test]
    fn pullback_is_symmetric_for_nonlinear_maps() {
        let f = |z: &[f64]| {
            vec![
                (z[0] * z[1]).sin(),
                z[0] * z[0] - 0.5 * z[1],
                z[1].exp() * 0.1,
            ]
        };
        let g = pullback_metric(&f, &[0.3, 0.7], 1e-5);
        assert!((g[1] - g[2]).abs() <= 1e-10);
    }

    #[test]
    fn flatness_residual_examples() {
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(flatness_residual(&id, 2), 0.0);
        let scaled = [3.0, 0.0, 0.0, 3.0];
        assert_eq!(flatness_residual(&scaled, 2), 0.0);
        let diag12 = [1.0, 0.0, 0.0, 2.0];
        let expect = 2.0f64.sqrt() / 3.0;
        assert!((flatness_residual(&diag12, 2) - expect).abs() < 1e-12);
    }
}

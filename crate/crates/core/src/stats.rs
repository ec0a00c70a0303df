//! Evaluation statistics: RMSE, Pearson correlation, and a full-spectrum
//! principal component analysis via cyclic Jacobi rotations.

use crate::error::{GateError, Result};
use crate::scalar::{lit, Scalar};

/// Root mean squared error between two equal-length slices.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(GateError::dimension("rmse", y.len(), y_hat.len()));
    }
    let mse = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    Ok(mse.sqrt())
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(GateError::dimension("pearson", x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GateError::Parameter("pearson undefined for constant input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// PCA result: row projections onto the top-k components and the full
/// eigenvalue spectrum in descending order.
#[derive(Clone, Debug)]
pub struct Pca<T> {
    /// `n x k` projections of the mean-centered rows.
    pub projections: Vec<Vec<T>>,
    /// All eigenvalues of the covariance matrix, descending.
    pub eigenvalues: Vec<T>,
    /// `d x k` eigenvector matrix (columns are components).
    pub components: Vec<Vec<T>>,
}

/// Project rows onto their top-`k` principal components.
///
/// The covariance is the population covariance of the mean-centered rows;
/// its full spectrum comes from cyclic Jacobi rotations, which keep the
/// eigenvector basis orthonormal by construction.
pub fn pca_project<T: Scalar>(rows: &[Vec<T>], k: usize) -> Result<Pca<T>> {
    let n = rows.len();
    if n == 0 {
        return Err(GateError::Parameter("pca needs at least one row".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(GateError::Parameter("pca rows must share a width".into()));
    }
    if k == 0 || k > d {
        return Err(GateError::Parameter(format!("component count {k} outside 1..={d}")));
    }
    if n < k + 1 {
        return Err(GateError::Parameter(format!(
            "pca needs at least k+1 = {} rows, got {n}",
            k + 1
        )));
    }

    // Mean-center.
    let nf = lit::<T>(n as f64);
    let mut mean = vec![T::zero(); d];
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m = *m / nf;
    }
    let centered: Vec<Vec<T>> = rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(&x, &m)| x - m).collect())
        .collect();

    // Population covariance, d x d.
    let mut cov = vec![T::zero(); d * d];
    for row in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / nf;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(&mut cov, d)?;

    // Sort descending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    let sorted_values: Vec<T> = order.iter().map(|&i| eigenvalues[i]).collect();
    let components: Vec<Vec<T>> = (0..d)
        .map(|r| order.iter().take(k).map(|&c| vectors[r * d + c]).collect())
        .collect();

    let projections = centered
        .iter()
        .map(|row| {
            (0..k)
                .map(|c| (0..d).map(|i| row[i] * components[i][c]).fold(T::zero(), |a, b| a + b))
                .collect()
        })
        .collect();

    Ok(Pca { projections, eigenvalues: sorted_values, components })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (in place).
///
/// Returns (eigenvalues, row-major eigenvector matrix with eigenvectors in
/// columns).
fn jacobi_eigen<T: Scalar>(a: &mut [T], d: usize) -> Result<(Vec<T>, Vec<T>)> {
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let frob = a.iter().map(|&x| x * x).fold(T::zero(), |s, x| s + x).sqrt();
    let tol = lit::<T>(1e-14) * frob.max(T::one());

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..d {
            for q in (p + 1)..d {
                off = off + a[p * d + q] * a[p * d + q];
            }
        }
        if off.sqrt() <= tol {
            let eig = (0..d).map(|i| a[i * d + i]).collect();
            return Ok((eig, v));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let tau = (aqq - app) / (lit::<T>(2.0) * apq);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                // Rotate rows/columns p and q of A.
                for i in 0..d {
                    if i != p && i != q {
                        let aip = a[i * d + p];
                        let aiq = a[i * d + q];
                        a[i * d + p] = c * aip - s * aiq;
                        a[p * d + i] = a[i * d + p];
                        a[i * d + q] = s * aip + c * aiq;
                        a[q * d + i] = a[i * d + q];
                    }
                }
                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = T::zero();
                a[q * d + p] = T::zero();

                // Accumulate the rotation into V.
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = c * vip - s * viq;
                    v[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }
    Err(GateError::Parameter("jacobi eigensolver failed to converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-12, "sqrt(12.5) = {v}");
        // rmse^2 = mse
        assert!((v * v - 12.5).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let yneg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson(&x, &yneg).unwrap() + 1.0).abs() < 1e-12);
    }

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect()
    }

    #[test]
    fn rank_one_data_has_single_component() {
        // Points on a line in R^50: second eigenvalue vanishes.
        let dir: Vec<f64> = (0..50).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.5).collect();
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| dir.iter().map(|&d| d * i as f64).collect())
            .collect();
        let pca = pca_project(&rows, 2).unwrap();
        assert!(pca.eigenvalues[0] > 0.0);
        assert!(pca.eigenvalues[1].abs() <= 1e-10, "second eigenvalue {}", pca.eigenvalues[1]);
    }

    #[test]
    fn eigenvectors_orthonormal_and_residuals_small() {
        let rows = random_rows(40, 12, 3);
        let d = 12;
        let pca = pca_project(&rows, d).unwrap();
        // Orthonormality of all d components.
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|r| pca.components[r][i] * pca.components[r][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "dot({i},{j}) = {dot}");
            }
        }
        // Eigen residual: cov v = lambda v.
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, &x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut cov = vec![0.0; d * d];
        for r in &rows {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
                }
            }
        }
        for c in 0..d {
            let v: Vec<f64> = (0..d).map(|r| pca.components[r][c]).collect();
            for i in 0..d {
                let av: f64 = (0..d).map(|j| cov[i * d + j] * v[j]).sum();
                let resid = av - pca.eigenvalues[c] * v[i];
                assert!(resid.abs() < 1e-8, "residual {resid} at ({i},{c})");
            }
        }
        // Eigenvalue sum equals covariance trace.
        let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        let esum: f64 = pca.eigenvalues.iter().sum();
        assert!((trace - esum).abs() < 1e-8, "trace {trace} vs eigensum {esum}");
    }

    #[test]
    fn pca_needs_enough_rows() {
        let rows = random_rows(2, 5, 1);
        assert!(pca_project(&rows, 2).is_err(), "needs k+1 rows");
    }
}

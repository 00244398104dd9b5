//! Dense least-squares kernels for the small design matrices used by the
//! regression benchmarks and the stationarity tests.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// Outcome of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub beta: Array1<f64>,
    /// True when the design matrix was numerically rank deficient and the
    /// minimum-norm solution was returned instead.
    pub rank_deficient: bool,
}

/// Solve min ||y - X b||^2 by Householder QR. Falls back to the
/// minimum-norm solution (via Jacobi SVD) when X is rank deficient.
pub fn least_squares(x: &Array2<f64>, y: &Array1<f64>) -> Result<LeastSquares> {
    let (n, m) = x.dim();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n < m || m == 0 {
        return Err(Error::SingularRegression);
    }

    // Householder QR, applying reflections to a copy of y as we go.
    let mut r = x.clone();
    let mut qty = y.clone();
    let mut max_diag: f64 = 0.0;
    let mut min_diag: f64 = f64::INFINITY;

    for k in 0..m {
        let mut norm = 0.0;
        for i in k..n {
            norm += r[[i, k]] * r[[i, k]];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            min_diag = 0.0;
            continue;
        }
        let alpha = if r[[k, k]] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = r[[k, k]] - alpha;
        for i in k + 1..n {
            v[i - k] = r[[i, k]];
        }
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        if vtv > 0.0 {
            for j in k..m {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i - k] * r[[i, j]];
                }
                let scale = 2.0 * dot / vtv;
                for i in k..n {
                    r[[i, j]] -= scale * v[i - k];
                }
            }
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * qty[i];
            }
            let scale = 2.0 * dot / vtv;
            for i in k..n {
                qty[i] -= scale * v[i - k];
            }
        }
        let d = r[[k, k]].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }

    let rank_deficient = min_diag <= max_diag * 1e-12 || max_diag == 0.0;
    if rank_deficient {
        let beta = pinv_solve(x, y)?;
        return Ok(LeastSquares { beta, rank_deficient: true });
    }

    // Back-substitution on the m x m upper triangle.
    let mut beta = Array1::zeros(m);
    for k in (0..m).rev() {
        let mut s = qty[k];
        for j in k + 1..m {
            s -= r[[k, j]] * beta[j];
        }
        beta[k] = s / r[[k, k]];
    }
    Ok(LeastSquares { beta, rank_deficient: false })
}

/// Minimum-norm least squares via one-sided Jacobi SVD. Only intended for
/// the small column counts seen here.
pub fn pinv_solve(x: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
    let (n, m) = x.dim();
    let mut u = x.clone();
    let mut v: Array2<f64> = Array2::eye(m);

    // Sweep until all column pairs are orthogonal.
    for _ in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..m {
            for q in p + 1..m {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    alpha += u[[i, p]] * u[[i, p]];
                    beta += u[[i, q]] * u[[i, q]];
                    gamma += u[[i, p]] * u[[i, q]];
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
                for i in 0..m {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp - s * vq;
                    v[[i, q]] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }

    let mut sigma = vec![0.0; m];
    for j in 0..m {
        let mut s = 0.0;
        for i in 0..n {
            s += u[[i, j]] * u[[i, j]];
        }
        sigma[j] = s.sqrt();
    }
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(Array1::zeros(m));
    }
    let tol = smax * 1e-12;

    // beta = V diag(1/sigma) U^T y over the numerically nonzero directions.
    let mut beta = Array1::zeros(m);
    for j in 0..m {
        if sigma[j] <= tol {
            continue;
        }
        let mut uty = 0.0;
        for i in 0..n {
            uty += u[[i, j]] / sigma[j] * y[i];
        }
        let coef = uty / sigma[j];
        for i in 0..m {
            beta[i] += v[[i, j]] * coef;
        }
    }
    Ok(beta)
}

/// Cholesky solve of the SPD system A b = rhs (used by the ridge normal
/// equations, where A = X^T X + lambda I is positive definite).
pub fn solve_spd(a: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let m = a.nrows();
    if a.ncols() != m || rhs.len() != m {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}x{m} with rhs {m}"),
            got: format!("{}x{} with rhs {}", a.nrows(), a.ncols(), rhs.len()),
        });
    }
    let mut l = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::SingularRegression);
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    // Forward then back substitution.
    let mut z = Array1::zeros(m);
    for i in 0..m {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut b = Array1::zeros(m);
    for i in (0..m).rev() {
        let mut s = z[i];
        for k in i + 1..m {
            s -= l[[k, i]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn qr_matches_normal_equations() {
        let x = array![
            [1.0, 2.0, 0.5],
            [1.0, -1.0, 1.5],
            [1.0, 0.3, -0.7],
            [1.0, 1.1, 0.2],
            [1.0, -0.4, 0.9],
        ];
        let y = array![1.0, 0.0, 2.0, -1.0, 0.5];
        let ls = least_squares(&x, &y).unwrap();
        assert!(!ls.rank_deficient);

        // Normal-equations oracle: (X^T X) b = X^T y by Cholesky.
        let xtx = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let oracle = solve_spd(&xtx, &xty).unwrap();
        for j in 0..3 {
            assert!((ls.beta[j] - oracle[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_falls_back_to_min_norm() {
        // Second column is twice the first.
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let ls = least_squares(&x, &y).unwrap();
        assert!(ls.rank_deficient);
        // Fit is exact and the min-norm solution is (1/5, 2/5).
        assert!((ls.beta[0] - 0.2).abs() < 1e-10);
        assert!((ls.beta[1] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn spd_solve_round_trip() {
        let a = array![[4.0, 1.0, 0.2], [1.0, 3.0, -0.5], [0.2, -0.5, 2.0]];
        let b = array![1.0, -2.0, 0.7];
        let sol = solve_spd(&a, &b).unwrap();
        let back = a.dot(&sol);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }
}

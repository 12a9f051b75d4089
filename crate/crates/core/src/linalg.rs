//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`min_eig`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// `M + M^T`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a symmetric matrix (only the lower triangle is trusted).
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    m.clone().symmetric_eigenvalues()
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Fails when `||M - M^T||_max > 1e-12 * (1 + ||M||_max)`.
pub fn min_eig(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            what: "square matrix",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = 1.0 + m.amax();
    let asymmetry = (m - m.transpose()).amax() / scale;
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NonSymmetric { asymmetry });
    }
    Ok(symmetric_eigenvalues(m).min())
}

/// Smallest eigenvalue of a symmetric matrix with a unit eigenvector.
pub fn min_eig_pair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    min_eig(m)?;
    let eig = m.clone().symmetric_eigen();
    let k = eig.eigenvalues.imin();
    Ok((eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// Singular values below `tol * max(1, sigma_max)` count as zero.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to at least `cols` rows so the SVD returns a full right basis.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(1.0);
    let keep: alloc::vec::Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol * smax)
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

/// Minimum-norm least-squares solution of `m x = rhs`.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(rhs, 1e-12 * smax.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn central_difference<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let f0 = f(x);
    let mut j = DMatrix::zeros(f0.len(), x.len());
    let mut xp = x.clone();
    for c in 0..x.len() {
        let step = h * (1.0 + x[c].abs());
        xp[c] = x[c] + step;
        let fp = f(&xp);
        xp[c] = x[c] - step;
        let fm = f(&xp);
        xp[c] = x[c];
        j.set_column(c, &((fp - fm) / (2.0 * step)));
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi rotations; independent of the library eigensolver.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        sym(&m)
    }

    #[test]
    fn min_eig_agrees_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..12 {
            let m = random_symmetric(n, &mut rng);
            let oracle = jacobi_eigenvalues(&m)[0];
            let got = min_eig(&m).unwrap();
            assert!((got - oracle).abs() <= 1e-10, "n={n}: {got} vs {oracle}");
        }
    }

    #[test]
    fn min_eig_small_cases() {
        assert_eq!(min_eig(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0, 5.0]));
        assert!((min_eig(&d).unwrap() + 3.0).abs() < 1e-14);
        let (v, x) = min_eig_pair(&d).unwrap();
        assert!((v + 3.0).abs() < 1e-14);
        assert!((x[1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eig_pair_is_eigenpair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_symmetric(10, &mut rng);
        let (v, x) = min_eig_pair(&m).unwrap();
        assert!((&m * &x - &x * v).amax() < 1e-10);
        assert!((x.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1e-6, 1.0]);
        assert!(matches!(min_eig(&m), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn null_space_is_orthonormal_kernel() {
        let a = DMatrix::from_row_slice(2, 3, &[-1.0, 0.0, 1.0, 0.0, -1.0, -1.0]);
        let z = null_space(&a, 1e-10);
        assert_eq!(z.ncols(), 1);
        assert!((&a * &z).amax() < 1e-12);
        assert!((z.transpose() * &z - DMatrix::identity(1, 1)).amax() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_consistent_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, -1.0]);
        let x = DVector::from_vec(vec![9.0, 8.0]);
        let got = least_squares(&a, &(&a * &x));
        assert!((got - x).amax() < 1e-12);
    }

    #[test]
    fn central_difference_of_quadratic() {
        let x = DVector::from_vec(vec![0.5, -2.0]);
        let j = central_difference(|v| DVector::from_vec(vec![v[0] * v[1], v[0] * v[0]]), &x, 1e-6);
        let expected = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 1.0, 0.0]);
        assert!((j - expected).amax() < 1e-8);
    }
}

//! SVD-backed pseudo-inverse and minimum-norm least-squares solves.
//!
//! The factorization itself is delegated to nalgebra; this module owns the
//! rank-tolerance policy and the application of the pseudo-inverse.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{Result, RomError};

/// Relative singular-value cutoff below which directions are treated as null.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Thin SVD `A = U diag(s) V^T` with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    u_basis: Array2<f64>,
    singular_values: Array1<f64>,
    v_basis: Array2<f64>,
    rank_tolerance: f64,
}

/// Computes the thin SVD of `matrix` with the default rank tolerance.
pub fn svd(matrix: &Array2<f64>) -> Result<SvdFactors> {
    svd_with_tolerance(matrix, DEFAULT_RANK_TOLERANCE)
}

pub fn svd_with_tolerance(matrix: &Array2<f64>, rank_tolerance: f64) -> Result<SvdFactors> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(RomError::InvalidArgument(
            "matrix entries must be finite".into(),
        ));
    }
    if !(rank_tolerance >= 0.0) {
        return Err(RomError::InvalidArgument(format!(
            "rank tolerance must be nonnegative, got {rank_tolerance}"
        )));
    }
    let (n, m) = matrix.dim();
    let a = DMatrix::from_row_iterator(n, m, matrix.iter().cloned());
    let factors = a
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| RomError::Numerical(format!("SVD of a {n}x{m} matrix did not converge")))?;
    let u = factors
        .u
        .ok_or_else(|| RomError::Numerical("SVD did not return the left basis".into()))?;
    let v_t = factors
        .v_t
        .ok_or_else(|| RomError::Numerical("SVD did not return the right basis".into()))?;
    let r = factors.singular_values.len();

    // nalgebra sorts, but the nonincreasing invariant is load-bearing here.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        factors.singular_values[b]
            .partial_cmp(&factors.singular_values[a])
            .unwrap()
    });

    let singular_values = Array1::from_iter(order.iter().map(|&k| factors.singular_values[k]));
    let u_basis = Array2::from_shape_fn((n, r), |(i, k)| u[(i, order[k])]);
    let v_basis = Array2::from_shape_fn((m, r), |(j, k)| v_t[(order[k], j)]);

    Ok(SvdFactors {
        u_basis,
        singular_values,
        v_basis,
        rank_tolerance,
    })
}

impl SvdFactors {
    pub fn u_basis(&self) -> &Array2<f64> {
        &self.u_basis
    }

    pub fn singular_values(&self) -> &Array1<f64> {
        &self.singular_values
    }

    pub fn v_basis(&self) -> &Array2<f64> {
        &self.v_basis
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above the relative cutoff.
    pub fn rank(&self) -> usize {
        let cutoff = self.rank_tolerance * self.max_singular_value();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// Minimum-norm least-squares solution `V diag(1/s) U^T rhs`, zeroing
    /// directions whose singular value falls below the rank cutoff. An
    /// all-zero matrix therefore maps any rhs to the zero vector.
    pub fn pseudo_inverse_apply(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        if rhs.len() != self.u_basis.nrows() {
            return Err(RomError::DimensionMismatch(format!(
                "rhs has {} entries, factorization expects {}",
                rhs.len(),
                self.u_basis.nrows()
            )));
        }
        let cutoff = self.rank_tolerance * self.max_singular_value();
        let mut projected = self.u_basis.t().dot(rhs);
        for (coeff, &s) in projected.iter_mut().zip(self.singular_values.iter()) {
            if s > cutoff {
                *coeff /= s;
            } else {
                *coeff = 0.0;
            }
        }
        Ok(self.v_basis.dot(&projected))
    }

    /// Reconstructs `U diag(s) V^T`, mostly useful for verification.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.u_basis * &self.singular_values;
        scaled.dot(&self.v_basis.t())
    }
}

/// One-shot minimum-norm least-squares solve of `a x = b`.
pub fn least_squares(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    svd(a)?.pseudo_inverse_apply(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn identity_has_unit_singular_values() {
        let eye: Array2<f64> = Array2::eye(3);
        let f = svd(&eye).unwrap();
        for s in f.singular_values() {
            assert_relative_eq!(*s, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        let m = array![[3.0, 0.0], [0.0, 0.0]];
        let f = svd(&m).unwrap();
        assert_relative_eq!(f.singular_values()[0], 3.0, max_relative = 1e-12);
        assert!(f.singular_values()[1].abs() < 1e-12);
        assert_eq!(f.rank(), 1);
    }

    /// Closed-form eigenvalues of a symmetric 3x3 via the characteristic
    /// polynomial (trigonometric cubic), independent of the SVD path.
    fn symmetric_3x3_eigenvalues(m: &Array2<f64>) -> [f64; 3] {
        let q = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) / 3.0;
        let mut b = m.clone();
        for i in 0..3 {
            b[(i, i)] -= q;
        }
        let p2 = b.iter().map(|v| v * v).sum::<f64>() / 6.0;
        let p = p2.sqrt();
        // det(B) / 2 for the shifted matrix
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det_b / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e1, e2, e3]
    }

    #[test]
    fn step_matrix_singular_values_match_eigen_oracle() {
        let u = array![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
        let gram = u.t().dot(&u);
        let eig = symmetric_3x3_eigenvalues(&gram);
        let mut expected: Vec<f64> = eig.iter().map(|e| e.max(0.0).sqrt()).collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let f = svd(&u).unwrap();
        for (s, e) in f.singular_values().iter().zip(expected.iter()) {
            assert_relative_eq!(s, e, max_relative = 1e-10);
        }
    }

    #[test]
    fn orthonormal_bases_and_reconstruction() {
        let m = array![
            [0.3, -1.2, 0.7],
            [2.1, 0.4, -0.9],
            [1.5, -2.2, 0.1],
            [0.6, 0.8, -1.4]
        ];
        let f = svd(&m).unwrap();
        let utu = f.u_basis().t().dot(f.u_basis());
        let vtv = f.v_basis().t().dot(f.v_basis());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((utu[(i, j)] - expect).abs() < 1e-10);
                assert!((vtv[(i, j)] - expect).abs() < 1e-10);
            }
        }
        let back = f.reconstruct();
        let num = (&back - &m).mapv(|v| v * v).sum().sqrt();
        let den = m.mapv(|v| v * v).sum().sqrt();
        assert!(num / den < 1e-10);
    }

    #[test]
    fn pseudo_inverse_solves_triangular_system() {
        let u = array![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
        let x = svd(&u)
            .unwrap()
            .pseudo_inverse_apply(&array![1.0, 2.0, 3.0])
            .unwrap();
        for v in &x {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-10);
        }

        let zero = svd(&u)
            .unwrap()
            .pseudo_inverse_apply(&array![0.0, 0.0, 0.0])
            .unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rank_deficient_minimum_norm_solution() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let x = least_squares(&a, &array![2.0, 2.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn all_zero_matrix_maps_to_zero() {
        let a = Array2::zeros((3, 2));
        let x = least_squares(&a, &array![1.0, -2.0, 3.0]).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn overdetermined_consistent_system_has_zero_residual() {
        let a = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
        let x_true = array![0.7, -1.3];
        let b = a.dot(&x_true);
        let x = least_squares(&a, &b).unwrap();
        let res = (&a.dot(&x) - &b).mapv(|v| v * v).sum().sqrt();
        assert!(res / b.mapv(|v| v * v).sum().sqrt() < 1e-9);
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert_relative_eq!(xi, ti, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_entries() {
        let a = array![[1.0, f64::NAN], [0.0, 1.0]];
        assert!(svd(&a).is_err());
    }
}

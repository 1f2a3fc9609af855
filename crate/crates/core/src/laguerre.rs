//! Laguerre basis matrices for kernel regularization.
//!
//! Kernels are projected onto the span of the first R basis functions and
//! solved there, which shrinks the unknown count from the memory depth m to
//! R and suppresses noise amplification. The default basis uses the
//! exponentially weighted Laguerre functions `exp(-a t / 2) L_r(a t)`,
//! which stay bounded on long memories; raw polynomials are available for
//! experimentation but blow up quickly.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::convmat::InputMatrix;
use crate::error::{Result, RomError};
use crate::linalg;
use crate::signals::{TimeGrid, TimeSignal};

/// Which functions populate the basis columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaguerreKind {
    /// `exp(-a t / 2) L_r(a t)` — orthonormal system on the half-line.
    #[default]
    WeightedFunctions,
    /// Bare `L_r(a t)` polynomials.
    RawPolynomials,
}

/// Basis matrix B (m x R) evaluated on a kernel lag grid.
#[derive(Debug, Clone)]
pub struct LaguerreBasis {
    order: usize,
    time_scale: f64,
    matrix_b: Array2<f64>,
    grid: TimeGrid,
    kind: LaguerreKind,
}

/// Time scale for which the slowest weighted basis function decays to 5%
/// at the end of the memory window `m * dt`.
pub fn default_time_scale(memory_depth: usize, dt: f64) -> f64 {
    2.0 * 20.0f64.ln() / (memory_depth as f64 * dt)
}

/// Classical Laguerre polynomials L_0 .. L_{count-1} at `x`, by recurrence.
fn laguerre_values(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 1.0; // L_0
    out.push(prev);
    if count == 1 {
        return out;
    }
    let mut curr = 1.0 - x; // L_1
    out.push(curr);
    for k in 1..count - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
        out.push(curr);
    }
    out
}

/// Builds the default weighted basis.
pub fn build_basis(
    grid: TimeGrid,
    memory_depth: usize,
    order: usize,
    time_scale: f64,
) -> Result<LaguerreBasis> {
    build_basis_with(
        grid,
        memory_depth,
        order,
        time_scale,
        LaguerreKind::WeightedFunctions,
    )
}

pub fn build_basis_with(
    grid: TimeGrid,
    memory_depth: usize,
    order: usize,
    time_scale: f64,
    kind: LaguerreKind,
) -> Result<LaguerreBasis> {
    if order == 0 || order > memory_depth {
        return Err(RomError::InvalidArgument(format!(
            "basis order must satisfy 1 <= R <= m = {memory_depth}, got {order}"
        )));
    }
    if memory_depth > grid.len() {
        return Err(RomError::InvalidArgument(format!(
            "memory depth {memory_depth} exceeds grid length {}",
            grid.len()
        )));
    }
    if !time_scale.is_finite() || time_scale <= 0.0 {
        return Err(RomError::InvalidArgument(format!(
            "time scale must be positive, got {time_scale}"
        )));
    }
    let mut matrix_b = Array2::zeros((memory_depth, order));
    for j in 0..memory_depth {
        let t = grid.tau(j);
        let x = time_scale * t;
        let weight = match kind {
            LaguerreKind::WeightedFunctions => (-x / 2.0).exp(),
            LaguerreKind::RawPolynomials => 1.0,
        };
        for (r, l) in laguerre_values(x, order).into_iter().enumerate() {
            matrix_b[(j, r)] = weight * l;
        }
    }
    if matrix_b.iter().any(|v| !v.is_finite()) {
        return Err(RomError::Numerical(
            "basis values overflow on this grid; use the weighted functions".into(),
        ));
    }
    let factors = linalg::svd(&matrix_b)?;
    let smin = factors
        .singular_values()
        .last()
        .copied()
        .unwrap_or(0.0);
    if smin <= 1e-8 * factors.max_singular_value() {
        return Err(RomError::SingularSystem(format!(
            "basis columns are numerically dependent (sigma_min/sigma_max = {:.3e})",
            smin / factors.max_singular_value()
        )));
    }
    Ok(LaguerreBasis {
        order,
        time_scale,
        matrix_b,
        grid,
        kind,
    })
}

impl LaguerreBasis {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn matrix_b(&self) -> &Array2<f64> {
        &self.matrix_b
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn kind(&self) -> LaguerreKind {
        self.kind
    }

    pub fn memory_depth(&self) -> usize {
        self.matrix_b.nrows()
    }

    /// Expands projection coefficients into a kernel, `h = B theta`.
    pub fn expand(&self, theta: &Array1<f64>) -> Result<Array1<f64>> {
        if theta.len() != self.order {
            return Err(RomError::DimensionMismatch(format!(
                "theta has {} entries, basis order is {}",
                theta.len(),
                self.order
            )));
        }
        Ok(self.matrix_b.dot(theta))
    }

    /// Least-squares kernel identification in the basis subspace: solves
    /// `(U B) theta = y` through the pseudo-inverse and expands `h = B theta`.
    ///
    /// Columns are rescaled to unit norm for the solve; the expanded kernel
    /// is invariant to that rescaling and the returned theta refers to the
    /// unscaled basis.
    pub fn identify_kernel(
        &self,
        input_matrix: &InputMatrix,
        response: &TimeSignal,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        if input_matrix.memory_depth() != self.memory_depth() {
            return Err(RomError::DimensionMismatch(format!(
                "input matrix memory depth {} vs basis depth {}",
                input_matrix.memory_depth(),
                self.memory_depth()
            )));
        }
        if response.len() != input_matrix.num_rows() {
            return Err(RomError::DimensionMismatch(format!(
                "response has {} samples, input matrix has {} rows",
                response.len(),
                input_matrix.num_rows()
            )));
        }
        let norms: Vec<f64> = (0..self.order)
            .map(|r| self.matrix_b.column(r).dot(&self.matrix_b.column(r)).sqrt())
            .collect();
        let mut normalized = self.matrix_b.clone();
        for (r, &norm) in norms.iter().enumerate() {
            normalized.column_mut(r).mapv_inplace(|v| v / norm);
        }
        let projected = input_matrix.data().dot(&normalized);
        let theta_scaled = linalg::svd(&projected)?.pseudo_inverse_apply(response.values())?;
        let kernel = normalized.dot(&theta_scaled);
        let theta = Array1::from_iter(
            theta_scaled
                .iter()
                .zip(norms.iter())
                .map(|(t, n)| t / n),
        );
        Ok((theta, kernel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convmat::build_input_matrix;
    use approx::assert_relative_eq;
    use ndarray::Array1;

    fn grid(dt: f64, n: usize) -> TimeGrid {
        TimeGrid::new(dt, n).unwrap()
    }

    /// Independent polynomial oracle: explicit closed forms of L_0..L_2.
    fn laguerre_oracle(x: f64, degree: usize) -> f64 {
        match degree {
            0 => 1.0,
            1 => 1.0 - x,
            2 => 1.0 - 2.0 * x + x * x / 2.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn first_column_is_pure_exponential() {
        let g = grid(0.5, 16);
        let basis = build_basis(g, 16, 1, 1.0).unwrap();
        for (j, tau) in g.taus().take(16).enumerate() {
            assert_relative_eq!(
                basis.matrix_b()[(j, 0)],
                (-tau / 2.0).exp(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn all_functions_start_at_one() {
        let g = grid(0.25, 32);
        let basis = build_basis(g, 32, 8, 0.7).unwrap();
        for r in 0..8 {
            assert_relative_eq!(basis.matrix_b()[(0, r)], 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn third_function_matches_polynomial_oracle() {
        // a = 1, tau = 2: phi_3(2) = exp(-1) * L_2(2) = -exp(-1)
        let g = grid(2.0, 3);
        let basis = build_basis(g, 3, 3, 1.0).unwrap();
        let expected = (-1.0f64).exp() * laguerre_oracle(2.0, 2);
        assert_relative_eq!(basis.matrix_b()[(1, 2)], expected, max_relative = 1e-14);
        assert_relative_eq!(expected, -(-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_order_above_memory_depth() {
        let g = grid(0.5, 8);
        assert!(build_basis(g, 8, 9, 1.0).is_err());
        assert!(build_basis(g, 8, 0, 1.0).is_err());
    }

    #[test]
    fn raw_polynomials_fail_on_long_memories() {
        let g = grid(0.5, 400);
        let result = build_basis_with(g, 400, 18, 1.0, LaguerreKind::RawPolynomials);
        assert!(result.is_err());
    }

    #[test]
    fn recovers_kernel_already_in_span() {
        let g = grid(0.25, 48);
        let basis = build_basis(g, 48, 6, default_time_scale(48, 0.25)).unwrap();
        let theta_true = Array1::from_vec(vec![0.8, -0.3, 0.15, 0.05, -0.02, 0.01]);
        let kernel_true = basis.expand(&theta_true).unwrap();

        let input = TimeSignal::sinusoid(g, 0.3, 1.0, 0.45).unwrap();
        let u = build_input_matrix(&input, 48, 1).unwrap();
        let response = u.convolve(&kernel_true).unwrap();

        let (theta, kernel) = basis.identify_kernel(&u, &response).unwrap();
        let kre = (&kernel - &kernel_true).mapv(|v| v * v).sum().sqrt()
            / kernel_true.mapv(|v| v * v).sum().sqrt();
        assert!(kre < 1e-8, "kernel error {kre}");
        for (a, b) in theta.iter().zip(theta_true.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-7, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_response_gives_zero_kernel() {
        let g = grid(0.25, 24);
        let basis = build_basis(g, 24, 5, default_time_scale(24, 0.25)).unwrap();
        let input = TimeSignal::step(g, 1.0).unwrap();
        let u = build_input_matrix(&input, 24, 1).unwrap();
        let zero = TimeSignal::step(g, 0.0).unwrap();
        let (theta, kernel) = basis.identify_kernel(&u, &zero).unwrap();
        assert!(theta.iter().all(|v| v.abs() < 1e-12));
        assert!(kernel.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn training_residual_never_grows_with_order() {
        let g = grid(0.25, 64);
        let input = TimeSignal::step(g, 1.0).unwrap();
        let u = build_input_matrix(&input, 64, 1).unwrap();
        // a response that is not exactly representable in any small basis
        let response = TimeSignal::new(
            g,
            Array1::from_iter(g.taus().map(|t| (1.0 - (-0.4 * t).exp()) + 0.02 * (1.3 * t).sin())),
        )
        .unwrap();

        let mut last = f64::INFINITY;
        for order in 2..=10 {
            let basis = build_basis(g, 64, order, default_time_scale(64, 0.25)).unwrap();
            let (_, kernel) = basis.identify_kernel(&u, &response).unwrap();
            let fit = u.convolve(&kernel).unwrap();
            let res = (fit.values() - response.values())
                .mapv(|v| v * v)
                .sum()
                .sqrt();
            assert!(
                res <= last + 1e-10,
                "residual grew from {last} to {res} at order {order}"
            );
            last = res;
        }
    }

    #[test]
    fn full_order_basis_matches_direct_solve() {
        let g = grid(0.4, 8);
        let input = TimeSignal::sinusoid(g, 0.5, 1.0, 0.7).unwrap();
        let u = build_input_matrix(&input, 8, 1).unwrap();
        let kernel_true = Array1::from_iter((0..8).map(|j| (-0.3 * j as f64).exp() * 0.5));
        let response = u.convolve(&kernel_true).unwrap();

        let direct = crate::linalg::least_squares(u.data(), response.values()).unwrap();
        let basis = build_basis(g, 8, 8, 0.8).unwrap();
        let (_, in_basis) = basis.identify_kernel(&u, &response).unwrap();
        let diff = (&in_basis - &direct).mapv(|v| v * v).sum().sqrt()
            / direct.mapv(|v| v * v).sum().sqrt();
        assert!(diff < 1e-6, "basis vs direct solve differ by {diff}");
    }
}

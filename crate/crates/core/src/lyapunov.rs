//! Discrete Lyapunov solver and Gramians.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

const DOUBLING_TOL: f64 = 1e-13;
const MAX_DOUBLINGS: usize = 64;

/// Solve `A W A^T - W + Q = 0` for `rho(A) < 1` by squared Smith iteration:
/// `W_{k+1} = W_k + A_k W_k A_k^T`, `A_{k+1} = A_k^2`.
pub fn solve_discrete(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut w = q.clone();
    linalg::symmetrize(&mut w);
    let mut ak = a.clone();
    for _ in 0..MAX_DOUBLINGS {
        let mut inc = &ak * &w * ak.transpose();
        linalg::symmetrize(&mut inc);
        w += &inc;
        let inc_norm = linalg::frobenius(&inc);
        if !inc_norm.is_finite() {
            break;
        }
        if inc_norm <= DOUBLING_TOL * linalg::frobenius(&w) {
            return Ok(w);
        }
        ak = &ak * &ak;
    }
    Err(Error::LyapunovNotConverged {
        iterations: MAX_DOUBLINGS,
    })
}

/// Infinite-horizon Gramian `W = sum_t A^t Q (A^T)^t`.
#[derive(Debug, Clone)]
pub struct Gramian {
    pub w: DMatrix<f64>,
    pub trace: f64,
}

impl Gramian {
    /// Controllability Gramian of `(A, B)`.
    pub fn controllability(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let w = solve_discrete(a, &(b * b.transpose()))?;
        let trace = w.trace();
        Ok(Self { w, trace })
    }

    /// Observability Gramian of `(A, C)`.
    pub fn observability(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Self> {
        Self::controllability(&a.transpose(), &c.transpose())
    }

    /// `Tr(C W C^T)`.
    pub fn output_trace(&self, c: &DMatrix<f64>) -> f64 {
        (c * &self.w * c.transpose()).trace()
    }

    /// Relative Frobenius residual of `A W A^T - W + Q`.
    pub fn residual(&self, a: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        let r = a * &self.w * a.transpose() - &self.w + q;
        linalg::frobenius(&r) / linalg::frobenius(&self.w).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lyapunov() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        let w = solve_discrete(&a, &q).unwrap();
        assert!((w[(0, 0)] - 1.0 / 0.75).abs() < 1e-14);
    }

    #[test]
    fn residual_is_small_for_random_stable_matrix() {
        let n = 12;
        let a = DMatrix::from_fn(n, n, |i, j| (((i * 7 + j * 3) % 11) as f64) / 60.0);
        let rho = linalg::spectral_radius(&a);
        let a = a * (0.95 / rho);
        let b = DMatrix::from_fn(n, 3, |i, j| if i == 2 * j { 1.0 } else { 0.0 });
        let g = Gramian::controllability(&a, &b).unwrap();
        assert!(g.residual(&a, &(&b * b.transpose())) < 1e-12);
    }

    #[test]
    fn unstable_matrix_does_not_converge() {
        let a = DMatrix::from_element(1, 1, 1.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(solve_discrete(&a, &q), Err(Error::LyapunovNotConverged { .. })));
    }
}

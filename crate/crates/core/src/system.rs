//! State-space triples `(A, B, C)` of discrete-time LTI systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "state matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "input matrix has {} rows, expected {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if c.ncols() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "output matrix has {} columns, expected {}",
                c.ncols(),
                a.nrows()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn state(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn output(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Markov parameters `g(1), ..., g(horizon)` with `g(t) = C A^{t-1} B`.
    pub fn impulse_response(&self, horizon: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(horizon);
        let mut ab = self.b.clone();
        for _ in 0..horizon {
            out.push(&self.c * &ab);
            ab = &self.a * ab;
        }
        out
    }

    /// Series interconnection: `self` driven by the output of `first`.
    pub fn series(&self, first: &LinearSystem) -> Result<LinearSystem> {
        if first.n_outputs() != self.n_inputs() {
            return Err(Error::DimensionMismatch(format!(
                "series: {} outputs feed {} inputs",
                first.n_outputs(),
                self.n_inputs()
            )));
        }
        let (n1, n2) = (first.order(), self.order());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&first.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&self.b * &first.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&self.a);
        let mut b = DMatrix::zeros(n1 + n2, first.n_inputs());
        b.view_mut((0, 0), (n1, first.n_inputs())).copy_from(&first.b);
        let mut c = DMatrix::zeros(self.n_outputs(), n1 + n2);
        c.view_mut((0, n1), (self.n_outputs(), n2)).copy_from(&self.c);
        LinearSystem::new(a, b, c)
    }

    /// Parallel interconnection `self + other` (shared input, summed output).
    pub fn parallel(&self, other: &LinearSystem) -> Result<LinearSystem> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::DimensionMismatch(
                "parallel: input/output dimensions differ".into(),
            ));
        }
        let (n1, n2) = (self.order(), other.order());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs())).copy_from(&other.b);
        let mut c = DMatrix::zeros(self.n_outputs(), n1 + n2);
        c.view_mut((0, 0), (self.n_outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.n_outputs(), n2)).copy_from(&other.c);
        LinearSystem::new(a, b, c)
    }

    /// Realization of `G_new - G_old` for two systems sharing `B` and `C`,
    /// on the state `[x_new - x_old; x_old]`:
    ///
    /// ```text
    /// [ A_new  A_new - A_old | 0 ]
    /// [ 0      A_old         | B ]
    /// [ C      0             | 0 ]
    /// ```
    pub fn difference_realization(
        a_new: &DMatrix<f64>,
        a_old: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
    ) -> Result<LinearSystem> {
        if a_new.shape() != a_old.shape() {
            return Err(Error::DimensionMismatch(
                "difference realization: state matrices differ in shape".into(),
            ));
        }
        let n = a_old.nrows();
        let m = b.ncols();
        let p = c.nrows();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, 0), (n, n)).copy_from(a_new);
        a.view_mut((0, n), (n, n)).copy_from(&(a_new - a_old));
        a.view_mut((n, n), (n, n)).copy_from(a_old);
        let mut bb = DMatrix::zeros(2 * n, m);
        bb.view_mut((n, 0), (n, m)).copy_from(b);
        let mut cc = DMatrix::zeros(p, 2 * n);
        cc.view_mut((0, 0), (p, n)).copy_from(c);
        LinearSystem::new(a, bb, cc)
    }
}

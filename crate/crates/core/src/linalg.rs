//! Dense numerical helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

/// Matrices at or below this order go straight to a full eigendecomposition
/// when a spectral radius is requested.
const SMALL_ORDER: usize = 64;

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 2000;
const SCHUR_ITER_PER_ROW: usize = 200;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn is_nonnegative(m: &DMatrix<f64>) -> bool {
    m.iter().all(|&v| v >= 0.0)
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Column selector `E_S = [e_{i_1} ... e_{i_k}]`.
pub fn selector(n: usize, nodes: &[usize]) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, nodes.len());
    for (col, &node) in nodes.iter().enumerate() {
        e[(node, col)] = 1.0;
    }
    e
}

pub fn inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().lu().try_inverse()
}

/// Spectral radius of a square matrix.
///
/// Symmetric input uses the symmetric eigensolver. Non-negative input is
/// split into strongly connected components; each irreducible block is
/// handled by shifted power iteration with Collatz-Wielandt bounds (which
/// bracket its Perron root), falling back to the real Schur form when the
/// bracket is slow to close. Anything else goes to the Schur form directly.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if is_symmetric(m) {
        return SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    }
    if is_nonnegative(m) {
        return strongly_connected_components(m)
            .into_iter()
            .map(|comp| {
                if comp.len() == 1 {
                    return m[(comp[0], comp[0])];
                }
                let block = m.select_rows(&comp).select_columns(&comp);
                if block.nrows() <= SMALL_ORDER {
                    return general_spectral_radius(&block);
                }
                perron_root(&block).unwrap_or_else(|| general_spectral_radius(&block))
            })
            .fold(0.0_f64, f64::max);
    }
    general_spectral_radius(m)
}

/// Schur-based radius; if QR iteration stalls, a Gelfand estimate from
/// repeated squaring is used instead.
fn general_spectral_radius(m: &DMatrix<f64>) -> f64 {
    let max_iter = SCHUR_ITER_PER_ROW * m.nrows().max(1);
    match Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm())),
        None => gelfand_estimate(m),
    }
}

/// `||M^(2^k)||^(2^-k)` with renormalisation to avoid overflow.
fn gelfand_estimate(m: &DMatrix<f64>) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0_f64;
    let mut exponent = 1.0_f64;
    for _ in 0..40 {
        let norm = frobenius(&p);
        if norm == 0.0 {
            return 0.0;
        }
        p /= norm;
        log_scale += norm.ln() / exponent;
        p = &p * &p;
        exponent *= 2.0;
    }
    (log_scale + frobenius(&p).ln() / exponent).exp()
}

fn perron_root(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..POWER_MAX_ITER {
        let y = m * &x + &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let mid = 0.5 * (lo + hi) - 1.0;
        if mid > 0.0 && hi - lo <= POWER_TOL * mid {
            return Some(mid);
        }
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        x = y / norm;
        if x.iter().any(|&v| v <= f64::MIN_POSITIVE) {
            return None;
        }
    }
    None
}

/// Strongly connected components of the digraph with an edge `j -> i`
/// whenever `m[(i, j)] != 0` (iterative Kosaraju).
fn strongly_connected_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| m[(i, j)] != 0.0).collect())
        .collect();
    let pred: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| m[(i, j)] != 0.0).collect())
        .collect();

    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((v, next)) = stack.pop() {
            if let Some(&u) = succ[v].get(next) {
                stack.push((v, next + 1));
                if !seen[u] {
                    seen[u] = true;
                    stack.push((u, 0));
                }
            } else {
                order.push(v);
            }
        }
    }

    let mut comp_of = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for &root in order.iter().rev() {
        if comp_of[root] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut comp = vec![root];
        comp_of[root] = id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &u in &pred[v] {
                if comp_of[u] == usize::MAX {
                    comp_of[u] = id;
                    comp.push(u);
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// `U diag(f) U^T` for an orthogonal `U`.
pub fn spectral_synthesis(u: &DMatrix<f64>, diag: &[f64]) -> DMatrix<f64> {
    let mut scaled = u.clone();
    for (j, &d) in diag.iter().enumerate() {
        scaled.column_mut(j).scale_mut(d);
    }
    let mut out = scaled * u.transpose();
    symmetrize(&mut out);
    out
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// For symmetric `M`, the matrix `N = 1 diag(M)^T + diag(M) 1^T - 2M`, whose
/// entry `(i, j)` equals the quadratic form `e_ij^T M e_ij` with
/// `e_ij = e_i - e_j`.
pub fn pairwise_quadratic(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(i, i)] + m[(j, j)] - 2.0 * m[(i, j)])
}

/// `e_ij^T M e_ij` evaluated directly.
pub fn quadratic_form_diff(m: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    m[(i, i)] + m[(j, j)] - m[(i, j)] - m[(j, i)]
}

//! Undirected consensus networks `x(t+1) = (I - L) x(t) + B u(t)`.
//!
//! The state matrix `A = I - L` is marginally stable (eigenvalue 1 on the
//! consensus direction `1`), so norms are taken on the displacement system
//! `xi = (I - J) x`, `J = 1 1^T / n`, which lives on the disagreement
//! subspace. A [`LaplacianKernel`] caches the eigendecomposition of `A` and
//! the spectral functions of it needed for edge-addition analysis:
//!
//! * `L^+` and `(I + A)^{-1}`;
//! * `(I - A^2)^+`, whose trace is the network coherence;
//! * `(I + A)^{-1} L^+ (I + A)^{-1}` and `L^+ (I + A)^{-1} L^+`, which give
//!   the exact coherence change of any edge addition through two rank-one
//!   updates.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{EdgeMod, Network, NetworkKind, SpectralCondition};
use crate::linalg;
use crate::lyapunov::Gramian;
use crate::system::LinearSystem;

const ORTHO_TOL: f64 = 1e-10;
const PINV_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-12;
const COHERENCE_RTOL: f64 = 1e-10;
const DEGENERATE_ALPHA: f64 = 1e-12;
/// An addition is admissible when `1 - w e^T G e` exceeds this.
const ADMISSIBLE_SLACK: f64 = 1e-12;
const GREEDY_TIE_RTOL: f64 = 1e-12;

fn consensus_projector(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0 / n as f64)
}

#[derive(Debug, Clone)]
pub struct LaplacianKernel {
    a: DMatrix<f64>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    all_nodes: bool,
    eigvecs: DMatrix<f64>,
    eigvals: Vec<f64>,
    lpinv: DMatrix<f64>,
    mplus: DMatrix<f64>,
    condition: SpectralCondition,
    /// `G = ((c - 1) I + A)^{-1}` for the limit `rho(L) < c`.
    guard: DMatrix<f64>,
    coherence_matrix: DMatrix<f64>,
    sandwich1: DMatrix<f64>,
    sandwich2: DMatrix<f64>,
}

impl LaplacianKernel {
    pub fn build(net: &Network) -> Result<Self> {
        if net.kind() != NetworkKind::Laplacian {
            return Err(Error::WrongKind { expected: "laplacian" });
        }
        let n = net.n();
        let a = net.state_matrix().clone();
        let mut sym = a.clone();
        linalg::symmetrize(&mut sym);
        let eig = sym.symmetric_eigen();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let pinned = *order
            .iter()
            .min_by(|&&i, &&j| {
                (eig.eigenvalues[i] - 1.0)
                    .abs()
                    .total_cmp(&(eig.eigenvalues[j] - 1.0).abs())
            })
            .expect("non-empty spectrum");
        order.retain(|&i| i != pinned);
        order.push(pinned);

        let mut eigvecs = DMatrix::zeros(n, n);
        let mut eigvals = Vec::with_capacity(n);
        for (col, &i) in order.iter().enumerate() {
            eigvecs.set_column(col, &eig.eigenvectors.column(i));
            eigvals.push(eig.eigenvalues[i]);
        }
        eigvecs.column_mut(n - 1).fill(1.0 / (n as f64).sqrt());
        eigvals[n - 1] = 1.0;

        if n >= 2 && eigvals[n - 2] >= 1.0 - 1e-12 {
            return Err(Error::Disconnected);
        }
        let condition = net.condition();
        let limit = condition.limit();
        if eigvals[0] <= 1.0 - limit {
            return Err(Error::SpectralConditionViolated {
                rho_l: 1.0 - eigvals[0],
                limit,
            });
        }

        let id = DMatrix::<f64>::identity(n, n);
        let ortho = linalg::max_abs(&(&eigvecs * eigvecs.transpose() - &id));
        if ortho > ORTHO_TOL {
            return Err(Error::InvariantViolated(format!(
                "eigenvector basis not orthogonal: {ortho}"
            )));
        }

        let j = consensus_projector(n);
        let lap = &id - &a;
        let mut lpinv = linalg::inverse(&(&lap + &j)).ok_or(Error::Disconnected)? - &j;
        linalg::symmetrize(&mut lpinv);

        let defl = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let mut d: Vec<f64> = eigvals[..n - 1].iter().map(|&l| f(l)).collect();
            d.push(0.0);
            d
        };
        let mut full: Vec<f64> = eigvals.iter().map(|&l| 1.0 / (1.0 + l)).collect();
        let mplus = linalg::spectral_synthesis(&eigvecs, &full);
        full = eigvals.iter().map(|&l| 1.0 / (limit - 1.0 + l)).collect();
        let guard = linalg::spectral_synthesis(&eigvecs, &full);
        let coherence_matrix = linalg::spectral_synthesis(&eigvecs, &defl(&|l| 1.0 / (1.0 - l * l)));
        let sandwich1 = linalg::spectral_synthesis(
            &eigvecs,
            &defl(&|l| 1.0 / ((1.0 + l).powi(2) * (1.0 - l))),
        );
        let sandwich2 = linalg::spectral_synthesis(
            &eigvecs,
            &defl(&|l| 1.0 / ((1.0 - l).powi(2) * (1.0 + l))),
        );

        let kernel = Self {
            a,
            inputs: net.inputs().to_vec(),
            outputs: net.outputs().to_vec(),
            all_nodes: net.has_all_node_terminals(),
            eigvecs,
            eigvals,
            lpinv,
            mplus,
            condition,
            guard,
            coherence_matrix,
            sandwich1,
            sandwich2,
        };
        kernel.check_invariants()?;
        Ok(kernel)
    }

    fn check_invariants(&self) -> Result<()> {
        let n = self.n();
        let id = DMatrix::<f64>::identity(n, n);
        let j = consensus_projector(n);
        let scale = linalg::max_abs(&self.lpinv).max(1.0);
        let row_sums = self.lpinv.column_sum().amax();
        if row_sums > PINV_TOL * scale {
            return Err(Error::InvariantViolated(format!("L^+ 1 = {row_sums}, expected 0")));
        }
        let lap = &id - &self.a;
        let prod = (&lap + &j) * (&self.lpinv + &j);
        let err = linalg::max_abs(&(prod - &id));
        if err > PINV_TOL * scale {
            return Err(Error::InvariantViolated(format!("(L+J)(L^+ + J) - I = {err}")));
        }
        let checks = [
            ("J^2 = J", linalg::max_abs(&(&j * &j - &j))),
            ("A J = J", linalg::max_abs(&(&self.a * &j - &j))),
            (
                "A (I-J) = (I-J) A",
                linalg::max_abs(&(&self.a * (&id - &j) - (&id - &j) * &self.a)),
            ),
        ];
        for (name, err) in checks {
            if err > IDENTITY_TOL * (n as f64).max(1.0) {
                return Err(Error::InvariantViolated(format!("{name}: residual {err}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    /// Orthogonal eigenvectors of `A`; the last column is `1 / sqrt(n)`.
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Eigenvalues of `A` in ascending order, ending with exactly 1.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// Pseudoinverse `L^+ = (I - A)^+`.
    pub fn lpinv(&self) -> &DMatrix<f64> {
        &self.lpinv
    }

    /// `(I + A)^{-1}`.
    pub fn mplus(&self) -> &DMatrix<f64> {
        &self.mplus
    }

    /// `(I - A^2)^+`.
    pub fn coherence_matrix(&self) -> &DMatrix<f64> {
        &self.coherence_matrix
    }

    /// `(I + A)^{-1} (I - A)^+ (I + A)^{-1}`.
    pub fn sandwich1(&self) -> &DMatrix<f64> {
        &self.sandwich1
    }

    /// `(I - A)^+ (I + A)^{-1} (I - A)^+`.
    pub fn sandwich2(&self) -> &DMatrix<f64> {
        &self.sandwich2
    }

    /// Effective resistance `e_st^T L^+ e_st`.
    pub fn effective_resistance(&self, s: usize, t: usize) -> f64 {
        linalg::quadratic_form_diff(&self.lpinv, s, t)
    }

    fn check_addition(&self, m: &EdgeMod) -> Result<()> {
        m.check_nodes(self.n())?;
        if !(m.w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "edge additions need positive weight, got {}",
                m.w
            )));
        }
        if !self.addition_admissible(m.s, m.t, m.w) {
            let mut l_bar = DMatrix::identity(self.n(), self.n()) - &self.a;
            l_bar[(m.s, m.s)] += m.w;
            l_bar[(m.t, m.t)] += m.w;
            l_bar[(m.s, m.t)] -= m.w;
            l_bar[(m.t, m.s)] -= m.w;
            let rho_l = l_bar.symmetric_eigen().eigenvalues.amax();
            return Err(Error::SpectralConditionViolated {
                rho_l,
                limit: self.condition.limit(),
            });
        }
        Ok(())
    }

    /// Whether adding weight `w` to `{s, t}` keeps `rho(L_bar) < c`, the
    /// limit of the network's spectral condition.
    ///
    /// `L_bar = L + w e e^T` has `rho(L_bar) < c` iff `(c - 1) I + A - w e e^T`
    /// is positive definite, i.e. iff `w e^T ((c - 1) I + A)^{-1} e < 1`.
    pub fn addition_admissible(&self, s: usize, t: usize, w: f64) -> bool {
        s != t && w > 0.0 && 1.0 - w * linalg::quadratic_form_diff(&self.guard, s, t) > ADMISSIBLE_SLACK
    }

    pub fn condition(&self) -> SpectralCondition {
        self.condition
    }

    /// Spectral norm of `E_O^T (L^+ + J) E_K`, the DC gain of
    /// `{A_J, E_K, E_O^T}`.
    pub fn hinf_displacement(&self) -> f64 {
        let shift = 1.0 / self.n() as f64;
        let g = DMatrix::from_fn(self.outputs.len(), self.inputs.len(), |i, j| {
            self.lpinv[(self.outputs[i], self.inputs[j])] + shift
        });
        spectral_norm(&g)
    }

    /// Spectral norm of `E_O^T L^+ E_K`, the DC gain of the projected
    /// realization `{A_J, B_J, C}`.
    pub fn hinf_projected(&self) -> f64 {
        let g = DMatrix::from_fn(self.outputs.len(), self.inputs.len(), |i, j| {
            self.lpinv[(self.outputs[i], self.inputs[j])]
        });
        spectral_norm(&g)
    }

    fn gamma_out(&self, r: usize) -> f64 {
        let shift = 1.0 / self.n() as f64;
        self.outputs
            .iter()
            .map(|&o| (self.lpinv[(o, r)] + shift).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn gamma_in(&self, r: usize) -> f64 {
        let shift = 1.0 / self.n() as f64;
        self.inputs
            .iter()
            .map(|&k| (self.lpinv[(r, k)] + shift).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Upper bound on the H∞ norm of the displacement delta system of the
    /// addition `m`.
    pub fn delta_hinf_upper_bound(&self, m: &EdgeMod) -> Result<f64> {
        self.check_addition(m)?;
        let (s, t, w) = (m.s, m.t, m.w);
        let (os, ot) = (self.gamma_out(s), self.gamma_out(t));
        let (sk, tk) = (self.gamma_in(s), self.gamma_in(t));
        let l = &self.lpinv;
        let denom = (1.0 - w * (l[(s, t)] + l[(t, s)] - l[(s, s)] - l[(t, t)])).abs();
        Ok((os * tk + ot * sk + ot * tk + os * sk) * w / denom)
    }

    /// Spectral norm of the DC gain of the displacement delta system, a
    /// lower bound on its H∞ norm.
    pub fn delta_dc_gain(&self, m: &EdgeMod) -> Result<f64> {
        self.check_addition(m)?;
        let (s, t, w) = (m.s, m.t, m.w);
        let shift = 1.0 / self.n() as f64;
        let g = |i: usize, j: usize| self.lpinv[(i, j)] + shift;
        let out: f64 = self.outputs.iter().map(|&o| (g(o, s) - g(o, t)).powi(2)).sum();
        let inp: f64 = self.inputs.iter().map(|&k| (g(t, k) - g(s, k)).powi(2)).sum();
        Ok(w * out.sqrt() * inp.sqrt() / (1.0 + w * self.effective_resistance(s, t)))
    }

    fn require_all_nodes(&self) -> Result<()> {
        if self.all_nodes {
            Ok(())
        } else {
            Err(Error::AllNodeInputRequired)
        }
    }

    /// Network coherence `sum_{i<n} 1 / (1 - lambda_i^2)`, the squared H2
    /// norm of the displacement system with inputs and outputs on every node.
    pub fn coherence(&self) -> Result<f64> {
        self.require_all_nodes()?;
        let spectral: f64 = self.eigvals[..self.n() - 1]
            .iter()
            .map(|&l| 1.0 / (1.0 - l * l))
            .sum();
        let trace = self.coherence_matrix.trace();
        if (spectral - trace).abs() > COHERENCE_RTOL * spectral.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvariantViolated(format!(
                "coherence: spectral sum {spectral} vs trace {trace}"
            )));
        }
        Ok(spectral)
    }

    /// `Tr((I - A_J^2)^{-1})`, which exceeds the coherence by exactly one.
    pub fn coherence_plus_one(&self) -> Result<f64> {
        Ok(self.coherence()? + 1.0)
    }

    fn alphas(&self, s: usize, t: usize, w: f64) -> (f64, f64) {
        let alpha1 = 1.0 / w - linalg::quadratic_form_diff(&self.mplus, s, t);
        let alpha2 = -1.0 / w - linalg::quadratic_form_diff(&self.lpinv, s, t);
        (alpha1, alpha2)
    }

    /// Exact coherence change `C_bar - C` of the addition `m`.
    pub fn coherence_delta(&self, m: &EdgeMod) -> Result<f64> {
        self.require_all_nodes()?;
        self.check_addition(m)?;
        let (alpha1, alpha2) = self.alphas(m.s, m.t, m.w);
        if alpha1.abs() < DEGENERATE_ALPHA || alpha2.abs() < DEGENERATE_ALPHA {
            return Err(Error::DegenerateAlpha { alpha1, alpha2 });
        }
        let h = linalg::quadratic_form_diff(&self.coherence_matrix, m.s, m.t);
        let s1 = linalg::quadratic_form_diff(&self.sandwich1, m.s, m.t);
        let s2 = linalg::quadratic_form_diff(&self.sandwich2, m.s, m.t);
        Ok(h * h / (alpha1 * alpha2) + s1 / alpha1 + s2 / alpha2)
    }

    /// `(I - A_bar)^+` after the addition `m`, by a rank-one update of `L^+`.
    pub fn lpinv_after(&self, m: &EdgeMod) -> Result<DMatrix<f64>> {
        self.check_addition(m)?;
        let (_, alpha2) = self.alphas(m.s, m.t, m.w);
        let pe = self.lpinv.column(m.s) - self.lpinv.column(m.t);
        let mut out = &self.lpinv + (&pe * pe.transpose()) / alpha2;
        linalg::symmetrize(&mut out);
        Ok(out)
    }

    /// Coherence change of adding `w` to every pair at once, from the
    /// pairwise quadratic forms of the cached matrices.
    pub fn batch_coherence_delta(&self, w: f64) -> Result<CoherenceReport> {
        self.require_all_nodes()?;
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("probe weight {w} must be positive")));
        }
        let baseline = self.coherence()?;
        let n = self.n();
        let nh = linalg::pairwise_quadratic(&self.coherence_matrix);
        let n1 = linalg::pairwise_quadratic(&self.sandwich1);
        let n2 = linalg::pairwise_quadratic(&self.sandwich2);
        let nm = linalg::pairwise_quadratic(&self.mplus);
        let np = linalg::pairwise_quadratic(&self.lpinv);
        let na = linalg::pairwise_quadratic(&self.guard);
        let rows: Vec<Vec<(f64, bool)>> = (0..n)
            .into_par_iter()
            .map(|t| {
                (0..n)
                    .map(|s| {
                        if s == t {
                            return (0.0, false);
                        }
                        if 1.0 - w * na[(s, t)] <= ADMISSIBLE_SLACK {
                            return (f64::NAN, false);
                        }
                        let alpha1 = 1.0 / w - nm[(s, t)];
                        let alpha2 = -1.0 / w - np[(s, t)];
                        if alpha1.abs() < DEGENERATE_ALPHA || alpha2.abs() < DEGENERATE_ALPHA {
                            return (f64::NAN, false);
                        }
                        let h = nh[(s, t)];
                        (h * h / (alpha1 * alpha2) + n1[(s, t)] / alpha1 + n2[(s, t)] / alpha2, true)
                    })
                    .collect()
            })
            .collect();
        let q = DMatrix::from_fn(n, n, |t, s| rows[t][s].0);
        let admissible = DMatrix::from_fn(n, n, |t, s| rows[t][s].1);
        Ok(CoherenceReport {
            baseline,
            w,
            q,
            admissible,
        })
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.amax()
}

/// Coherence changes for every candidate addition at probe weight `w`.
///
/// `q[(t, s)]` is the change for `{s, t}`; the matrix is symmetric, the
/// diagonal is zero and inadmissible pairs hold NaN.
#[derive(Debug, Clone)]
pub struct CoherenceReport {
    pub baseline: f64,
    pub w: f64,
    pub q: DMatrix<f64>,
    pub admissible: DMatrix<bool>,
}

impl CoherenceReport {
    /// `(s, t, delta, admissible)` for every unordered pair `s < t`.
    pub fn pairs(&self) -> Vec<(usize, usize, f64, bool)> {
        let n = self.q.nrows();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for s in 0..n {
            for t in s + 1..n {
                out.push((s, t, self.q[(t, s)], self.admissible[(t, s)]));
            }
        }
        out
    }
}

/// The displacement system `xi(t+1) = A_J xi(t) + B_J u(t)`, `y = C xi`,
/// together with the unprojected matrices for the alternative realizations.
#[derive(Debug, Clone)]
pub struct DisplacementSystem {
    a: DMatrix<f64>,
    a_j: DMatrix<f64>,
    b: DMatrix<f64>,
    b_j: DMatrix<f64>,
    c: DMatrix<f64>,
    c_j: DMatrix<f64>,
}

pub fn displacement(net: &Network) -> Result<DisplacementSystem> {
    if net.kind() != NetworkKind::Laplacian {
        return Err(Error::WrongKind { expected: "laplacian" });
    }
    let n = net.n();
    let proj = DMatrix::identity(n, n) - consensus_projector(n);
    let a = net.state_matrix().clone();
    let b = net.input_matrix();
    let c = net.output_matrix();
    Ok(DisplacementSystem {
        a_j: &proj * &a,
        b_j: &proj * &b,
        c_j: &c * &proj,
        a,
        b,
        c,
    })
}

impl DisplacementSystem {
    pub fn a_j(&self) -> &DMatrix<f64> {
        &self.a_j
    }

    pub fn b_j(&self) -> &DMatrix<f64> {
        &self.b_j
    }

    /// `{A_J, B_J, C}`.
    pub fn system(&self) -> LinearSystem {
        self.realization(&self.a_j, &self.b_j, &self.c)
    }

    /// `{A, B_J, C}` (marginally stable state matrix, same transfer function).
    pub fn unprojected_state(&self) -> LinearSystem {
        self.realization(&self.a, &self.b_j, &self.c)
    }

    /// `{A_J, B, C_J}`.
    pub fn projected_output(&self) -> LinearSystem {
        self.realization(&self.a_j, &self.b, &self.c_j)
    }

    /// `{A_J, B, C}`, whose DC gain is `E_O^T (L^+ + J) E_K`.
    pub fn unprojected_terminals(&self) -> LinearSystem {
        self.realization(&self.a_j, &self.b, &self.c)
    }

    fn realization(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> LinearSystem {
        LinearSystem::new(a.clone(), b.clone(), c.clone()).expect("consistent dimensions")
    }
}

/// Controllability Gramian `W_xi` of the displacement system.
pub fn pseudo_gramian(d: &DisplacementSystem) -> Result<Gramian> {
    Gramian::controllability(&d.a_j, &d.b_j)
}

/// Realization of `G(A_bar_J) - G(A_J)` with terminals `E_K`, `E_O^T`.
pub fn delta_displacement_realization(net: &Network, m: &EdgeMod) -> Result<LinearSystem> {
    let modified = net.apply_mod(m)?;
    let before = displacement(net)?;
    let after = displacement(&modified)?;
    LinearSystem::difference_realization(&after.a_j, &before.a_j, &before.b, &before.c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowStep {
    pub s: usize,
    pub t: usize,
    pub w: f64,
    pub coherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowResult {
    pub initial: f64,
    pub steps: Vec<GrowStep>,
}

impl GrowResult {
    pub fn final_coherence(&self) -> f64 {
        self.steps.last().map_or(self.initial, |s| s.coherence)
    }

    /// Coherence before any addition followed by the value after each step.
    pub fn trajectory(&self) -> Vec<f64> {
        std::iter::once(self.initial)
            .chain(self.steps.iter().map(|s| s.coherence))
            .collect()
    }
}

/// Greedy coherence reduction: repeatedly add the admissible non-edge with
/// the most negative coherence change, rebuilding the kernel each time.
/// Returns the grown network alongside the trajectory.
pub fn greedy_grow(net: &Network, w: f64, budget: usize) -> Result<(GrowResult, Network)> {
    let mut current = net.clone();
    let mut kernel = LaplacianKernel::build(&current)?;
    let initial = kernel.coherence()?;
    let mut steps = Vec::with_capacity(budget);
    for _ in 0..budget {
        let report = kernel.batch_coherence_delta(w)?;
        let n = current.n();
        let mut best: Option<(f64, usize, usize)> = None;
        for s in 0..n {
            for t in s + 1..n {
                if current.weight(s, t) != 0.0 || !report.admissible[(t, s)] {
                    continue;
                }
                let q = report.q[(t, s)];
                let better = match best {
                    None => true,
                    Some((b, _, _)) => q < b - GREEDY_TIE_RTOL * b.abs(),
                };
                if better {
                    best = Some((q, s, t));
                }
            }
        }
        let (_, s, t) = best.ok_or(Error::NoAdmissibleEdge)?;
        current = current.apply_mod(&EdgeMod::new(s, t, w))?;
        kernel = LaplacianKernel::build(&current)?;
        steps.push(GrowStep {
            s,
            t,
            w,
            coherence: kernel.coherence()?,
        });
    }
    Ok((GrowResult { initial, steps }, current))
}

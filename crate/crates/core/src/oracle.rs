//! Brute-force reference computations.
//!
//! Nothing here calls the closed forms of [`crate::stable_analysis`] or
//! [`crate::laplacian_analysis`]: modified networks are rebuilt from scratch
//! and norms are measured directly (frequency sweeps, truncated impulse
//! sums, a dual Gramian, simulation).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{EdgeMod, Network, NetworkKind};
use crate::linalg;
use crate::system::LinearSystem;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Frequencies on the uniform grid over `[-pi, pi]` (the grid contains 0).
    pub grid_points: usize,
    /// Local densification factor around the grid maximum.
    pub refinement: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid_points: 4096,
            refinement: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HinfSweep {
    pub value: f64,
    /// Frequency of the maximum.
    pub theta: f64,
    /// Value at `theta = 0`.
    pub dc_value: f64,
    /// Spacing of the finest grid evaluated around the maximum.
    pub resolution: f64,
}

fn check_stable(sys: &LinearSystem) -> Result<()> {
    let rho = linalg::spectral_radius(sys.state());
    if rho >= 1.0 {
        return Err(Error::UnstableSystem { rho });
    }
    Ok(())
}

/// Upper Hessenberg form `A = Q H Q^T` with `Q^T B` and `C Q` precomputed, so
/// every frequency costs one `O(n^2)` elimination.
struct FrequencyResponse {
    h: DMatrix<Complex64>,
    qb: DMatrix<Complex64>,
    cq: DMatrix<Complex64>,
}

impl FrequencyResponse {
    fn new(sys: &LinearSystem) -> Self {
        let hess = sys.state().clone().hessenberg();
        let q = hess.q();
        let h = hess.h();
        let to_c = |m: DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
        Self {
            h: to_c(h),
            qb: to_c(q.transpose() * sys.input()),
            cq: to_c(sys.output() * &q),
        }
    }

    /// `G(e^{i theta}) = C (zI - A)^{-1} B`.
    fn eval(&self, theta: f64) -> DMatrix<Complex64> {
        let n = self.h.nrows();
        let cols = self.qb.ncols();
        if n == 0 {
            return DMatrix::zeros(self.cq.nrows(), cols);
        }
        let zero = Complex64::new(0.0, 0.0);
        let z = Complex64::from_polar(1.0, theta);
        // Column-major working copies.
        let mut m: Vec<Complex64> = self.h.iter().map(|&v| -v).collect();
        for i in 0..n {
            m[i * n + i] += z;
        }
        let mut rhs: Vec<Complex64> = self.qb.as_slice().to_vec();
        // Gaussian elimination with adjacent-row pivoting on the Hessenberg
        // structure.
        for k in 0..n - 1 {
            if m[k * n + k + 1].norm_sqr() > m[k * n + k].norm_sqr() {
                for j in k..n {
                    m.swap(j * n + k, j * n + k + 1);
                }
                for j in 0..cols {
                    rhs.swap(j * n + k, j * n + k + 1);
                }
            }
            let pivot = m[k * n + k];
            let sub = m[k * n + k + 1];
            if pivot == zero || sub == zero {
                continue;
            }
            let l = sub / pivot;
            for j in k..n {
                let v = m[j * n + k];
                m[j * n + k + 1] -= l * v;
            }
            for j in 0..cols {
                let v = rhs[j * n + k];
                rhs[j * n + k + 1] -= l * v;
            }
        }
        // Column-oriented back substitution.
        for j in 0..cols {
            let x = &mut rhs[j * n..(j + 1) * n];
            for k in (0..n).rev() {
                let col = &m[k * n..k * n + k + 1];
                let xk = x[k] / col[k];
                x[k] = xk;
                for i in 0..k {
                    x[i] -= col[i] * xk;
                }
            }
        }
        &self.cq * DMatrix::from_vec(n, cols, rhs)
    }

    fn gain(&self, theta: f64) -> f64 {
        spectral_norm(&self.eval(theta))
    }

    /// Largest gain over `thetas`. Frobenius norms bound the spectral norm
    /// from above, so SVDs are only needed until the Frobenius norm drops
    /// below the best gain found.
    fn max_gain(&self, thetas: &[f64]) -> (f64, f64) {
        let responses: Vec<(f64, DMatrix<Complex64>)> = thetas
            .par_iter()
            .map(|&th| (th, self.eval(th)))
            .collect();
        let mut order: Vec<(f64, usize)> = responses
            .iter()
            .enumerate()
            .map(|(k, (_, g))| (g.norm(), k))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut best = (f64::NEG_INFINITY, thetas.first().copied().unwrap_or(0.0));
        for (frob, k) in order {
            if frob <= best.0 {
                break;
            }
            let g = spectral_norm(&responses[k].1);
            if g > best.0 || (g == best.0 && responses[k].0.abs() < best.1.abs()) {
                best = (g, responses[k].0);
            }
        }
        best
    }
}

fn spectral_norm(g: &DMatrix<Complex64>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    g.clone().svd(false, false).singular_values.amax()
}

/// H∞ norm by a global frequency sweep followed by local refinement.
///
/// Real systems satisfy `G(e^{-i theta}) = conj(G(e^{i theta}))`, so only
/// `[0, pi]` is swept.
pub fn hinf_sweep(sys: &LinearSystem, cfg: &SweepConfig) -> Result<HinfSweep> {
    if cfg.grid_points < 64 || cfg.refinement < 1 {
        return Err(Error::InvalidParameter(format!(
            "sweep needs >= 64 grid points and refinement >= 1, got {} and {}",
            cfg.grid_points, cfg.refinement
        )));
    }
    check_stable(sys)?;
    let fr = FrequencyResponse::new(sys);
    let pi = std::f64::consts::PI;
    // Even point count over [-pi, pi] keeps theta = 0 on the grid.
    let points = cfg.grid_points + cfg.grid_points % 2;
    let step = 2.0 * pi / points as f64;
    let grid: Vec<f64> = (0..=points / 2).map(|k| step * k as f64).collect();
    let (mut value, mut theta) = fr.max_gain(&grid);
    let dc_value = fr.gain(0.0);

    let fine = step / cfg.refinement as f64;
    let local: Vec<f64> = (1..2 * cfg.refinement)
        .map(|j| theta - step + fine * j as f64)
        .filter(|th| (0.0..=pi).contains(th))
        .collect();
    if !local.is_empty() {
        let (g, th) = fr.max_gain(&local);
        if g > value {
            value = g;
            theta = th;
        }
    }
    Ok(HinfSweep {
        value,
        theta,
        dc_value,
        resolution: fine,
    })
}

/// Spectral norm of the DC gain `C (I - A)^{-1} B` by one linear solve.
pub fn dc_gain(sys: &LinearSystem) -> Result<f64> {
    let n = sys.order();
    let lu = (DMatrix::identity(n, n) - sys.state()).lu();
    let x = lu.solve(sys.input()).ok_or(Error::SingularResolvent)?;
    let g = sys.output() * x;
    if g.is_empty() {
        return Ok(0.0);
    }
    Ok(g.svd(false, false).singular_values.amax())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Give up extending the horizon beyond this many steps.
    pub max_horizon: usize,
    /// Stop once the certified tail is at most this fraction of the value.
    pub rel_tol: f64,
    /// Largest state dimension for which the dual Gramian path is run.
    pub gramian_max_order: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            max_horizon: 1 << 20,
            rel_tol: 1e-13,
            gramian_max_order: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct H2Truncated {
    /// `sum_{t=1}^{T} ||g(t)||_F^2`.
    pub value: f64,
    /// Certified bound on the omitted `sum_{t>T}`.
    pub tail_bound: f64,
    pub horizon: usize,
    /// `Tr(B^T W_o B)` from an observability Gramian, when computed.
    pub gramian_value: Option<f64>,
}

impl H2Truncated {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Dense or compressed-row state matrix for repeated products.
enum StateOp {
    Dense(DMatrix<f64>),
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

impl StateOp {
    fn new(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let nnz = a.iter().filter(|&&v| v != 0.0).count();
        if nnz * 5 > n * n {
            return StateOp::Dense(a.clone());
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        StateOp::Sparse { row_ptr, cols, vals }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            StateOp::Dense(a) => a * x,
            StateOp::Sparse { row_ptr, cols, vals } => {
                let n = row_ptr.len() - 1;
                let mut y = DMatrix::zeros(n, x.ncols());
                for c in 0..x.ncols() {
                    let xc = x.column(c);
                    let mut yc = y.column_mut(c);
                    for i in 0..n {
                        let mut acc = 0.0;
                        for k in row_ptr[i]..row_ptr[i + 1] {
                            acc += vals[k] * xc[cols[k]];
                        }
                        yc[i] = acc;
                    }
                }
                y
            }
        }
    }
}

/// Squared H2 norm by summing the impulse response until a certified tail
/// bound is small, plus (for moderate orders) a dual-Gramian evaluation.
///
/// Tail bounds: for non-negative `(A, B, C)` the omitted sum is at most
/// `||C (I - A)^{-1} A^T B||_F^2`. Otherwise, with `q = ||A^T||_F < 1`, it is
/// at most `(sum_{r<T} ||C A^r||_F^2) ||A^T B||_F^2 / (1 - q^2)`.
pub fn h2_truncated(sys: &LinearSystem, cfg: &TruncationConfig) -> Result<H2Truncated> {
    check_stable(sys)?;
    let a = sys.state();
    let n = sys.order();
    let positive = linalg::is_nonnegative(a)
        && linalg::is_nonnegative(sys.input())
        && linalg::is_nonnegative(sys.output());
    let op = StateOp::new(a);
    let resolvent_lu = positive.then(|| (DMatrix::identity(n, n) - a).lu());

    let mut x = sys.input().clone();
    let mut obs = sys.output().clone();
    let mut obs_energy = 0.0;
    let mut power = DMatrix::<f64>::zeros(0, 0);
    let mut power_horizon = 0usize;
    let mut value = 0.0;
    let mut horizon = 0usize;
    let mut checkpoint = 16usize;
    let tail_bound = loop {
        let g = sys.output() * &x;
        value += g.iter().map(|v| v * v).sum::<f64>();
        x = op.apply(&x);
        if !positive {
            obs_energy += obs.iter().map(|v| v * v).sum::<f64>();
            obs = &obs * a;
        }
        horizon += 1;
        if horizon < checkpoint && horizon < cfg.max_horizon {
            continue;
        }
        checkpoint *= 2;
        let tail = if let Some(lu) = &resolvent_lu {
            let z = lu.solve(&x).ok_or(Error::SingularResolvent)?;
            let y = sys.output() * z;
            y.iter().map(|v| v * v).sum::<f64>()
        } else {
            if power_horizon == 0 {
                power = a.clone();
                power_horizon = 1;
            }
            while power_horizon * 2 <= horizon {
                power = &power * &power;
                power_horizon *= 2;
            }
            while power_horizon < horizon {
                power = a * &power;
                power_horizon += 1;
            }
            let q = linalg::frobenius(&power);
            if q < 1.0 {
                let xt = x.iter().map(|v| v * v).sum::<f64>();
                obs_energy * xt / (1.0 - q * q)
            } else {
                f64::INFINITY
            }
        };
        if tail <= cfg.rel_tol * value || tail == 0.0 || horizon >= cfg.max_horizon {
            break tail;
        }
    };

    let gramian_value = (n <= cfg.gramian_max_order)
        .then(|| observability_trace(sys))
        .transpose()?;
    if let Some(gv) = gramian_value {
        let slack = 1e-8 * value.max(1.0) + tail_bound;
        if (gv - value).abs() > slack && tail_bound.is_finite() {
            return Err(Error::InvariantViolated(format!(
                "truncated H2 sum {value} (tail {tail_bound}) disagrees with Gramian {gv}"
            )));
        }
    }
    Ok(H2Truncated {
        value,
        tail_bound,
        horizon,
        gramian_value,
    })
}

/// `Tr(B^T W_o B)` with `W_o = sum_t (A^T)^t C^T C A^t`, by squared Smith
/// iteration on the observability side.
fn observability_trace(sys: &LinearSystem) -> Result<f64> {
    const MAX_SQUARINGS: usize = 60;
    let mut wo = sys.output().transpose() * sys.output();
    let mut ak = sys.state().clone();
    for _ in 0..MAX_SQUARINGS {
        let inc = ak.transpose() * &wo * &ak;
        let inc_size = inc.iter().map(|v| v.abs()).sum::<f64>();
        wo += inc;
        if inc_size <= 1e-15 * wo.iter().map(|v| v.abs()).sum::<f64>() {
            return Ok((sys.input().transpose() * &wo * sys.input()).trace());
        }
        ak = &ak * &ak;
    }
    Err(Error::LyapunovNotConverged {
        iterations: MAX_SQUARINGS,
    })
}

/// Outputs `y(0), ..., y(horizon-1)` from `x(0) = 0` under the input
/// columns of `u` (missing columns are zero input).
pub fn simulate(sys: &LinearSystem, u: &DMatrix<f64>, horizon: usize) -> Result<DMatrix<f64>> {
    if u.nrows() != sys.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "input sequence has {} rows, system has {} inputs",
            u.nrows(),
            sys.n_inputs()
        )));
    }
    if u.ncols() > horizon {
        return Err(Error::DimensionMismatch(format!(
            "input sequence has {} samples, horizon is {horizon}",
            u.ncols()
        )));
    }
    let mut x = DVector::zeros(sys.order());
    let mut y = DMatrix::zeros(sys.n_outputs(), horizon);
    for t in 0..horizon {
        y.set_column(t, &(sys.output() * &x));
        let mut next = sys.state() * &x;
        if t < u.ncols() {
            next += sys.input() * u.column(t);
        }
        x = next;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: usize,
}

/// Steady-state deviation from consensus of `x(t+1) = A x(t) + v(t)`,
/// `v ~ N(0, I)`, estimated from independent runs of length `horizon`.
///
/// Each trial draws from its own ChaCha stream, so the result depends only
/// on `seed`, never on thread scheduling.
pub fn coherence_monte_carlo(
    net: &Network,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<MonteCarlo> {
    if net.kind() != NetworkKind::Laplacian {
        return Err(Error::WrongKind { expected: "laplacian" });
    }
    if trials < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 2 trials".into()));
    }
    let n = net.n();
    let a = net.state_matrix();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let a_j = (DMatrix::identity(n, n) - &j) * a;
    let decay = linalg::spectral_radius(&a_j).powi(horizon.min(i32::MAX as usize) as i32);
    if decay >= 1e-3 {
        return Err(Error::HorizonTooShort { horizon, decay });
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut x = DVector::<f64>::zeros(n);
            for _ in 0..horizon {
                let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                x = a * x + noise;
            }
            let mean = x.mean();
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(MonteCarlo {
        estimate: mean,
        standard_error: (var / trials as f64).sqrt(),
        trials,
    })
}

/// Coherence of a Laplacian network from the eigenvalues of
/// `A_J = (I - J) A`: `Tr((I - A_J^2)^{-1}) - 1`.
pub fn coherence_by_eigenvalues(net: &Network) -> Result<f64> {
    if net.kind() != NetworkKind::Laplacian {
        return Err(Error::WrongKind { expected: "laplacian" });
    }
    if !net.has_all_node_terminals() {
        return Err(Error::AllNodeInputRequired);
    }
    let n = net.n();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut a_j = (DMatrix::identity(n, n) - &j) * net.state_matrix();
    linalg::symmetrize(&mut a_j);
    let eig = a_j.symmetric_eigen();
    Ok(eig.eigenvalues.iter().map(|&l| 1.0 / (1.0 - l * l)).sum::<f64>() - 1.0)
}

/// Realization of the delta system between `net` and a rebuilt copy with
/// `m` applied. Laplacian networks use their displacement systems.
pub fn rebuilt_delta(net: &Network, m: &EdgeMod) -> Result<(Network, LinearSystem)> {
    let modified = net.apply_mod(m)?;
    let (a_new, a_old) = match net.kind() {
        NetworkKind::DirectStable => (modified.state_matrix().clone(), net.state_matrix().clone()),
        NetworkKind::Laplacian => {
            let n = net.n();
            let proj = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
            (&proj * modified.state_matrix(), &proj * net.state_matrix())
        }
    };
    let delta = LinearSystem::difference_realization(
        &a_new,
        &a_old,
        &net.input_matrix(),
        &net.output_matrix(),
    )?;
    Ok((modified, delta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RebuildReport {
    pub edge: EdgeMod,
    /// Whether the rebuilt network still satisfies its dynamical condition
    /// (`rho(A_bar) < 1`, or the spectral condition on `L_bar` for Laplacian
    /// networks).
    pub admissible: bool,
    pub spectral_radius: f64,
    pub hinf: Option<HinfSweep>,
    pub h2: Option<H2Truncated>,
    pub coherence_delta: Option<f64>,
}

/// Rebuild the modified network and measure everything by brute force.
pub fn rebuild_and_measure(
    net: &Network,
    m: &EdgeMod,
    sweep: &SweepConfig,
    trunc: &TruncationConfig,
) -> Result<RebuildReport> {
    let report = |admissible, spectral_radius| RebuildReport {
        edge: *m,
        admissible,
        spectral_radius,
        hinf: None,
        h2: None,
        coherence_delta: None,
    };
    let (modified, delta) = match rebuilt_delta(net, m) {
        Ok(pair) => pair,
        Err(Error::SpectralConditionViolated { rho_l, .. }) => return Ok(report(false, rho_l)),
        Err(e) => return Err(e),
    };
    let (rho, limit) = match net.kind() {
        NetworkKind::DirectStable => (modified.spectral_radius(), 1.0),
        NetworkKind::Laplacian => (modified.laplacian_spectral_radius(), net.condition().limit()),
    };
    if rho >= limit {
        return Ok(report(false, rho));
    }
    let mut out = report(true, rho);
    out.hinf = Some(hinf_sweep(&delta, sweep)?);
    out.h2 = Some(h2_truncated(&delta, trunc)?);
    if net.kind() == NetworkKind::Laplacian && net.has_all_node_terminals() {
        out.coherence_delta = Some(coherence_by_eigenvalues(&modified)? - coherence_by_eigenvalues(net)?);
    }
    Ok(out)
}

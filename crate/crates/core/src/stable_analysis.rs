//! Single-edge modifications of directed, positive, internally stable
//! networks.
//!
//! Everything expensive is computed once in a [`SteadyStateKernel`]: the
//! resolvent `R = (I - A)^{-1}`, the DC-gain norms into the outputs and from
//! the inputs, the all-pairs walk energies and the input-to-node /
//! node-to-output centralities. Per-edge quantities are then `O(1)`:
//!
//! * stability margin of `{(s,t), w}`: `1 / R[s][t]` (infinite when `t`
//!   cannot reach `s`);
//! * exact H∞ norm of the delta system:
//!   `|R[O,t]| |w| |R[s,K]| / (1 - R[s][t] w)`;
//! * lower bound on its squared H2 norm:
//!   `p_t w^2 q_s / (1 - eps(t->s) w^2)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{EdgeMod, Network, NetworkKind};
use crate::linalg;
use crate::lyapunov::Gramian;
use crate::system::LinearSystem;

/// Resolvent entries below this fraction of `max(R)` are treated as exact
/// zeros (no path).
const ZERO_PATH_RTOL: f64 = 1e-14;
/// Relative agreement required between Gramian diagonals and walk-energy sums.
const CENTRALITY_RTOL: f64 = 1e-8;
/// Greedy design only accepts weights up to this fraction of the margin.
pub const GREEDY_SAFETY: f64 = 0.95;

#[derive(Debug, Clone, Copy)]
pub struct WalkEnergyTolerance {
    /// Stop once the certified tail is below `rel_tol * Tr(eps)`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for WalkEnergyTolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

/// Reusable per-network cache for scanning every candidate edge.
#[derive(Debug, Clone)]
pub struct SteadyStateKernel {
    a: DMatrix<f64>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    resolvent: DMatrix<f64>,
    row_norm_o: Vec<f64>,
    col_norm_k: Vec<f64>,
    walk_energy: DMatrix<f64>,
    q: Vec<f64>,
    p: Vec<f64>,
    truncation_error: f64,
    walk_steps: usize,
    zero_threshold: f64,
}

impl SteadyStateKernel {
    pub fn build(net: &Network) -> Result<Self> {
        Self::build_with(net, WalkEnergyTolerance::default())
    }

    pub fn build_with(net: &Network, tol: WalkEnergyTolerance) -> Result<Self> {
        if net.kind() != NetworkKind::DirectStable {
            return Err(Error::WrongKind { expected: "direct" });
        }
        let a = net.state_matrix().clone();
        let n = net.n();
        let i_minus_a = DMatrix::identity(n, n) - &a;
        let resolvent = linalg::inverse(&i_minus_a).ok_or(Error::SingularResolvent)?;
        // For A >= 0 the resolvent is non-negative iff rho(A) < 1.
        if resolvent.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::SingularResolvent);
        }
        let resolvent = resolvent.map(|v| v.max(0.0));

        let row_norm_o = (0..n)
            .map(|r| net.outputs().iter().map(|&o| resolvent[(o, r)].powi(2)).sum::<f64>().sqrt())
            .collect();
        let col_norm_k = (0..n)
            .map(|r| net.inputs().iter().map(|&k| resolvent[(r, k)].powi(2)).sum::<f64>().sqrt())
            .collect();

        let (walk_energy, truncation_error, walk_steps) = walk_energies(&a, &resolvent, tol)?;

        let gram_c = Gramian::controllability(&a, &net.input_matrix())?;
        let gram_o = Gramian::observability(&a, &net.output_matrix())?;
        let q: Vec<f64> = (0..n).map(|i| gram_c.w[(i, i)]).collect();
        let p: Vec<f64> = (0..n).map(|i| gram_o.w[(i, i)]).collect();
        for i in 0..n {
            let q_walk: f64 = net.inputs().iter().map(|&k| walk_energy[(i, k)]).sum();
            let p_walk: f64 = net.outputs().iter().map(|&o| walk_energy[(o, i)]).sum();
            for (name, lyap, walk) in [("q", q[i], q_walk), ("p", p[i], p_walk)] {
                if (lyap - walk).abs() > CENTRALITY_RTOL * lyap.abs().max(1.0) + truncation_error {
                    return Err(Error::InvariantViolated(format!(
                        "centrality {name}[{i}]: Gramian {lyap} vs walk energies {walk}"
                    )));
                }
            }
        }

        let zero_threshold = ZERO_PATH_RTOL * linalg::max_abs(&resolvent);
        Ok(Self {
            a,
            inputs: net.inputs().to_vec(),
            outputs: net.outputs().to_vec(),
            resolvent,
            row_norm_o,
            col_norm_k,
            walk_energy,
            q,
            p,
            truncation_error,
            walk_steps,
            zero_threshold,
        })
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

    /// `(I - A)^{-1}`.
    pub fn resolvent(&self) -> &DMatrix<f64> {
        &self.resolvent
    }

    /// `|G_{O r}(0)| = sqrt(sum_{o in O} R[o][r]^2)` for every node `r`.
    pub fn row_norm_o(&self) -> &[f64] {
        &self.row_norm_o
    }

    /// `|G_{r K}(0)| = sqrt(sum_{k in K} R[r][k]^2)` for every node `r`.
    pub fn col_norm_k(&self) -> &[f64] {
        &self.col_norm_k
    }

    /// Entry `(s, t)` is the walk energy `eps(t -> s) = sum_tau ((A^tau)_{st})^2`.
    pub fn walk_energy_matrix(&self) -> &DMatrix<f64> {
        &self.walk_energy
    }

    /// `eps(from -> to)`.
    pub fn walk_energy(&self, from: usize, to: usize) -> f64 {
        self.walk_energy[(to, from)]
    }

    /// Input-to-node centralities `q_i`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Node-to-output centralities `p_i`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Certified bound on the total omitted walk-energy mass.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn walk_steps(&self) -> usize {
        self.walk_steps
    }

    /// `R[s][t]`, with rounding-level entries snapped to zero.
    fn loop_gain(&self, s: usize, t: usize) -> f64 {
        let r = self.resolvent[(s, t)];
        if r <= self.zero_threshold {
            0.0
        } else {
            r
        }
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        EdgeMod::new(s, t, 0.0).check_nodes(self.n())
    }

    /// Largest weight that can be added to `s -> t` while keeping the network
    /// internally stable (exclusive). `+inf` when `t` has no path to `s`.
    pub fn stability_margin(&self, s: usize, t: usize) -> Result<f64> {
        self.check_pair(s, t)?;
        Ok(self.margin_unchecked(s, t))
    }

    fn margin_unchecked(&self, s: usize, t: usize) -> f64 {
        let r = self.loop_gain(s, t);
        if r == 0.0 {
            f64::INFINITY
        } else {
            1.0 / r
        }
    }

    fn check_weight(&self, m: &EdgeMod) -> Result<()> {
        m.check_nodes(self.n())?;
        let lower = -self.a[(m.t, m.s)];
        if m.w < lower {
            return Err(Error::WeightOutOfRange {
                s: m.s,
                t: m.t,
                w: m.w,
                lower,
            });
        }
        let margin = self.margin_unchecked(m.s, m.t);
        if m.w >= margin {
            return Err(Error::DestabilizingWeight {
                s: m.s,
                t: m.t,
                w: m.w,
                margin,
            });
        }
        Ok(())
    }

    /// Exact H∞ norm of the delta system of `m`.
    pub fn delta_hinf(&self, m: &EdgeMod) -> Result<f64> {
        self.check_weight(m)?;
        Ok(self.hinf_unchecked(m.s, m.t, m.w))
    }

    fn hinf_unchecked(&self, s: usize, t: usize, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        self.row_norm_o[t] * w.abs() * self.col_norm_k[s] / (1.0 - self.loop_gain(s, t) * w)
    }

    /// Lower bound on the squared H2 norm of the delta system of `m`.
    ///
    /// Only weight additions (`w >= 0`) are accepted: for partial removals
    /// the same expression can exceed the true norm.
    pub fn delta_h2_lower_bound(&self, m: &EdgeMod) -> Result<f64> {
        self.check_weight(m)?;
        if m.w < 0.0 {
            return Err(Error::BoundNotCertified {
                s: m.s,
                t: m.t,
                w: m.w,
            });
        }
        Ok(self.h2_bound_unchecked(m.s, m.t, m.w))
    }

    /// For `0 <= w < margin` the denominator is positive because
    /// `w^2 eps_{t->s} <= (w R[s][t])^2 < 1`.
    fn h2_bound_unchecked(&self, s: usize, t: usize, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        let w2 = w * w;
        let denom = 1.0 - self.walk_energy(t, s) * w2;
        if denom > 0.0 {
            self.p[t] * w2 * self.q[s] / denom
        } else {
            f64::INFINITY
        }
    }

    /// Smallest single-edge stability margin and the edge attaining it
    /// (lexicographically first on ties); `+inf` and `None` when every margin
    /// is infinite.
    pub fn fragility_radius(&self) -> (f64, Option<EdgeMod>) {
        let n = self.n();
        let mut best = (f64::INFINITY, None);
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                let m = self.margin_unchecked(s, t);
                if m < best.0 {
                    best = (m, Some(EdgeMod::new(s, t, m)));
                }
            }
        }
        best
    }

    /// Margin, H∞ norm and H2 bound for every ordered pair at probe weight
    /// `w`. Output is independent of `parallel`.
    pub fn batch_scan(&self, w: f64, opts: &ScanOptions) -> Result<Vec<DeltaReport>> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("probe weight {w} must be positive")));
        }
        let n = self.n();
        let row = |s: usize| -> Vec<DeltaReport> {
            (0..n)
                .filter(|&t| t != s)
                .map(|t| self.report(s, t, w))
                .collect()
        };
        let mut reports: Vec<DeltaReport> = if opts.parallel {
            (0..n).into_par_iter().flat_map_iter(row).collect()
        } else {
            (0..n).flat_map(row).collect()
        };
        sort_reports(&mut reports, opts.sort);
        if let Some(k) = opts.top_k {
            reports.truncate(k);
        }
        Ok(reports)
    }

    fn report(&self, s: usize, t: usize, w: f64) -> DeltaReport {
        let margin = self.margin_unchecked(s, t);
        let destabilizing = w >= margin;
        let (hinf, h2) = if destabilizing {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (
                self.hinf_unchecked(s, t, w),
                self.h2_bound_unchecked(s, t, w),
            )
        };
        DeltaReport {
            s,
            t,
            w,
            margin,
            destabilizing,
            hinf,
            h2_lower_bound: h2,
        }
    }
}

/// `sum_{tau >= 0} A^tau ∘ A^tau`, plus a certified bound on the omitted tail.
///
/// For `A >= 0` the tail satisfies `sum_{tau >= T} (A^tau)^{∘2} <=
/// (A^T R)^{∘2}` elementwise, with `R = (I - A)^{-1}`, because the square of
/// a sum of non-negative terms dominates the sum of their squares.
fn walk_energies(
    a: &DMatrix<f64>,
    resolvent: &DMatrix<f64>,
    tol: WalkEnergyTolerance,
) -> Result<(DMatrix<f64>, f64, usize)> {
    const CHECK_EVERY: usize = 4;
    let n = a.nrows();
    let mut power = DMatrix::identity(n, n);
    let mut energy = DMatrix::zeros(n, n);
    for step in 0..tol.max_iter {
        energy += power.component_mul(&power);
        power = a * &power;
        if step % CHECK_EVERY == CHECK_EVERY - 1 || power.iter().all(|&v| v == 0.0) {
            let tail = (&power * resolvent).iter().map(|v| v * v).sum::<f64>();
            if tail <= tol.rel_tol * energy.trace() {
                return Ok((energy, tail, step + 1));
            }
        }
    }
    Err(Error::TruncationNotConverged {
        iterations: tol.max_iter,
    })
}

/// 2n-state realization of the delta system `G_bar - G` on the state
/// `[x_bar - x; x]`.
#[derive(Debug, Clone)]
pub struct DeltaRealization {
    pub edge: EdgeMod,
    pub system: LinearSystem,
}

pub fn delta_realization(net: &Network, m: &EdgeMod) -> Result<DeltaRealization> {
    let modified = net.apply_mod(m)?;
    let system = LinearSystem::difference_realization(
        modified.state_matrix(),
        net.state_matrix(),
        &net.input_matrix(),
        &net.output_matrix(),
    )?;
    Ok(DeltaRealization { edge: *m, system })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    Margin,
    Hinf,
    H2,
    Edge,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub sort: SortKey,
    pub top_k: Option<usize>,
    pub parallel: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            sort: SortKey::Margin,
            top_k: None,
            parallel: true,
        }
    }
}

/// Per-edge scan result. Destabilizing edges carry infinite `hinf` and
/// `h2_lower_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub s: usize,
    pub t: usize,
    pub w: f64,
    pub margin: f64,
    pub destabilizing: bool,
    pub hinf: f64,
    pub h2_lower_bound: f64,
}

/// Ascending by key; infinities sort last; ties by `(s, t)`.
pub fn sort_reports(reports: &mut [DeltaReport], key: SortKey) {
    let value = |r: &DeltaReport| match key {
        SortKey::Margin => r.margin,
        SortKey::Hinf => r.hinf,
        SortKey::H2 => r.h2_lower_bound,
        SortKey::Edge => 0.0,
    };
    reports.sort_by(|x, y| {
        value(x)
            .total_cmp(&value(y))
            .then((x.s, x.t).cmp(&(y.s, y.t)))
    });
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramianStep {
    pub edge: EdgeMod,
    pub bound: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyGramian {
    pub initial_trace: f64,
    pub steps: Vec<GramianStep>,
}

impl GreedyGramian {
    pub fn final_trace(&self) -> f64 {
        self.steps.last().map_or(self.initial_trace, |s| s.trace)
    }

    pub fn edges(&self) -> Vec<EdgeMod> {
        self.steps.iter().map(|s| s.edge).collect()
    }
}

/// `Tr(C W C^T)` of the network's controllability Gramian.
pub fn output_gramian_trace(net: &Network) -> Result<f64> {
    Ok(Gramian::controllability(net.state_matrix(), &net.input_matrix())?
        .output_trace(&net.output_matrix()))
}

/// Greedy edge addition maximizing the H2 lower bound at each step.
///
/// Candidates are the absent edges `s -> t` whose margin in the current
/// network is at least `candidate_weight / GREEDY_SAFETY`; the kernel is
/// rebuilt after every accepted edge.
pub fn greedy_gramian_improve(
    net: &Network,
    budget: usize,
    candidate_weight: f64,
) -> Result<GreedyGramian> {
    if !(candidate_weight > 0.0) || !candidate_weight.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "candidate weight {candidate_weight} must be positive"
        )));
    }
    let mut current = net.clone();
    let initial_trace = output_gramian_trace(&current)?;
    let mut steps = Vec::with_capacity(budget);
    for _ in 0..budget {
        let kernel = SteadyStateKernel::build(&current)?;
        let n = current.n();
        let mut best: Option<(f64, usize, usize)> = None;
        for s in 0..n {
            for t in 0..n {
                if s == t || current.weight(s, t) != 0.0 {
                    continue;
                }
                if candidate_weight > GREEDY_SAFETY * kernel.margin_unchecked(s, t) {
                    continue;
                }
                let bound = kernel.h2_bound_unchecked(s, t, candidate_weight);
                if best.is_none_or(|(b, _, _)| bound > b) {
                    best = Some((bound, s, t));
                }
            }
        }
        let (bound, s, t) = best.ok_or(Error::NoAdmissibleEdge)?;
        let edge = EdgeMod::new(s, t, candidate_weight);
        current = current.apply_mod(&edge)?;
        let trace = output_gramian_trace(&current)?;
        steps.push(GramianStep { edge, bound, trace });
    }
    Ok(GreedyGramian {
        initial_trace,
        steps,
    })
}

//! Weighted networks in the two dynamic regimes, plus single-edge
//! modifications.
//!
//! Index convention: node indices are 0-based and the weight of the edge
//! `i -> j` lives at `adjacency[(j, i)]` (row = target, column = source).
//! An [`EdgeMod`] `{s, t, w}` therefore touches the entry `(t, s)`.
//!
//! * [`NetworkKind::DirectStable`]: the state matrix is the adjacency matrix
//!   itself and must have spectral radius below one.
//! * [`NetworkKind::Laplacian`]: the graph is undirected and connected, and
//!   the state matrix is `A = I - L` with `rho(L) < 1`, or only
//!   `rho(L) < 2` (a stable displacement system) under
//!   [`SpectralCondition::Displacement`].

mod generate;
mod io;

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::system::LinearSystem;

pub use generate::{complete_graph, erdos_renyi, benchmark_preset, grid_graph, path_graph, ErdosRenyi};
pub use io::{read_edge_list, read_network, write_network, NetworkFile, Sidecar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "direct")]
    DirectStable,
    #[serde(rename = "laplacian")]
    Laplacian,
}

impl NetworkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::DirectStable => "direct",
            NetworkKind::Laplacian => "laplacian",
        }
    }
}

/// Upper limit imposed on `rho(L)` for Laplacian networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralCondition {
    /// `rho(L) < 1`: every eigenvalue of `A = I - L` lies in `(0, 1]`.
    #[default]
    Strict,
    /// `rho(L) < 2`: the eigenvalues of `A` lie in `(-1, 1]`, which is all
    /// the displacement system needs to be stable.
    Displacement,
}

impl SpectralCondition {
    pub fn limit(self) -> f64 {
        match self {
            SpectralCondition::Strict => 1.0,
            SpectralCondition::Displacement => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpectralCondition::Strict => "strict",
            SpectralCondition::Displacement => "displacement",
        }
    }
}

/// A candidate single-edge modification: add `w` to the weight of `s -> t`.
///
/// For Laplacian networks the pair is undirected and `w` must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMod {
    pub s: usize,
    pub t: usize,
    pub w: f64,
}

impl EdgeMod {
    pub fn new(s: usize, t: usize, w: f64) -> Self {
        Self { s, t, w }
    }

    pub(crate) fn check_nodes(&self, n: usize) -> Result<()> {
        for node in [self.s, self.t] {
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        if self.s == self.t {
            return Err(Error::SelfLoop(self.s));
        }
        if !self.w.is_finite() {
            return Err(Error::InvalidParameter(format!("weight {} is not finite", self.w)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    kind: NetworkKind,
    adjacency: DMatrix<f64>,
    state: DMatrix<f64>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    condition: SpectralCondition,
}

/// Build and validate a network from an edge list of `(i, j, w)` triples,
/// each meaning the edge `i -> j` with weight `w`.
///
/// For Laplacian networks every undirected edge is listed once, in either
/// orientation.
pub fn build_network(
    n: usize,
    edges: &[(usize, usize, f64)],
    inputs: &[usize],
    outputs: &[usize],
    kind: NetworkKind,
) -> Result<Network> {
    build_network_with(n, edges, inputs, outputs, kind, SpectralCondition::Strict)
}

/// [`build_network`] under an explicit spectral condition.
pub fn build_network_with(
    n: usize,
    edges: &[(usize, usize, f64)],
    inputs: &[usize],
    outputs: &[usize],
    kind: NetworkKind,
    condition: SpectralCondition,
) -> Result<Network> {
    let mut adjacency = DMatrix::zeros(n, n);
    let mut seen = BTreeSet::new();
    for &(i, j, w) in edges {
        for node in [i, j] {
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { i, j, w });
        }
        let key = match kind {
            NetworkKind::DirectStable => (i, j),
            NetworkKind::Laplacian => {
                if i == j {
                    return Err(Error::SelfLoop(i));
                }
                (i.min(j), i.max(j))
            }
        };
        if !seen.insert(key) {
            return Err(Error::DuplicateEdge { i, j });
        }
        adjacency[(j, i)] = w;
        if kind == NetworkKind::Laplacian {
            adjacency[(i, j)] = w;
        }
    }
    let mut net = Network::assemble(adjacency, inputs.to_vec(), outputs.to_vec(), kind)?;
    net.condition = condition;
    net.check_dynamics()?;
    Ok(net)
}

impl Network {
    /// Validate a ready-made adjacency matrix (entry `(j, i)` = weight of
    /// `i -> j`).
    pub fn from_adjacency(
        adjacency: DMatrix<f64>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        kind: NetworkKind,
    ) -> Result<Network> {
        let net = Self::assemble(adjacency, inputs, outputs, kind)?;
        net.check_dynamics()?;
        Ok(net)
    }

    fn assemble(
        adjacency: DMatrix<f64>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        kind: NetworkKind,
    ) -> Result<Network> {
        if !adjacency.is_square() {
            return Err(Error::DimensionMismatch("adjacency must be square".into()));
        }
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one node".into()));
        }
        for j in 0..n {
            for i in 0..n {
                let w = adjacency[(j, i)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::NonPositiveWeight { i, j, w });
                }
            }
        }
        check_node_set("inputs", &inputs, n)?;
        check_node_set("outputs", &outputs, n)?;
        if kind == NetworkKind::Laplacian {
            if let Some(i) = (0..n).find(|&i| adjacency[(i, i)] != 0.0) {
                return Err(Error::SelfLoop(i));
            }
            if !linalg::is_symmetric(&adjacency) {
                return Err(Error::InvalidParameter(
                    "Laplacian network needs a symmetric adjacency matrix".into(),
                ));
            }
        }
        let state = match kind {
            NetworkKind::DirectStable => adjacency.clone(),
            NetworkKind::Laplacian => laplacian_state(&adjacency),
        };
        Ok(Network {
            n,
            kind,
            adjacency,
            state,
            inputs,
            outputs,
            condition: SpectralCondition::Strict,
        })
    }

    fn check_dynamics(&self) -> Result<()> {
        match self.kind {
            NetworkKind::DirectStable => {
                let rho = self.spectral_radius();
                if rho >= 1.0 {
                    return Err(Error::UnstableNetwork { rho });
                }
            }
            NetworkKind::Laplacian => {
                if !self.is_connected() {
                    return Err(Error::Disconnected);
                }
                let rho_l = self.laplacian_spectral_radius();
                let limit = self.condition.limit();
                if rho_l >= limit {
                    return Err(Error::SpectralConditionViolated { rho_l, limit });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    /// Weighted adjacency; entry `(j, i)` is the weight of `i -> j`.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// State update matrix `A` (the adjacency, or `I - L`).
    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.state
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.adjacency[(to, from)]
    }

    /// `B = E_K`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        linalg::selector(self.n, &self.inputs)
    }

    /// `C = E_O^T`.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        linalg::selector(self.n, &self.outputs).transpose()
    }

    pub fn system(&self) -> LinearSystem {
        LinearSystem::new(self.state.clone(), self.input_matrix(), self.output_matrix())
            .expect("network dimensions are consistent")
    }

    /// Graph Laplacian `L = I - A` (only meaningful for Laplacian networks).
    pub fn laplacian(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) - &self.state
    }

    /// Spectral radius of the state matrix.
    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.state)
    }

    /// Largest eigenvalue of the Laplacian (the symmetric part is used for
    /// direct networks, where the value has no dynamical meaning).
    pub fn laplacian_spectral_radius(&self) -> f64 {
        let l = self.laplacian();
        let mut sym = 0.5 * (&l + l.transpose());
        linalg::symmetrize(&mut sym);
        SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Edges as `(i, j, w)` with `i -> j`, ordered by `(i, j)`. Laplacian
    /// networks list each undirected edge once with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.adjacency[(j, i)];
                if w == 0.0 {
                    continue;
                }
                if self.kind == NetworkKind::Laplacian && j <= i {
                    continue;
                }
                out.push((i, j, w));
            }
        }
        out
    }

    /// Weak connectivity of the underlying undirected graph (breadth-first).
    pub fn is_connected(&self) -> bool {
        self.bfs_hops(0).iter().all(|d| d.is_some())
    }

    /// Longest shortest-path hop count over the undirected graph, or `None`
    /// when it is disconnected.
    pub fn hop_diameter(&self) -> Option<usize> {
        let mut diameter = 0;
        for source in 0..self.n {
            for d in self.bfs_hops(source) {
                diameter = diameter.max(d?);
            }
        }
        Some(diameter)
    }

    fn bfs_hops(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for v in 0..self.n {
                let linked = self.adjacency[(u, v)] != 0.0 || self.adjacency[(v, u)] != 0.0;
                if linked && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Apply a single-edge modification.
    ///
    /// Direct networks: `A_bar = A + e_t w e_s^T`. Stability of the result is
    /// deliberately not enforced so that margins can be probed from both
    /// sides; compare `w` against the stability margin first.
    ///
    /// Laplacian networks: the undirected edge `{s, t}` gains weight `w > 0`
    /// (`A_bar = A - w e_st e_st^T`) and the result must still satisfy the
    /// network's [`SpectralCondition`].
    pub fn apply_mod(&self, m: &EdgeMod) -> Result<Network> {
        m.check_nodes(self.n)?;
        let mut adjacency = self.adjacency.clone();
        match self.kind {
            NetworkKind::DirectStable => {
                let current = adjacency[(m.t, m.s)];
                if m.w < -current {
                    return Err(Error::NegativeResultingWeight { s: m.s, t: m.t, w: m.w });
                }
                // Exact removal must land on an exact zero.
                adjacency[(m.t, m.s)] = if m.w == -current { 0.0 } else { current + m.w };
                Self::assemble(adjacency, self.inputs.clone(), self.outputs.clone(), self.kind)
            }
            NetworkKind::Laplacian => {
                if !(m.w > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Laplacian modifications must add positive weight, got {}",
                        m.w
                    )));
                }
                adjacency[(m.t, m.s)] += m.w;
                adjacency[(m.s, m.t)] += m.w;
                let mut net =
                    Self::assemble(adjacency, self.inputs.clone(), self.outputs.clone(), self.kind)?;
                net.condition = self.condition;
                let rho_l = net.laplacian_spectral_radius();
                let limit = self.condition.limit();
                if rho_l >= limit {
                    return Err(Error::SpectralConditionViolated { rho_l, limit });
                }
                Ok(net)
            }
        }
    }

    /// Same network with different terminal sets.
    pub fn with_terminals(&self, inputs: Vec<usize>, outputs: Vec<usize>) -> Result<Network> {
        check_node_set("inputs", &inputs, self.n)?;
        check_node_set("outputs", &outputs, self.n)?;
        Ok(Network {
            inputs,
            outputs,
            ..self.clone()
        })
    }

    pub fn condition(&self) -> SpectralCondition {
        self.condition
    }

    /// Same network validated under another spectral condition. Direct
    /// networks ignore the condition.
    pub fn with_condition(&self, condition: SpectralCondition) -> Result<Network> {
        let net = Network {
            condition,
            ..self.clone()
        };
        net.check_dynamics()?;
        Ok(net)
    }

    pub fn has_all_node_terminals(&self) -> bool {
        let all: Vec<usize> = (0..self.n).collect();
        self.inputs == all && self.outputs == all
    }
}

fn check_node_set(name: &str, nodes: &[usize], n: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidNodeSet(format!("{name} must be nonempty")));
    }
    let mut seen = BTreeSet::new();
    for &node in nodes {
        if node >= n {
            return Err(Error::NodeOutOfRange { node, n });
        }
        if !seen.insert(node) {
            return Err(Error::InvalidNodeSet(format!("{name} lists node {node} twice")));
        }
    }
    Ok(())
}

fn laplacian_state(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjacency.nrows();
    let mut a = adjacency.clone();
    for i in 0..n {
        let degree: f64 = adjacency.row(i).iter().sum();
        a[(i, i)] = 1.0 - degree;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Network {
        build_network(2, &[(0, 1, 0.5)], &[0], &[1], NetworkKind::DirectStable).unwrap()
    }

    #[test]
    fn empty_edge_list_is_a_zero_stable_network() {
        let net = build_network(3, &[], &[0], &[2], NetworkKind::DirectStable).unwrap();
        assert_eq!(net.state_matrix(), &DMatrix::zeros(3, 3));
        assert_eq!(net.spectral_radius(), 0.0);
    }

    #[test]
    fn chain_edge_is_stored_at_target_row() {
        let net = chain();
        assert_eq!(net.state_matrix()[(1, 0)], 0.5);
        assert_eq!(net.state_matrix()[(0, 1)], 0.0);
        assert!(net.spectral_radius() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let k = NetworkKind::DirectStable;
        assert!(matches!(
            build_network(2, &[(0, 1, -0.1)], &[0], &[1], k),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_network(2, &[(0, 1, 0.1), (0, 1, 0.2)], &[0], &[1], k),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            build_network(2, &[(0, 1, 1.0), (1, 0, 1.0)], &[0], &[1], k),
            Err(Error::UnstableNetwork { .. })
        ));
        assert!(matches!(
            build_network(2, &[], &[], &[1], k),
            Err(Error::InvalidNodeSet(_))
        ));
        assert!(matches!(
            build_network(2, &[], &[0, 0], &[1], k),
            Err(Error::InvalidNodeSet(_))
        ));
        assert!(matches!(
            build_network(2, &[(0, 5, 0.1)], &[0], &[1], k),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn laplacian_validation() {
        let l = NetworkKind::Laplacian;
        let all = [0, 1, 2];
        assert!(matches!(
            build_network(3, &[(0, 1, 0.2)], &all, &all, l),
            Err(Error::Disconnected)
        ));
        assert!(matches!(
            build_network(3, &[(0, 1, 0.2), (1, 0, 0.1), (1, 2, 0.2)], &all, &all, l),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            build_network(3, &[(0, 1, 0.6), (1, 2, 0.6)], &all, &all, l),
            Err(Error::SpectralConditionViolated { .. })
        ));
        assert!(matches!(
            build_network(3, &[(0, 0, 0.1), (0, 1, 0.2), (1, 2, 0.2)], &all, &all, l),
            Err(Error::SelfLoop(0))
        ));
    }

    #[test]
    fn path_twenty_satisfies_spectral_condition() {
        let net = path_graph(20, 0.2).unwrap();
        for i in 0..20 {
            assert!(net.adjacency().row(i).sum() <= 0.4 + 1e-15);
        }
        let expected = 0.4 * (1.0 - (19.0 * std::f64::consts::PI / 20.0).cos());
        assert!((net.laplacian_spectral_radius() - expected).abs() < 1e-12);
        assert!(expected < 1.0);
    }

    #[test]
    fn apply_mod_direct() {
        let zero = build_network(2, &[], &[0], &[1], NetworkKind::DirectStable).unwrap();
        let m = zero.apply_mod(&EdgeMod::new(0, 1, 0.5)).unwrap();
        assert_eq!(m.state_matrix()[(1, 0)], 0.5);

        let removed = chain().apply_mod(&EdgeMod::new(0, 1, -0.5)).unwrap();
        assert_eq!(removed.state_matrix()[(1, 0)], 0.0);

        assert!(matches!(
            chain().apply_mod(&EdgeMod::new(0, 1, -0.6)),
            Err(Error::NegativeResultingWeight { .. })
        ));
        assert!(matches!(
            chain().apply_mod(&EdgeMod::new(1, 1, 0.1)),
            Err(Error::SelfLoop(1))
        ));
    }

    #[test]
    fn apply_mod_laplacian_closes_triangle() {
        let path = path_graph(3, 0.2).unwrap();
        let tri = path.apply_mod(&EdgeMod::new(0, 2, 0.2)).unwrap();
        let a = tri.state_matrix();
        for i in 0..3 {
            let row: f64 = a.row(i).sum();
            let col: f64 = a.column(i).sum();
            assert!((row - 1.0).abs() < 1e-15 && (col - 1.0).abs() < 1e-15);
            for j in 0..3 {
                if i != j {
                    assert_eq!(a[(i, j)], 0.2);
                }
            }
        }
        assert!(path.apply_mod(&EdgeMod::new(0, 2, -0.1)).is_err());
        assert!(matches!(
            path.apply_mod(&EdgeMod::new(0, 2, 0.8)),
            Err(Error::SpectralConditionViolated { .. })
        ));
    }

    #[test]
    fn small_laplacian_spectra() {
        let two = path_graph(2, 0.2).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(two.laplacian()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 0.4).abs() < 1e-15);

        let three = path_graph(3, 0.2).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(three.laplacian()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 0.2, 0.6]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn path_diameter() {
        assert_eq!(path_graph(20, 0.2).unwrap().hop_diameter(), Some(19));
    }
}

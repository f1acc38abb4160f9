use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_network, Network, NetworkKind};
use crate::error::{Error, Result};
use crate::linalg;

const MAX_DRAWS: usize = 16;
const RESCALE_TOL: f64 = 1e-12;

/// Erdős–Rényi generator for positive stable networks.
///
/// Every ordered pair `(i, j)`, `i != j`, carries an edge with probability
/// `p` (unordered pairs when `directed` is false), weights are uniform on
/// `(0, 1]`, and the matrix is then rescaled to spectral radius `target_rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErdosRenyi {
    pub n: usize,
    pub p: f64,
    pub target_rho: f64,
    pub seed: u64,
    pub directed: bool,
    /// Number of randomly chosen input nodes; all nodes when `None`.
    pub inputs: Option<usize>,
    /// Number of randomly chosen output nodes; all nodes when `None`.
    pub outputs: Option<usize>,
}

impl ErdosRenyi {
    pub fn new(n: usize, p: f64, target_rho: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            target_rho,
            seed,
            directed: true,
            inputs: None,
            outputs: None,
        }
    }
}

/// The 500-node, p = 0.02, rho = 0.9 network with 50 inputs and 100 outputs.
pub fn benchmark_preset(seed: u64) -> ErdosRenyi {
    ErdosRenyi {
        inputs: Some(50),
        outputs: Some(100),
        ..ErdosRenyi::new(500, 0.02, 0.9, seed)
    }
}

pub fn erdos_renyi(cfg: &ErdosRenyi) -> Result<Network> {
    if cfg.n < 2 {
        return Err(Error::InvalidParameter("Erdős–Rényi needs n >= 2".into()));
    }
    if !(cfg.p > 0.0 && cfg.p < 1.0) {
        return Err(Error::InvalidParameter(format!("edge probability {} not in (0,1)", cfg.p)));
    }
    if !(cfg.target_rho > 0.0 && cfg.target_rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target spectral radius {} not in (0,1)",
            cfg.target_rho
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;

    let mut drawn = None;
    for _ in 0..MAX_DRAWS {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j || (!cfg.directed && j < i) {
                    continue;
                }
                if rng.random_bool(cfg.p) {
                    let w = 1.0 - rng.random::<f64>();
                    a[(j, i)] = w;
                    if !cfg.directed {
                        a[(i, j)] = w;
                    }
                }
            }
        }
        let rho = linalg::spectral_radius(&a);
        if rho > 0.0 {
            drawn = Some((a, rho));
            break;
        }
    }
    let (mut a, mut rho) = drawn.ok_or(Error::ZeroSpectralRadius { attempts: MAX_DRAWS })?;

    // Scaling is exact up to rounding, so one correction pass is plenty.
    for _ in 0..3 {
        a *= cfg.target_rho / rho;
        rho = linalg::spectral_radius(&a);
        if (rho - cfg.target_rho).abs() <= RESCALE_TOL * cfg.target_rho {
            break;
        }
    }
    if (rho - cfg.target_rho).abs() > RESCALE_TOL * cfg.target_rho {
        return Err(Error::InvariantViolated(format!(
            "rescaled spectral radius {rho} misses target {}",
            cfg.target_rho
        )));
    }

    let pick = |rng: &mut ChaCha8Rng, count: Option<usize>| -> Result<Vec<usize>> {
        match count {
            None => Ok((0..n).collect()),
            Some(k) if k == 0 || k > n => Err(Error::InvalidParameter(format!(
                "cannot pick {k} terminal nodes out of {n}"
            ))),
            Some(k) => {
                let mut v = index::sample(rng, n, k).into_vec();
                v.sort_unstable();
                Ok(v)
            }
        }
    };
    let inputs = pick(&mut rng, cfg.inputs)?;
    let outputs = pick(&mut rng, cfg.outputs)?;
    Network::from_adjacency(a, inputs, outputs, NetworkKind::DirectStable)
}

fn all_nodes(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Undirected path `0 - 1 - ... - (n-1)` with uniform weight `w`.
pub fn path_graph(n: usize, w: f64) -> Result<Network> {
    if n < 2 {
        return Err(Error::InvalidParameter("path needs n >= 2".into()));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, w)).collect();
    build_network(n, &edges, &all_nodes(n), &all_nodes(n), NetworkKind::Laplacian)
}

/// Complete undirected graph with uniform weight `w` (needs `n w < 1`).
pub fn complete_graph(n: usize, w: f64) -> Result<Network> {
    if n < 2 {
        return Err(Error::InvalidParameter("complete graph needs n >= 2".into()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, w));
        }
    }
    build_network(n, &edges, &all_nodes(n), &all_nodes(n), NetworkKind::Laplacian)
}

/// `rows x cols` undirected grid with uniform weight `w`, row-major labels.
pub fn grid_graph(rows: usize, cols: usize, w: f64) -> Result<Network> {
    let n = rows * cols;
    if n < 2 {
        return Err(Error::InvalidParameter("grid needs at least two nodes".into()));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1, w));
            }
            if r + 1 < rows {
                edges.push((v, v + cols, w));
            }
        }
    }
    build_network(n, &edges, &all_nodes(n), &all_nodes(n), NetworkKind::Laplacian)
}

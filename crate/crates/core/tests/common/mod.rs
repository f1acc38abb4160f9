#![allow(dead_code)]

use edgeimpact_core::graph_model::{erdos_renyi, ErdosRenyi};
use edgeimpact_core::{build_network, Network, NetworkKind, SteadyStateKernel};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n);
    let mut v = index::sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Random positive network with spectral radius `rho`; terminal sets are
/// random unless `all_nodes`.
pub fn random_direct(rng: &mut ChaCha8Rng, n: usize, p: f64, rho: f64, all_nodes: bool) -> Network {
    let net = erdos_renyi(&ErdosRenyi::new(n, p, rho, rng.random())).unwrap();
    if all_nodes {
        return net;
    }
    let inputs = subset(rng, n);
    let outputs = subset(rng, n);
    net.with_terminals(inputs, outputs).unwrap()
}

/// Random connected undirected graph: a random spanning tree plus extra
/// edges with probability `p`, scaled so every weighted degree stays below
/// 0.45 (hence `rho(L) < 0.9`).
pub fn random_laplacian(rng: &mut ChaCha8Rng, n: usize, p: f64, all_nodes: bool) -> Network {
    let mut adj = vec![vec![0.0; n]; n];
    for v in 1..n {
        let u = rng.random_range(0..v);
        let w = rng.random_range(0.2..1.0);
        adj[u][v] = w;
        adj[v][u] = w;
    }
    for u in 0..n {
        for v in u + 1..n {
            if adj[u][v] == 0.0 && rng.random_bool(p) {
                let w = rng.random_range(0.2..1.0);
                adj[u][v] = w;
                adj[v][u] = w;
            }
        }
    }
    let max_deg = adj.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let scale = 0.45 / max_deg;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if adj[u][v] > 0.0 {
                edges.push((u, v, adj[u][v] * scale));
            }
        }
    }
    let (inputs, outputs) = if all_nodes {
        ((0..n).collect(), (0..n).collect())
    } else {
        (subset(rng, n), subset(rng, n))
    };
    build_network(n, &edges, &inputs, &outputs, NetworkKind::Laplacian).unwrap()
}

/// Random pair `s != t` with a finite stability margin.
pub fn finite_margin_edge(rng: &mut ChaCha8Rng, k: &SteadyStateKernel) -> Option<(usize, usize, f64)> {
    let n = k.n();
    for _ in 0..10 * n * n {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s == t {
            continue;
        }
        let margin = k.stability_margin(s, t).unwrap();
        if margin.is_finite() {
            return Some((s, t, margin));
        }
    }
    None
}

/// Random absent undirected pair.
pub fn non_edge(rng: &mut ChaCha8Rng, net: &Network) -> Option<(usize, usize)> {
    let n = net.n();
    for _ in 0..10 * n * n {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s != t && net.weight(s, t) == 0.0 {
            return Some((s.min(t), s.max(t)));
        }
    }
    None
}

/// The two-node chain `0 -> 1` with weight 0.5, input 0, output 1.
pub fn chain() -> Network {
    build_network(2, &[(0, 1, 0.5)], &[0], &[1], NetworkKind::DirectStable).unwrap()
}

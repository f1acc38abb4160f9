use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_network_with, Network, NetworkKind, SpectralCondition};
use crate::error::{Error, Result};

/// On-disk JSON form of a network. `(i, j, w)` is the edge `i -> j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub kind: NetworkKind,
    pub edges: Vec<(usize, usize, f64)>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    /// Limit on `rho(L)` for Laplacian networks; omitted when strict.
    #[serde(default, skip_serializing_if = "is_strict")]
    pub condition: SpectralCondition,
}

fn is_strict(c: &SpectralCondition) -> bool {
    *c == SpectralCondition::Strict
}

/// Metadata accompanying a plain `i j w` edge-list file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default)]
    pub n: Option<usize>,
    pub kind: NetworkKind,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    #[serde(default)]
    pub condition: SpectralCondition,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            n: net.n(),
            kind: net.kind(),
            edges: net.edges(),
            inputs: net.inputs().to_vec(),
            outputs: net.outputs().to_vec(),
            condition: net.condition(),
        }
    }
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        build_network_with(
            self.n,
            &self.edges,
            &self.inputs,
            &self.outputs,
            self.kind,
            self.condition,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }
}

pub fn read_network(path: impl AsRef<Path>) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    NetworkFile::from_json(&text)?.into_network()
}

pub fn write_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, NetworkFile::from(net).to_json())?;
    Ok(())
}

/// Read a whitespace-separated `i j w` edge list plus its JSON sidecar.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_edge_list(edges: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Network> {
    let meta: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)
        .map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    let list = parse_edge_list(&fs::read_to_string(edges)?)?;
    let n = match meta.n {
        Some(n) => n,
        None => list
            .iter()
            .map(|&(i, j, _)| i.max(j) + 1)
            .chain(meta.inputs.iter().chain(&meta.outputs).map(|&v| v + 1))
            .max()
            .unwrap_or(0),
    };
    build_network_with(n, &list, &meta.inputs, &meta.outputs, meta.kind, meta.condition)
}

fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected `i j w`, got {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let i = fields[0].parse().map_err(|_| bad("source"))?;
        let j = fields[1].parse().map_err(|_| bad("target"))?;
        let w = fields[2].parse().map_err(|_| bad("weight"))?;
        out.push((i, j, w));
    }
    Ok(out)
}

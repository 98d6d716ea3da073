//! Weighted degree and eigenvector centrality.
//!
//! Eigenvector centrality runs power iteration on `A + sI`, where `s` is the
//! largest absolute row sum of the weighted adjacency matrix `A`. The shift
//! leaves eigenvectors unchanged and makes the largest eigenvalue of `A`
//! strictly dominant in magnitude, so bipartite graphs (whose spectrum is
//! symmetric about zero) and signed weights still converge. Because `s`
//! scales with the weights, scaling all weights leaves the iterates unchanged.

use serde::{Deserialize, Serialize};

use super::TechNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Degree,
    Eigenvector,
}

impl CentralityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CentralityKind::Degree => "degree",
            CentralityKind::Eigenvector => "eigenvector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Max-norm change between successive iterates that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

/// Sum of incident edge weights per vertex.
pub fn degree_centrality(net: &TechNetwork) -> Vec<f64> {
    let mut deg = vec![0.0; net.vertex_count()];
    for e in net.edges() {
        deg[e.source] += e.weight;
        deg[e.target] += e.weight;
    }
    deg
}

/// Dominant eigenvector of the weighted adjacency matrix, unit Euclidean norm.
///
/// Starts from the uniform vector, which fixes the result on disconnected
/// graphs whose components share the top eigenvalue. Entries are
/// nonnegative whenever all weights are.
pub fn eigenvector_centrality(net: &TechNetwork, opts: EigenOptions) -> Result<Vec<f64>> {
    let n = net.vertex_count();
    if !net.edges().iter().any(|e| e.weight > 0.0) {
        return Err(Error::NoPositiveWeight);
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut abs_row = vec![0.0f64; n];
    for e in net.edges() {
        adj[e.source].push((e.target, e.weight));
        adj[e.target].push((e.source, e.weight));
        abs_row[e.source] += e.weight.abs();
        abs_row[e.target] += e.weight.abs();
    }
    let shift = abs_row.iter().copied().fold(0.0, f64::max);

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        for (v, out) in y.iter_mut().enumerate() {
            *out = shift * x[v] + adj[v].iter().map(|&(u, w)| w * x[u]).sum::<f64>();
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        residual = 0.0;
        for (xv, yv) in x.iter_mut().zip(&y) {
            let next = yv / norm;
            residual = f64::max(residual, (next - *xv).abs());
            *xv = next;
        }
        if residual < opts.tolerance {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

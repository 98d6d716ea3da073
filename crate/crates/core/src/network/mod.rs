//! Weighted technology networks built from proximity matrices.

mod centrality;
mod export;
mod louvain;
mod overlay;
mod spanning;

pub use centrality::{degree_centrality, eigenvector_centrality, CentralityKind, EigenOptions};
pub use export::GraphExport;
pub use louvain::{detect_communities, louvain, modularity, Partition};
pub use overlay::{overlay, OverlaySet};
pub use spanning::{filter_backbone, maximum_spanning_tree, Backbone};

use crate::aggregate::ClassStats;
use crate::corpus::ClassUniverse;
use crate::error::{Error, Result};
use crate::measures::ProximityMatrix;

/// Undirected weighted edge with `source < target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        let (source, target) = if a <= b { (a, b) } else { (b, a) };
        Edge {
            source,
            target,
            weight,
        }
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.source, self.target)
    }
}

/// Vertices are the classes of a universe; edges are sorted by vertex pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TechNetwork {
    universe: ClassUniverse,
    vertex_size: Vec<u64>,
    edges: Vec<Edge>,
}

impl TechNetwork {
    /// Validates and sorts edges. Self-loops, duplicate pairs and
    /// non-finite weights are rejected.
    pub fn from_edges(universe: ClassUniverse, vertex_size: Vec<u64>, mut edges: Vec<Edge>) -> Result<Self> {
        let n = universe.len();
        if vertex_size.len() != n {
            return Err(Error::UniverseMismatch(format!(
                "{} vertex sizes for {n} classes",
                vertex_size.len()
            )));
        }
        edges.sort_by_key(Edge::pair);
        for e in &edges {
            if e.source == e.target || e.target >= n || !e.weight.is_finite() {
                return Err(Error::Schema(format!("invalid edge {e:?}")));
            }
        }
        if edges.windows(2).any(|w| w[0].pair() == w[1].pair()) {
            return Err(Error::Schema("duplicate edge".into()));
        }
        Ok(TechNetwork {
            universe,
            vertex_size,
            edges,
        })
    }

    pub fn universe(&self) -> &ClassUniverse {
        &self.universe
    }

    pub fn vertex_count(&self) -> usize {
        self.universe.len()
    }

    pub fn vertex_size(&self) -> &[u64] {
        &self.vertex_size
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// A copy of this network restricted to the given edges.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<TechNetwork> {
        TechNetwork::from_edges(self.universe.clone(), self.vertex_size.clone(), edges)
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self.vertex_count(), &self.edges)
    }
}

/// One edge per class pair with a nonzero weight. Negative weights are kept.
pub fn build_network(pm: &ProximityMatrix, stats: &ClassStats) -> Result<TechNetwork> {
    let n = pm.len();
    if stats.patent_count.len() != n {
        return Err(Error::UniverseMismatch(format!(
            "class stats cover {} classes, matrix {n}",
            stats.patent_count.len()
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = pm.values[[i, j]];
            if w != 0.0 {
                edges.push(Edge::new(i, j, w));
            }
        }
    }
    TechNetwork::from_edges(pm.universe.clone(), stats.patent_count.clone(), edges)
}

/// Union-find with path halving and union by size.
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

pub(crate) fn component_count(n: usize, edges: &[Edge]) -> usize {
    let mut ds = DisjointSets::new(n);
    let merges = edges.iter().filter(|e| ds.union(e.source, e.target)).count();
    n - merges
}

pub(crate) fn is_connected(n: usize, edges: &[Edge]) -> bool {
    n <= 1 || component_count(n, edges) == 1
}

//! Louvain community detection on weighted undirected graphs.
//!
//! Each level repeatedly moves single vertices to the neighbouring community
//! with the largest modularity gain, then collapses communities into vertices.
//! Vertex visiting order is a seeded shuffle. A vertex only moves on a strict
//! gain; among equally good targets the smallest community id wins.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Backbone, Edge};

const GAIN_EPS: f64 = 1e-12;
const MAX_SWEEPS: usize = 1_000;

/// Community assignment with contiguous ids starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub membership: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.membership.iter().max().map_or(0, |m| m + 1)
    }
}

/// Weighted Newman modularity `Σ_c (e_c − a_c²)`. Zero when the total weight is not positive.
pub fn modularity(vertex_count: usize, edges: &[Edge], membership: &[usize]) -> f64 {
    assert_eq!(membership.len(), vertex_count, "partition must cover all vertices");
    let two_m: f64 = 2.0 * edges.iter().map(|e| e.weight).sum::<f64>();
    if two_m <= 0.0 {
        return 0.0;
    }
    let k = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for e in edges {
        let (cs, ct) = (membership[e.source], membership[e.target]);
        tot[cs] += e.weight;
        tot[ct] += e.weight;
        if cs == ct {
            inside[cs] += 2.0 * e.weight;
        }
    }
    inside
        .iter()
        .zip(&tot)
        .map(|(i, t)| i / two_m - (t / two_m) * (t / two_m))
        .sum()
}

/// One level of the (possibly collapsed) graph.
struct Level {
    /// Neighbours excluding self.
    adj: Vec<Vec<(usize, f64)>>,
    /// Weight of `A_vv`, counting an internal edge from both ends.
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Level {
    fn from_edges(n: usize, edges: &[Edge]) -> Level {
        let mut adj = vec![Vec::new(); n];
        for e in edges {
            adj[e.source].push((e.target, e.weight));
            adj[e.target].push((e.source, e.weight));
        }
        Level::new(adj, vec![0.0; n])
    }

    fn new(adj: Vec<Vec<(usize, f64)>>, self_loop: Vec<f64>) -> Level {
        let degree: Vec<f64> = adj
            .iter()
            .zip(&self_loop)
            .map(|(nbrs, s)| s + nbrs.iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        let two_m = degree.iter().sum();
        Level {
            adj,
            self_loop,
            degree,
            two_m,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns the community of each vertex and whether anything moved.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        for _ in 0..MAX_SWEEPS {
            let mut moved = false;
            for &v in &order {
                let old = comm[v];
                let kv = self.degree[v];
                for &(u, w) in &self.adj[v] {
                    let c = comm[u];
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    link[c] += w;
                }
                tot[old] -= kv;
                let gain = |c: usize| link[c] - kv * tot[c] / self.two_m;

                let stay = gain(old);
                let mut best = old;
                let mut best_gain = stay + GAIN_EPS;
                // ascending ids, so the first of several equal gains wins
                touched.sort_unstable();
                for &c in touched.iter().filter(|&&c| c != old) {
                    let g = gain(c);
                    if g > best_gain {
                        best = c;
                        best_gain = g + GAIN_EPS;
                    }
                }
                tot[best] += kv;
                if best != old {
                    comm[v] = best;
                    moved = true;
                }
                for &c in &touched {
                    link[c] = 0.0;
                    seen[c] = false;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (renumber(&comm), any_move)
    }

    fn collapse(&self, comm: &[usize]) -> Level {
        let k = comm.iter().copied().max().map_or(0, |m| m + 1);
        let mut self_loop = vec![0.0; k];
        let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for v in 0..self.len() {
            let cv = comm[v];
            self_loop[cv] += self.self_loop[v];
            for &(u, w) in &self.adj[v] {
                let cu = comm[u];
                if cu == cv {
                    self_loop[cv] += w;
                } else {
                    *dense[cv].entry(cu).or_default() += w;
                }
            }
        }
        let adj = dense.into_iter().map(|m| m.into_iter().collect()).collect();
        Level::new(adj, self_loop)
    }
}

/// Relabels ids contiguously in order of first appearance.
fn renumber(comm: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    comm.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Louvain partition of a graph given by `vertex_count` and `edges`.
pub fn louvain(vertex_count: usize, edges: &[Edge], seed: u64) -> Partition {
    let singletons: Vec<usize> = (0..vertex_count).collect();
    let mut membership = singletons.clone();
    let mut best_q = modularity(vertex_count, edges, &membership);
    let mut level = Level::from_edges(vertex_count, edges);
    if vertex_count == 0 || level.two_m <= 0.0 {
        return Partition {
            membership,
            modularity: best_q,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (comm, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        let candidate: Vec<usize> = membership.iter().map(|&c| comm[c]).collect();
        let q = modularity(vertex_count, edges, &candidate);
        if q < best_q + GAIN_EPS {
            break;
        }
        membership = candidate;
        best_q = q;
        level = level.collapse(&comm);
        if level.len() == 1 {
            break;
        }
    }
    Partition {
        membership: renumber(&membership),
        modularity: best_q,
    }
}

/// Louvain communities on a backbone's kept edges.
pub fn detect_communities(bb: &Backbone, seed: u64) -> Partition {
    louvain(bb.vertex_count(), bb.kept_edges(), seed)
}

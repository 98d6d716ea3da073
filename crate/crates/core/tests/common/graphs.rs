//! Random graphs and exhaustive or dense reference solutions.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use techmap::corpus::ClassUniverse;
use techmap::network::{Edge, TechNetwork};

pub fn universe(n: usize) -> ClassUniverse {
    ClassUniverse::from_codes((0..n).map(|i| format!("V{i:02}"))).unwrap()
}

pub fn network(n: usize, edges: Vec<Edge>) -> TechNetwork {
    TechNetwork::from_edges(universe(n), vec![1; n], edges).unwrap()
}

/// Each pair present with probability `density`; weights from a small grid
/// (so ties occur) or continuous, possibly negative.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, density: f64, allow_negative: bool) -> TechNetwork {
    let grid = rng.random_bool(0.5);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let mut w = if grid {
                    rng.random_range(1..=4) as f64 / 4.0
                } else {
                    rng.random_range(0.01..1.0)
                };
                if allow_negative && rng.random_bool(0.3) {
                    w = -w;
                }
                edges.push(Edge::new(i, j, w));
            }
        }
    }
    network(n, edges)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        r
    }
    let mut count = n;
    for e in edges {
        let (a, b) = (find(&mut parent, e.source), find(&mut parent, e.target));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

fn is_forest(n: usize, edges: &[&Edge]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        r
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.source), find(&mut parent, e.target));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Best total weight over all spanning forests, by enumeration.
pub fn best_spanning_weight(net: &TechNetwork) -> f64 {
    let n = net.vertex_count();
    let size = n - components(n, net.edges());
    net.edges()
        .iter()
        .combinations(size)
        .filter(|c| is_forest(n, c))
        .map(|c| c.iter().map(|e| e.weight).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_connected(n: usize, edges: &[Edge]) -> bool {
    n == 0 || components(n, edges) == 1
}

/// Unit eigenvector of the largest eigenvalue, with nonnegative sum, and
/// the gap to the second largest eigenvalue.
pub fn dominant_eigenvector(net: &TechNetwork) -> (Vec<f64>, f64) {
    let n = net.vertex_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for e in net.edges() {
        a[(e.source, e.target)] = e.weight;
        a[(e.target, e.source)] = e.weight;
    }
    let eig = SymmetricEigen::new(a);
    let order: Vec<usize> = (0..n)
        .sorted_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]))
        .collect();
    let top = order[0];
    let gap = if n > 1 {
        eig.eigenvalues[top] - eig.eigenvalues[order[1]]
    } else {
        f64::INFINITY
    };
    let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for x in &mut v {
        *x *= sign / norm;
    }
    (v, gap)
}

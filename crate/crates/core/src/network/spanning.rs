use std::cmp::Ordering;

use super::{DisjointSets, Edge, TechNetwork};

/// Strongest first; equal weights fall back to ascending vertex pair.
fn strongest_first(a: &Edge, b: &Edge) -> Ordering {
    b.weight.total_cmp(&a.weight).then_with(|| a.pair().cmp(&b.pair()))
}

/// Maximum-weight spanning forest (Kruskal), one tree per connected component.
/// Returned edges are sorted by vertex pair.
pub fn maximum_spanning_tree(net: &TechNetwork) -> Vec<Edge> {
    let mut order: Vec<Edge> = net.edges().to_vec();
    order.sort_by(strongest_first);
    let mut ds = DisjointSets::new(net.vertex_count());
    let mut tree: Vec<Edge> = order.into_iter().filter(|e| ds.union(e.source, e.target)).collect();
    tree.sort_by_key(Edge::pair);
    tree
}

/// Maximum spanning forest plus the strongest remaining edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    vertex_count: usize,
    multiplier: usize,
    kept_edges: Vec<Edge>,
}

impl Backbone {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn multiplier(&self) -> usize {
        self.multiplier
    }

    /// Kept edges sorted by vertex pair.
    pub fn kept_edges(&self) -> &[Edge] {
        &self.kept_edges
    }

    pub fn is_connected(&self) -> bool {
        super::is_connected(self.vertex_count, &self.kept_edges)
    }
}

/// Keeps `min(multiplier * N, |E|)` edges: the maximum spanning forest, then
/// the heaviest of the rest. A multiplier of 0 is treated as 1.
pub fn filter_backbone(net: &TechNetwork, multiplier: usize) -> Backbone {
    let multiplier = multiplier.max(1);
    let target = multiplier.saturating_mul(net.vertex_count()).min(net.edges().len());

    let mut order: Vec<Edge> = net.edges().to_vec();
    order.sort_by(strongest_first);
    let mut ds = DisjointSets::new(net.vertex_count());
    let mut in_tree = vec![false; order.len()];
    let mut kept = Vec::with_capacity(target);
    for (k, e) in order.iter().enumerate() {
        if ds.union(e.source, e.target) {
            in_tree[k] = true;
            kept.push(*e);
        }
    }
    for (k, e) in order.iter().enumerate() {
        if kept.len() >= target {
            break;
        }
        if !in_tree[k] {
            kept.push(*e);
        }
    }
    kept.sort_by_key(Edge::pair);
    Backbone {
        vertex_count: net.vertex_count(),
        multiplier,
        kept_edges: kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClassUniverse;

    fn net(n: usize, edges: &[(usize, usize, f64)]) -> TechNetwork {
        let u = ClassUniverse::from_codes((0..n).map(|i| format!("v{i:02}"))).unwrap();
        TechNetwork::from_edges(
            u,
            vec![1; n],
            edges.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect(),
        )
        .unwrap()
    }

    fn total(edges: &[Edge]) -> f64 {
        edges.iter().map(|e| e.weight).sum()
    }

    #[test]
    fn triangle_keeps_two_heaviest() {
        let (a, b, c) = (0, 1, 2);
        let t = maximum_spanning_tree(&net(3, &[(a, b, 3.0), (b, c, 2.0), (a, c, 1.0)]));
        assert_eq!(t.iter().map(Edge::pair).collect::<Vec<_>>(), vec![(a, b), (b, c)]);
        assert_eq!(total(&t), 5.0);
    }

    #[test]
    fn tree_input_is_kept_whole() {
        let g = net(4, &[(0, 1, 0.2), (1, 2, 0.1), (1, 3, 0.7)]);
        assert_eq!(maximum_spanning_tree(&g), g.edges());
    }

    #[test]
    fn forest_on_disconnected_input() {
        let g = net(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert_eq!(maximum_spanning_tree(&g).len(), 2);
    }

    #[test]
    fn ties_break_by_pair() {
        let g = net(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        let t = maximum_spanning_tree(&g);
        assert_eq!(t.iter().map(Edge::pair).collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn negative_weights_participate() {
        let g = net(3, &[(0, 1, -1.0), (1, 2, -3.0), (0, 2, -2.0)]);
        let t = maximum_spanning_tree(&g);
        assert_eq!(total(&t), -3.0);
    }

    #[test]
    fn backbone_sizes() {
        let mut edges = Vec::new();
        let n = 121;
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, ((i * 31 + j * 17) % 97) as f64 / 97.0 + 0.001));
            }
        }
        let g = net(n, &edges);
        let bb = filter_backbone(&g, 2);
        assert_eq!(bb.kept_edges().len(), 242);
        assert!(bb.is_connected());

        let all = filter_backbone(&g, 1_000_000);
        assert_eq!(all.kept_edges().len(), g.edges().len());
    }

    #[test]
    fn backbone_of_tree_is_tree() {
        let g = net(4, &[(0, 1, 0.2), (1, 2, 0.1), (1, 3, 0.7)]);
        let bb = filter_backbone(&g, 1);
        assert_eq!(bb.kept_edges(), g.edges());
    }

    #[test]
    fn backbone_contains_forest() {
        let g = net(5, &[(0, 1, 0.9), (0, 2, 0.8), (1, 2, 0.85), (3, 4, 0.01), (2, 3, 0.02), (0, 3, 0.5)]);
        let bb = filter_backbone(&g, 1);
        for e in maximum_spanning_tree(&g) {
            assert!(bb.kept_edges().contains(&e));
        }
        assert_eq!(bb.kept_edges().len(), 5);
    }
}

//! Digraph utilities: strongly connected components and topological order.

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::linalg::SparseMat;

fn build(adj: &[Vec<usize>]) -> DiGraph<(), ()> {
    let mut g = DiGraph::with_capacity(adj.len(), adj.iter().map(Vec::len).sum());
    let nodes: Vec<NodeIndex> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (i, out) in adj.iter().enumerate() {
        for &j in out {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    g
}

/// Strongly connected components, each sorted, ordered by smallest member.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let g = build(adj);
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(NodeIndex::index).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

pub fn is_strongly_connected(adj: &[Vec<usize>]) -> bool {
    adj.len() <= 1 || strongly_connected_components(adj).len() == 1
}

/// A topological order (sources first), or `None` when the graph has a cycle.
/// Ties are broken by smallest index so the result is deterministic.
pub fn topological_order(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut indeg = vec![0usize; n];
    for out in adj {
        for &j in out {
            indeg[j] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    // cross-check acyclicity with petgraph
    debug_assert_eq!(order.len() == n, toposort(&build(adj), None).is_ok());
    (order.len() == n).then_some(order)
}

/// Components of the off-diagonal pattern of a square matrix.
pub fn matrix_components(a: &SparseMat) -> Vec<Vec<usize>> {
    strongly_connected_components(&a.offdiag_adjacency())
}

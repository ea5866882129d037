mod common;

use citedtcr::graph::{CitationGraph, NodeId};
use citedtcr::pagerank::{pagerank, ppr, SolverConfig};
use common::{base_teleport, dense_stationary, ids, uniform_teleport};
use proptest::prelude::*;

fn random_dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=12).prop_flat_map(|k| {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (0..a).map(move |b| (a, b))).collect();
        let m = pairs.len();
        (Just(k), proptest::collection::vec(any::<bool>(), m).prop_map(move |keep| {
            pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
        }))
    })
}

fn build(k: usize, edges: &[(usize, usize)]) -> (Vec<NodeId>, Vec<(NodeId, NodeId)>, CitationGraph) {
    // scramble ids so position and id order differ
    let nodes: Vec<NodeId> = (0..k).map(|i| NodeId((i as u64 * 7 + 3) % 97)).collect();
    let e: Vec<(NodeId, NodeId)> = edges.iter().map(|&(a, b)| (nodes[a], nodes[b])).collect();
    let g = CitationGraph::build(nodes.clone(), &e).unwrap();
    (nodes, e, g)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pagerank_matches_dense((k, edges) in random_dag(), alpha in 0.05f64..0.95) {
        let (nodes, e, g) = build(k, &edges);
        let cfg = SolverConfig { alpha, ..Default::default() };
        let sv = pagerank(&g, &cfg).unwrap();
        let oracle = dense_stationary(&nodes, &e, alpha, &uniform_teleport(k));
        let ours: Vec<f64> = nodes.iter().map(|&v| sv.get(v).unwrap()).collect();
        prop_assert!(l1(&ours, &oracle) < 1e-8, "l1 = {}", l1(&ours, &oracle));
    }

    #[test]
    fn ppr_matches_dense((k, edges) in random_dag(), alpha in 0.05f64..0.95, mask in any::<u16>()) {
        let (nodes, e, g) = build(k, &edges);
        let mut base: Vec<NodeId> = nodes.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect();
        if base.is_empty() {
            base.push(nodes[0]);
        }
        let cfg = SolverConfig { alpha, ..Default::default() };
        let sv = ppr(&g, &base, &cfg).unwrap();
        let oracle = dense_stationary(&nodes, &e, alpha, &base_teleport(&nodes, &base));
        let ours: Vec<f64> = nodes.iter().map(|&v| sv.get(v).unwrap()).collect();
        prop_assert!(l1(&ours, &oracle) < 1e-8, "l1 = {}", l1(&ours, &oracle));
    }

    #[test]
    fn scores_form_a_distribution((k, edges) in random_dag(), mask in any::<u16>()) {
        let (nodes, _, g) = build(k, &edges);
        let base: Vec<NodeId> = vec![nodes[(mask as usize) % k]];
        let sv = ppr(&g, &base, &SolverConfig::default()).unwrap();
        prop_assert!((sv.scores().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(sv.scores().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn relabelling_permutes_scores((k, edges) in random_dag(), shift in 1u64..50) {
        let (nodes, e, g) = build(k, &edges);
        let relabel = |v: NodeId| NodeId(v.0 + 1000 * shift);
        let nodes2: Vec<NodeId> = nodes.iter().rev().map(|&v| relabel(v)).collect();
        let e2: Vec<(NodeId, NodeId)> = e.iter().map(|&(a, b)| (relabel(a), relabel(b))).collect();
        let g2 = CitationGraph::build(nodes2, &e2).unwrap();
        let a = pagerank(&g, &SolverConfig::default()).unwrap();
        let b = pagerank(&g2, &SolverConfig::default()).unwrap();
        for &v in &nodes {
            prop_assert!((a.get(v).unwrap() - b.get(relabel(v)).unwrap()).abs() < 1e-9);
        }
    }
}

/// A..H as 1..8; A and B are the proposal's references.
fn eight_node() -> (Vec<NodeId>, Vec<(NodeId, NodeId)>) {
    let nodes = ids(&[1, 2, 3, 4, 5, 6, 7, 8]);
    let edges = [(3, 1), (3, 2), (4, 2), (5, 3), (6, 5), (7, 6), (8, 7), (8, 4)]
        .iter()
        .map(|&(a, b)| (NodeId(a), NodeId(b)))
        .collect();
    (nodes, edges)
}

#[test]
fn eight_node_graph_against_dense() {
    let (nodes, edges) = eight_node();
    let g = CitationGraph::build(nodes.clone(), &edges).unwrap();
    let base = ids(&[1, 2]);
    let sv = ppr(&g, &base, &SolverConfig::default()).unwrap();
    let oracle = dense_stationary(&nodes, &edges, 0.15, &base_teleport(&nodes, &base));
    let ours: Vec<f64> = nodes.iter().map(|&v| sv.get(v).unwrap()).collect();
    assert!(l1(&ours, &oracle) < 1e-8);
    // D neighbours B; F and G sit far away with the same degree
    let d = sv.get(NodeId(4)).unwrap();
    assert!(d > sv.get(NodeId(6)).unwrap());
    assert!(d > sv.get(NodeId(7)).unwrap());
}

mod common;

use std::collections::{HashMap, HashSet};

use citedtcr::dataset::{build_replay, extract_component, parse_snap_str, EdgeList, NodeOrder, ReplayPlan};
use citedtcr::graph::{CitationGraph, NodeId, Proposal};
use citedtcr::synthetic::{generate, replay_plan, SynthConfig, FIXTURE_HEADER, INITIAL_NODES};
use common::{data_path, fixture_plan, has_cycle, UnionFind};
use proptest::prelude::*;

fn digraph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=9).prop_flat_map(|k| {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let m = pairs.len();
        (
            Just(k),
            proptest::collection::vec(prop::bool::weighted(0.2), m)
                .prop_map(move |keep| pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()),
        )
    })
}

fn to_graph(k: usize, edges: &[(usize, usize)]) -> CitationGraph {
    let nodes: Vec<NodeId> = (0..k as u64).map(NodeId).collect();
    let e: Vec<(NodeId, NodeId)> = edges.iter().map(|&(a, b)| (NodeId(a as u64), NodeId(b as u64))).collect();
    CitationGraph::from_parts(nodes, &e)
}

proptest! {
    #[test]
    fn dag_check_agrees_with_sink_peeling((k, edges) in digraph()) {
        let g = to_graph(k, &edges);
        prop_assert_eq!(g.validate_dag().is_err(), has_cycle(k, &edges));
    }

    #[test]
    fn proposals_keep_the_dag((k, edges) in digraph(), refs in proptest::collection::btree_set(0u64..9, 1..4)) {
        let forward: Vec<(usize, usize)> = edges.into_iter().filter(|(a, b)| a > b).collect();
        let g = to_graph(k, &forward);
        prop_assume!(g.validate_dag().is_ok());
        let refs: Vec<NodeId> = refs.into_iter().filter(|&r| r < k as u64).map(NodeId).collect();
        prop_assume!(!refs.is_empty());
        let p = Proposal::new(NodeId(100), refs.clone());
        let g2 = g.apply_proposal(&p).unwrap();
        prop_assert!(g2.validate_dag().is_ok());
        prop_assert_eq!(g2.node_count(), k + 1);
        prop_assert_eq!(g2.edge_count(), g.edge_count() + refs.len());
        let cands = g.candidate_set(&p);
        prop_assert_eq!(cands.len(), k - refs.len());
        prop_assert!(cands.iter().all(|c| !refs.contains(c)));
    }

    #[test]
    fn undirected_view_is_symmetric((k, edges) in digraph()) {
        let g = to_graph(k, &edges);
        let u = g.undirected_view();
        for i in 0..u.len() {
            for &j in u.neighbor_positions(i) {
                prop_assert!(u.neighbor_positions(j).contains(&i));
            }
        }
        let pairs: HashSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        prop_assert_eq!(u.degree_sum(), 2 * pairs.len());
    }

    #[test]
    fn component_matches_union_find(edges in proptest::collection::vec((0u64..15, 0u64..15), 1..25), pick in 0usize..25) {
        let edges: Vec<(NodeId, NodeId)> = edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (NodeId(a), NodeId(b))).collect();
        prop_assume!(!edges.is_empty());
        let list = EdgeList::new(edges.clone());
        let seed = edges[pick % edges.len()].0;
        let comp = extract_component(&list, seed).unwrap();
        let mut uf = UnionFind::new(15);
        for &(a, b) in &edges {
            uf.union(a.0 as usize, b.0 as usize);
        }
        let root = uf.find(seed.0 as usize);
        let expected: Vec<(NodeId, NodeId)> = edges.iter().copied().filter(|&(a, _)| uf.find(a.0 as usize) == root).collect();
        prop_assert_eq!(comp.edges, expected);
    }
}

#[test]
fn fixture_file_is_generator_output() {
    let text = std::fs::read_to_string(data_path("hepth_like.txt")).unwrap();
    let (edges, _) = generate(&SynthConfig::default());
    assert_eq!(text, edges.to_snap_text(&FIXTURE_HEADER));
}

#[test]
fn fixture_plan_is_ingested_fixture() {
    let text = std::fs::read_to_string(data_path("hepth_like.txt")).unwrap();
    let parsed = parse_snap_str(&text).unwrap();
    let seed = *parsed.edges.nodes().iter().min().unwrap();
    let comp = extract_component(&parsed.edges, seed).unwrap();
    let (plan, stats) = build_replay(&comp, &NodeOrder::AscendingId, INITIAL_NODES).unwrap();
    assert_eq!(plan, fixture_plan());
    assert_eq!(plan, replay_plan(&SynthConfig::default()).unwrap());
    assert_eq!(stats.total_nodes, 1421);
    assert!(stats.excluded_nodes.is_empty());
    assert_eq!(plan.initial_nodes.len(), 421);
    assert_eq!(plan.proposals.len(), 1000);
}

#[test]
fn fixture_plan_replays_with_backward_references() {
    let plan = fixture_plan();
    let g = plan.replay().unwrap();
    assert_eq!(g.node_count(), 1421);
    assert!(g.validate_dag().is_ok());
    for p in &plan.proposals {
        assert!(p.references.iter().all(|r| r < &p.new_node));
    }
    // the main component is connected
    let u = g.undirected_view();
    let mut uf = UnionFind::new(u.len());
    for i in 0..u.len() {
        for &j in u.neighbor_positions(i) {
            uf.union(i, j);
        }
    }
    let roots: HashSet<usize> = (0..u.len()).map(|i| uf.find(i)).collect();
    assert_eq!(roots.len(), 1);
}

#[test]
fn citation_counts_are_heavy_tailed() {
    let g = fixture_plan().replay().unwrap();
    let mut indeg: HashMap<NodeId, usize> = HashMap::new();
    for (_, to) in g.edges() {
        *indeg.entry(to).or_default() += 1;
    }
    let mut d: Vec<usize> = g.nodes().iter().map(|v| indeg.get(v).copied().unwrap_or(0)).collect();
    d.sort_unstable();
    let median = d[d.len() / 2];
    let max = *d.last().unwrap();
    assert!(max > 10 * median.max(1), "max {max} median {median}");
}

#[test]
fn plan_json_roundtrip() {
    let plan = fixture_plan();
    assert_eq!(ReplayPlan::from_json(&plan.to_json()).unwrap(), plan);
}

//! SNAP edge-list ingestion and conversion into a replay plan: an initial
//! graph plus a time-ordered stream of proposals.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CitationGraph, DagViolation, NodeId, Proposal, ProposalError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: cannot parse {content:?} as `<from> <to>`")]
    Parse { line: usize, content: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
    #[error("node {0} does not occur in the edge list")]
    UnknownNode(NodeId),
    #[error("initial count {initial} must satisfy 0 < initial < {total}")]
    InvalidInitialCount { initial: usize, total: usize },
    #[error("explicit node order does not cover node {0}")]
    IncompleteOrder(NodeId),
    #[error("initial graph has no edges")]
    EmptyComponent,
    #[error("initial graph invalid: {0}")]
    InvalidInitialGraph(#[from] DagViolation),
    #[error("replay step {step}: {source}")]
    InvalidProposal {
        step: usize,
        #[source]
        source: ProposalError,
    },
    #[error("plan JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn new(edges: Vec<(NodeId, NodeId)>) -> Self {
        EdgeList { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Distinct endpoints in first-appearance order.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            for n in [a, b] {
                if seen.insert(n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Tab-separated SNAP text with an optional comment header.
    pub fn to_snap_text(&self, header: &[&str]) -> String {
        let mut out = String::new();
        for h in header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("{a}\t{b}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedEdges {
    pub edges: EdgeList,
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Parses `<from><ws><to>` lines. `#` comment lines and blank lines are
/// skipped; self-loops and repeated edges are dropped and counted.
pub fn parse_snap_edge_list<R: BufRead>(reader: R) -> Result<ParsedEdges, DatasetError> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut self_loops = 0;
    let mut duplicates = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = || DatasetError::Parse {
            line: i + 1,
            content: line.clone(),
        };
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err());
        };
        let from = NodeId(a.parse().map_err(|_| parse_err())?);
        let to = NodeId(b.parse().map_err(|_| parse_err())?);
        if from == to {
            self_loops += 1;
        } else if !seen.insert((from, to)) {
            duplicates += 1;
        } else {
            edges.push((from, to));
        }
    }
    Ok(ParsedEdges {
        edges: EdgeList { edges },
        self_loops,
        duplicates,
    })
}

pub fn parse_snap_str(text: &str) -> Result<ParsedEdges, DatasetError> {
    parse_snap_edge_list(text.as_bytes())
}

/// Edges of the weakly connected component containing `seed`, in input order.
pub fn extract_component(edges: &EdgeList, seed: NodeId) -> Result<EdgeList, DatasetError> {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(a, b) in &edges.edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if !adj.contains_key(&seed) {
        return Err(DatasetError::UnknownNode(seed));
    }
    let mut seen = HashSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[&u] {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    Ok(EdgeList {
        edges: edges
            .edges
            .iter()
            .copied()
            .filter(|(a, _)| seen.contains(a))
            .collect(),
    })
}

/// How nodes are put in time order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum NodeOrder {
    /// Ascending numeric id. SNAP HEP-TH ids encode the submission month,
    /// so this approximates submission order.
    #[default]
    AscendingId,
    /// Explicit order; must cover every node in the edge list.
    Given(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayPlan {
    pub initial_nodes: Vec<NodeId>,
    pub initial_edges: Vec<(NodeId, NodeId)>,
    pub proposals: Vec<Proposal>,
}

/// What [`build_replay`] had to drop to obtain a DAG replay.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub total_nodes: usize,
    /// Citations pointing to the same time or later, or to excluded nodes.
    pub dropped_edges: usize,
    /// Nodes left with no references after dropping.
    pub excluded_nodes: Vec<NodeId>,
}

/// Orders the nodes, takes the first `initial_count` (with the edges among
/// them that point backwards in time) as the initial graph, and turns every
/// later node into a proposal citing its strictly earlier, present nodes.
pub fn build_replay(
    edges: &EdgeList,
    order: &NodeOrder,
    initial_count: usize,
) -> Result<(ReplayPlan, ReplayStats), DatasetError> {
    let ordered: Vec<NodeId> = match order {
        NodeOrder::AscendingId => {
            let mut v = edges.nodes();
            v.sort_unstable();
            v
        }
        NodeOrder::Given(v) => {
            let given: HashSet<NodeId> = v.iter().copied().collect();
            if let Some(missing) = edges.nodes().into_iter().find(|n| !given.contains(n)) {
                return Err(DatasetError::IncompleteOrder(missing));
            }
            let present: HashSet<NodeId> = edges.nodes().into_iter().collect();
            let mut seen = HashSet::new();
            v.iter()
                .copied()
                .filter(|n| present.contains(n) && seen.insert(*n))
                .collect()
        }
    };
    let total = ordered.len();
    if initial_count == 0 || initial_count >= total {
        return Err(DatasetError::InvalidInitialCount {
            initial: initial_count,
            total,
        });
    }
    let rank: HashMap<NodeId, usize> = ordered.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut out_edges: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(a, b) in &edges.edges {
        out_edges.entry(a).or_default().push(b);
    }

    let mut stats = ReplayStats {
        total_nodes: total,
        ..Default::default()
    };
    let initial_nodes = ordered[..initial_count].to_vec();
    let mut initial_edges = Vec::new();
    for &from in &initial_nodes {
        for &to in out_edges.get(&from).map(Vec::as_slice).unwrap_or(&[]) {
            if rank[&to] < rank[&from] {
                initial_edges.push((from, to));
            } else {
                stats.dropped_edges += 1;
            }
        }
    }
    if initial_edges.is_empty() {
        return Err(DatasetError::EmptyComponent);
    }

    let mut present: HashSet<NodeId> = initial_nodes.iter().copied().collect();
    let mut proposals = Vec::with_capacity(total - initial_count);
    for &node in &ordered[initial_count..] {
        let mut refs = Vec::new();
        for &to in out_edges.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            if rank[&to] < rank[&node] && present.contains(&to) {
                refs.push(to);
            } else {
                stats.dropped_edges += 1;
            }
        }
        if refs.is_empty() {
            stats.excluded_nodes.push(node);
            continue;
        }
        present.insert(node);
        proposals.push(Proposal::new(node, refs));
    }
    let plan = ReplayPlan {
        initial_nodes,
        initial_edges,
        proposals,
    };
    Ok((plan, stats))
}

impl ReplayPlan {
    pub fn initial_graph(&self) -> Result<CitationGraph, DatasetError> {
        Ok(CitationGraph::build(
            self.initial_nodes.clone(),
            &self.initial_edges,
        )?)
    }

    /// Every node the plan ever registers, in time order.
    pub fn all_nodes(&self) -> Vec<NodeId> {
        let mut v = self.initial_nodes.clone();
        v.extend(self.proposals.iter().map(|p| p.new_node));
        v
    }

    /// Applies every proposal in order, checking the DAG after each step.
    pub fn replay(&self) -> Result<CitationGraph, DatasetError> {
        let mut g = self.initial_graph()?;
        for (step, p) in self.proposals.iter().enumerate() {
            g.insert_proposal(p)
                .map_err(|source| DatasetError::InvalidProposal { step, source })?;
            debug_assert!(g.validate_dag().is_ok());
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        Ok(serde_json::from_str(text)?)
    }
}

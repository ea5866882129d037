//! Evolving citation DAG and the proposals that extend it.
//!
//! A [`CitationGraph`] is an insertion-ordered node list plus per-node
//! out-edges (citing -> cited). Position in the node list is the time order
//! of content. Graphs are values: [`CitationGraph::apply_proposal`] returns a
//! new graph and leaves the receiver untouched.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of references a proposal may carry.
pub const DEFAULT_REFERENCE_CAP: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for NodeId {
    fn from(v: u64) -> Self {
        NodeId(v)
    }
}

/// First structural problem found by [`CitationGraph::validate_dag`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DagViolation {
    #[error("node {0} appears more than once")]
    DuplicateNode(NodeId),
    #[error("edge ({from}, {to}) has an endpoint outside the graph")]
    DanglingEndpoint { from: NodeId, to: NodeId },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("directed cycle through {}", fmt_path(.0))]
    Cycle(Vec<NodeId>),
}

fn fmt_path(path: &[NodeId]) -> String {
    path.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProposalError {
    #[error("proposed node {0} is already registered")]
    AlreadyMember(NodeId),
    #[error("proposal by {0} has no references")]
    NoReferences(NodeId),
    #[error("reference {reference} of proposal {node} is not a registered node")]
    UnknownReference { node: NodeId, reference: NodeId },
    #[error("proposal {node} lists reference {reference} twice")]
    DuplicateReference { node: NodeId, reference: NodeId },
    #[error("proposal {node} has {count} references, cap is {cap}")]
    TooManyReferences { node: NodeId, count: usize, cap: usize },
    #[error("proposal {node} leaves {available} curator candidates, {required} required")]
    TooFewCandidates {
        node: NodeId,
        available: usize,
        required: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CitationGraph {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    out_edges: Vec<Vec<NodeId>>,
    // edges whose source is not a member; only ever non-empty for unchecked graphs
    unattached: Vec<(NodeId, NodeId)>,
}

impl CitationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph without checking any invariant. Use
    /// [`CitationGraph::validate_dag`] (or [`CitationGraph::build`]) before
    /// handing the result to the protocol.
    ///
    /// Edges whose source is not listed in `nodes` are kept aside so that
    /// validation can report them.
    pub fn from_parts(nodes: Vec<NodeId>, edges: &[(NodeId, NodeId)]) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &n) in nodes.iter().enumerate() {
            index.entry(n).or_insert(i);
        }
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut unattached = Vec::new();
        for &(from, to) in edges {
            match index.get(&from) {
                Some(&i) => out_edges[i].push(to),
                None => unattached.push((from, to)),
            }
        }
        CitationGraph {
            nodes,
            index,
            out_edges,
            unattached,
        }
    }

    /// [`CitationGraph::from_parts`] followed by [`CitationGraph::validate_dag`].
    pub fn build(nodes: Vec<NodeId>, edges: &[(NodeId, NodeId)]) -> Result<Self, DagViolation> {
        let g = Self::from_parts(nodes, edges);
        g.validate_dag()?;
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in insertion (time) order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.index.get(&node).copied()
    }

    pub fn out_edges(&self, node: NodeId) -> &[NodeId] {
        match self.index.get(&node) {
            Some(&i) => &self.out_edges[i],
            None => &[],
        }
    }

    /// All edges as (citing, cited), grouped by citing node in node order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes
            .iter()
            .zip(&self.out_edges)
            .flat_map(|(&from, tos)| tos.iter().map(move |&to| (from, to)))
    }

    pub fn validate_dag(&self) -> Result<(), DagViolation> {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        for &n in &self.nodes {
            if !seen.insert(n) {
                return Err(DagViolation::DuplicateNode(n));
            }
        }
        if let Some(&(from, to)) = self.unattached.first() {
            return Err(DagViolation::DanglingEndpoint { from, to });
        }
        for (i, &from) in self.nodes.iter().enumerate() {
            let mut targets = HashSet::new();
            for &to in &self.out_edges[i] {
                if from == to {
                    return Err(DagViolation::SelfLoop(from));
                }
                if !self.index.contains_key(&to) {
                    return Err(DagViolation::DanglingEndpoint { from, to });
                }
                if !targets.insert(to) {
                    return Err(DagViolation::DuplicateEdge { from, to });
                }
            }
        }
        match self.find_cycle() {
            Some(cycle) => Err(DagViolation::Cycle(cycle)),
            None => Ok(()),
        }
    }

    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.nodes.len();
        let mut mark = vec![Mark::New; n];
        let mut parent = vec![usize::MAX; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // (node, next edge offset)
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Open;
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if let Some(&to) = self.out_edges[u].get(*next) {
                    *next += 1;
                    let v = self.index[&to];
                    match mark[v] {
                        Mark::New => {
                            mark[v] = Mark::Open;
                            parent[v] = u;
                            stack.push((v, 0));
                        }
                        Mark::Open => {
                            let mut path = vec![self.nodes[v]];
                            let mut w = u;
                            let mut back = vec![];
                            while w != v {
                                back.push(self.nodes[w]);
                                w = parent[w];
                            }
                            back.reverse();
                            path.extend(back);
                            path.push(self.nodes[v]);
                            return Some(path);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[u] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Checks that `p` can be merged into this graph (membership and
    /// reference rules only; protocol limits live in [`Proposal::check_limits`]).
    pub fn check_proposal(&self, p: &Proposal) -> Result<(), ProposalError> {
        if self.contains(p.new_node) {
            return Err(ProposalError::AlreadyMember(p.new_node));
        }
        if p.references.is_empty() {
            return Err(ProposalError::NoReferences(p.new_node));
        }
        let mut seen = HashSet::with_capacity(p.references.len());
        for &r in &p.references {
            if !self.contains(r) {
                return Err(ProposalError::UnknownReference {
                    node: p.new_node,
                    reference: r,
                });
            }
            if !seen.insert(r) {
                return Err(ProposalError::DuplicateReference {
                    node: p.new_node,
                    reference: r,
                });
            }
        }
        Ok(())
    }

    /// Returns `self ∪ p` as a new graph.
    pub fn apply_proposal(&self, p: &Proposal) -> Result<CitationGraph, ProposalError> {
        let mut next = self.clone();
        next.insert_proposal(p)?;
        Ok(next)
    }

    /// In-place variant of [`CitationGraph::apply_proposal`]; the graph is
    /// untouched when an error is returned.
    pub fn insert_proposal(&mut self, p: &Proposal) -> Result<(), ProposalError> {
        self.check_proposal(p)?;
        self.index.insert(p.new_node, self.nodes.len());
        self.nodes.push(p.new_node);
        self.out_edges.push(p.references.clone());
        Ok(())
    }

    /// Curator candidates for `p`: every registered node except its references,
    /// in graph order.
    pub fn candidate_set(&self, p: &Proposal) -> Vec<NodeId> {
        let refs: HashSet<NodeId> = p.references.iter().copied().collect();
        self.nodes
            .iter()
            .copied()
            .filter(|n| !refs.contains(n) && *n != p.new_node)
            .collect()
    }

    pub fn undirected_view(&self) -> UndirectedAdjacency {
        let n = self.nodes.len();
        let mut neighbors = vec![Vec::new(); n];
        for (i, tos) in self.out_edges.iter().enumerate() {
            for to in tos {
                if let Some(&j) = self.index.get(to) {
                    if i != j {
                        neighbors[i].push(j);
                        neighbors[j].push(i);
                    }
                }
            }
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        UndirectedAdjacency {
            nodes: self.nodes.clone(),
            neighbors,
        }
    }
}

/// Symmetric adjacency over a node list; neighbor rows hold positions into
/// `nodes`, sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedAdjacency {
    nodes: Vec<NodeId>,
    neighbors: Vec<Vec<usize>>,
}

impl UndirectedAdjacency {
    /// Builds from arbitrary pairs of positions, symmetrizing and dropping
    /// self-pairs and repeats.
    pub fn from_pairs(nodes: Vec<NodeId>, pairs: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); nodes.len()];
        for &(a, b) in pairs {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        UndirectedAdjacency { nodes, neighbors }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighbor_positions(&self, pos: usize) -> &[usize] {
        &self.neighbors[pos]
    }

    pub fn degree(&self, pos: usize) -> usize {
        self.neighbors[pos].len()
    }

    pub fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        match self.nodes.iter().position(|&n| n == node) {
            Some(i) => self.neighbors[i].iter().map(|&j| self.nodes[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn degree_sum(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Symmetrizing an already symmetric adjacency is the identity.
    pub fn symmetrized(&self) -> Self {
        let pairs: Vec<(usize, usize)> = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
            .collect();
        Self::from_pairs(self.nodes.clone(), &pairs)
    }
}

/// A new node together with the registered nodes it cites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    #[serde(rename = "node")]
    pub new_node: NodeId,
    #[serde(rename = "refs")]
    pub references: Vec<NodeId>,
}

impl Proposal {
    pub fn new(new_node: NodeId, references: Vec<NodeId>) -> Self {
        Proposal {
            new_node,
            references,
        }
    }

    /// Protocol limits: at most `reference_cap` references and at least
    /// `min_candidates` registered nodes left outside the reference set.
    pub fn check_limits(
        &self,
        graph: &CitationGraph,
        reference_cap: usize,
        min_candidates: usize,
    ) -> Result<(), ProposalError> {
        if self.references.len() > reference_cap {
            return Err(ProposalError::TooManyReferences {
                node: self.new_node,
                count: self.references.len(),
                cap: reference_cap,
            });
        }
        let available = graph.node_count().saturating_sub(self.references.len());
        if available < min_candidates {
            return Err(ProposalError::TooFewCandidates {
                node: self.new_node,
                available,
                required: min_candidates,
            });
        }
        Ok(())
    }
}

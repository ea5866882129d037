//! PageRank and Personalized PageRank by power iteration on the undirected
//! view of a citation graph.
//!
//! The damped walk moves to a uniform neighbor with probability `1 - alpha`
//! and teleports with probability `alpha`, either uniformly over all nodes
//! (random-surfer PageRank) or uniformly over a base set (PPR). Isolated
//! nodes have no neighbors; their whole mass follows the teleport
//! distribution.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CitationGraph, NodeId, UndirectedAdjacency};

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PageRankError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("damping factor {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("base set is empty")]
    EmptyBase,
    #[error("base node {0} is not in the graph")]
    UnknownBaseNode(NodeId),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: DEFAULT_ALPHA,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Teleport {
    /// Uniform over every node.
    Uniform,
    /// Uniform over the listed base nodes.
    Base(Vec<NodeId>),
}

/// Probability distribution over a node list.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    nodes: Vec<NodeId>,
    scores: Vec<f64>,
    iterations: usize,
}

impl ScoreVector {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Scores aligned with [`ScoreVector::nodes`].
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn get(&self, node: NodeId) -> Option<f64> {
        self.nodes.iter().position(|&n| n == node).map(|i| self.scores[i])
    }

    pub fn to_map(&self) -> HashMap<NodeId, f64> {
        self.nodes.iter().copied().zip(self.scores.iter().copied()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.nodes.iter().copied().zip(self.scores.iter().copied())
    }

    pub fn l1_distance(&self, other: &ScoreVector) -> f64 {
        let theirs = other.to_map();
        self.iter()
            .map(|(n, s)| (s - theirs.get(&n).copied().unwrap_or(0.0)).abs())
            .sum()
    }

    /// `node_id,score` rows sorted by id, with a header line.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(NodeId, f64)> = self.iter().collect();
        rows.sort_by_key(|&(n, _)| n);
        let mut out = String::from("node_id,score\n");
        for (n, s) in rows {
            let _ = writeln!(out, "{},{}", n, s);
        }
        out
    }
}

fn teleport_weights(
    adjacency: &UndirectedAdjacency,
    teleport: &Teleport,
) -> Result<Vec<f64>, PageRankError> {
    let n = adjacency.len();
    match teleport {
        Teleport::Uniform => Ok(vec![1.0 / n as f64; n]),
        Teleport::Base(base) => {
            if base.is_empty() {
                return Err(PageRankError::EmptyBase);
            }
            let pos: HashMap<NodeId, usize> = adjacency
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, &id)| (id, i))
                .collect();
            let mut members = Vec::with_capacity(base.len());
            for b in base {
                match pos.get(b) {
                    Some(&i) => members.push(i),
                    None => return Err(PageRankError::UnknownBaseNode(*b)),
                }
            }
            members.sort_unstable();
            members.dedup();
            let mut w = vec![0.0; n];
            let share = 1.0 / members.len() as f64;
            for i in members {
                w[i] = share;
            }
            Ok(w)
        }
    }
}

/// Stationary distribution of the damped walk on `adjacency`.
///
/// Stops once successive iterates differ by less than `tol` in l1 norm.
pub fn power_iterate(
    adjacency: &UndirectedAdjacency,
    teleport: &Teleport,
    cfg: &SolverConfig,
) -> Result<ScoreVector, PageRankError> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(PageRankError::InvalidAlpha(cfg.alpha));
    }
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
        return Err(PageRankError::InvalidTolerance(cfg.tol));
    }
    let n = adjacency.len();
    if n == 0 {
        return Err(PageRankError::EmptyGraph);
    }
    let t = teleport_weights(adjacency, teleport)?;
    let inv_degree: Vec<f64> = (0..n)
        .map(|i| match adjacency.degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();
    let walk = 1.0 - cfg.alpha;

    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        let mut dangling = 0.0;
        for i in 0..n {
            if inv_degree[i] == 0.0 {
                dangling += x[i];
            }
        }
        let jump = cfg.alpha + walk * dangling;
        for j in 0..n {
            // symmetric adjacency: in-neighbors of j are its neighbors
            let inflow: f64 = adjacency
                .neighbor_positions(j)
                .iter()
                .map(|&i| x[i] * inv_degree[i])
                .sum();
            next[j] = walk * inflow + jump * t[j];
        }
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual < cfg.tol {
            let total: f64 = x.iter().sum();
            for v in &mut x {
                *v /= total;
            }
            return Ok(ScoreVector {
                nodes: adjacency.nodes().to_vec(),
                scores: x,
                iterations: iter,
            });
        }
    }
    Err(PageRankError::NoConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Random-surfer PageRank on the undirected view of `graph`.
pub fn pagerank(graph: &CitationGraph, cfg: &SolverConfig) -> Result<ScoreVector, PageRankError> {
    power_iterate(&graph.undirected_view(), &Teleport::Uniform, cfg)
}

/// Personalized PageRank on the undirected view of `graph`, restarting at `base`.
pub fn ppr(
    graph: &CitationGraph,
    base: &[NodeId],
    cfg: &SolverConfig,
) -> Result<ScoreVector, PageRankError> {
    power_iterate(&graph.undirected_view(), &Teleport::Base(base.to_vec()), cfg)
}

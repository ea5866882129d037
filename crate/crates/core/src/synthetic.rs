//! Seeded generator for citation corpora shaped like the arXiv HEP-TH
//! network: month-coded ids, topical clustering and preferential
//! attachment on citation counts.
//!
//! The shipped fixture `data/hepth_like.txt` is the output of
//! [`generate`] with [`SynthConfig::default`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_replay, extract_component, DatasetError, EdgeList, NodeOrder, ReplayPlan};
use crate::graph::NodeId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Papers in the main component.
    pub nodes: usize,
    /// Months covered, starting January 2000.
    pub months: usize,
    /// Topic clusters on the unit circle.
    pub topics: usize,
    /// Standard deviation of a paper's position around its topic centre.
    pub topic_spread: f64,
    /// Length scale of the topical affinity kernel.
    pub affinity_scale: f64,
    /// Mean number of backward citations beyond the first.
    pub mean_extra_refs: f64,
    pub max_refs: usize,
    /// Additive smoothing on in-degree for preferential attachment.
    pub attachment_offset: f64,
    /// Probability that a paper also cites a slightly later paper.
    pub forward_citation_prob: f64,
    /// Small separate components added around the main one.
    pub satellite_components: usize,
    pub satellite_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 2000,
            nodes: 1421,
            months: 40,
            topics: 6,
            topic_spread: 0.04,
            affinity_scale: 0.08,
            mean_extra_refs: 5.0,
            max_refs: 40,
            attachment_offset: 1.0,
            forward_citation_prob: 0.02,
            satellite_components: 4,
            satellite_size: 6,
        }
    }
}

/// HEP-TH style id `YYMMsss` (leading zeros vanish for 2000).
pub fn month_id(month_index: usize, seq: usize) -> NodeId {
    let year = month_index / 12;
    let month = month_index % 12 + 1;
    NodeId((year * 100_000 + month * 1_000 + seq) as u64)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().fract();
    d.min(1.0 - d)
}

/// Generates the corpus. The first node of the main component is returned
/// alongside the edges so callers can extract that component.
pub fn generate(cfg: &SynthConfig) -> (EdgeList, NodeId) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.nodes;
    let per_month = n.div_ceil(cfg.months);

    let ids: Vec<NodeId> = (0..n).map(|i| month_id(i / per_month, i % per_month + 1)).collect();
    let centres: Vec<f64> = (0..cfg.topics).map(|k| k as f64 / cfg.topics as f64).collect();
    let spread = Normal::new(0.0, cfg.topic_spread).expect("valid spread");
    let position: Vec<f64> = (0..n)
        .map(|_| {
            let c = centres[rng.random_range(0..cfg.topics)];
            (c + spread.sample(&mut rng)).rem_euclid(1.0)
        })
        .collect();
    let extra = Poisson::new(cfg.mean_extra_refs).expect("valid mean");

    let mut in_degree = vec![0usize; n];
    let mut edges = Vec::new();
    for i in 1..n {
        let want = (1 + extra.sample(&mut rng) as usize).min(cfg.max_refs).min(i);
        let mut weights: Vec<f64> = (0..i)
            .map(|j| {
                let affinity = (-circular_distance(position[i], position[j]) / cfg.affinity_scale).exp();
                (in_degree[j] as f64 + cfg.attachment_offset) * affinity
            })
            .collect();
        for _ in 0..want {
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                break;
            }
            let mut target = rng.random::<f64>() * total;
            let mut pick = i - 1;
            for (j, &w) in weights.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = j;
                    break;
                }
                target -= w;
            }
            if weights[pick] <= 0.0 {
                continue;
            }
            weights[pick] = 0.0;
            in_degree[pick] += 1;
            edges.push((ids[i], ids[pick]));
        }
        if i + 1 < n && rng.random::<f64>() < cfg.forward_citation_prob {
            let ahead = rng.random_range(i + 1..(i + 30).min(n));
            edges.push((ids[i], ids[ahead]));
        }
    }

    // satellites: short citation chains with ids after the main sequence of
    // their month
    for s in 0..cfg.satellite_components {
        let month = rng.random_range(0..cfg.months);
        let base = per_month + 100 + s * cfg.satellite_size;
        let sat: Vec<NodeId> = (0..cfg.satellite_size).map(|k| month_id(month, base + k)).collect();
        for k in 1..sat.len() {
            edges.push((sat[k], sat[rng.random_range(0..k)]));
        }
    }
    (EdgeList::new(edges), ids[0])
}

/// Nodes of the main component present before the first proposal.
pub const INITIAL_NODES: usize = 421;

/// Main component of [`generate`] replayed in id order on top of its first
/// [`INITIAL_NODES`] papers.
pub fn replay_plan(cfg: &SynthConfig) -> Result<ReplayPlan, DatasetError> {
    let (edges, first) = generate(cfg);
    let component = extract_component(&edges, first)?;
    let (plan, _) = build_replay(&component, &NodeOrder::AscendingId, INITIAL_NODES)?;
    Ok(plan)
}

pub const FIXTURE_HEADER: [&str; 3] = [
    "Directed graph: synthetic citation corpus in the arXiv HEP-TH id scheme",
    "Generated by `citedtcr synth` with default parameters",
    "FromNodeId\tToNodeId",
];

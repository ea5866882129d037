//! PPR-weighted curator selection and report collection with reselection of
//! unresponsive curators.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::graph::NodeId;
use crate::pagerank::ScoreVector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("need {needed} curators but only {available} candidates")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("candidate {0} has no score")]
    MissingScore(NodeId),
    #[error("candidate pool exhausted with {missing} of {requested} reports outstanding")]
    ExhaustedCandidates { requested: usize, missing: usize },
}

/// Draws `n` distinct candidates, one at a time, each with probability
/// proportional to its score among the candidates not yet drawn.
/// Zero-score candidates only come up once every positive-score candidate
/// has been drawn; among themselves they are uniform.
pub fn select_curators<R: Rng + ?Sized>(
    scores: &ScoreVector,
    candidates: &[NodeId],
    n: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, AssignmentError> {
    if candidates.len() < n {
        return Err(AssignmentError::InsufficientCandidates {
            needed: n,
            available: candidates.len(),
        });
    }
    let lookup: HashMap<NodeId, f64> = scores.to_map();
    let mut pool: Vec<(NodeId, f64)> = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let s = *lookup.get(&c).ok_or(AssignmentError::MissingScore(c))?;
        pool.push((c, s.max(0.0)));
    }
    weighted_draw_without_replacement(pool, n, rng)
}

fn weighted_draw_without_replacement<R: Rng + ?Sized>(
    mut pool: Vec<(NodeId, f64)>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, AssignmentError> {
    let mut chosen = Vec::with_capacity(n);
    let mut total: f64 = pool.iter().map(|&(_, w)| w).sum();
    while chosen.len() < n {
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &(_, w)) in pool.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if target < acc {
                        break;
                    }
                }
            }
            // rounding can leave target just past the last positive weight
            pick.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..pool.len())
        };
        let (node, w) = pool.swap_remove(idx);
        chosen.push(node);
        total -= w;
        if pool.iter().all(|&(_, w)| w <= 0.0) {
            total = 0.0;
        }
    }
    Ok(chosen)
}

/// Outcome of one task's report collection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Curation {
    /// (curator, report) in the order responses were collected.
    pub reports: Vec<(NodeId, bool)>,
    /// Every node queried, responsive or not.
    pub queried: Vec<NodeId>,
    pub rounds: usize,
}

impl Curation {
    pub fn curators(&self) -> Vec<NodeId> {
        self.reports.iter().map(|&(c, _)| c).collect()
    }
}

/// Collects exactly `n` reports. Each round draws as many curators as
/// reports are still missing from the remaining candidates, queries them
/// through `query`, and drops everyone queried from the pool.
pub fn curation<R, Q>(
    n: usize,
    candidates: &[NodeId],
    scores: &ScoreVector,
    mut query: Q,
    rng: &mut R,
) -> Result<Curation, AssignmentError>
where
    R: Rng + ?Sized,
    Q: FnMut(NodeId, &mut R) -> Option<bool>,
{
    let mut pool: Vec<NodeId> = candidates.to_vec();
    let mut out = Curation {
        reports: Vec::with_capacity(n),
        queried: Vec::new(),
        rounds: 0,
    };
    let mut missing = n;
    while missing > 0 {
        if pool.len() < missing {
            return Err(AssignmentError::ExhaustedCandidates {
                requested: n,
                missing,
            });
        }
        let drawn = select_curators(scores, &pool, missing, rng)?;
        out.rounds += 1;
        for &c in &drawn {
            out.queried.push(c);
            if let Some(r) = query(c, rng) {
                out.reports.push((c, r));
            }
        }
        missing = n - out.reports.len();
        pool.retain(|c| !drawn.contains(c));
    }
    Ok(out)
}

//! DG13 multi-task peer prediction.
//!
//! A curator `c` paired with a peer `p` on task `t` earns
//!
//! ```text
//! theta = [r_c(t) == r_p(t)] - [r_c(a) == r_p(b)]
//! ```
//!
//! where `a` and `b` are random earlier tasks of `c` and `p`. Settlement is
//! deferred until both parties hold at least [`MIN_REPORTS`] reports.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Strategy;
use crate::graph::NodeId;

/// Reports each party must hold before a reward involving them is computed.
pub const MIN_REPORTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeerPredictionError {
    #[error("need at least two curators to pair, got {0}")]
    TooFewCurators(usize),
    #[error("{0} has no report outside the current task")]
    Ineligible(NodeId),
    #[error("joint distribution invalid: {0}")]
    InvalidDistribution(String),
    #[error("joint distribution is not positively correlated")]
    NotPositivelyCorrelated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub curator: NodeId,
    pub task: NodeId,
    pub report: bool,
    pub period: u64,
}

/// Append-only record of every report, indexed by curator.
#[derive(Clone, Debug, Default)]
pub struct ReportStock {
    records: Vec<ReportRecord>,
    by_curator: HashMap<NodeId, Vec<usize>>,
    by_curator_task: HashMap<(NodeId, NodeId), usize>,
}

impl ReportStock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ReportRecord] {
        &self.records
    }

    /// Appends one record; a second report by the same curator on the same
    /// task is ignored and `false` returned.
    pub fn push(&mut self, record: ReportRecord) -> bool {
        let key = (record.curator, record.task);
        if self.by_curator_task.contains_key(&key) {
            return false;
        }
        let idx = self.records.len();
        self.records.push(record);
        self.by_curator.entry(record.curator).or_default().push(idx);
        self.by_curator_task.insert(key, idx);
        true
    }

    pub fn count(&self, curator: NodeId) -> usize {
        self.by_curator.get(&curator).map_or(0, Vec::len)
    }

    pub fn records_of(&self, curator: NodeId) -> impl Iterator<Item = &ReportRecord> + '_ {
        self.by_curator
            .get(&curator)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn report_on(&self, curator: NodeId, task: NodeId) -> Option<bool> {
        self.by_curator_task
            .get(&(curator, task))
            .map(|&i| self.records[i].report)
    }
}

/// Each curator is paired with a uniformly random other curator of the same
/// task. Pairing is not necessarily symmetric.
pub fn pair_curators<R: Rng + ?Sized>(
    curators: &[NodeId],
    rng: &mut R,
) -> Result<Vec<(NodeId, NodeId)>, PeerPredictionError> {
    let n = curators.len();
    if n < 2 {
        return Err(PeerPredictionError::TooFewCurators(n));
    }
    Ok(curators
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (c, curators[j])
        })
        .collect())
}

/// Agreement on the shared task minus agreement on the penalty pair.
pub fn dg13_theta(current_c: bool, current_peer: bool, past_c: bool, past_peer: bool) -> i8 {
    i8::from(current_c == current_peer) - i8::from(past_c == past_peer)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PenaltySample {
    pub past_c: bool,
    pub past_peer: bool,
    /// False when no pair on mutually non-shared tasks existed and the draw
    /// fell back to any record outside the current task.
    pub disjoint: bool,
}

/// Draws one report of `c` and one of `peer`, both from tasks other than
/// `current_task`. When each party has reports on tasks the other never
/// reviewed, the draw is restricted to those.
pub fn sample_penalty_reports<R: Rng + ?Sized>(
    stock: &ReportStock,
    c: NodeId,
    peer: NodeId,
    current_task: NodeId,
    rng: &mut R,
) -> Result<PenaltySample, PeerPredictionError> {
    let own: Vec<&ReportRecord> = stock.records_of(c).filter(|r| r.task != current_task).collect();
    if own.is_empty() {
        return Err(PeerPredictionError::Ineligible(c));
    }
    let theirs: Vec<&ReportRecord> = stock
        .records_of(peer)
        .filter(|r| r.task != current_task)
        .collect();
    if theirs.is_empty() {
        return Err(PeerPredictionError::Ineligible(peer));
    }
    let own_tasks: HashSet<NodeId> = stock.records_of(c).map(|r| r.task).collect();
    let their_tasks: HashSet<NodeId> = stock.records_of(peer).map(|r| r.task).collect();
    let own_only: Vec<&ReportRecord> = own
        .iter()
        .copied()
        .filter(|r| !their_tasks.contains(&r.task))
        .collect();
    let their_only: Vec<&ReportRecord> = theirs
        .iter()
        .copied()
        .filter(|r| !own_tasks.contains(&r.task))
        .collect();
    let disjoint = !own_only.is_empty() && !their_only.is_empty();
    let (a, b) = if disjoint {
        (own_only, their_only)
    } else {
        log::debug!("penalty for ({c}, {peer}) on task {current_task}: no disjoint records, falling back");
        (own, theirs)
    };
    let past_c = a[rng.random_range(0..a.len())].report;
    let past_peer = b[rng.random_range(0..b.len())].report;
    Ok(PenaltySample {
        past_c,
        past_peer,
        disjoint,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingTriple {
    pub curator: NodeId,
    pub peer: NodeId,
    pub task: NodeId,
    pub period: u64,
}

#[derive(Clone, Debug, Default)]
pub struct PendingSettlement {
    queue: VecDeque<PendingTriple>,
}

impl PendingSettlement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, triple: PendingTriple) {
        self.queue.push_back(triple);
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PendingTriple> + '_ {
        self.queue.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardEntry {
    /// Period of the rewarded task.
    pub period: u64,
    pub curator: NodeId,
    pub peer: NodeId,
    pub task: NodeId,
    pub theta: i8,
    pub disjoint_penalty: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RewardLedger {
    entries: Vec<RewardEntry>,
    /// Present payouts as `theta + 1` so that every payout is non-negative.
    pub offset: bool,
}

impl RewardLedger {
    pub fn new(offset: bool) -> Self {
        RewardLedger {
            entries: Vec::new(),
            offset,
        }
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = RewardEntry>) {
        self.entries.extend(entries);
    }

    pub fn entries(&self) -> &[RewardEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn payout(&self, entry: &RewardEntry) -> i8 {
        entry.theta + i8::from(self.offset)
    }

    pub fn mean_theta(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let sum: i64 = self.entries.iter().map(|e| i64::from(e.theta)).sum();
        Some(sum as f64 / self.entries.len() as f64)
    }

    /// `period,curator,peer,task,theta`; the last column carries the offset
    /// when it is enabled.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,curator,peer,task,theta\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.period,
                e.curator,
                e.peer,
                e.task,
                self.payout(e)
            );
        }
        out
    }
}

/// Settles every queued triple whose parties both hold at least
/// [`MIN_REPORTS`] reports; the rest stay queued in their original order.
pub fn settle_pending<R: Rng + ?Sized>(
    stock: &ReportStock,
    pending: &mut PendingSettlement,
    rng: &mut R,
) -> Vec<RewardEntry> {
    let mut settled = Vec::new();
    let mut keep = VecDeque::with_capacity(pending.queue.len());
    while let Some(t) = pending.queue.pop_front() {
        if stock.count(t.curator) < MIN_REPORTS || stock.count(t.peer) < MIN_REPORTS {
            keep.push_back(t);
            continue;
        }
        let (Some(now_c), Some(now_p)) = (
            stock.report_on(t.curator, t.task),
            stock.report_on(t.peer, t.task),
        ) else {
            keep.push_back(t);
            continue;
        };
        match sample_penalty_reports(stock, t.curator, t.peer, t.task, rng) {
            Ok(pen) => settled.push(RewardEntry {
                period: t.period,
                curator: t.curator,
                peer: t.peer,
                task: t.task,
                theta: dg13_theta(now_c, now_p, pen.past_c, pen.past_peer),
                disjoint_penalty: pen.disjoint,
            }),
            Err(_) => keep.push_back(t),
        }
    }
    pending.queue = keep;
    settled
}

/// 2x2 joint distribution of the signals seen by a curator and its peer;
/// `p[a][b] = Pr(s_c = a, s_peer = b)` with index 0 for signal 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSignals {
    pub p: [[f64; 2]; 2],
}

impl JointSignals {
    pub fn new(p: [[f64; 2]; 2]) -> Result<Self, PeerPredictionError> {
        let mut total = 0.0;
        for row in &p {
            for &v in row {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(PeerPredictionError::InvalidDistribution(format!(
                        "entry {v} is negative or not finite"
                    )));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(PeerPredictionError::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(JointSignals { p })
    }

    /// Both curators see the same task bit, which is 0 with probability `q_zero`.
    pub fn shared_task_signal(q_zero: f64) -> Result<Self, PeerPredictionError> {
        Self::new([[q_zero, 0.0], [0.0, 1.0 - q_zero]])
    }

    pub fn independent(c_zero: f64, peer_zero: f64) -> Result<Self, PeerPredictionError> {
        Self::new([
            [c_zero * peer_zero, c_zero * (1.0 - peer_zero)],
            [(1.0 - c_zero) * peer_zero, (1.0 - c_zero) * (1.0 - peer_zero)],
        ])
    }

    pub fn marginal_c(&self, s: usize) -> f64 {
        self.p[s][0] + self.p[s][1]
    }

    pub fn marginal_peer(&self, s: usize) -> f64 {
        self.p[0][s] + self.p[1][s]
    }

    /// `Pr(a, b) - Pr(a) Pr(b)`.
    pub fn excess(&self, a: usize, b: usize) -> f64 {
        self.p[a][b] - self.marginal_c(a) * self.marginal_peer(b)
    }

    pub fn is_positively_correlated(&self) -> bool {
        self.excess(0, 0) > 0.0 && self.excess(1, 1) > 0.0
    }
}

fn agreement_prob(sc: &Strategy, sp: &Strategy, signal_c: bool, signal_p: bool) -> f64 {
    let a = sc.prob_one(signal_c);
    let b = sp.prob_one(signal_p);
    a * b + (1.0 - a) * (1.0 - b)
}

/// Expected net reward: the sum over signal pairs of the correlation excess
/// times the probability that the two reports agree.
pub fn expected_theta_analytic(joint: &JointSignals, strategy_c: &Strategy, strategy_peer: &Strategy) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            e += joint.excess(a, b) * agreement_prob(strategy_c, strategy_peer, a == 1, b == 1);
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthfulnessReport {
    /// Every ordered pair of [`Strategy::CANONICAL`] with its expected reward.
    pub values: Vec<(Strategy, Strategy, f64)>,
    pub max: f64,
    pub argmax: Vec<(Strategy, Strategy)>,
    /// Truthful/truthful is maximal and ties only with opposite/opposite.
    pub holds: bool,
}

const TIE_EPS: f64 = 1e-12;

pub fn verify_strong_truthfulness(joint: &JointSignals) -> Result<TruthfulnessReport, PeerPredictionError> {
    if !joint.is_positively_correlated() {
        return Err(PeerPredictionError::NotPositivelyCorrelated);
    }
    let mut values = Vec::with_capacity(25);
    for sc in Strategy::CANONICAL {
        for sp in Strategy::CANONICAL {
            values.push((sc, sp, expected_theta_analytic(joint, &sc, &sp)));
        }
    }
    let max = values.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    let argmax: Vec<(Strategy, Strategy)> = values
        .iter()
        .filter(|v| (v.2 - max).abs() <= TIE_EPS)
        .map(|v| (v.0, v.1))
        .collect();
    let expected = [
        (Strategy::Truthful, Strategy::Truthful),
        (Strategy::Opposite, Strategy::Opposite),
    ];
    let holds = argmax.len() == 2 && expected.iter().all(|e| argmax.contains(e));
    Ok(TruthfulnessReport {
        values,
        max,
        argmax,
        holds,
    })
}

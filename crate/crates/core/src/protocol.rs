//! Period-by-period registry engine.
//!
//! One step takes a proposal through curator assignment (PPR restarted at
//! the proposal's references), report collection, reward settlement and
//! the acceptance vote. All randomness comes from the engine's own seeded
//! stream, so identical inputs give identical traces.

use std::collections::{HashMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{produce_report, AgentError, AgentTable, SignalModel};
use crate::assignment::{curation, AssignmentError};
use crate::dataset::{DatasetError, ReplayPlan};
use crate::graph::{CitationGraph, DagViolation, NodeId, Proposal, ProposalError, DEFAULT_REFERENCE_CAP};
use crate::pagerank::{ppr, PageRankError, ScoreVector, SolverConfig, DEFAULT_ALPHA, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::peer_prediction::{
    pair_curators, settle_pending, PeerPredictionError, PendingSettlement, PendingTriple, ReportRecord,
    ReportStock, RewardEntry, RewardLedger,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    PageRank(#[from] PageRankError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    PeerPrediction(#[from] PeerPredictionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Dag(#[from] DagViolation),
}

#[derive(Debug, Error)]
#[error("period {period}: {source}")]
pub struct RunError {
    pub period: u64,
    #[source]
    pub source: EngineError,
}

/// Exogenous parameters of a run. Field names double as the keys of the
/// flat JSON config file accepted by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Curators per period.
    pub n: usize,
    /// Accept reports required for acceptance.
    pub m: usize,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Present payouts as theta + 1.
    pub offset: bool,
    pub reference_cap: usize,
    /// Accept only when the accept count strictly exceeds `m`.
    pub strict_threshold: bool,
    /// Pair curators and compute DG13 rewards. Disabling this allows `n = 1`
    /// for assignment-only runs.
    pub rewards: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 10,
            m: 0,
            alpha: DEFAULT_ALPHA,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            offset: false,
            reference_cap: DEFAULT_REFERENCE_CAP,
            strict_threshold: false,
            rewards: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let min_n = if self.rewards { 2 } else { 1 };
        if self.n < min_n {
            return Err(EngineError::Config(format!(
                "n = {} but at least {min_n} curators are required",
                self.n
            )));
        }
        if self.m > self.n {
            return Err(EngineError::Config(format!("m = {} exceeds n = {}", self.m, self.n)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(EngineError::Config(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(EngineError::Config("tol and max_iter must be positive".into()));
        }
        if self.reference_cap == 0 {
            return Err(EngineError::Config("reference_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn accepts(&self, accept_count: usize) -> bool {
        if self.strict_threshold {
            accept_count > self.m
        } else {
            accept_count >= self.m
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub curator: NodeId,
    pub theta: i8,
}

/// One line of the JSON-lines trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period: u64,
    pub task: NodeId,
    pub curators: Vec<NodeId>,
    #[serde(with = "bits")]
    pub reports: Vec<bool>,
    pub accepted: bool,
    pub settlements: Vec<Settlement>,
    /// Nodes queried this period, including unresponsive ones.
    #[serde(skip)]
    pub queried: Vec<NodeId>,
    #[serde(skip)]
    pub rounds: usize,
}

mod bits {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&b| u8::from(b)).collect::<Vec<u8>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Ok(Vec::<u8>::deserialize(d)?.into_iter().map(|b| b != 0).collect())
    }
}

impl PeriodSummary {
    pub fn accept_count(&self) -> usize {
        self.reports.iter().filter(|&&r| r).count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

#[derive(Clone, Debug)]
pub struct EngineState {
    pub graph: CitationGraph,
    pub stock: ReportStock,
    pub ledger: RewardLedger,
    pub pending: PendingSettlement,
    pub period: u64,
}

/// PPR vectors shared between engines that start from the same initial
/// graph with the same solver settings. Entries are keyed by the sequence of
/// proposals inserted so far plus the current proposal, so runs whose graphs
/// diverge never see each other's scores.
#[derive(Clone, Debug, Default)]
pub struct ScoreCache {
    inner: Arc<Mutex<HashMap<u64, Arc<ScoreVector>>>>,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: u64) -> Option<Arc<ScoreVector>> {
        self.inner.lock().expect("cache lock").get(&key).cloned()
    }

    fn put(&self, key: u64, scores: Arc<ScoreVector>) {
        self.inner.lock().expect("cache lock").insert(key, scores);
    }
}

fn chain_hash(prev: u64, proposal: &Proposal) -> u64 {
    let mut h = DefaultHasher::new();
    prev.hash(&mut h);
    proposal.new_node.hash(&mut h);
    proposal.references.hash(&mut h);
    h.finish()
}

pub struct Engine {
    cfg: SimConfig,
    state: EngineState,
    rng: ChaCha8Rng,
    selections: HashMap<NodeId, u64>,
    history: u64,
    cache: Option<ScoreCache>,
}

impl Engine {
    pub fn new(cfg: SimConfig, initial_graph: CitationGraph) -> Result<Self, EngineError> {
        cfg.validate()?;
        initial_graph.validate_dag()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Engine {
            state: EngineState {
                graph: initial_graph,
                stock: ReportStock::new(),
                ledger: RewardLedger::new(cfg.offset),
                pending: PendingSettlement::new(),
                period: 0,
            },
            cfg,
            rng,
            selections: HashMap::new(),
            history: 0,
            cache: None,
        })
    }

    /// Reuse PPR vectors through `cache`. Every engine sharing a cache must
    /// start from the same initial graph and solver settings.
    pub fn with_cache(mut self, cache: ScoreCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn into_state(self) -> EngineState {
        self.state
    }

    /// Times each node served as a (responsive) curator.
    pub fn selection_counts(&self) -> &HashMap<NodeId, u64> {
        &self.selections
    }

    /// Runs one period. On error the state and random stream are left as
    /// they were before the call.
    pub fn step(
        &mut self,
        proposal: &Proposal,
        agents: &AgentTable,
        signals: &SignalModel,
    ) -> Result<PeriodSummary, EngineError> {
        let saved_rng = self.rng.clone();
        match self.try_step(proposal, agents, signals) {
            Ok(s) => Ok(s),
            Err(e) => {
                self.rng = saved_rng;
                Err(e)
            }
        }
    }

    fn try_step(
        &mut self,
        proposal: &Proposal,
        agents: &AgentTable,
        signals: &SignalModel,
    ) -> Result<PeriodSummary, EngineError> {
        let cfg = &self.cfg;
        let graph = &self.state.graph;
        graph.check_proposal(proposal)?;
        proposal.check_limits(graph, cfg.reference_cap, cfg.n)?;

        let key = chain_hash(self.history, proposal);
        let scores = match self.cache.as_ref().and_then(|c| c.get(key)) {
            Some(s) => s,
            None => {
                let s = Arc::new(ppr(graph, &proposal.references, &cfg.solver())?);
                if let Some(c) = &self.cache {
                    c.put(key, Arc::clone(&s));
                }
                s
            }
        };
        let candidates = graph.candidate_set(proposal);
        let task = proposal.new_node;
        let mut signal_err = None;
        let collected = curation(
            cfg.n,
            &candidates,
            &scores,
            |c, rng| match signals.observed(c, task) {
                Ok(s) => produce_report(&agents.get(c), s, rng),
                Err(e) => {
                    signal_err.get_or_insert(e);
                    None
                }
            },
            &mut self.rng,
        );
        if let Some(e) = signal_err {
            return Err(e.into());
        }
        let collected = collected?;
        let curators = collected.curators();
        let reports: Vec<bool> = collected.reports.iter().map(|&(_, r)| r).collect();
        let pairs = if cfg.rewards {
            pair_curators(&curators, &mut self.rng)?
        } else {
            Vec::new()
        };

        // Nothing below can fail.
        let period = self.state.period;
        for &(curator, report) in &collected.reports {
            self.state.stock.push(ReportRecord {
                curator,
                task,
                report,
                period,
            });
            *self.selections.entry(curator).or_insert(0) += 1;
        }
        for (curator, peer) in pairs {
            self.state.pending.push(PendingTriple {
                curator,
                peer,
                task,
                period,
            });
        }
        let settled: Vec<RewardEntry> = if cfg.rewards {
            settle_pending(&self.state.stock, &mut self.state.pending, &mut self.rng)
        } else {
            Vec::new()
        };
        let settlements = settled
            .iter()
            .map(|e| Settlement {
                curator: e.curator,
                theta: e.theta,
            })
            .collect();
        self.state.ledger.extend(settled);

        let accept_count = reports.iter().filter(|&&r| r).count();
        let accepted = cfg.accepts(accept_count);
        if accepted {
            self.state
                .graph
                .insert_proposal(proposal)
                .expect("proposal was checked against this graph");
            self.history = chain_hash(self.history, proposal);
        }
        self.state.period += 1;
        Ok(PeriodSummary {
            period,
            task,
            curators,
            reports,
            accepted,
            settlements,
            queried: collected.queried,
            rounds: collected.rounds,
        })
    }
}

/// Everything a full replay produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Vec<PeriodSummary>,
    pub state: EngineState,
    pub selections: HashMap<NodeId, u64>,
    /// Proposals dropped because every reference had been rejected earlier.
    pub skipped: Vec<NodeId>,
    /// References removed because they pointed at rejected proposals.
    pub pruned_references: usize,
}

impl RunOutcome {
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.trace {
            out.push_str(&s.to_json_line());
            out.push('\n');
        }
        out
    }
}

/// Folds [`Engine::step`] over every proposal of `plan`.
///
/// References to proposals that were rejected earlier in the run are pruned
/// before the step; a proposal left with no references is skipped.
pub fn run(
    cfg: &SimConfig,
    plan: &ReplayPlan,
    agents: &AgentTable,
    signals: &SignalModel,
) -> Result<RunOutcome, RunError> {
    run_cached(cfg, plan, agents, signals, None)
}

/// [`run`] with PPR vectors shared through `cache`; every caller sharing it
/// must use the same plan and solver settings.
pub fn run_cached(
    cfg: &SimConfig,
    plan: &ReplayPlan,
    agents: &AgentTable,
    signals: &SignalModel,
    cache: Option<&ScoreCache>,
) -> Result<RunOutcome, RunError> {
    let initial = plan.initial_graph().map_err(|e| RunError {
        period: 0,
        source: e.into(),
    })?;
    let mut engine = Engine::new(cfg.clone(), initial).map_err(|source| RunError { period: 0, source })?;
    if let Some(c) = cache {
        engine = engine.with_cache(c.clone());
    }
    let mut trace = Vec::with_capacity(plan.proposals.len());
    let mut skipped = Vec::new();
    let mut pruned_references = 0;
    let mut rejected: HashSet<NodeId> = HashSet::new();
    for proposal in &plan.proposals {
        let pruned;
        let p = if proposal.references.iter().any(|r| rejected.contains(r)) {
            let refs: Vec<NodeId> = proposal
                .references
                .iter()
                .copied()
                .filter(|r| !rejected.contains(r))
                .collect();
            pruned_references += proposal.references.len() - refs.len();
            pruned = Proposal::new(proposal.new_node, refs);
            &pruned
        } else {
            proposal
        };
        if p.references.is_empty() {
            skipped.push(p.new_node);
            rejected.insert(p.new_node);
            continue;
        }
        let summary = engine.step(p, agents, signals).map_err(|source| RunError {
            period: engine.state().period,
            source,
        })?;
        if !summary.accepted {
            rejected.insert(summary.task);
        }
        trace.push(summary);
    }
    let selections = engine.selection_counts().clone();
    Ok(RunOutcome {
        trace,
        state: engine.into_state(),
        selections,
        skipped,
        pruned_references,
    })
}

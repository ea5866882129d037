//! The two simulation studies: curator-selection frequency against
//! PageRank (experiment 1) and mean peer-prediction reward over a grid of
//! uninformative-strategy shares and signal priors (experiment 2).
//!
//! Cells are independent, each seeded from the master seed and its index,
//! and results are assembled in cell order whatever the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{allocate_signals, allocate_strategies, AgentError, AgentTable, SignalMode, SignalModel, Strategy};
use crate::dataset::ReplayPlan;
use crate::graph::NodeId;
use crate::pagerank::{pagerank, PageRankError};
use crate::peer_prediction::{expected_theta_analytic, JointSignals, PeerPredictionError};
use crate::protocol::{run_cached, RunError, ScoreCache, SimConfig};
use crate::stats::{box_summary, spearman, BoxSummary, StatsError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    PageRank(#[from] PageRankError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    PeerPrediction(#[from] PeerPredictionError),
    #[error("invalid experiment setup: {0}")]
    Setup(String),
}

/// splitmix64 finaliser applied to `master + index * golden`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Setup(e.to_string()))
}

fn grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

// ---------------------------------------------------------------- exp 1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Config {
    /// Template for every run; `n` and `seed` are overwritten per cell.
    pub base: SimConfig,
    pub curator_counts: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Exp1Config {
            base: SimConfig {
                m: 0,
                rewards: false,
                ..SimConfig::default()
            },
            curator_counts: (1..=20).collect(),
            reps: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp1Row {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub spearman: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp1Summary {
    pub n: usize,
    pub summary: BoxSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp1Result {
    pub rows: Vec<Exp1Row>,
    pub summaries: Vec<Exp1Summary>,
}

impl Exp1Result {
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.spearman).collect()
    }

    pub fn medians(&self) -> Vec<(usize, f64)> {
        self.summaries.iter().map(|s| (s.n, s.summary.median)).collect()
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from("n,rep,seed,spearman\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.n, r.rep, r.seed, r.spearman);
        }
        out
    }

    /// Outliers are `;`-separated inside their column.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n,median,q1,q3,wlo,whi,outliers\n");
        for s in &self.summaries {
            let b = &s.summary;
            let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.n,
                b.median,
                b.q1,
                b.q3,
                b.whisker_low,
                b.whisker_high,
                outliers.join(";")
            );
        }
        out
    }
}

/// Spearman correlation between how often each node of the final graph was
/// selected as a curator and its PageRank there. Nodes never selected count
/// as zero.
pub fn selection_rank_correlation(
    cfg: &SimConfig,
    plan: &ReplayPlan,
    cache: Option<&ScoreCache>,
) -> Result<f64, ExperimentError> {
    let out = run_cached(cfg, plan, &AgentTable::truthful(), &SignalModel::constant(true), cache)?;
    let graph = &out.state.graph;
    let pr = pagerank(graph, &cfg.solver())?;
    let freq: Vec<f64> = graph
        .nodes()
        .iter()
        .map(|v| out.selections.get(v).copied().unwrap_or(0) as f64)
        .collect();
    let scores: Vec<f64> = graph
        .nodes()
        .iter()
        .map(|&v| pr.get(v).expect("pagerank covers the graph"))
        .collect();
    Ok(spearman(&freq, &scores)?)
}

pub fn experiment1(plan: &ReplayPlan, cfg: &Exp1Config, jobs: usize) -> Result<Exp1Result, ExperimentError> {
    if cfg.reps == 0 || cfg.curator_counts.is_empty() {
        return Err(ExperimentError::Setup("need at least one curator count and one rep".into()));
    }
    let cells: Vec<(usize, usize, u64)> = cfg
        .curator_counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..cfg.reps).map(move |rep| (n, rep, (i * cfg.reps + rep) as u64)))
        .map(|(n, rep, idx)| (n, rep, derive_seed(cfg.seed, idx)))
        .collect();
    let cache = ScoreCache::new();
    let rows: Result<Vec<Exp1Row>, ExperimentError> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(n, rep, seed)| {
                let run_cfg = SimConfig {
                    n,
                    seed,
                    ..cfg.base.clone()
                };
                let rho = selection_rank_correlation(&run_cfg, plan, Some(&cache))?;
                log::info!("exp1 n={n} rep={rep}: {rho:.4}");
                Ok(Exp1Row {
                    n,
                    rep,
                    seed,
                    spearman: rho,
                })
            })
            .collect()
    });
    let rows = rows?;
    let summaries = cfg
        .curator_counts
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.spearman).collect();
            Ok(Exp1Summary {
                n,
                summary: box_summary(&v)?,
            })
        })
        .collect::<Result<_, StatsError>>()?;
    Ok(Exp1Result { rows, summaries })
}

// ---------------------------------------------------------------- exp 2

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp2Config {
    /// Template for every run; `seed` is overwritten per cell.
    pub base: SimConfig,
    pub epsilons: Vec<f64>,
    pub q_zeros: Vec<f64>,
    /// Independent allocations and runs pooled into each cell.
    pub reps: usize,
    pub seed: u64,
    pub signal_mode: SignalMode,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Exp2Config {
            base: SimConfig {
                n: 10,
                m: 0,
                ..SimConfig::default()
            },
            epsilons: grid(10),
            q_zeros: grid(10),
            reps: 1,
            seed: 0,
            signal_mode: SignalMode::Task,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp2Cell {
    pub epsilon: f64,
    pub q_zero: f64,
    pub mean_theta: f64,
    /// Standard error of the mean, clustered by task (settlements of the
    /// same task share its signal).
    pub stderr: f64,
    pub settlements: usize,
    /// Triples still waiting for enough reports when the replay ended.
    pub unsettled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp2Result {
    pub cells: Vec<Exp2Cell>,
}

impl Exp2Result {
    pub fn cell(&self, epsilon: f64, q_zero: f64) -> Option<&Exp2Cell> {
        self.cells
            .iter()
            .find(|c| (c.epsilon - epsilon).abs() < 1e-9 && (c.q_zero - q_zero).abs() < 1e-9)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,q_zero,mean_theta,stderr,settlements\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.epsilon, c.q_zero, c.mean_theta, c.stderr, c.settlements
            );
        }
        out
    }
}

/// Mean and task-clustered standard error of `values` grouped by `cluster`.
fn clustered_mean(values: &[(u64, i8)]) -> (f64, f64) {
    let total = values.len();
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().map(|&(_, v)| f64::from(v)).sum::<f64>() / total as f64;
    let mut sums: BTreeMap<u64, f64> = BTreeMap::new();
    for &(c, v) in values {
        *sums.entry(c).or_insert(0.0) += f64::from(v) - mean;
    }
    let g = sums.len();
    if g < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = sums.values().map(|s| s * s).sum();
    let var = g as f64 / (g - 1) as f64 * ss / (total as f64 * total as f64);
    (mean, var.sqrt())
}

pub fn exp2_cell(
    plan: &ReplayPlan,
    cfg: &Exp2Config,
    epsilon: f64,
    q_zero: f64,
    cell_index: u64,
    cache: Option<&ScoreCache>,
) -> Result<Exp2Cell, ExperimentError> {
    let nodes: Vec<NodeId> = plan.all_nodes();
    let mut thetas: Vec<(u64, i8)> = Vec::new();
    let mut unsettled = 0;
    for rep in 0..cfg.reps {
        let cell_seed = derive_seed(cfg.seed, cell_index * cfg.reps as u64 + rep as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
        let strategies = allocate_strategies(&nodes, epsilon, &mut rng)?;
        let signals = allocate_signals(&nodes, q_zero, cfg.signal_mode, &mut rng)?;
        let agents = AgentTable::from_strategies(&strategies, 1.0)?;
        let run_cfg = SimConfig {
            seed: derive_seed(cell_seed, 0),
            ..cfg.base.clone()
        };
        let out = run_cached(&run_cfg, plan, &agents, &signals, cache)?;
        // cluster id unique per (rep, task period)
        let offset = rep as u64 * (plan.proposals.len() as u64 + 1);
        thetas.extend(out.state.ledger.entries().iter().map(|e| (offset + e.period, e.theta)));
        unsettled += out.state.pending.len();
    }
    let (mean_theta, stderr) = clustered_mean(&thetas);
    log::info!("exp2 eps={epsilon} q={q_zero}: {mean_theta:.4} +- {stderr:.4}");
    Ok(Exp2Cell {
        epsilon,
        q_zero,
        mean_theta,
        stderr,
        settlements: thetas.len(),
        unsettled,
    })
}

pub fn experiment2(plan: &ReplayPlan, cfg: &Exp2Config, jobs: usize) -> Result<Exp2Result, ExperimentError> {
    if cfg.reps == 0 || cfg.epsilons.is_empty() || cfg.q_zeros.is_empty() {
        return Err(ExperimentError::Setup("empty grid or zero reps".into()));
    }
    let cells: Vec<(f64, f64)> = cfg
        .epsilons
        .iter()
        .flat_map(|&e| cfg.q_zeros.iter().map(move |&q| (e, q)))
        .collect();
    let cache = ScoreCache::new();
    let cells: Result<Vec<Exp2Cell>, ExperimentError> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(e, q))| exp2_cell(plan, cfg, e, q, i as u64, Some(&cache)))
            .collect()
    });
    Ok(Exp2Result { cells: cells? })
}

/// Expected net reward of a random curator pair when each node is
/// uninformative with probability `epsilon` and task signals are 0 with
/// probability `q_zero`, mixing the pairwise analytic expectations.
pub fn exp2_expected_theta(epsilon: f64, q_zero: f64) -> Result<f64, PeerPredictionError> {
    let joint = JointSignals::shared_task_signal(q_zero)?;
    let t = Strategy::Truthful;
    let u = Strategy::Uninformative { p_one: 0.5 };
    let tt = expected_theta_analytic(&joint, &t, &t);
    let tu = expected_theta_analytic(&joint, &t, &u);
    let ut = expected_theta_analytic(&joint, &u, &t);
    let uu = expected_theta_analytic(&joint, &u, &u);
    let e = epsilon;
    Ok((1.0 - e) * (1.0 - e) * tt + e * (1.0 - e) * (tu + ut) + e * e * uu)
}

//! Curator behaviour: reporting strategies, responsiveness and signal
//! allocation.
//!
//! Signals and reports are bits; `true` is 1 (accept) and `false` is 0
//! (reject).

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("response probability {0} outside (0, 1]")]
    InvalidResponseProb(f64),
    #[error("no signal allocated for node {0}")]
    MissingSignal(NodeId),
}

fn check_prob(name: &'static str, value: f64) -> Result<(), AgentError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AgentError::InvalidProbability { name, value })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Truthful,
    Opposite,
    AlwaysZero,
    AlwaysOne,
    /// Reports 1 with probability `p_one`, ignoring the signal.
    Uninformative { p_one: f64 },
}

impl Strategy {
    /// The five strategies used when checking strong truthfulness.
    pub const CANONICAL: [Strategy; 5] = [
        Strategy::Truthful,
        Strategy::Opposite,
        Strategy::AlwaysZero,
        Strategy::AlwaysOne,
        Strategy::Uninformative { p_one: 0.5 },
    ];

    pub fn uninformative(p_one: f64) -> Result<Self, AgentError> {
        check_prob("p_one", p_one)?;
        Ok(Strategy::Uninformative { p_one })
    }

    /// Probability of reporting 1 after observing `signal`.
    pub fn prob_one(&self, signal: bool) -> f64 {
        match *self {
            Strategy::Truthful => f64::from(u8::from(signal)),
            Strategy::Opposite => f64::from(u8::from(!signal)),
            Strategy::AlwaysZero => 0.0,
            Strategy::AlwaysOne => 1.0,
            Strategy::Uninformative { p_one } => p_one,
        }
    }

    pub fn report<R: Rng + ?Sized>(&self, signal: bool, rng: &mut R) -> bool {
        match *self {
            Strategy::Truthful => signal,
            Strategy::Opposite => !signal,
            Strategy::AlwaysZero => false,
            Strategy::AlwaysOne => true,
            Strategy::Uninformative { p_one } => rng.random::<f64>() < p_one,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::Truthful => "truthful".into(),
            Strategy::Opposite => "opposite".into(),
            Strategy::AlwaysZero => "always_zero".into(),
            Strategy::AlwaysOne => "always_one".into(),
            Strategy::Uninformative { p_one } => format!("uninformative({p_one})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub node: NodeId,
    pub strategy: Strategy,
    pub response_prob: f64,
}

impl Agent {
    pub fn new(node: NodeId, strategy: Strategy, response_prob: f64) -> Result<Self, AgentError> {
        if !(response_prob > 0.0 && response_prob <= 1.0) {
            return Err(AgentError::InvalidResponseProb(response_prob));
        }
        if let Strategy::Uninformative { p_one } = strategy {
            check_prob("p_one", p_one)?;
        }
        Ok(Agent {
            node,
            strategy,
            response_prob,
        })
    }
}

/// `None` when the agent does not respond; otherwise its report bit.
pub fn produce_report<R: Rng + ?Sized>(agent: &Agent, observed_signal: bool, rng: &mut R) -> Option<bool> {
    if agent.response_prob < 1.0 && rng.random::<f64>() >= agent.response_prob {
        return None;
    }
    Some(agent.strategy.report(observed_signal, rng))
}

/// Per-node agents with a fallback for nodes that were never allocated.
#[derive(Clone, Debug)]
pub struct AgentTable {
    agents: HashMap<NodeId, Agent>,
    default_strategy: Strategy,
    default_response_prob: f64,
}

impl AgentTable {
    /// Every node truthful and always responsive.
    pub fn truthful() -> Self {
        AgentTable {
            agents: HashMap::new(),
            default_strategy: Strategy::Truthful,
            default_response_prob: 1.0,
        }
    }

    pub fn with_default(strategy: Strategy, response_prob: f64) -> Result<Self, AgentError> {
        let probe = Agent::new(NodeId(0), strategy, response_prob)?;
        Ok(AgentTable {
            agents: HashMap::new(),
            default_strategy: probe.strategy,
            default_response_prob: probe.response_prob,
        })
    }

    pub fn from_strategies(
        strategies: &HashMap<NodeId, Strategy>,
        response_prob: f64,
    ) -> Result<Self, AgentError> {
        let mut table = Self::with_default(Strategy::Truthful, response_prob)?;
        for (&node, &strategy) in strategies {
            table.insert(Agent::new(node, strategy, response_prob)?);
        }
        Ok(table)
    }

    pub fn insert(&mut self, agent: Agent) {
        self.agents.insert(agent.node, agent);
    }

    pub fn get(&self, node: NodeId) -> Agent {
        self.agents.get(&node).copied().unwrap_or(Agent {
            node,
            strategy: self.default_strategy,
            response_prob: self.default_response_prob,
        })
    }
}

/// Which bit a curator observes when reviewing a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    /// The bit allocated to the proposing node; every curator of the task
    /// sees the same bit.
    #[default]
    Task,
    /// The bit allocated to the curator itself, regardless of task.
    Observer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalModel {
    pub mode: SignalMode,
    pub q_zero: f64,
    signals: HashMap<NodeId, bool>,
    fallback: Option<bool>,
}

impl SignalModel {
    /// Every lookup yields `bit`.
    pub fn constant(bit: bool) -> Self {
        SignalModel {
            mode: SignalMode::Task,
            q_zero: if bit { 0.0 } else { 1.0 },
            signals: HashMap::new(),
            fallback: Some(bit),
        }
    }

    pub fn from_map(mode: SignalMode, q_zero: f64, signals: HashMap<NodeId, bool>) -> Self {
        SignalModel {
            mode,
            q_zero,
            signals,
            fallback: None,
        }
    }

    pub fn signal_of(&self, node: NodeId) -> Option<bool> {
        self.signals.get(&node).copied().or(self.fallback)
    }

    /// Bit observed by `curator` on the task proposed by `task`.
    pub fn observed(&self, curator: NodeId, task: NodeId) -> Result<bool, AgentError> {
        let key = match self.mode {
            SignalMode::Task => task,
            SignalMode::Observer => curator,
        };
        self.signal_of(key).ok_or(AgentError::MissingSignal(key))
    }
}

/// Each node independently draws the 50-50 uninformative strategy with
/// probability `epsilon`, otherwise truthful.
pub fn allocate_strategies<R: Rng + ?Sized>(
    nodes: &[NodeId],
    epsilon: f64,
    rng: &mut R,
) -> Result<HashMap<NodeId, Strategy>, AgentError> {
    check_prob("epsilon", epsilon)?;
    Ok(nodes
        .iter()
        .map(|&n| {
            let s = if rng.random::<f64>() < epsilon {
                Strategy::Uninformative { p_one: 0.5 }
            } else {
                Strategy::Truthful
            };
            (n, s)
        })
        .collect())
}

/// i.i.d. signal bits with `Pr(0) = q_zero`.
pub fn allocate_signals<R: Rng + ?Sized>(
    nodes: &[NodeId],
    q_zero: f64,
    mode: SignalMode,
    rng: &mut R,
) -> Result<SignalModel, AgentError> {
    check_prob("q_zero", q_zero)?;
    let signals = nodes
        .iter()
        .map(|&n| (n, rng.random::<f64>() >= q_zero))
        .collect();
    Ok(SignalModel::from_map(mode, q_zero, signals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nodes(n: u64) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    #[test]
    fn mapping_strategies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Agent::new(NodeId(1), Strategy::Truthful, 1.0).unwrap();
        let o = Agent::new(NodeId(1), Strategy::Opposite, 1.0).unwrap();
        assert_eq!(produce_report(&t, true, &mut rng), Some(true));
        assert_eq!(produce_report(&t, false, &mut rng), Some(false));
        assert_eq!(produce_report(&o, true, &mut rng), Some(false));
        assert_eq!(produce_report(&o, false, &mut rng), Some(true));
        for s in [true, false] {
            assert_eq!(Strategy::AlwaysOne.report(s, &mut rng), true);
            assert_eq!(Strategy::AlwaysZero.report(s, &mut rng), false);
        }
    }

    #[test]
    fn uninformative_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Strategy::uninformative(0.5).unwrap();
        for signal in [false, true] {
            let ones = (0..100_000).filter(|_| s.report(signal, &mut rng)).count();
            assert!((ones as f64 / 100_000.0 - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn nonresponse_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Agent::new(NodeId(0), Strategy::Truthful, 0.25).unwrap();
        let answered = (0..40_000)
            .filter(|_| produce_report(&a, true, &mut rng).is_some())
            .count();
        assert!((answered as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn invalid_parameters() {
        assert!(Strategy::uninformative(1.2).is_err());
        assert!(Agent::new(NodeId(0), Strategy::Truthful, 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(allocate_strategies(&nodes(3), -0.1, &mut rng).is_err());
        assert!(allocate_signals(&nodes(3), 2.0, SignalMode::Task, &mut rng).is_err());
    }

    #[test]
    fn strategy_allocation_extremes_and_concentration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let all = nodes(10_000);
        let s = allocate_strategies(&all, 0.0, &mut rng).unwrap();
        assert!(s.values().all(|s| *s == Strategy::Truthful));
        let s = allocate_strategies(&all, 1.0, &mut rng).unwrap();
        assert!(s.values().all(|s| *s == Strategy::Uninformative { p_one: 0.5 }));
        let s = allocate_strategies(&all, 0.3, &mut rng).unwrap();
        let unin = s.values().filter(|s| **s != Strategy::Truthful).count();
        assert!((2850..=3150).contains(&unin), "{unin}");
    }

    #[test]
    fn signal_allocation_extremes_and_concentration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let all = nodes(10_000);
        let m = allocate_signals(&all, 1.0, SignalMode::Task, &mut rng).unwrap();
        assert!(all.iter().all(|&n| m.signal_of(n) == Some(false)));
        let m = allocate_signals(&all, 0.0, SignalMode::Task, &mut rng).unwrap();
        assert!(all.iter().all(|&n| m.signal_of(n) == Some(true)));
        let m = allocate_signals(&all, 0.5, SignalMode::Task, &mut rng).unwrap();
        let zeros = all.iter().filter(|&&n| m.signal_of(n) == Some(false)).count();
        assert!((4850..=5150).contains(&zeros), "{zeros}");
    }

    #[test]
    fn allocation_is_seed_deterministic() {
        let all = nodes(500);
        let a = allocate_strategies(&all, 0.4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = allocate_strategies(&all, 0.4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn signal_modes() {
        let mut map = HashMap::new();
        map.insert(NodeId(1), true);
        map.insert(NodeId(2), false);
        let task = SignalModel::from_map(SignalMode::Task, 0.5, map.clone());
        assert_eq!(task.observed(NodeId(2), NodeId(1)), Ok(true));
        let obs = SignalModel::from_map(SignalMode::Observer, 0.5, map);
        assert_eq!(obs.observed(NodeId(2), NodeId(1)), Ok(false));
        assert_eq!(
            obs.observed(NodeId(3), NodeId(1)),
            Err(AgentError::MissingSignal(NodeId(3)))
        );
        assert_eq!(SignalModel::constant(true).observed(NodeId(8), NodeId(9)), Ok(true));
    }
}

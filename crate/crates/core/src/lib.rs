//! Simulation engine for a token-curated registry organised as an evolving
//! citation DAG: curators are drawn by personalized PageRank around each
//! proposal's references and paid through multi-task peer prediction.

pub mod agents;
pub mod assignment;
pub mod cli;
pub mod dataset;
pub mod experiments;
pub mod graph;
pub mod pagerank;
pub mod peer_prediction;
pub mod protocol;
pub mod staking;
pub mod stats;
pub mod synthetic;

pub use graph::{CitationGraph, NodeId, Proposal};
pub use pagerank::{pagerank, ppr, ScoreVector, SolverConfig};
pub use protocol::{run, Engine, SimConfig};

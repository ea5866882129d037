//! Command-line front end. Parsing is separate from the binary so tests can
//! drive [`main_with_args`] directly.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{allocate_signals, allocate_strategies, AgentTable, SignalMode};
use crate::dataset::{build_replay, extract_component, parse_snap_edge_list, EdgeList, NodeOrder, ReplayPlan};
use crate::experiments::{derive_seed, experiment1, experiment2, Exp1Config, Exp2Config};
use crate::graph::{CitationGraph, NodeId};
use crate::pagerank::{pagerank, ppr};
use crate::protocol::{run, SimConfig};
use crate::staking::{odds_ratio_sign, staking_expected_reward, Sign, StakingScenario};
use crate::synthetic::{generate, SynthConfig, FIXTURE_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

#[derive(Parser, Debug)]
#[command(name = "citedtcr", version, about = "Citation-graph token-curated registry simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Convert a SNAP edge list into a replay plan.
    Ingest(IngestArgs),
    /// Check that a plan or edge list forms a citation DAG.
    Validate(GraphInput),
    /// Global PageRank scores as CSV.
    Pagerank(ScoreArgs),
    /// Personalized PageRank restarted at `--base` as CSV.
    Ppr(PprArgs),
    /// Replay a plan through the engine and write the trace.
    Run(RunArgs),
    /// Selection frequency against PageRank for n = 1..20.
    Exp1(Exp1Args),
    /// Mean reward over the uninformative-share by signal-prior grid.
    Exp2(Exp2Args),
    /// Expected reward of the token-staking baseline.
    Staking(StakingArgs),
    /// Write the synthetic HEP-TH-like edge list.
    Synth(SynthArgs),
    /// Repeat the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct GraphInput {
    /// Replay plan JSON; the graph after inserting every proposal is used.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// SNAP edge list.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Node whose weakly connected component is kept; defaults to the
    /// smallest id present.
    #[arg(long)]
    pub component_of: Option<u64>,
    /// Nodes (in ascending id order) forming the initial graph.
    #[arg(long, default_value_t = 421)]
    pub initial: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: GraphInput,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PprArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Comma-separated restart nodes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub base: Vec<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct EngineArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Flat JSON file with SimConfig fields; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, env = "CITEDTCR_SEED")]
    pub seed: Option<u64>,
    /// Report payouts as theta + 1.
    #[arg(long)]
    pub offset: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum ModeArg {
    Task,
    Observer,
}

impl From<ModeArg> for SignalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Task => SignalMode::Task,
            ModeArg::Observer => SignalMode::Observer,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Share of nodes playing the 50-50 uninformative strategy.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Probability that a node's signal is 0.
    #[arg(long, default_value_t = 0.5)]
    pub q_zero: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Task)]
    pub signal_mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub response_prob: f64,
}

#[derive(Args, Debug, Clone)]
pub struct Exp1Args {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 20)]
    pub max_n: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct Exp2Args {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Task)]
    pub signal_mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct StakingArgs {
    /// Believed probability of siding with the consensus.
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub nstar: u64,
    #[arg(long, default_value_t = 1.0)]
    pub stake: f64,
    #[arg(long, default_value_t = 0.0)]
    pub cost: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the replay plan (1,000 proposals on top of 421 nodes).
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this location instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reproducibility record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the subcommand, with every default made explicit
    /// except `--out`.
    pub args: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config: Option<SimConfig>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    fn new(command: &str, out: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            args: Vec::new(),
            config_path: None,
            config: None,
            inputs: BTreeMap::new(),
            out: out.to_path_buf(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn arg(&mut self, flag: &str, value: impl ToString) {
        self.args.push(format!("--{flag}"));
        self.args.push(value.to_string());
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.to_path_buf());
        self.arg(name, path.display());
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_file(path, &text)
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(data(path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(data(dir.display()))?;
    }
    fs::write(path, text).map_err(data(path.display()))
}

fn load_plan(path: &Path) -> Result<ReplayPlan, CliError> {
    ReplayPlan::from_json(&read_file(path)?).map_err(data(path.display()))
}

fn load_edges(path: &Path) -> Result<EdgeList, CliError> {
    let f = fs::File::open(path).map_err(data(path.display()))?;
    let parsed = parse_snap_edge_list(BufReader::new(f)).map_err(data(path.display()))?;
    if parsed.self_loops + parsed.duplicates > 0 {
        log::warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            parsed.self_loops,
            parsed.duplicates
        );
    }
    Ok(parsed.edges)
}

fn load_graph(input: &GraphInput) -> Result<CitationGraph, CliError> {
    match (&input.plan, &input.edges) {
        (Some(p), _) => load_plan(p)?.replay().map_err(data(p.display())),
        (None, Some(e)) => {
            let edges = load_edges(e)?;
            CitationGraph::build(edges.nodes(), &edges.edges).map_err(data(e.display()))
        }
        (None, None) => Err(CliError::Usage("one of --plan or --edges is required".into())),
    }
}

fn graph_input_args(input: &GraphInput, m: &mut RunManifest) {
    if let Some(p) = &input.plan {
        m.input("plan", p);
    }
    if let Some(e) = &input.edges {
        m.input("edges", e);
    }
}

fn solver_overrides(cfg: &mut SimConfig, s: &SolverArgs) {
    if let Some(a) = s.alpha {
        cfg.alpha = a;
    }
    if let Some(t) = s.tol {
        cfg.tol = t;
    }
    if let Some(i) = s.max_iter {
        cfg.max_iter = i;
    }
}

fn solver_manifest(cfg: &SimConfig, m: &mut RunManifest) {
    m.arg("alpha", cfg.alpha);
    m.arg("tol", cfg.tol);
    m.arg("max-iter", cfg.max_iter);
}

/// Config file, then flags; the result is validated.
fn resolve_config(e: &EngineArgs, base: SimConfig) -> Result<SimConfig, CliError> {
    let mut cfg = match &e.config {
        Some(path) => {
            let text = read_file(path)?;
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(data(path.display()))?;
            // template values fill in what the file leaves out
            let template = serde_json::to_value(&base).expect("config serializes");
            if let (Some(obj), Some(t)) = (v.as_object_mut(), template.as_object()) {
                for (k, val) in t {
                    obj.entry(k.clone()).or_insert_with(|| val.clone());
                }
            }
            serde_json::from_value(v).map_err(data(path.display()))?
        }
        None => base,
    };
    solver_overrides(&mut cfg, &e.solver);
    if let Some(n) = e.n {
        cfg.n = n;
    }
    if let Some(m) = e.m {
        cfg.m = m;
    }
    if let Some(s) = e.seed {
        cfg.seed = s;
    }
    if e.offset {
        cfg.offset = true;
    }
    cfg.validate().map_err(|err| CliError::Usage(err.to_string()))?;
    Ok(cfg)
}

fn engine_manifest(command: &str, e: &EngineArgs, cfg: &SimConfig) -> RunManifest {
    let mut m = RunManifest::new(command, &e.out);
    m.input("plan", &e.plan);
    if let Some(c) = &e.config {
        m.input("config", c);
    }
    m.config_path = e.config.clone();
    solver_manifest(cfg, &mut m);
    m.arg("n", cfg.n);
    m.arg("m", cfg.m);
    m.arg("seed", cfg.seed);
    if cfg.offset {
        m.args.push("--offset".into());
    }
    m.config = Some(cfg.clone());
    m.seed = Some(cfg.seed);
    m
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a, stdout),
        Command::Validate(a) => validate(a, stdout),
        Command::Pagerank(a) => scores(a, None, stdout),
        Command::Ppr(a) => scores(&a.score, Some(&a.base), stdout),
        Command::Run(a) => run_cmd(a),
        Command::Exp1(a) => exp1_cmd(a),
        Command::Exp2(a) => exp2_cmd(a),
        Command::Staking(a) => staking_cmd(a, stdout),
        Command::Synth(a) => synth_cmd(a),
        Command::Rerun(a) => rerun_cmd(a, stdout),
    }
}

fn out_err(e: io::Error) -> CliError {
    CliError::Data(format!("stdout: {e}"))
}

fn ingest(a: &IngestArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let edges = load_edges(&a.input)?;
    let seed = match a.component_of {
        Some(s) => NodeId(s),
        None => *edges
            .nodes()
            .iter()
            .min()
            .ok_or_else(|| CliError::Data(format!("{}: no edges", a.input.display())))?,
    };
    let component = extract_component(&edges, seed).map_err(data(a.input.display()))?;
    let (plan, stats) =
        build_replay(&component, &NodeOrder::AscendingId, a.initial).map_err(data(a.input.display()))?;
    write_file(&a.out, &plan.to_json())?;
    let mut m = RunManifest::new("ingest", &a.out);
    m.input("input", &a.input);
    m.arg("component-of", seed);
    m.arg("initial", a.initial);
    m.write(&manifest_beside(&a.out))?;
    writeln!(
        stdout,
        "nodes={} initial={} proposals={} dropped_edges={} excluded_nodes={}",
        stats.total_nodes,
        plan.initial_nodes.len(),
        plan.proposals.len(),
        stats.dropped_edges,
        stats.excluded_nodes.len()
    )
    .map_err(out_err)
}

fn validate(a: &GraphInput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let g = load_graph(a)?;
    g.validate_dag().map_err(|e| CliError::Data(format!("invalid DAG: {e}")))?;
    writeln!(stdout, "ok: {} nodes, {} edges", g.node_count(), g.edge_count()).map_err(out_err)
}

fn manifest_beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

fn scores(a: &ScoreArgs, base: Option<&[u64]>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let g = load_graph(&a.input)?;
    let mut cfg = SimConfig::default();
    solver_overrides(&mut cfg, &a.solver);
    let solver = cfg.solver();
    let result = match base {
        None => pagerank(&g, &solver),
        Some(b) => ppr(&g, &b.iter().map(|&x| NodeId(x)).collect::<Vec<_>>(), &solver),
    };
    let sv = result.map_err(|e| CliError::Data(e.to_string()))?;
    let csv = sv.to_csv();
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            let mut m = RunManifest::new(if base.is_some() { "ppr" } else { "pagerank" }, path);
            graph_input_args(&a.input, &mut m);
            solver_manifest(&cfg, &mut m);
            if let Some(b) = base {
                let list: Vec<String> = b.iter().map(u64::to_string).collect();
                m.arg("base", list.join(","));
            }
            m.write(&manifest_beside(path))
        }
        None => stdout.write_all(csv.as_bytes()).map_err(out_err),
    }
}

fn run_cmd(a: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&a.engine, SimConfig::default())?;
    let plan = load_plan(&a.engine.plan)?;
    let nodes = plan.all_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let usage = |e: crate::agents::AgentError| CliError::Usage(e.to_string());
    let strategies = allocate_strategies(&nodes, a.epsilon, &mut rng).map_err(usage)?;
    let signals = allocate_signals(&nodes, a.q_zero, a.signal_mode.into(), &mut rng).map_err(usage)?;
    let agents = AgentTable::from_strategies(&strategies, a.response_prob).map_err(usage)?;
    let out = run(&cfg, &plan, &agents, &signals).map_err(|e| CliError::Data(e.to_string()))?;

    let dir = &a.engine.out;
    write_file(&dir.join("trace.jsonl"), &out.trace_jsonl())?;
    write_file(&dir.join("rewards.csv"), &out.state.ledger.to_csv())?;
    let mut sel = String::from("node_id,count\n");
    let mut counts: Vec<(NodeId, u64)> = out.selections.iter().map(|(&k, &v)| (k, v)).collect();
    counts.sort_unstable();
    for (node, c) in counts {
        sel.push_str(&format!("{node},{c}\n"));
    }
    write_file(&dir.join("selections.csv"), &sel)?;

    let mut m = engine_manifest("run", &a.engine, &cfg);
    m.arg("epsilon", a.epsilon);
    m.arg("q-zero", a.q_zero);
    m.arg(
        "signal-mode",
        match a.signal_mode {
            ModeArg::Task => "task",
            ModeArg::Observer => "observer",
        },
    );
    m.arg("response-prob", a.response_prob);
    m.write(&dir.join("manifest.json"))
}

fn exp1_cmd(a: &Exp1Args) -> Result<(), CliError> {
    let defaults = Exp1Config::default();
    let cfg = resolve_config(&a.engine, SimConfig { n: 1, ..defaults.base.clone() })?;
    let plan = load_plan(&a.engine.plan)?;
    let exp = Exp1Config {
        base: cfg.clone(),
        curator_counts: (1..=a.max_n).collect(),
        reps: a.reps,
        seed: cfg.seed,
    };
    let result = experiment1(&plan, &exp, a.jobs).map_err(|e| CliError::Data(e.to_string()))?;
    let dir = &a.engine.out;
    write_file(&dir.join("exp1.csv"), &result.rows_csv())?;
    write_file(&dir.join("exp1_summary.csv"), &result.summary_csv())?;
    let mut m = engine_manifest("exp1", &a.engine, &cfg);
    m.arg("reps", a.reps);
    m.arg("max-n", a.max_n);
    m.arg("jobs", a.jobs);
    m.write(&dir.join("manifest.json"))
}

fn exp2_cmd(a: &Exp2Args) -> Result<(), CliError> {
    let defaults = Exp2Config::default();
    let cfg = resolve_config(&a.engine, defaults.base.clone())?;
    let plan = load_plan(&a.engine.plan)?;
    let exp = Exp2Config {
        base: cfg.clone(),
        reps: a.reps,
        seed: cfg.seed,
        signal_mode: a.signal_mode.into(),
        ..defaults
    };
    let result = experiment2(&plan, &exp, a.jobs).map_err(|e| CliError::Data(e.to_string()))?;
    let dir = &a.engine.out;
    write_file(&dir.join("exp2.csv"), &result.to_csv())?;
    let mut m = engine_manifest("exp2", &a.engine, &cfg);
    m.arg("reps", a.reps);
    m.arg(
        "signal-mode",
        match a.signal_mode {
            ModeArg::Task => "task",
            ModeArg::Observer => "observer",
        },
    );
    m.arg("jobs", a.jobs);
    m.write(&dir.join("manifest.json"))
}

fn staking_cmd(a: &StakingArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = StakingScenario::new(a.p, a.stake, a.n, a.nstar, a.cost).map_err(|e| CliError::Usage(e.to_string()))?;
    let e = staking_expected_reward(&s).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(stdout, "{e}").map_err(out_err)?;
    let sign = Sign::of(e);
    match odds_ratio_sign(&s) {
        Ok(odds) if a.cost == 0.0 => writeln!(stdout, "sign: {sign} (odds ratio: {odds})"),
        _ => writeln!(stdout, "sign: {sign}"),
    }
    .map_err(out_err)
}

fn synth_cmd(a: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        seed: a.seed.unwrap_or(SynthConfig::default().seed),
        ..SynthConfig::default()
    };
    let (edges, _) = generate(&cfg);
    write_file(&a.out, &edges.to_snap_text(&FIXTURE_HEADER))?;
    if let Some(p) = &a.plan_out {
        let plan = crate::synthetic::replay_plan(&cfg).map_err(|e| CliError::Data(e.to_string()))?;
        write_file(p, &plan.to_json())?;
    }
    Ok(())
}

fn rerun_cmd(a: &RerunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = read_file(&a.manifest)?;
    let m: RunManifest = serde_json::from_str(&text).map_err(data(a.manifest.display()))?;
    if m.command == "rerun" {
        return Err(CliError::Data("manifest records a rerun".into()));
    }
    let out = a.out.clone().unwrap_or(m.out.clone());
    let mut argv: Vec<OsString> = vec!["citedtcr".into(), m.command.clone().into()];
    argv.extend(m.args.iter().map(OsString::from));
    argv.push("--out".into());
    argv.push(out.into_os_string());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Data(format!("{}: {e}", a.manifest.display())))?;
    execute(&cli.command, stdout)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

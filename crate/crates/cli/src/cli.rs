//! `reparo` command line. Exit codes: 0 solved, 2 infeasible, 3 bad input,
//! 4 limit reached, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use reparo_core::domain::RepairMethod;
use reparo_core::repair::RepairSpec;
use reparo_core::robustness::{TwoStageMode, TwoStageOptions};
use reparo_core::scenario::Scenario;
use reparo_core::vns::{trajectory_jsonl, VnsParams};
use reparo_core::SolveParams;

use crate::ops::{self, parse_json, status_exit_code, to_pretty, DomainKind, Instance, OpError};
use crate::service::{serve, ServeConfig};

#[derive(Debug, Parser)]
#[command(name = "reparo", version, about = "Plan, repair and stress-test tail assignments and production plans")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the nominal planning problem.
    Plan(PlanArgs),
    /// Repair an incumbent plan after a disruption scenario.
    Repair(RepairArgs),
    /// Price the recovery of a plan under each scenario of a set.
    Evaluate(EvaluateArgs),
    /// Find a plan that balances nominal cost against recovery cost.
    Robust(RobustArgs),
    /// Check an instance, and optionally a plan against it.
    Validate(ValidateArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Detected from the document when omitted.
    #[arg(long, value_enum)]
    pub domain: Option<DomainKind>,
    #[arg(long)]
    pub instance: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, env = "REPARO_NODE_LIMIT")]
    pub node_limit: Option<usize>,
    /// Seconds.
    #[arg(long, env = "REPARO_TIME_LIMIT")]
    pub time_limit: Option<f64>,
}

impl SolveArgs {
    fn params(&self) -> SolveParams {
        let mut p = SolveParams::default();
        if let Some(n) = self.node_limit {
            p.node_limit = n;
        }
        p.time_limit = self.time_limit;
        p
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodKind {
    Exact,
    Vns,
}

#[derive(Debug, Args)]
pub struct RepairOptions {
    /// Repair spec (freezes, relaxations, weights); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub iter_budget: Option<usize>,
}

impl RepairOptions {
    fn spec(&self) -> Result<RepairSpec, OpError> {
        let spec: RepairSpec = match &self.spec {
            Some(p) => parse_json(&read(p)?, "spec")?,
            None => RepairSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn method(&self) -> Result<RepairMethod, OpError> {
        Ok(match self.method {
            MethodKind::Exact => RepairMethod::Exact,
            MethodKind::Vns => {
                let mut p = VnsParams { seed: self.seed, k_max: self.k_max, ..VnsParams::default() };
                if let Some(b) = self.iter_budget {
                    p.iter_budget = b;
                }
                p.validate()?;
                RepairMethod::Vns(p)
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Plan to repair: a bare plan or the output of `plan`.
    #[arg(long)]
    pub incumbent: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub repair: RepairOptions,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the search trajectory as JSON lines.
    #[arg(long)]
    pub trajectory_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub plan: PathBuf,
    /// A JSON array of scenarios.
    #[arg(long)]
    pub scenarios: PathBuf,
    #[command(flatten)]
    pub repair: RepairOptions,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Write the per-scenario table as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeKind {
    Simultaneous,
    Separate,
}

#[derive(Debug, Args)]
pub struct RobustArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "simultaneous")]
    pub mode: ModeKind,
    /// Candidate plans ranked in separate mode.
    #[arg(long, default_value_t = 10)]
    pub pool_size: usize,
    #[command(flatten)]
    pub repair: RepairOptions,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "REPARO_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Snapshot directory; the store lives in memory when omitted.
    #[arg(long, env = "REPARO_STORE")]
    pub store_dir: Option<PathBuf>,
    /// Solver threads; defaults to the available parallelism.
    #[arg(long, env = "REPARO_WORKERS")]
    pub workers: Option<usize>,
    /// Seconds any single request may take.
    #[arg(long, env = "REPARO_REQUEST_TIMEOUT", default_value_t = 30.0)]
    pub request_timeout: f64,
    #[command(flatten)]
    pub solve: SolveArgs,
}

fn read(path: &Path) -> Result<String, OpError> {
    fs::read_to_string(path).map_err(|e| OpError::Input(format!("{}: {e}", path.display())))
}

fn load_instance(a: &InstanceArgs) -> Result<Instance, OpError> {
    Instance::parse(&read(&a.instance)?, a.domain)
}

fn load_value(path: &Path, what: &str) -> Result<Value, OpError> {
    parse_json(&read(path)?, what)
}

fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, OpError> {
    Ok(Scenario::list_from_json(&read(path)?)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), OpError> {
    match out {
        // Unwritable output paths count as bad input.
        Some(p) => fs::write(p, text).map_err(|e| OpError::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_command(cmd: Command) -> Result<i32, OpError> {
    match cmd {
        Command::Plan(a) => {
            let out = ops::plan(&load_instance(&a.instance)?, &a.solve.params())?;
            emit(a.out.as_deref(), &to_pretty(&out))?;
            Ok(status_exit_code(out.status))
        }
        Command::Repair(a) => {
            let inst = load_instance(&a.instance)?;
            let incumbent = load_value(&a.incumbent, "incumbent")?;
            let scenario = Scenario::from_json(&read(&a.scenario)?)?;
            let out = ops::repair_plan(&inst, &incumbent, &scenario, &a.repair.spec()?, &a.repair.method()?, &a.solve.params())?;
            emit(a.out.as_deref(), &to_pretty(&out))?;
            if let Some(p) = &a.trajectory_log {
                emit(Some(p), &trajectory_jsonl(&out.result.trajectory))?;
            }
            Ok(status_exit_code(out.status))
        }
        Command::Evaluate(a) => {
            let inst = load_instance(&a.instance)?;
            let plan = load_value(&a.plan, "plan")?;
            let scenarios = load_scenarios(&a.scenarios)?;
            let report = ops::evaluate(&inst, &plan, &scenarios, &a.repair.spec()?, &a.repair.method()?, &a.solve.params())?;
            let text = if a.csv { report.to_csv() } else { to_pretty(&report) };
            emit(a.out.as_deref(), &text)?;
            Ok(ops::report_exit_code(&report))
        }
        Command::Robust(a) => {
            let inst = load_instance(&a.instance)?;
            let scenarios = load_scenarios(&a.scenarios)?;
            let mode = match a.mode {
                ModeKind::Simultaneous => TwoStageMode::Simultaneous,
                ModeKind::Separate => TwoStageMode::Separate,
            };
            let options = TwoStageOptions { pool_size: a.pool_size, ..TwoStageOptions::new(a.alpha, mode) };
            options.validate()?;
            let out = ops::robust(&inst, &scenarios, &a.repair.spec()?, &options, &a.repair.method()?, &a.solve.params())?;
            emit(a.out.as_deref(), &to_pretty(&out))?;
            Ok(status_exit_code(out.status))
        }
        Command::Validate(a) => {
            let inst = load_instance(&a.instance)?;
            let plan = a.plan.as_deref().map(|p| load_value(p, "plan")).transpose()?;
            let out = ops::validate(&inst, plan.as_ref())?;
            emit(a.out.as_deref(), &to_pretty(&out))?;
            Ok(if out.valid { 0 } else { 2 })
        }
        Command::Serve(a) => {
            if !(a.request_timeout.is_finite() && a.request_timeout > 0.0) {
                return Err(OpError::Input("request timeout must be a positive number of seconds".into()));
            }
            let workers = a
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let config = ServeConfig {
                listen: a.listen,
                store_dir: a.store_dir,
                workers,
                request_timeout: Duration::from_secs_f64(a.request_timeout),
                params: a.solve.params(),
            };
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| OpError::Input(e.to_string()))?;
            match rt.block_on(serve(config)) {
                Ok(()) => Ok(0),
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(1)
                }
            }
        }
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

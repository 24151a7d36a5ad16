//! Operations shared by the command line and the HTTP service. Both front
//! ends call these with parsed inputs, so equal inputs give equal outputs.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use reparo_core::domain::{apply_scenario, detect_conflicts, repair, solve_plan, Domain, ProductionDomain, RepairMethod, TailDomain};
use reparo_core::model::Status;
use reparo_core::production::ProductionInstance;
use reparo_core::repair::{RepairResult, RepairSpec};
use reparo_core::robustness::{evaluate_recoverability, two_stage_solve, RecoverabilityReport, TwoStageOptions, TwoStageOutcome};
use reparo_core::scenario::Scenario;
use reparo_core::tail::Timetable;
use reparo_core::{SolveParams, SolveStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Tail,
    Production,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", content = "instance", rename_all = "lowercase")]
pub enum Instance {
    Tail(Timetable),
    Production(ProductionInstance),
}

#[derive(Debug, Error)]
pub enum OpError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] reparo_core::Error),
}

impl OpError {
    pub fn is_input(&self) -> bool {
        match self {
            OpError::Input(_) => true,
            OpError::Core(e) => e.is_input_error(),
        }
    }

    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            OpError::Core(reparo_core::Error::NoSolution(s)) => status_exit_code(*s),
            e if e.is_input() => 3,
            _ => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> OpError {
    OpError::Input(e.to_string())
}

/// 0 for a solved problem, 2 when no feasible point exists, 4 when a limit
/// cut the search short.
pub fn status_exit_code(status: Status) -> i32 {
    match status {
        Status::Optimal | Status::Feasible => 0,
        Status::Infeasible | Status::Unbounded => 2,
        Status::LimitReached => 4,
    }
}

pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, OpError> {
    serde_json::from_str(text).map_err(|e| OpError::Input(format!("{what}: {e}")))
}

impl Instance {
    pub fn domain(&self) -> DomainKind {
        match self {
            Instance::Tail(_) => DomainKind::Tail,
            Instance::Production(_) => DomainKind::Production,
        }
    }

    /// Reads a bare instance document. Without an explicit domain, a
    /// document with `flights` is a timetable and one with `periods` a
    /// production instance.
    pub fn from_value(value: Value, domain: Option<DomainKind>) -> Result<Self, OpError> {
        let domain = match domain {
            Some(d) => d,
            None if value.get("flights").is_some() => DomainKind::Tail,
            None if value.get("periods").is_some() => DomainKind::Production,
            None => return Err(input("cannot tell the domain of the instance; pass --domain")),
        };
        let text = value.to_string();
        Ok(match domain {
            DomainKind::Tail => Instance::Tail(Timetable::from_json(&text).map_err(input)?),
            DomainKind::Production => Instance::Production(ProductionInstance::from_json(&text).map_err(input)?),
        })
    }

    pub fn parse(text: &str, domain: Option<DomainKind>) -> Result<Self, OpError> {
        Self::from_value(parse_json(text, "instance")?, domain)
    }
}

macro_rules! dispatch {
    ($inst:expr, $f:ident ( $($arg:expr),* )) => {
        match $inst {
            Instance::Tail(i) => $f::<TailDomain>(DomainKind::Tail, i, $($arg),*),
            Instance::Production(i) => $f::<ProductionDomain>(DomainKind::Production, i, $($arg),*),
        }
    };
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Accepts a bare plan or a `plan` output document.
fn read_plan<D: Domain>(value: &Value) -> Result<D::Plan, OpError> {
    let inner = match value.get("plan") {
        Some(p) if value.get("status").is_some() => p,
        _ => value,
    };
    if inner.is_null() {
        return Err(input("the plan document holds no plan"));
    }
    serde_json::from_value(inner.clone()).map_err(|e| input(format!("plan: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub domain: DomainKind,
    pub status: Status,
    pub objective: Option<f64>,
    pub plan: Option<Value>,
    pub kpis: BTreeMap<String, f64>,
    pub stats: SolveStats,
}

fn plan_impl<D: Domain>(domain: DomainKind, inst: &D::Instance, params: &SolveParams) -> Result<PlanOutput, OpError> {
    let out = solve_plan::<D>(inst, params)?;
    Ok(PlanOutput {
        domain,
        status: out.status,
        objective: out.objective,
        plan: out.plan.as_ref().map(to_value),
        kpis: out.kpis,
        stats: out.stats,
    })
}

pub fn plan(inst: &Instance, params: &SolveParams) -> Result<PlanOutput, OpError> {
    dispatch!(inst, plan_impl(params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutput {
    pub domain: DomainKind,
    pub scenario: String,
    pub status: Status,
    /// Why the incumbent does not fit the disrupted instance.
    pub conflicts: Vec<Value>,
    pub plan: Option<Value>,
    pub result: RepairResult,
}

fn repair_impl<D: Domain>(
    domain: DomainKind,
    inst: &D::Instance,
    incumbent: &Value,
    scenario: &Scenario,
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RepairOutput, OpError> {
    let plan = read_plan::<D>(incumbent)?;
    let perturbed = apply_scenario::<D>(inst, scenario)?;
    let conflicts = detect_conflicts::<D>(&perturbed, &plan)?;
    let out = repair::<D>(inst, &plan, scenario, spec, method, params)?;
    Ok(RepairOutput {
        domain,
        scenario: scenario.id.clone(),
        status: out.result.status,
        conflicts: conflicts.iter().map(to_value).collect(),
        plan: out.plan.as_ref().map(to_value),
        result: out.result,
    })
}

pub fn repair_plan(
    inst: &Instance,
    incumbent: &Value,
    scenario: &Scenario,
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RepairOutput, OpError> {
    dispatch!(inst, repair_impl(incumbent, scenario, spec, method, params))
}

fn evaluate_impl<D: Domain>(
    _: DomainKind,
    inst: &D::Instance,
    plan: &Value,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RecoverabilityReport, OpError> {
    let plan = read_plan::<D>(plan)?;
    Ok(evaluate_recoverability::<D>(inst, &plan, scenarios, spec, method, params)?)
}

pub fn evaluate(
    inst: &Instance,
    plan: &Value,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RecoverabilityReport, OpError> {
    dispatch!(inst, evaluate_impl(plan, scenarios, spec, method, params))
}

fn robust_impl<D: Domain>(
    _: DomainKind,
    inst: &D::Instance,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    options: &TwoStageOptions,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<TwoStageOutcome<Value>, OpError> {
    let out = two_stage_solve::<D>(inst, scenarios, spec, options, method, params)?;
    Ok(TwoStageOutcome {
        mode: out.mode,
        alpha: out.alpha,
        status: out.status,
        plan: to_value(&out.plan),
        total: out.total,
        report: out.report,
        extensive_objective: out.extensive_objective,
        candidates: out.candidates,
        stats: out.stats,
    })
}

pub fn robust(
    inst: &Instance,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    options: &TwoStageOptions,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<TwoStageOutcome<Value>, OpError> {
    dispatch!(inst, robust_impl(scenarios, spec, options, method, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateOutput {
    pub domain: DomainKind,
    pub valid: bool,
    pub violations: Vec<Value>,
}

fn validate_impl<D: Domain>(domain: DomainKind, inst: &D::Instance, plan: Option<&Value>) -> Result<ValidateOutput, OpError> {
    let violations = match plan {
        Some(p) => D::validate(inst, &read_plan::<D>(p)?)?.iter().map(to_value).collect(),
        None => Vec::new(),
    };
    Ok(ValidateOutput {
        domain,
        valid: violations.is_empty(),
        violations,
    })
}

/// Instance checks happen while parsing; with a plan, also lists every
/// rule the plan breaks.
pub fn validate(inst: &Instance, plan: Option<&Value>) -> Result<ValidateOutput, OpError> {
    dispatch!(inst, validate_impl(plan))
}

/// Worst exit code over a report's rows.
pub fn report_exit_code(report: &RecoverabilityReport) -> i32 {
    report
        .rows
        .iter()
        .map(|r| if r.recovery_price.is_some() && r.status != Status::LimitReached { 0 } else { status_exit_code(r.status) })
        .max()
        .unwrap_or(0)
}

/// Pretty JSON with a trailing newline, the format of every output file.
pub fn to_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

//! Recoverable robustness: what it costs to repair a plan across a set of
//! scenarios, and planning with that cost in the objective.
//!
//! The recovery price of a plan under a scenario is the optimal repair
//! objective minus `w_cost` times the plan's nominal objective. It is 0 for
//! an empty scenario by definition and may be negative when a disruption
//! makes the plan cheaper (a cancelled flight, say). A plan's robust total is
//! `nominal + alpha * weighted_mean(price)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{apply_scenario, plan_objective, repair, Domain, RepairMethod};
use crate::error::Error;
use crate::kernel::{solve_milp, SolveParams, SolveStats, MAX_CONSTRAINTS, MAX_VARIABLES};
use crate::model::{ConstraintSpec, LinExpr, Model, Sense, Solution, Status, VarId, VarKind, VarSpec};
use crate::repair::{freeze_mask, relax_penalties, RepairSpec};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub weight: f64,
    pub status: Status,
    pub repair_objective: Option<f64>,
    /// `None` when the repair produced no solution.
    pub recovery_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverabilityReport {
    pub nominal_objective: f64,
    /// Sorted by scenario id.
    pub rows: Vec<ScenarioRow>,
    /// Aggregates are `None` when a row has no price.
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub weighted_mean: Option<f64>,
}

impl RecoverabilityReport {
    /// Assembles a report, sorting rows by scenario id and computing the
    /// aggregates.
    pub fn from_rows(nominal_objective: f64, mut rows: Vec<ScenarioRow>) -> Self {
        rows.sort_by(|a, b| a.scenario.cmp(&b.scenario));
        let prices: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.recovery_price.map(|p| (r.weight, p))).collect();
        let (max, mean, weighted_mean) = match prices {
            Some(ps) if !ps.is_empty() => {
                let max = ps.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                let mean = ps.iter().map(|p| p.1).sum::<f64>() / ps.len() as f64;
                let w: f64 = ps.iter().map(|p| p.0).sum();
                let wmean = (w > 0.0).then(|| ps.iter().map(|(w, p)| w * p).sum::<f64>() / w);
                (Some(max), Some(mean), wmean)
            }
            _ => (None, None, None),
        };
        Self {
            nominal_objective,
            rows,
            max,
            mean,
            weighted_mean,
        }
    }

    /// `nominal + alpha * weighted_mean`.
    pub fn total(&self, alpha: f64) -> Option<f64> {
        self.weighted_mean.map(|m| self.nominal_objective + alpha * m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per scenario; missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

fn check_scenarios(scenarios: &[Scenario]) -> Result<(), Error> {
    if scenarios.is_empty() {
        return Err(Error::InvalidScenario("scenario set is empty".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    if scenarios.iter().map(|s| s.weight).sum::<f64>() <= 0.0 {
        return Err(Error::InvalidScenario("scenario weights sum to zero".into()));
    }
    Ok(())
}

fn price_row<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    nominal: f64,
    scenario: &Scenario,
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<ScenarioRow, Error> {
    let base = spec.weights.w_cost * nominal;
    let (status, repair_objective) = if scenario.is_empty() {
        (Status::Optimal, Some(base))
    } else {
        let out = repair::<D>(inst, plan, scenario, spec, method, params)?;
        (out.result.status, out.result.repair_objective())
    };
    Ok(ScenarioRow {
        scenario: scenario.id.clone(),
        weight: scenario.weight,
        status,
        repair_objective,
        recovery_price: if scenario.is_empty() { Some(0.0) } else { repair_objective.map(|r| r - base) },
    })
}

/// Recovery price of `plan` under `scenario`.
pub fn recovery_price<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    scenario: &Scenario,
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<f64, Error> {
    let nominal = plan_objective::<D>(inst, plan)?;
    let row = price_row::<D>(inst, plan, nominal, scenario, spec, method, params)?;
    row.recovery_price.ok_or(Error::NoSolution(row.status))
}

/// Prices `plan` under every scenario. Scenarios are repaired in parallel;
/// the report does not depend on completion order.
pub fn evaluate_recoverability<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RecoverabilityReport, Error> {
    check_scenarios(scenarios)?;
    spec.validate()?;
    let nominal = plan_objective::<D>(inst, plan)?;
    let rows = scenarios
        .par_iter()
        .map(|s| price_row::<D>(inst, plan, nominal, s, spec, method, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RecoverabilityReport::from_rows(nominal, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoStageMode {
    /// One extensive-form MILP over the plan and every scenario's recovery.
    Simultaneous,
    /// Rank a pool of nominal plans by their evaluated robust total.
    Separate,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOptions {
    pub alpha: f64,
    pub mode: TwoStageMode,
    /// Candidate plans considered in separate mode.
    #[serde(default = "ten")]
    pub pool_size: usize,
}

impl TwoStageOptions {
    pub fn new(alpha: f64, mode: TwoStageMode) -> Self {
        Self { alpha, mode, pool_size: 10 }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidParams(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.pool_size == 0 {
            return Err(Error::InvalidParams("pool_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub nominal_objective: f64,
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome<P> {
    pub mode: TwoStageMode,
    pub alpha: f64,
    /// Solver status of the extensive form, or of the pool search.
    pub status: Status,
    pub plan: P,
    /// Robust total of `plan`, from `report`.
    pub total: Option<f64>,
    pub report: RecoverabilityReport,
    /// Extensive-form optimum (simultaneous mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extensive_objective: Option<f64>,
    /// Evaluated pool, in discovery order (separate mode).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
    pub stats: SolveStats,
}

fn remap(expr: &LinExpr, map: &[VarId]) -> LinExpr {
    LinExpr::from_terms(expr.terms().iter().map(|&(c, v)| (c, map[v.index()]))).plus_constant(expr.constant_term())
}

/// Extensive form: the nominal variables as first stage, plus one prefixed
/// copy of each non-empty scenario's repair model whose deviation and
/// freezes refer to the first-stage variables.
pub fn build_extensive_form<D: Domain>(
    inst: &D::Instance,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    alpha: f64,
) -> Result<Model, Error> {
    check_scenarios(scenarios)?;
    spec.validate()?;
    let nominal = D::formulate(inst)?;
    let mut ef = Model::new();
    for v in nominal.variables() {
        ef.add_variable(v.clone())?;
    }
    for c in nominal.constraints() {
        ef.add_constraint(c.clone())?;
    }
    let w = spec.weights;
    let total_weight: f64 = scenarios.iter().map(|s| s.weight).sum();
    let busy_weight: f64 = scenarios.iter().filter(|s| !s.is_empty()).map(|s| s.weight).sum();
    let mut objective = nominal.objective().scaled(1.0 - alpha * w.w_cost * busy_weight / total_weight);

    for (i, s) in scenarios.iter().enumerate().filter(|(_, s)| !s.is_empty()) {
        let m = D::formulate(&apply_scenario::<D>(inst, s)?)?;
        let (frozen, _) = freeze_mask(&m, spec)?;
        let (penalties, _) = relax_penalties(&m, spec)?;
        let prefix = format!("s{i}:");
        let mut map = Vec::with_capacity(m.num_vars());
        for v in m.variables() {
            let mut copy = v.clone();
            copy.name = format!("{prefix}{}", v.name);
            map.push(ef.add_variable(copy)?);
        }
        let mut recovery = remap(m.objective(), &map).scaled(w.w_cost);
        for (c, penalty) in m.constraints().iter().zip(penalties) {
            let mut expr = remap(&c.expr, &map);
            if let Some(p) = penalty {
                if matches!(c.sense, Sense::Le | Sense::Eq) {
                    let over = ef.add_variable(VarSpec::continuous(format!("{prefix}over[{}]", c.name), 0.0, f64::INFINITY))?;
                    expr.add_term(-1.0, over);
                    recovery.add_term(p, over);
                }
                if matches!(c.sense, Sense::Ge | Sense::Eq) {
                    let under = ef.add_variable(VarSpec::continuous(format!("{prefix}under[{}]", c.name), 0.0, f64::INFINITY))?;
                    expr.add_term(1.0, under);
                    recovery.add_term(p, under);
                }
            }
            ef.add_constraint(ConstraintSpec::new(format!("{prefix}{}", c.name), expr, c.sense, c.rhs))?;
        }
        for (j, v) in m.variables().iter().enumerate() {
            let y = map[j];
            let x = nominal.var_by_name(&v.name);
            // y - x, or y alone for a binary the nominal plan could not use.
            let diff = match x {
                Some(x) => LinExpr::new().term(1.0, y).term(-1.0, x),
                None if v.kind == VarKind::Binary => LinExpr::new().term(1.0, y),
                None => continue,
            };
            if frozen[j] {
                ef.add_constraint(ConstraintSpec::new(format!("{prefix}link[{}]", v.name), diff, Sense::Eq, 0.0))?;
                continue;
            }
            let binary = v.kind == VarKind::Binary && x.is_none_or(|x| nominal.variable(x).kind == VarKind::Binary);
            let weight = if binary { w.w_dev } else { w.w_dev_cont };
            if weight == 0.0 {
                continue;
            }
            // dev >= |y - x|, tight at the optimum.
            let dev = ef.add_variable(VarSpec::continuous(format!("{prefix}dev[{}]", v.name), 0.0, f64::INFINITY))?;
            let mut up = diff.scaled(-1.0);
            up.add_term(1.0, dev);
            let mut down = diff;
            down.add_term(1.0, dev);
            ef.add_constraint(ConstraintSpec::new(format!("{prefix}dev+[{}]", v.name), up, Sense::Ge, 0.0))?;
            ef.add_constraint(ConstraintSpec::new(format!("{prefix}dev-[{}]", v.name), down, Sense::Ge, 0.0))?;
            recovery.add_term(weight, dev);
        }
        objective.add_scaled(&recovery, alpha * s.weight / total_weight);
        if ef.num_vars() > MAX_VARIABLES || ef.num_constraints() > MAX_CONSTRAINTS {
            return Err(Error::ExtensiveFormTooLarge {
                vars: ef.num_vars(),
                constraints: ef.num_constraints(),
            });
        }
    }
    ef.set_objective(objective)?;
    Ok(ef)
}

/// Plans with recovery in mind, returning the chosen plan and its report.
pub fn two_stage_solve<D: Domain>(
    inst: &D::Instance,
    scenarios: &[Scenario],
    spec: &RepairSpec,
    options: &TwoStageOptions,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<TwoStageOutcome<D::Plan>, Error> {
    options.validate()?;
    check_scenarios(scenarios)?;
    let nominal = D::formulate(inst)?;
    match options.mode {
        TwoStageMode::Simultaneous => {
            let ef = build_extensive_form::<D>(inst, scenarios, spec, options.alpha)?;
            let (solution, stats) = solve_milp(&ef, params)?;
            if !solution.has_point() {
                return Err(Error::NoSolution(solution.status));
            }
            let first = Solution::from_values(&nominal, solution.values[..nominal.num_vars()].to_vec())?;
            let plan = D::decode(inst, &nominal, &first)?;
            let report = evaluate_recoverability::<D>(inst, &plan, scenarios, spec, method, params)?;
            Ok(TwoStageOutcome {
                mode: options.mode,
                alpha: options.alpha,
                status: solution.status,
                total: report.total(options.alpha),
                plan,
                report,
                extensive_objective: solution.objective_value,
                candidates: Vec::new(),
                stats,
            })
        }
        TwoStageMode::Separate => {
            let (pool, status, stats) = plan_pool(&nominal, options.pool_size, params)?;
            let mut best: Option<(f64, D::Plan, RecoverabilityReport)> = None;
            let mut candidates = Vec::new();
            for sol in &pool {
                let plan = D::decode(inst, &nominal, sol)?;
                let report = evaluate_recoverability::<D>(inst, &plan, scenarios, spec, method, params)?;
                let total = report.total(options.alpha);
                candidates.push(Candidate {
                    nominal_objective: report.nominal_objective,
                    total,
                });
                let key = total.unwrap_or(f64::INFINITY);
                if best.as_ref().is_none_or(|b| key < b.0) {
                    best = Some((key, plan, report));
                }
            }
            let (_, plan, report) = best.ok_or(Error::NoSolution(status))?;
            Ok(TwoStageOutcome {
                mode: options.mode,
                alpha: options.alpha,
                status,
                total: report.total(options.alpha),
                plan,
                report,
                extensive_objective: None,
                candidates,
                stats,
            })
        }
    }
}

/// The nominal optimum followed by successively next-best plans, each
/// excluded from later solves by a no-good cut over the binary variables.
/// Models without binaries yield the optimum alone.
fn plan_pool(nominal: &Model, size: usize, params: &SolveParams) -> Result<(Vec<Solution>, Status, SolveStats), Error> {
    let binaries: Vec<VarId> = nominal.var_ids().filter(|&v| nominal.variable(v).kind == VarKind::Binary).collect();
    let mut model = nominal.clone();
    let mut pool = Vec::new();
    let mut stats = SolveStats::default();
    let mut status = Status::Optimal;
    while pool.len() < size {
        let (sol, st) = solve_milp(&model, params)?;
        stats.absorb(&st);
        if !sol.has_point() {
            if pool.is_empty() {
                status = sol.status;
            }
            break;
        }
        if sol.status != Status::Optimal {
            status = sol.status;
        }
        if binaries.is_empty() {
            pool.push(sol);
            break;
        }
        let mut cut = LinExpr::new();
        let mut ones = 0.0;
        for &v in &binaries {
            if sol.values[v.index()] > 0.5 {
                cut.add_term(-1.0, v);
                ones += 1.0;
            } else {
                cut.add_term(1.0, v);
            }
        }
        model.add_constraint(ConstraintSpec::new(format!("nogood[{}]", pool.len()), cut, Sense::Ge, 1.0 - ones))?;
        pool.push(sol);
    }
    Ok((pool, status, stats))
}

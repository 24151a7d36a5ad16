//! Domain abstraction and the planning / repair pipeline built on it.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::{solve_milp, SolveParams, SolveStats};
use crate::model::{Breach, Model, Solution, Status, VarKind, DEFAULT_FEAS_TOL};
use crate::production::{self, ProductionInstance, ProductionPlan, ProductionViolation};
use crate::repair::{
    build_repair_model_from, repair_exact, Assignment, ChangeRecord, RepairModel, RepairResult, RepairSpec,
};
use crate::scenario::{apply_production_event, apply_tail_event, Event, Scenario};
use crate::tail::{self, build_connection_graph, IdleTimeCost, TailPlan, TailViolation, Timetable};
use crate::vns::{unfrozen_blocks, vns_repair, Block, VnsParams};

/// A planning domain: how instances become models, how solutions become
/// plans, and how disruptions change instances.
pub trait Domain: Send + Sync + 'static {
    type Instance: Clone + PartialEq + Debug + Serialize + DeserializeOwned + Send + Sync;
    type Plan: Clone + PartialEq + Debug + Serialize + DeserializeOwned + Send + Sync;
    type Violation: Clone + PartialEq + Debug + Serialize + Send + Sync;

    const NAME: &'static str;

    fn formulate(inst: &Self::Instance) -> Result<Model, Error>;
    fn decode(inst: &Self::Instance, model: &Model, solution: &Solution) -> Result<Self::Plan, Error>;
    fn encode(inst: &Self::Instance, model: &Model, plan: &Self::Plan) -> Result<Assignment, Error>;
    /// Drops references to entities that no longer exist, nothing else.
    fn restrict(inst: &Self::Instance, plan: &Self::Plan) -> Self::Plan;
    /// Nearest plan of `inst` that satisfies every hard constraint, up to
    /// the relaxable ones.
    fn project(inst: &Self::Instance, plan: &Self::Plan) -> Self::Plan;
    fn apply_event(inst: &Self::Instance, event: &Event) -> Result<Self::Instance, Error>;
    fn validate(inst: &Self::Instance, plan: &Self::Plan) -> Result<Vec<Self::Violation>, Error>;
    /// Partition of the model's decision variables into unfreezing units.
    fn blocks(inst: &Self::Instance, model: &Model) -> Vec<Block>;
    fn render_diff(inst: &Self::Instance, incumbent: &Self::Plan, repaired: &Self::Plan) -> Vec<ChangeRecord>;
}

pub struct TailDomain;

impl Domain for TailDomain {
    type Instance = Timetable;
    type Plan = TailPlan;
    type Violation = TailViolation;

    const NAME: &'static str = "tail";

    fn formulate(inst: &Timetable) -> Result<Model, Error> {
        Ok(tail::formulate_mip(inst)?)
    }

    fn decode(inst: &Timetable, model: &Model, solution: &Solution) -> Result<TailPlan, Error> {
        Ok(tail::decode_plan(inst, model, solution)?)
    }

    fn encode(inst: &Timetable, model: &Model, plan: &TailPlan) -> Result<Assignment, Error> {
        Ok(tail::encode_plan(inst, model, plan)?)
    }

    fn restrict(inst: &Timetable, plan: &TailPlan) -> TailPlan {
        let known = |f: &String| inst.flight_index(f).is_some();
        TailPlan {
            routes: plan
                .routes
                .iter()
                .filter(|(ac, _)| inst.aircraft_index(ac).is_some())
                .map(|(ac, r)| (ac.clone(), r.iter().filter(|f| known(f)).cloned().collect()))
                .collect(),
            uncovered: plan.uncovered.iter().filter(|f| known(f)).cloned().collect(),
        }
    }

    fn project(inst: &Timetable, plan: &TailPlan) -> TailPlan {
        tail::project_plan(inst, plan)
    }

    fn apply_event(inst: &Timetable, event: &Event) -> Result<Timetable, Error> {
        apply_tail_event(inst, event)
    }

    fn validate(inst: &Timetable, plan: &TailPlan) -> Result<Vec<TailViolation>, Error> {
        Ok(tail::validate_plan(inst, plan)?)
    }

    /// One block per flight: every arc entering it, over all aircraft.
    fn blocks(inst: &Timetable, model: &Model) -> Vec<Block> {
        let graph = build_connection_graph(inst, &IdleTimeCost);
        let mut per_flight: Vec<Vec<String>> = vec![Vec::new(); inst.flights.len()];
        for arc in &graph.arcs {
            let name = tail::arc_var_name(inst, arc);
            if model.var_by_name(&name).is_some() {
                per_flight[arc.to].push(name);
            }
        }
        inst.flights
            .iter()
            .zip(per_flight)
            .filter(|(_, vars)| !vars.is_empty())
            .map(|(f, variables)| Block {
                id: format!("flight:{}", f.id),
                variables,
            })
            .collect()
    }

    fn render_diff(inst: &Timetable, incumbent: &TailPlan, repaired: &TailPlan) -> Vec<ChangeRecord> {
        tail::render_diff(inst, incumbent, repaired)
    }
}

pub struct ProductionDomain;

impl Domain for ProductionDomain {
    type Instance = ProductionInstance;
    type Plan = ProductionPlan;
    type Violation = ProductionViolation;

    const NAME: &'static str = "production";

    fn formulate(inst: &ProductionInstance) -> Result<Model, Error> {
        Ok(production::formulate_model(inst)?)
    }

    fn decode(inst: &ProductionInstance, model: &Model, solution: &Solution) -> Result<ProductionPlan, Error> {
        Ok(production::decode_plan(inst, model, solution)?)
    }

    fn encode(inst: &ProductionInstance, model: &Model, plan: &ProductionPlan) -> Result<Assignment, Error> {
        Ok(production::encode_plan(inst, model, plan)?)
    }

    fn restrict(inst: &ProductionInstance, plan: &ProductionPlan) -> ProductionPlan {
        production::project_plan(inst, plan)
    }

    fn project(inst: &ProductionInstance, plan: &ProductionPlan) -> ProductionPlan {
        production::project_plan(inst, plan)
    }

    fn apply_event(inst: &ProductionInstance, event: &Event) -> Result<ProductionInstance, Error> {
        apply_production_event(inst, event)
    }

    fn validate(inst: &ProductionInstance, plan: &ProductionPlan) -> Result<Vec<ProductionViolation>, Error> {
        Ok(production::validate_plan(inst, plan, DEFAULT_FEAS_TOL)?)
    }

    /// One block per (product, period).
    fn blocks(inst: &ProductionInstance, model: &Model) -> Vec<Block> {
        let mut out = Vec::new();
        for p in &inst.products {
            for t in 1..=inst.periods {
                let suffix = format!(",{p},{t}]");
                let mut variables: Vec<String> = model
                    .variables()
                    .iter()
                    .map(|v| &v.name)
                    .filter(|n| n.ends_with(&suffix))
                    .cloned()
                    .collect();
                for o in inst.orders.iter().filter(|o| &o.product == p && o.due == t) {
                    for name in [format!("dlv[{}]", o.id), format!("short[{}]", o.id)] {
                        if model.var_by_name(&name).is_some() {
                            variables.push(name);
                        }
                    }
                }
                if !variables.is_empty() {
                    out.push(Block {
                        id: format!("{p}@{t}"),
                        variables,
                    });
                }
            }
        }
        out
    }

    fn render_diff(inst: &ProductionInstance, incumbent: &ProductionPlan, repaired: &ProductionPlan) -> Vec<ChangeRecord> {
        production::render_diff(inst, incumbent, repaired)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome<P> {
    pub status: Status,
    pub objective: Option<f64>,
    pub plan: Option<P>,
    pub kpis: BTreeMap<String, f64>,
    pub stats: SolveStats,
}

/// Formulates and solves the nominal model.
pub fn solve_plan<D: Domain>(inst: &D::Instance, params: &SolveParams) -> Result<PlanOutcome<D::Plan>, Error> {
    let model = D::formulate(inst)?;
    let (solution, stats) = solve_milp(&model, params)?;
    let (plan, kpis) = if solution.has_point() {
        (Some(D::decode(inst, &model, &solution)?), model.kpi_report(&solution)?)
    } else {
        (None, BTreeMap::new())
    };
    Ok(PlanOutcome {
        status: solution.status,
        objective: solution.objective_value,
        plan,
        kpis,
        stats,
    })
}

/// Nominal objective of `plan`.
pub fn plan_objective<D: Domain>(inst: &D::Instance, plan: &D::Plan) -> Result<f64, Error> {
    let model = D::formulate(inst)?;
    let values = D::encode(inst, &model, plan)?;
    let x: Vec<f64> = model.variables().iter().map(|v| values[&v.name]).collect();
    Ok(model.objective().evaluate(&x)?)
}

pub fn apply_scenario<D: Domain>(inst: &D::Instance, scenario: &Scenario) -> Result<D::Instance, Error> {
    scenario.validate()?;
    let mut out = inst.clone();
    for event in &scenario.events {
        out = D::apply_event(&out, event)?;
    }
    Ok(out)
}

/// A reason why an incumbent no longer fits a perturbed instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conflict<V> {
    Violation(V),
    Breach(Breach),
}

/// Revalidates `plan` against `perturbed`: domain validation first, then
/// the perturbed model's feasibility check. Empty iff the incumbent still
/// works.
pub fn detect_conflicts<D: Domain>(perturbed: &D::Instance, plan: &D::Plan) -> Result<Vec<Conflict<D::Violation>>, Error> {
    let restricted = D::restrict(perturbed, plan);
    let violations = D::validate(perturbed, &restricted)?;
    if !violations.is_empty() {
        return Ok(violations.into_iter().map(Conflict::Violation).collect());
    }
    let model = D::formulate(perturbed)?;
    let values = D::encode(perturbed, &model, &restricted)?;
    let x: Vec<f64> = model.variables().iter().map(|v| values[&v.name]).collect();
    Ok(model
        .check_point(&x, DEFAULT_FEAS_TOL)
        .into_iter()
        .map(Conflict::Breach)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum RepairMethod {
    Exact,
    Vns(VnsParams),
}

/// Everything a repair needs, resolved against the perturbed instance.
pub struct RepairSetup<D: Domain> {
    pub perturbed: D::Instance,
    pub model: Model,
    pub repair_model: RepairModel,
    pub blocks: Vec<Block>,
}

pub fn prepare_repair<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    scenario: &Scenario,
    spec: &RepairSpec,
) -> Result<RepairSetup<D>, Error> {
    let nominal = D::formulate(inst)?;
    let mut incumbent = D::encode(inst, &nominal, plan)?;
    let perturbed = apply_scenario::<D>(inst, scenario)?;
    let model = D::formulate(&perturbed)?;
    // A yes/no decision the disruption just made possible was not taken by
    // the incumbent; taking it now is a change.
    for v in model.variables() {
        if v.kind == VarKind::Binary && !incumbent.contains_key(&v.name) {
            incumbent.insert(v.name.clone(), 0.0);
        }
    }
    let projected = D::project(&perturbed, plan);
    let start = D::encode(&perturbed, &model, &projected)?;
    let repair_model = build_repair_model_from(&model, &incumbent, &start, spec)?;
    let blocks = unfrozen_blocks(&repair_model, &D::blocks(&perturbed, &model));
    Ok(RepairSetup {
        perturbed,
        model,
        repair_model,
        blocks,
    })
}

/// Unfrozen blocks of the repair of `plan` under `scenario`.
pub fn enumerate_blocks<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    scenario: &Scenario,
    spec: &RepairSpec,
) -> Result<Vec<Block>, Error> {
    Ok(prepare_repair::<D>(inst, plan, scenario, spec)?.blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome<P> {
    pub result: RepairResult,
    pub plan: Option<P>,
}

/// Applies `scenario` to `inst` and repairs `plan` for it.
pub fn repair<D: Domain>(
    inst: &D::Instance,
    plan: &D::Plan,
    scenario: &Scenario,
    spec: &RepairSpec,
    method: &RepairMethod,
    params: &SolveParams,
) -> Result<RepairOutcome<D::Plan>, Error> {
    let setup = prepare_repair::<D>(inst, plan, scenario, spec)?;
    let rm = &setup.repair_model;
    let mut result = match method {
        RepairMethod::Exact => repair_exact(rm, params)?,
        RepairMethod::Vns(p) => vns_repair(rm, &setup.blocks, p, params)?,
    };
    let repaired = if result.solution.has_point() {
        let values = result.solution.values[..rm.decision_count()].to_vec();
        let decision = Solution {
            status: Status::Feasible,
            objective_value: Some(setup.model.objective().evaluate(&values)?),
            values,
        };
        let repaired = D::decode(&setup.perturbed, &setup.model, &decision)?;
        result.diff = D::render_diff(&setup.perturbed, plan, &repaired);
        Some(repaired)
    } else {
        None
    };
    Ok(RepairOutcome { result, plan: repaired })
}

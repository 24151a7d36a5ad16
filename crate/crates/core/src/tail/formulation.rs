use std::collections::BTreeMap;

use super::graph::{build_connection_graph, ArcCost, ArcTail, ConnectionArc, IdleTimeCost};
use super::{TailError, Timetable};
use crate::model::{ConstraintSpec, LinExpr, Model, Sense, VarId, VarSpec};

pub const KPI_ROUTE_COST: &str = "route_cost";
pub const KPI_AIRCRAFT_USED: &str = "aircraft_used";
pub const KPI_FLIGHTS_UNCOVERED: &str = "flights_uncovered";

/// Variable name for an arc: `src[ac,f]` for a first flight,
/// `x[ac,f,g]` for a succession.
pub fn arc_var_name(tt: &Timetable, arc: &ConnectionArc) -> String {
    let ac = &tt.aircraft[arc.aircraft].id;
    let to = &tt.flights[arc.to].id;
    match arc.from {
        ArcTail::Source => format!("src[{ac},{to}]"),
        ArcTail::Flight(i) => format!("x[{ac},{},{to}]", tt.flights[i].id),
    }
}

/// [`formulate_mip_with`] using idle ground time as arc cost.
pub fn formulate_mip(tt: &Timetable) -> Result<Model, TailError> {
    formulate_mip_with(tt, &IdleTimeCost)
}

/// Arc-flow MIP: one binary per (aircraft, arc).
///
/// * `cover[f]`: exactly one arc enters each flight. Relaxable at the
///   timetable's cancellation penalty.
/// * `flow[ac,f]`: an aircraft leaves a flight at most as often as it
///   enters it.
/// * `start[ac]`: at most one first flight per aircraft.
///
/// Each arc variable carries the head flight's departure as decision time.
pub fn formulate_mip_with(tt: &Timetable, cost: &dyn ArcCost) -> Result<Model, TailError> {
    tt.validate()?;
    let graph = build_connection_graph(tt, cost);
    let mut model = Model::new();

    let n = tt.flights.len();
    let mut into: Vec<Vec<VarId>> = vec![Vec::new(); n];
    let mut flow: BTreeMap<(usize, usize), LinExpr> = BTreeMap::new();
    let mut starts: Vec<LinExpr> = vec![LinExpr::new(); tt.aircraft.len()];
    let mut route_cost = LinExpr::new();
    let mut used = LinExpr::new();

    for arc in &graph.arcs {
        let var = model.add_variable(
            VarSpec::binary(arc_var_name(tt, arc)).with_start(tt.flights[arc.to].dep as f64),
        )?;
        into[arc.to].push(var);
        route_cost.add_term(arc.cost, var);
        flow.entry((arc.aircraft, arc.to)).or_default().add_term(-1.0, var);
        match arc.from {
            ArcTail::Source => {
                starts[arc.aircraft].add_term(1.0, var);
                used.add_term(1.0, var);
            }
            ArcTail::Flight(i) => {
                flow.entry((arc.aircraft, i)).or_default().add_term(1.0, var);
            }
        }
    }

    for (f, vars) in into.iter().enumerate() {
        let expr = LinExpr::from_terms(vars.iter().map(|&v| (1.0, v)));
        model.add_constraint(
            ConstraintSpec::new(format!("cover[{}]", tt.flights[f].id), expr, Sense::Eq, 1.0)
                .relaxable(tt.weights.cancellation),
        )?;
    }
    for ((a, f), expr) in flow {
        // Rows with no outgoing arc are trivially satisfied.
        if expr.terms().iter().any(|&(c, _)| c > 0.0) {
            let name = format!("flow[{},{}]", tt.aircraft[a].id, tt.flights[f].id);
            model.add_constraint(ConstraintSpec::new(name, expr, Sense::Le, 0.0))?;
        }
    }
    for (a, expr) in starts.into_iter().enumerate() {
        if !expr.is_empty() {
            let name = format!("start[{}]", tt.aircraft[a].id);
            model.add_constraint(ConstraintSpec::new(name, expr, Sense::Le, 1.0))?;
        }
    }

    let mut objective = route_cost.clone();
    objective.add_scaled(&used, tt.weights.aircraft_used);
    model.set_objective(objective)?;

    let mut uncovered = LinExpr::constant(n as f64);
    for vars in &into {
        for &v in vars {
            uncovered.add_term(-1.0, v);
        }
    }
    model.add_kpi(KPI_ROUTE_COST, route_cost)?;
    model.add_kpi(KPI_AIRCRAFT_USED, used)?;
    model.add_kpi(KPI_FLIGHTS_UNCOVERED, uncovered)?;
    Ok(model)
}

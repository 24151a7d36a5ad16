use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::formulation::arc_var_name;
use super::graph::{build_connection_graph, can_start, connects, ArcTail, IdleTimeCost};
use super::{TailError, TailPlan, Timetable};
use crate::model::{Model, Solution};
use crate::repair::ChangeRecord;

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum TailViolation {
    TurnTimeViolation { aircraft: String, from: String, to: String },
    WrongInitialPosition { aircraft: String, flight: String },
    ContinuityBreak { aircraft: String, from: String, to: String },
    AircraftUnavailable { aircraft: String, flight: String },
    FlightUncovered { flight: String },
    FlightDoubleCovered { flight: String },
}

/// Rebuilds routes by following the chosen arcs from each aircraft's
/// source. Fractional values and chosen arcs that no route reaches are
/// errors.
pub fn decode_plan(tt: &Timetable, model: &Model, solution: &Solution) -> Result<TailPlan, TailError> {
    let graph = build_connection_graph(tt, &IdleTimeCost);
    let n_ac = tt.aircraft.len();
    let mut chosen: Vec<BTreeMap<ArcTail, Vec<usize>>> = vec![BTreeMap::new(); n_ac];
    let mut chosen_count = 0usize;
    for arc in &graph.arcs {
        let name = arc_var_name(tt, arc);
        let Some(var) = model.var_by_name(&name) else {
            continue;
        };
        let value = solution
            .value(var)
            .ok_or(crate::model::ModelError::UnvaluedVariable(var.index()))?;
        if (value - value.round()).abs() > INT_TOL || !(-INT_TOL..=1.0 + INT_TOL).contains(&value) {
            return Err(TailError::NonIntegral { name, value });
        }
        if value.round() == 1.0 {
            chosen[arc.aircraft].entry(arc.from).or_default().push(arc.to);
            chosen_count += 1;
        }
    }

    let mut routes = BTreeMap::new();
    let mut walked = 0usize;
    let mut covered = HashSet::new();
    for (a, succ) in chosen.iter().enumerate() {
        let ac = &tt.aircraft[a].id;
        let mut route = Vec::new();
        let mut at = ArcTail::Source;
        loop {
            match succ.get(&at).map(Vec::as_slice) {
                None | Some([]) => break,
                Some([next]) => {
                    walked += 1;
                    route.push(tt.flights[*next].id.clone());
                    covered.insert(*next);
                    at = ArcTail::Flight(*next);
                }
                Some(many) => {
                    return Err(TailError::BrokenChain {
                        aircraft: ac.clone(),
                        detail: format!("{} successors chosen after {:?}", many.len(), at),
                    })
                }
            }
        }
        routes.insert(ac.clone(), route);
    }
    if walked != chosen_count {
        return Err(TailError::BrokenChain {
            aircraft: "?".into(),
            detail: format!("{} chosen arcs are not reachable from any source", chosen_count - walked),
        });
    }
    let uncovered = (0..tt.flights.len())
        .filter(|f| !covered.contains(f))
        .map(|f| tt.flights[f].id.clone())
        .collect();
    Ok(TailPlan { routes, uncovered })
}

/// Checks turn times, initial positions, continuity, availability and
/// coverage. Empty iff the plan is operable and covers every flight.
pub fn validate_plan(tt: &Timetable, plan: &TailPlan) -> Result<Vec<TailViolation>, TailError> {
    let flights = tt.flight_map();
    let mut out = Vec::new();
    let mut count = vec![0usize; tt.flights.len()];
    for (ac, route) in &plan.routes {
        let a = tt
            .aircraft_index(ac)
            .ok_or_else(|| TailError::UnknownAircraft(ac.clone()))?;
        let idx: Vec<usize> = route
            .iter()
            .map(|f| flights.get(f.as_str()).copied().ok_or_else(|| TailError::UnknownFlight(f.clone())))
            .collect::<Result<_, _>>()?;
        for &f in &idx {
            count[f] += 1;
            if !tt.available(a, f) {
                out.push(TailViolation::AircraftUnavailable {
                    aircraft: ac.clone(),
                    flight: tt.flights[f].id.clone(),
                });
            }
        }
        if let Some(&first) = idx.first() {
            if !can_start(tt, a, first) {
                out.push(TailViolation::WrongInitialPosition {
                    aircraft: ac.clone(),
                    flight: tt.flights[first].id.clone(),
                });
            }
        }
        for w in idx.windows(2) {
            let (p, q) = (&tt.flights[w[0]], &tt.flights[w[1]]);
            if p.destination != q.origin {
                out.push(TailViolation::ContinuityBreak {
                    aircraft: ac.clone(),
                    from: p.id.clone(),
                    to: q.id.clone(),
                });
            }
            if p.arr + tt.turn_time(a) > q.dep {
                out.push(TailViolation::TurnTimeViolation {
                    aircraft: ac.clone(),
                    from: p.id.clone(),
                    to: q.id.clone(),
                });
            }
        }
    }
    for f in &plan.uncovered {
        if !flights.contains_key(f.as_str()) {
            return Err(TailError::UnknownFlight(f.clone()));
        }
    }
    for (f, &c) in count.iter().enumerate() {
        let flight = tt.flights[f].id.clone();
        match c {
            0 => out.push(TailViolation::FlightUncovered { flight }),
            1 => {}
            _ => out.push(TailViolation::FlightDoubleCovered { flight }),
        }
    }
    Ok(out)
}

/// Values for every variable of `model` (formulated from `tt`) that encode
/// `plan`: 1 on the arcs the routes use, 0 elsewhere.
pub fn encode_plan(tt: &Timetable, model: &Model, plan: &TailPlan) -> Result<BTreeMap<String, f64>, TailError> {
    let mut values: BTreeMap<String, f64> =
        model.variables().iter().map(|v| (v.name.clone(), 0.0)).collect();
    for (ac, route) in &plan.routes {
        if tt.aircraft_index(ac).is_none() {
            return Err(TailError::UnknownAircraft(ac.clone()));
        }
        let mut prev: Option<&str> = None;
        for f in route {
            if tt.flight_index(f).is_none() {
                return Err(TailError::UnknownFlight(f.clone()));
            }
            let name = match prev {
                None => format!("src[{ac},{f}]"),
                Some(p) => format!("x[{ac},{p},{f}]"),
            };
            match values.get_mut(&name) {
                Some(v) => *v = 1.0,
                None => return Err(TailError::MissingArc(name)),
            }
            prev = Some(f);
        }
    }
    Ok(values)
}

/// Restricts `plan` to what can still be flown in `tt`: flights missing
/// from `tt` are dropped, and each route is cut at the first leg that no
/// longer connects. Cut flights become uncovered.
pub fn project_plan(tt: &Timetable, plan: &TailPlan) -> TailPlan {
    let flights = tt.flight_map();
    let mut routes = BTreeMap::new();
    let mut covered = HashSet::new();
    for a in 0..tt.aircraft.len() {
        let ac = &tt.aircraft[a].id;
        let mut kept = Vec::new();
        let mut prev: Option<usize> = None;
        if let Some(route) = plan.routes.get(ac) {
            for f in route {
                let Some(&j) = flights.get(f.as_str()) else {
                    continue;
                };
                let ok = !covered.contains(&j)
                    && tt.available(a, j)
                    && match prev {
                        None => can_start(tt, a, j),
                        Some(i) => connects(tt, a, i, j),
                    };
                if !ok {
                    break;
                }
                covered.insert(j);
                kept.push(f.clone());
                prev = Some(j);
            }
        }
        routes.insert(ac.clone(), kept);
    }
    let uncovered = tt
        .flights
        .iter()
        .enumerate()
        .filter(|(j, _)| !covered.contains(j))
        .map(|(_, f)| f.id.clone())
        .collect();
    TailPlan { routes, uncovered }
}

/// Route changes per aircraft (by id) followed by flights the repaired plan
/// leaves unoperated.
pub fn render_diff(tt: &Timetable, incumbent: &TailPlan, repaired: &TailPlan) -> Vec<ChangeRecord> {
    let mut out = Vec::new();
    let empty = Vec::new();
    let aircraft: std::collections::BTreeSet<&String> =
        incumbent.routes.keys().chain(repaired.routes.keys()).collect();
    for ac in aircraft {
        let before = incumbent.routes.get(ac).unwrap_or(&empty);
        let after = repaired.routes.get(ac).unwrap_or(&empty);
        if before != after {
            out.push(ChangeRecord::RouteChanged {
                aircraft: ac.clone(),
                before: before.clone(),
                after: after.clone(),
            });
        }
    }
    let was_uncovered: HashSet<&String> = incumbent.uncovered.iter().collect();
    for f in &tt.flights {
        if repaired.uncovered.contains(&f.id) && !was_uncovered.contains(&f.id) {
            out.push(ChangeRecord::Cancelled { flight: f.id.clone() });
        }
    }
    out
}

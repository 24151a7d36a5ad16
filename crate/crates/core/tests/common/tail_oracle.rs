//! Brute-force tail assignment. Every flight goes to one aircraft or stays
//! uncovered; an aircraft flies its flights in departure order, so each
//! assignment names at most one route per aircraft.

use std::collections::BTreeSet;

use reparo_core::rng::XorShift64Star;
use reparo_core::tail::{Aircraft, Flight, TailPlan, TailWeights, Timetable, Window};

/// (aircraft, previous flight or `None` for the first leg, flight).
pub type Leg = (String, Option<String>, String);

fn usable(tt: &Timetable, a: usize, f: usize) -> bool {
    let fl = &tt.flights[f];
    tt.aircraft[a].unavailable.iter().all(|w| !(fl.dep < w.to && fl.arr > w.from))
}

fn turn(tt: &Timetable, a: usize) -> i64 {
    tt.aircraft[a].turn_time.unwrap_or(tt.default_turn_time)
}

/// Cost of flying `flights` in the given order with aircraft `a`; `None`
/// when the chain is illegal.
fn chain_cost(tt: &Timetable, a: usize, flights: &[usize]) -> Option<f64> {
    let Some(&first) = flights.first() else { return Some(0.0) };
    if tt.flights[first].origin != tt.aircraft[a].initial_airport {
        return None;
    }
    let mut cost = tt.weights.aircraft_used;
    for w in flights.windows(2) {
        let (p, q) = (&tt.flights[w[0]], &tt.flights[w[1]]);
        if p.destination != q.origin || p.arr + turn(tt, a) > q.dep {
            return None;
        }
        cost += (q.dep - p.arr - turn(tt, a)) as f64;
    }
    flights.iter().all(|&f| usable(tt, a, f)).then_some(cost)
}

/// Every legal plan with its routing cost (cancellation penalty excluded).
pub fn enumerate_plans(tt: &Timetable, allow_uncovered: bool) -> Vec<(TailPlan, f64)> {
    let n = tt.flights.len();
    let k = tt.aircraft.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&f| tt.flights[f].dep);
    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        if allow_uncovered || choice.iter().all(|&c| c < k) {
            let mut plan = TailPlan::default();
            let mut total = 0.0;
            let mut legal = true;
            for a in 0..k {
                let flights: Vec<usize> = order.iter().copied().filter(|&f| choice[f] == a).collect();
                match chain_cost(tt, a, &flights) {
                    Some(c) => total += c,
                    None => {
                        legal = false;
                        break;
                    }
                }
                if !flights.is_empty() {
                    plan.routes.insert(
                        tt.aircraft[a].id.clone(),
                        flights.iter().map(|&f| tt.flights[f].id.clone()).collect(),
                    );
                }
            }
            if legal {
                plan.uncovered = (0..n).filter(|&f| choice[f] == k).map(|f| tt.flights[f].id.clone()).collect();
                out.push((plan, total));
            }
        }
        // Next assignment in base k + 1.
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            choice[i] += 1;
            if choice[i] <= k {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Cheapest plan covering every flight.
pub fn nominal_optimum(tt: &Timetable) -> Option<(TailPlan, f64)> {
    enumerate_plans(tt, false)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Routing cost of a legal plan.
pub fn plan_cost(tt: &Timetable, plan: &TailPlan) -> Option<f64> {
    let mut total = 0.0;
    for (ac, route) in &plan.routes {
        let a = tt.aircraft.iter().position(|x| &x.id == ac)?;
        let flights: Option<Vec<usize>> = route.iter().map(|f| tt.flights.iter().position(|x| &x.id == f)).collect();
        total += chain_cost(tt, a, &flights?)?;
    }
    Some(total)
}

pub fn legs(plan: &TailPlan) -> BTreeSet<Leg> {
    let mut out = BTreeSet::new();
    for (ac, route) in &plan.routes {
        let mut prev = None;
        for f in route {
            out.insert((ac.clone(), prev.clone(), f.clone()));
            prev = Some(f.clone());
        }
    }
    out
}

/// Whether `tt` allows the leg at all.
pub fn leg_allowed(tt: &Timetable, leg: &Leg) -> bool {
    let Some(a) = tt.aircraft.iter().position(|x| x.id == leg.0) else { return false };
    let Some(f) = tt.flights.iter().position(|x| x.id == leg.2) else { return false };
    match &leg.1 {
        None => chain_cost(tt, a, &[f]).is_some(),
        Some(p) => match tt.flights.iter().position(|x| &x.id == p) {
            Some(p) => {
                tt.flights[p].destination == tt.flights[f].origin
                    && tt.flights[p].arr + turn(tt, a) <= tt.flights[f].dep
                    && usable(tt, a, p)
                    && usable(tt, a, f)
            }
            None => false,
        },
    }
}

/// Legs changed between `incumbent` and `candidate`, ignoring incumbent
/// legs that `perturbed` no longer allows.
pub fn deviation(perturbed: &Timetable, incumbent: &TailPlan, candidate: &TailPlan) -> usize {
    let old: BTreeSet<Leg> = legs(incumbent).into_iter().filter(|l| leg_allowed(perturbed, l)).collect();
    let new = legs(candidate);
    old.symmetric_difference(&new).count()
}

/// Optimal repair of `incumbent` on `perturbed`: weighted routing cost plus
/// deviation plus the cancellation penalty per uncovered flight.
pub fn repair_optimum(perturbed: &Timetable, incumbent: &TailPlan, w_cost: f64, w_dev: f64) -> (TailPlan, f64) {
    enumerate_plans(perturbed, true)
        .into_iter()
        .map(|(plan, cost)| {
            let obj = w_cost * cost
                + w_dev * deviation(perturbed, incumbent, &plan) as f64
                + perturbed.weights.cancellation * plan.uncovered.len() as f64;
            (plan, obj)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("the all-uncovered plan is always legal")
}

/// Random timetable with up to `max_flights` flights over three airports.
/// With `coverable`, flights are generated as one legal chain per aircraft
/// and then shuffled, so some plan covers everything.
pub fn random_timetable(rng: &mut XorShift64Star, max_flights: usize, max_aircraft: usize, coverable: bool) -> Timetable {
    const AIRPORTS: [&str; 3] = ["A", "B", "C"];
    let n = 1 + rng.below(max_flights);
    let k = 1 + rng.below(max_aircraft);
    let mut aircraft: Vec<Aircraft> = (0..k)
        .map(|a| Aircraft {
            id: format!("ac{}", a + 1),
            initial_airport: AIRPORTS[rng.below(3)].into(),
            turn_time: (rng.below(4) == 0).then(|| 15 * rng.range_i64(1, 3)),
            unavailable: Vec::new(),
        })
        .collect();
    let mut flights = Vec::with_capacity(n);
    if coverable {
        let mut at: Vec<(usize, i64)> = aircraft
            .iter()
            .map(|a| (AIRPORTS.iter().position(|x| *x == a.initial_airport).unwrap(), 15 * rng.range_i64(0, 8)))
            .collect();
        for _ in 0..n {
            let a = rng.below(k);
            let (o, t) = at[a];
            let d = (o + 1 + rng.below(2)) % 3;
            let dep = t + 15 * rng.range_i64(0, 6);
            let arr = dep + 15 * rng.range_i64(2, 6);
            flights.push((o, d, dep, arr));
            let turn = aircraft[a].turn_time.unwrap_or(30);
            at[a] = (d, arr + turn);
        }
        // Shuffle so ids carry no hint of the generating chains.
        for i in (1..flights.len()).rev() {
            flights.swap(i, rng.below(i + 1));
        }
    } else {
        for _ in 0..n {
            let o = rng.below(3);
            let d = (o + 1 + rng.below(2)) % 3;
            let dep = 15 * rng.range_i64(0, 40);
            flights.push((o, d, dep, dep + 15 * rng.range_i64(2, 8)));
        }
        for a in aircraft.iter_mut() {
            if rng.below(5) == 0 {
                let from = 15 * rng.range_i64(0, 40);
                a.unavailable.push(Window { from, to: from + 120 });
            }
        }
    }
    Timetable {
        default_turn_time: 30,
        aircraft,
        flights: flights
            .into_iter()
            .enumerate()
            .map(|(i, (o, d, dep, arr))| Flight {
                id: format!("f{}", i + 1),
                origin: AIRPORTS[o].into(),
                destination: AIRPORTS[d].into(),
                dep,
                arr,
                loop_flight: false,
            })
            .collect(),
        weights: TailWeights {
            aircraft_used: if rng.below(2) == 0 { 0.0 } else { 50.0 },
            cancellation: 10_000.0,
        },
    }
}

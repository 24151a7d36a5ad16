use serde::{Deserialize, Serialize};

use super::Timetable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcTail {
    /// The aircraft's initial position.
    Source,
    Flight(usize),
}

/// Arc used by one aircraft: leave `from`, operate flight `to` next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionArc {
    pub aircraft: usize,
    pub from: ArcTail,
    pub to: usize,
    pub cost: f64,
}

/// Per-arc cost hook.
pub trait ArcCost {
    fn cost(&self, timetable: &Timetable, aircraft: usize, from: ArcTail, to: usize) -> f64;
}

impl<F> ArcCost for F
where
    F: Fn(&Timetable, usize, ArcTail, usize) -> f64,
{
    fn cost(&self, timetable: &Timetable, aircraft: usize, from: ArcTail, to: usize) -> f64 {
        self(timetable, aircraft, from, to)
    }
}

/// Idle ground minutes beyond the turn time; source arcs are free.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdleTimeCost;

impl ArcCost for IdleTimeCost {
    fn cost(&self, tt: &Timetable, aircraft: usize, from: ArcTail, to: usize) -> f64 {
        match from {
            ArcTail::Source => 0.0,
            ArcTail::Flight(i) => {
                (tt.flights[to].dep - tt.flights[i].arr - tt.turn_time(aircraft)) as f64
            }
        }
    }
}

/// All arcs, ordered by aircraft, then tail (source first), then head.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub arcs: Vec<ConnectionArc>,
}

impl ConnectionGraph {
    pub fn arcs_for(&self, aircraft: usize) -> impl Iterator<Item = &ConnectionArc> {
        self.arcs.iter().filter(move |a| a.aircraft == aircraft)
    }

    /// Flight-to-flight successions open to `aircraft`.
    pub fn flight_pairs(&self, aircraft: usize) -> Vec<(usize, usize)> {
        self.arcs_for(aircraft)
            .filter_map(|a| match a.from {
                ArcTail::Flight(i) => Some((i, a.to)),
                ArcTail::Source => None,
            })
            .collect()
    }
}

/// Same airport and turn time respected.
pub(crate) fn connects(tt: &Timetable, aircraft: usize, i: usize, j: usize) -> bool {
    let (a, b) = (&tt.flights[i], &tt.flights[j]);
    a.destination == b.origin && a.arr + tt.turn_time(aircraft) <= b.dep
}

pub(crate) fn can_start(tt: &Timetable, aircraft: usize, j: usize) -> bool {
    tt.flights[j].origin == tt.aircraft[aircraft].initial_airport
}

/// Builds every arc allowed by the turn-time, continuity and initial-position
/// rules. Flights an aircraft cannot operate (unavailability) get no arcs
/// for that aircraft.
pub fn build_connection_graph(tt: &Timetable, cost: &dyn ArcCost) -> ConnectionGraph {
    let n = tt.flights.len();
    let mut arcs = Vec::new();
    for a in 0..tt.aircraft.len() {
        for j in 0..n {
            if tt.available(a, j) && can_start(tt, a, j) {
                arcs.push(ConnectionArc {
                    aircraft: a,
                    from: ArcTail::Source,
                    to: j,
                    cost: cost.cost(tt, a, ArcTail::Source, j),
                });
            }
        }
        for i in 0..n {
            if !tt.available(a, i) {
                continue;
            }
            for j in 0..n {
                if i != j && tt.available(a, j) && connects(tt, a, i, j) {
                    arcs.push(ConnectionArc {
                        aircraft: a,
                        from: ArcTail::Flight(i),
                        to: j,
                        cost: cost.cost(tt, a, ArcTail::Flight(i), j),
                    });
                }
            }
        }
    }
    ConnectionGraph { arcs }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::Window;
    use super::*;
    use proptest::prelude::*;

    fn ids(tt: &Timetable, pairs: &[(usize, usize)]) -> Vec<(String, String)> {
        let mut v: Vec<_> = pairs
            .iter()
            .map(|&(i, j)| (tt.flights[i].id.clone(), tt.flights[j].id.clone()))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn t1_flight_arcs() {
        let tt = t1();
        let g = build_connection_graph(&tt, &IdleTimeCost);
        let expected = vec![
            ("f1".to_string(), "f2".to_string()),
            ("f1".to_string(), "f4".to_string()),
            ("f3".to_string(), "f4".to_string()),
        ];
        for a in 0..2 {
            assert_eq!(ids(&tt, &g.flight_pairs(a)), expected);
        }
        // Sources: both aircraft at A reach f1 and f3.
        let sources: Vec<_> = g
            .arcs_for(0)
            .filter(|a| a.from == ArcTail::Source)
            .map(|a| tt.flights[a.to].id.as_str())
            .collect();
        assert_eq!(sources, ["f1", "f3"]);
        // Idle minutes: f1->f2 = 585 - 540 - 30.
        let f1f2 = g.arcs_for(0).find(|a| a.from == ArcTail::Flight(0) && a.to == 1).unwrap();
        assert_eq!(f1f2.cost, 15.0);
    }

    #[test]
    fn zero_turn_boundary_is_inclusive() {
        let mut tt = t1();
        tt.default_turn_time = 0;
        tt.flights = vec![flight("a", "A", "B", 0, 60), flight("b", "B", "A", 60, 120)];
        let g = build_connection_graph(&tt, &IdleTimeCost);
        assert_eq!(g.flight_pairs(0), vec![(0, 1)]);
    }

    #[test]
    fn unavailability_removes_arcs() {
        let mut tt = t1();
        tt.aircraft[0].unavailable.push(Window { from: 600, to: 700 });
        let g = build_connection_graph(&tt, &IdleTimeCost);
        // f2 (585-645) and f4 (660-720) overlap the window.
        assert!(g.arcs_for(0).all(|a| a.to != 1 && a.to != 3));
        assert_eq!(g.flight_pairs(1).len(), 3);
    }

    #[test]
    fn custom_cost_hook() {
        let tt = t1();
        let g = build_connection_graph(&tt, &|_: &Timetable, _a: usize, _f: ArcTail, _t: usize| 2.5);
        assert!(g.arcs.iter().all(|a| a.cost == 2.5));
    }

    fn arb_timetable(max_flights: usize) -> impl Strategy<Value = Timetable> {
        let airports = ["A", "B", "C"];
        (
            proptest::collection::vec((0usize..3, 1usize..3, 0i64..600, 30i64..120), 1..=max_flights),
            proptest::collection::vec(0usize..3, 1..=3),
            0i64..45,
        )
            .prop_map(move |(fl, ac, turn)| Timetable {
                default_turn_time: turn,
                aircraft: ac
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| aircraft(&format!("ac{i}"), airports[p]))
                    .collect(),
                flights: fl
                    .iter()
                    .enumerate()
                    .map(|(i, &(o, hop, dep, dur))| {
                        flight(&format!("f{i}"), airports[o], airports[(o + hop) % 3], dep, dep + dur)
                    })
                    .collect(),
                weights: Default::default(),
            })
    }

    proptest! {
        #[test]
        fn arcs_are_exactly_the_permitted_pairs(tt in arb_timetable(7)) {
            let g = build_connection_graph(&tt, &IdleTimeCost);
            for a in 0..tt.aircraft.len() {
                let pairs = g.flight_pairs(a);
                for i in 0..tt.flights.len() {
                    for j in 0..tt.flights.len() {
                        let (fi, fj) = (&tt.flights[i], &tt.flights[j]);
                        let allowed = i != j
                            && fi.destination == fj.origin
                            && fi.arr + tt.turn_time(a) <= fj.dep;
                        prop_assert_eq!(pairs.contains(&(i, j)), allowed);
                        if allowed {
                            // Time-acyclic: successor departs after predecessor.
                            prop_assert!(fj.dep > fi.dep);
                        }
                    }
                }
            }
        }

        #[test]
        fn adding_a_flight_keeps_existing_arcs(tt in arb_timetable(6), dep in 0i64..600) {
            let before = build_connection_graph(&tt, &IdleTimeCost);
            let mut bigger = tt.clone();
            bigger.flights.push(flight("extra", "A", "B", dep, dep + 50));
            let after = build_connection_graph(&bigger, &IdleTimeCost);
            for arc in &before.arcs {
                prop_assert!(after.arcs.iter().any(|b| b.aircraft == arc.aircraft && b.from == arc.from && b.to == arc.to));
            }
        }
    }
}

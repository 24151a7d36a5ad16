//! Tail assignment: routing individual aircraft through a timetable.
//!
//! Routes respect the minimum turn time between consecutive flights, start
//! at the aircraft's initial airport and chain flights airport to airport.
//! Aircraft only move by operating timetable flights (no ferry legs).

mod formulation;
mod graph;
mod plan;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use formulation::{arc_var_name, formulate_mip, formulate_mip_with, KPI_AIRCRAFT_USED, KPI_FLIGHTS_UNCOVERED, KPI_ROUTE_COST};
pub use graph::{build_connection_graph, ArcCost, ArcTail, ConnectionArc, ConnectionGraph, IdleTimeCost};
pub use plan::{decode_plan, encode_plan, project_plan, render_diff, validate_plan, TailViolation};

/// Minutes from the start of the planning horizon.
pub type Minutes = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flight {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub dep: Minutes,
    pub arr: Minutes,
    /// Allows `origin == destination`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub loop_flight: bool,
}

impl Flight {
    /// True when the flight is airborne or on-stand at some point of
    /// `[from, to]`.
    pub fn overlaps(&self, from: Minutes, to: Minutes) -> bool {
        self.dep < to && self.arr > from
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from: Minutes,
    pub to: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aircraft {
    pub id: String,
    pub initial_airport: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_time: Option<Minutes>,
    /// Windows in which the aircraft cannot operate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unavailable: Vec<Window>,
}

/// Objective weights beyond per-arc costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailWeights {
    /// Cost per aircraft taken into service.
    pub aircraft_used: f64,
    /// Penalty per cancelled flight when coverage is relaxed.
    pub cancellation: f64,
}

impl Default for TailWeights {
    fn default() -> Self {
        Self {
            aircraft_used: 0.0,
            cancellation: 10_000.0,
        }
    }
}

fn is_default_weights(w: &TailWeights) -> bool {
    *w == TailWeights::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timetable {
    pub default_turn_time: Minutes,
    pub aircraft: Vec<Aircraft>,
    pub flights: Vec<Flight>,
    #[serde(default, skip_serializing_if = "is_default_weights")]
    pub weights: TailWeights,
}

impl Timetable {
    pub fn from_json(text: &str) -> Result<Self, TailError> {
        let tt: Timetable = serde_json::from_str(text).map_err(|e| TailError::Parse(e.to_string()))?;
        tt.validate()?;
        Ok(tt)
    }

    pub fn validate(&self) -> Result<(), TailError> {
        let mut seen = HashSet::new();
        for f in &self.flights {
            if !seen.insert(f.id.as_str()) {
                return Err(TailError::DuplicateFlight(f.id.clone()));
            }
            if f.dep >= f.arr {
                return Err(TailError::InvalidTimes {
                    flight: f.id.clone(),
                    dep: f.dep,
                    arr: f.arr,
                });
            }
            if f.origin == f.destination && !f.loop_flight {
                return Err(TailError::LoopFlight(f.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for a in &self.aircraft {
            if !seen.insert(a.id.as_str()) {
                return Err(TailError::DuplicateAircraft(a.id.clone()));
            }
            if a.turn_time.unwrap_or(0) < 0 {
                return Err(TailError::NegativeTurnTime(a.id.clone()));
            }
        }
        if self.default_turn_time < 0 {
            return Err(TailError::NegativeTurnTime("<default>".into()));
        }
        Ok(())
    }

    /// Per-aircraft turn time, falling back to the timetable default.
    pub fn turn_time(&self, aircraft: usize) -> Minutes {
        self.aircraft[aircraft]
            .turn_time
            .unwrap_or(self.default_turn_time)
    }

    pub fn flight_index(&self, id: &str) -> Option<usize> {
        self.flights.iter().position(|f| f.id == id)
    }

    pub fn aircraft_index(&self, id: &str) -> Option<usize> {
        self.aircraft.iter().position(|a| a.id == id)
    }

    /// Whether `aircraft` may operate `flight` given its unavailability
    /// windows.
    pub fn available(&self, aircraft: usize, flight: usize) -> bool {
        let f = &self.flights[flight];
        self.aircraft[aircraft]
            .unavailable
            .iter()
            .all(|w| !f.overlaps(w.from, w.to))
    }

    pub(crate) fn flight_map(&self) -> HashMap<&str, usize> {
        self.flights
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.as_str(), i))
            .collect()
    }
}

/// Routes per aircraft id plus the flights left unoperated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailPlan {
    pub routes: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub uncovered: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("timetable parse error: {0}")]
    Parse(String),
    #[error("duplicate flight id `{0}`")]
    DuplicateFlight(String),
    #[error("duplicate aircraft id `{0}`")]
    DuplicateAircraft(String),
    #[error("flight `{flight}` departs at {dep} but arrives at {arr}")]
    InvalidTimes { flight: String, dep: Minutes, arr: Minutes },
    #[error("flight `{0}` starts and ends at the same airport without loop_flight")]
    LoopFlight(String),
    #[error("negative turn time for `{0}`")]
    NegativeTurnTime(String),
    #[error("unknown flight `{0}`")]
    UnknownFlight(String),
    #[error("unknown aircraft `{0}`")]
    UnknownAircraft(String),
    #[error("variable `{name}` has non-integral value {value}")]
    NonIntegral { name: String, value: f64 },
    #[error("broken route for aircraft `{aircraft}`: {detail}")]
    BrokenChain { aircraft: String, detail: String },
    #[error("plan uses connection `{0}` which the model does not contain")]
    MissingArc(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

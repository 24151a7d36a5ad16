//! Disruption scenarios: ordered event lists applied to a copy of an
//! instance. Later events see the effect of earlier ones.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::production::{Order, ProductionInstance};
use crate::tail::{Minutes, Timetable, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Event {
    FlightDelay { flight: String, new_dep: Minutes, new_arr: Minutes },
    FlightCancellation { flight: String },
    /// The aircraft cannot operate flights overlapping `[from, to]`.
    AircraftUnavailability { aircraft: String, from: Minutes, to: Minutes },
    /// Sets the priority of every order of `customer`.
    PriorityChange { customer: String, new_priority: i64 },
    NewOrder { order: Order },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::FlightDelay { .. } => "FlightDelay",
            Event::FlightCancellation { .. } => "FlightCancellation",
            Event::AircraftUnavailability { .. } => "AircraftUnavailability",
            Event::PriorityChange { .. } => "PriorityChange",
            Event::NewOrder { .. } => "NewOrder",
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            weight: 1.0,
            events: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Accepts a single scenario object or an array of them.
    pub fn list_from_json(text: &str) -> Result<Vec<Self>, Error> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let list: Vec<Scenario> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|s| vec![s])
        }
        .map_err(|e| Error::Parse(e.to_string()))?;
        for s in &list {
            s.validate()?;
        }
        Ok(list)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidScenario(format!("weight of `{}` must be finite and >= 0", self.id)));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn not_applicable(event: &Event, domain: &str) -> Error {
    Error::EventNotApplicable {
        event: event.name().into(),
        domain: domain.into(),
    }
}

pub fn apply_tail_event(tt: &Timetable, event: &Event) -> Result<Timetable, Error> {
    let mut out = tt.clone();
    let flight = |id: &str| {
        tt.flight_index(id)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown flight `{id}`")))
    };
    match event {
        Event::FlightDelay { flight: id, new_dep, new_arr } => {
            let f = flight(id)?;
            if new_dep >= new_arr {
                return Err(Error::InvalidScenario(format!("delay of `{id}`: departure {new_dep} not before arrival {new_arr}")));
            }
            out.flights[f].dep = *new_dep;
            out.flights[f].arr = *new_arr;
        }
        Event::FlightCancellation { flight: id } => {
            out.flights.remove(flight(id)?);
        }
        Event::AircraftUnavailability { aircraft, from, to } => {
            let a = tt
                .aircraft_index(aircraft)
                .ok_or_else(|| Error::InvalidScenario(format!("unknown aircraft `{aircraft}`")))?;
            if from > to {
                return Err(Error::InvalidScenario(format!("unavailability of `{aircraft}` ends before it starts")));
            }
            out.aircraft[a].unavailable.push(Window { from: *from, to: *to });
        }
        _ => return Err(not_applicable(event, "tail")),
    }
    Ok(out)
}

pub fn apply_production_event(inst: &ProductionInstance, event: &Event) -> Result<ProductionInstance, Error> {
    let mut out = inst.clone();
    match event {
        Event::PriorityChange { customer, new_priority } => {
            if inst.location(customer).is_none() {
                return Err(Error::InvalidScenario(format!("unknown customer `{customer}`")));
            }
            for o in out.orders.iter_mut().filter(|o| &o.customer == customer) {
                o.priority = *new_priority;
            }
        }
        Event::NewOrder { order } => {
            if inst.orders.iter().any(|o| o.id == order.id) {
                return Err(Error::InvalidScenario(format!("order `{}` already exists", order.id)));
            }
            inst.validate_order(order)?;
            out.orders.push(order.clone());
        }
        _ => return Err(not_applicable(event, "production")),
    }
    Ok(out)
}

//! Multi-site, multi-period production, transport and inventory planning
//! with priority-tiered order fulfilment.
//!
//! Orders with priority at or above the instance threshold must be delivered
//! in full in their due period; lower-priority orders may fall short at a
//! per-unit penalty. There are no recipes: a product leaves a plant as
//! produced.

mod formulation;
mod plan;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use formulation::{
    formulate_model, KPI_HOLDING_COST, KPI_PRODUCTION_COST, KPI_SERVICE_LEVEL, KPI_SHORTFALL_COST,
    KPI_SHORTFALL_QTY, KPI_TARGET_PENALTY, KPI_TRANSPORT_COST,
};
pub use plan::{
    decode_plan, encode_plan, project_plan, render_diff, validate_plan, DeliveryEntry,
    InventoryEntry, ProductionEntry, ProductionPlan, ProductionViolation, ShipmentEntry,
};

/// Periods are numbered `1..=periods`.
pub type Period = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Supplier,
    Plant,
    Customer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub kind: LocationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub unit_cost: f64,
    /// Per-period capacity shared by all products; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
}

/// A plant (or supplier) able to make a product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub plant: String,
    pub product: String,
    #[serde(default)]
    pub unit_cost: f64,
    pub capacity: f64,
}

/// Stock may be held only where an entry exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryParam {
    pub location: String,
    pub product: String,
    #[serde(default)]
    pub holding_cost: f64,
    #[serde(default)]
    pub initial_stock: f64,
    /// End-of-period target level; missing it costs `target_penalty` per unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default)]
    pub target_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    pub customer: String,
    pub product: String,
    pub due: Period,
    pub quantity: f64,
    pub priority: i64,
}

fn default_hard_penalty() -> f64 {
    1000.0
}

fn default_shortfall_penalty() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionInstance {
    pub periods: Period,
    pub products: Vec<String>,
    pub locations: Vec<Location>,
    #[serde(default)]
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub capabilities: Vec<Capability>,
    #[serde(default)]
    pub inventory: Vec<InventoryParam>,
    #[serde(default)]
    pub orders: Vec<Order>,
    /// Orders with `priority >= priority_threshold` are hard.
    pub priority_threshold: i64,
    /// Per-unit penalty when a hard order is relaxed during repair.
    #[serde(default = "default_hard_penalty")]
    pub hard_order_penalty: f64,
    /// Per-unit penalty on soft-order shortfall.
    #[serde(default = "default_shortfall_penalty")]
    pub shortfall_penalty: f64,
    /// Make production quantities integer.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub integral_production: bool,
}

impl ProductionInstance {
    pub fn from_json(text: &str) -> Result<Self, ProductionError> {
        let inst: ProductionInstance =
            serde_json::from_str(text).map_err(|e| ProductionError::Parse(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn is_hard(&self, order: &Order) -> bool {
        order.priority >= self.priority_threshold
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn inventory_param(&self, location: &str, product: &str) -> Option<&InventoryParam> {
        self.inventory
            .iter()
            .find(|p| p.location == location && p.product == product)
    }

    pub fn validate(&self) -> Result<(), ProductionError> {
        if self.periods == 0 {
            return Err(ProductionError::InvalidValue("periods must be >= 1".into()));
        }
        unique("product", self.products.iter().map(String::as_str))?;
        unique("location", self.locations.iter().map(|l| l.id.as_str()))?;
        unique("order", self.orders.iter().map(|o| o.id.as_str()))?;
        let products: HashSet<&str> = self.products.iter().map(String::as_str).collect();
        let product = |p: &str| {
            if products.contains(p) {
                Ok(())
            } else {
                Err(ProductionError::UnknownReference { kind: "product", id: p.to_string() })
            }
        };
        let location = |id: &str| {
            self.location(id)
                .ok_or_else(|| ProductionError::UnknownReference { kind: "location", id: id.to_string() })
        };
        let mut seen = HashSet::new();
        for l in &self.lanes {
            location(&l.from)?;
            location(&l.to)?;
            if l.from == l.to || !seen.insert((&l.from, &l.to)) {
                return Err(ProductionError::InvalidValue(format!("lane {}->{} is a self loop or duplicate", l.from, l.to)));
            }
            nonneg("lane cost", l.unit_cost)?;
            if let Some(c) = l.capacity {
                nonneg("lane capacity", c)?;
            }
        }
        let mut seen = HashSet::new();
        for c in &self.capabilities {
            if location(&c.plant)?.kind == LocationKind::Customer {
                return Err(ProductionError::InvalidValue(format!("customer `{}` cannot produce", c.plant)));
            }
            product(&c.product)?;
            if !seen.insert((&c.plant, &c.product)) {
                return Err(ProductionError::DuplicateId { kind: "capability", id: format!("{}/{}", c.plant, c.product) });
            }
            nonneg("production cost", c.unit_cost)?;
            nonneg("production capacity", c.capacity)?;
        }
        let mut seen = HashSet::new();
        for p in &self.inventory {
            location(&p.location)?;
            product(&p.product)?;
            if !seen.insert((&p.location, &p.product)) {
                return Err(ProductionError::DuplicateId { kind: "inventory", id: format!("{}/{}", p.location, p.product) });
            }
            nonneg("holding cost", p.holding_cost)?;
            nonneg("initial stock", p.initial_stock)?;
            nonneg("target penalty", p.target_penalty)?;
            if let Some(t) = p.target {
                nonneg("target", t)?;
            }
        }
        for o in &self.orders {
            self.validate_order(o)?;
        }
        nonneg("hard order penalty", self.hard_order_penalty)?;
        nonneg("shortfall penalty", self.shortfall_penalty)?;
        Ok(())
    }

    pub fn validate_order(&self, o: &Order) -> Result<(), ProductionError> {
        match self.location(&o.customer) {
            Some(l) if l.kind == LocationKind::Customer => {}
            _ => return Err(ProductionError::UnknownReference { kind: "customer", id: o.customer.clone() }),
        }
        if !self.products.contains(&o.product) {
            return Err(ProductionError::UnknownReference { kind: "product", id: o.product.clone() });
        }
        if o.due == 0 || o.due > self.periods {
            return Err(ProductionError::InvalidValue(format!("order `{}` due outside 1..={}", o.id, self.periods)));
        }
        if !(o.quantity.is_finite() && o.quantity > 0.0) {
            return Err(ProductionError::InvalidValue(format!("order `{}` quantity must be positive", o.id)));
        }
        Ok(())
    }
}

fn unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<(), ProductionError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ProductionError::DuplicateId { kind, id: id.to_string() });
        }
    }
    Ok(())
}

fn nonneg(what: &str, v: f64) -> Result<(), ProductionError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ProductionError::InvalidValue(format!("{what} must be finite and >= 0, got {v}")))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductionError {
    #[error("instance parse error: {0}")]
    Parse(String),
    #[error("duplicate {kind} `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown {kind} `{id}`")]
    UnknownReference { kind: &'static str, id: String },
    #[error("{0}")]
    InvalidValue(String),
    #[error("plan entry `{0}` has no variable in the model")]
    UnknownEntry(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

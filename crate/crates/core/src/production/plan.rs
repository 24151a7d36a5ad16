use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::formulation::{dlv_name, formulate_model, inv_name, prod_name, ship_name, short_name, tgap_name};
use super::{Period, ProductionError, ProductionInstance};
use crate::model::{Model, ModelError, Solution, Status};
use crate::repair::{Assignment, ChangeRecord};

const DIFF_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionEntry {
    pub plant: String,
    pub product: String,
    pub period: Period,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentEntry {
    pub from: String,
    pub to: String,
    pub product: String,
    pub period: Period,
    pub quantity: f64,
}

/// End-of-period stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub location: String,
    pub product: String,
    pub period: Period,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryEntry {
    pub order: String,
    pub quantity: f64,
}

/// Quantities per plant, lane, stock point and order. Missing entries mean
/// zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductionPlan {
    #[serde(default)]
    pub production: Vec<ProductionEntry>,
    #[serde(default)]
    pub shipments: Vec<ShipmentEntry>,
    #[serde(default)]
    pub inventory: Vec<InventoryEntry>,
    #[serde(default)]
    pub deliveries: Vec<DeliveryEntry>,
    /// Shortfall of soft orders.
    #[serde(default)]
    pub shortfall: Vec<DeliveryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum ProductionViolation {
    FlowImbalance { location: String, product: String, period: Period, amount: f64 },
    CapacityExceeded { resource: String, period: Period, amount: f64 },
    HardOrderShorted { order: String, delivered: f64, quantity: f64 },
    OrderOverDelivered { order: String, delivered: f64, quantity: f64 },
    NegativeQuantity { variable: String, value: f64 },
}

fn clean(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r + 0.0
    } else {
        x
    }
}

/// Typed plan from a valued solution of [`formulate_model`]'s output.
pub fn decode_plan(inst: &ProductionInstance, model: &Model, solution: &Solution) -> Result<ProductionPlan, ProductionError> {
    if !solution.has_point() || !matches!(solution.status, Status::Optimal | Status::Feasible | Status::LimitReached) {
        return Err(ModelError::NotValued(solution.status).into());
    }
    let get = |name: String| -> Result<f64, ProductionError> {
        let v = model.var_by_name(&name).ok_or(ProductionError::UnknownEntry(name))?;
        Ok(clean(solution.value(v).ok_or(ModelError::UnvaluedVariable(v.index()))?))
    };
    let mut plan = ProductionPlan::default();
    for t in 1..=inst.periods {
        for c in &inst.capabilities {
            plan.production.push(ProductionEntry {
                plant: c.plant.clone(),
                product: c.product.clone(),
                period: t,
                quantity: get(prod_name(&c.plant, &c.product, t))?,
            });
        }
        for lane in &inst.lanes {
            for p in &inst.products {
                plan.shipments.push(ShipmentEntry {
                    from: lane.from.clone(),
                    to: lane.to.clone(),
                    product: p.clone(),
                    period: t,
                    quantity: get(ship_name(&lane.from, &lane.to, p, t))?,
                });
            }
        }
        for param in &inst.inventory {
            plan.inventory.push(InventoryEntry {
                location: param.location.clone(),
                product: param.product.clone(),
                period: t,
                quantity: get(inv_name(&param.location, &param.product, t))?,
            });
        }
    }
    for o in &inst.orders {
        plan.deliveries.push(DeliveryEntry {
            order: o.id.clone(),
            quantity: get(dlv_name(&o.id))?,
        });
        if !inst.is_hard(o) {
            plan.shortfall.push(DeliveryEntry {
                order: o.id.clone(),
                quantity: get(short_name(&o.id))?,
            });
        }
    }
    Ok(plan)
}

fn entries(plan: &ProductionPlan) -> impl Iterator<Item = (String, f64)> + '_ {
    let p = plan
        .production
        .iter()
        .map(|e| (prod_name(&e.plant, &e.product, e.period), e.quantity));
    let s = plan
        .shipments
        .iter()
        .map(|e| (ship_name(&e.from, &e.to, &e.product, e.period), e.quantity));
    let i = plan
        .inventory
        .iter()
        .map(|e| (inv_name(&e.location, &e.product, e.period), e.quantity));
    let d = plan.deliveries.iter().map(|e| (dlv_name(&e.order), e.quantity));
    let u = plan.shortfall.iter().map(|e| (short_name(&e.order), e.quantity));
    p.chain(s).chain(i).chain(d).chain(u)
}

/// Values for every variable of `model`. Soft-order shortfall and target
/// gaps not given by the plan are derived from deliveries and stock.
pub fn encode_plan(inst: &ProductionInstance, model: &Model, plan: &ProductionPlan) -> Result<Assignment, ProductionError> {
    let mut values: Assignment = model.variables().iter().map(|v| (v.name.clone(), 0.0)).collect();
    let mut given = std::collections::HashSet::new();
    for (name, q) in entries(plan) {
        match values.get_mut(&name) {
            Some(v) => *v += q,
            None => return Err(ProductionError::UnknownEntry(name)),
        }
        given.insert(name);
    }
    for o in &inst.orders {
        let short = short_name(&o.id);
        if !inst.is_hard(o) && !given.contains(&short) {
            let delivered = values[&dlv_name(&o.id)];
            values.insert(short, (o.quantity - delivered).max(0.0));
        }
    }
    for param in &inst.inventory {
        if let Some(target) = param.target {
            for t in 1..=inst.periods {
                let stock = values[&inv_name(&param.location, &param.product, t)];
                values.insert(tgap_name(&param.location, &param.product, t), (target - stock).max(0.0));
            }
        }
    }
    Ok(values)
}

/// Checks flow balance, capacities, hard-order fulfilment and signs.
pub fn validate_plan(inst: &ProductionInstance, plan: &ProductionPlan, tol: f64) -> Result<Vec<ProductionViolation>, ProductionError> {
    let model = formulate_model(inst)?;
    let values = encode_plan(inst, &model, plan)?;
    let x: Vec<f64> = model.variables().iter().map(|v| values[&v.name]).collect();
    let violation = |name: &str| -> Result<f64, ProductionError> {
        match model.constraint_by_name(name) {
            Some(c) => Ok(model.constraint(c).violation(&x)?),
            None => Ok(0.0),
        }
    };
    let mut out = Vec::new();
    for (name, q) in entries(plan) {
        if q < -tol {
            out.push(ProductionViolation::NegativeQuantity { variable: name, value: q });
        }
    }
    for t in 1..=inst.periods {
        for loc in &inst.locations {
            for p in &inst.products {
                let amount = violation(&format!("balance[{},{p},{t}]", loc.id))?;
                if amount > tol {
                    out.push(ProductionViolation::FlowImbalance {
                        location: loc.id.clone(),
                        product: p.clone(),
                        period: t,
                        amount,
                    });
                }
            }
        }
        for c in &inst.capabilities {
            let amount = violation(&format!("prodcap[{},{},{t}]", c.plant, c.product))?;
            if amount > tol {
                out.push(ProductionViolation::CapacityExceeded {
                    resource: format!("{}/{}", c.plant, c.product),
                    period: t,
                    amount,
                });
            }
        }
        for lane in &inst.lanes {
            let amount = violation(&format!("lanecap[{},{},{t}]", lane.from, lane.to))?;
            if amount > tol {
                out.push(ProductionViolation::CapacityExceeded {
                    resource: format!("{}->{}", lane.from, lane.to),
                    period: t,
                    amount,
                });
            }
        }
    }
    for o in &inst.orders {
        let delivered = values[&dlv_name(&o.id)];
        if inst.is_hard(o) && delivered < o.quantity - tol {
            out.push(ProductionViolation::HardOrderShorted {
                order: o.id.clone(),
                delivered,
                quantity: o.quantity,
            });
        } else if delivered > o.quantity + tol {
            out.push(ProductionViolation::OrderOverDelivered {
                order: o.id.clone(),
                delivered,
                quantity: o.quantity,
            });
        }
    }
    Ok(out)
}

/// Keeps the entries that still exist in `inst`, adds zero deliveries for
/// new orders and recomputes soft-order shortfall.
pub fn project_plan(inst: &ProductionInstance, plan: &ProductionPlan) -> ProductionPlan {
    let in_horizon = |t: Period| t >= 1 && t <= inst.periods;
    let production = plan
        .production
        .iter()
        .filter(|e| in_horizon(e.period))
        .filter(|e| inst.capabilities.iter().any(|c| c.plant == e.plant && c.product == e.product))
        .cloned()
        .collect();
    let shipments = plan
        .shipments
        .iter()
        .filter(|e| in_horizon(e.period) && inst.products.contains(&e.product))
        .filter(|e| inst.lanes.iter().any(|l| l.from == e.from && l.to == e.to))
        .cloned()
        .collect();
    let inventory = plan
        .inventory
        .iter()
        .filter(|e| in_horizon(e.period) && inst.inventory_param(&e.location, &e.product).is_some())
        .cloned()
        .collect();
    let delivered: HashMap<&str, f64> = plan.deliveries.iter().map(|d| (d.order.as_str(), d.quantity)).collect();
    let mut deliveries = Vec::new();
    let mut shortfall = Vec::new();
    for o in &inst.orders {
        let q = delivered.get(o.id.as_str()).copied().unwrap_or(0.0);
        deliveries.push(DeliveryEntry { order: o.id.clone(), quantity: q });
        if !inst.is_hard(o) {
            shortfall.push(DeliveryEntry {
                order: o.id.clone(),
                quantity: (o.quantity - q).max(0.0),
            });
        }
    }
    ProductionPlan {
        production,
        shipments,
        inventory,
        deliveries,
        shortfall,
    }
}

#[derive(Default)]
struct Totals {
    produced: f64,
    shipped: f64,
    stock: f64,
    delivered: f64,
}

fn totals(inst: &ProductionInstance, plan: &ProductionPlan, product: &str, t: Period) -> Totals {
    let due: HashMap<&str, (&str, Period)> = inst
        .orders
        .iter()
        .map(|o| (o.id.as_str(), (o.product.as_str(), o.due)))
        .collect();
    Totals {
        produced: plan.production.iter().filter(|e| e.product == product && e.period == t).map(|e| e.quantity).sum(),
        shipped: plan.shipments.iter().filter(|e| e.product == product && e.period == t).map(|e| e.quantity).sum(),
        stock: plan.inventory.iter().filter(|e| e.product == product && e.period == t).map(|e| e.quantity).sum(),
        delivered: plan
            .deliveries
            .iter()
            .filter(|d| due.get(d.order.as_str()) == Some(&(product, t)))
            .map(|d| d.quantity)
            .sum(),
    }
}

/// Per (product, period) changes in produced, shipped, stocked and
/// delivered totals, then orders whose shortfall changed.
pub fn render_diff(inst: &ProductionInstance, incumbent: &ProductionPlan, repaired: &ProductionPlan) -> Vec<ChangeRecord> {
    let mut out = Vec::new();
    for p in &inst.products {
        for t in 1..=inst.periods {
            let a = totals(inst, incumbent, p, t);
            let b = totals(inst, repaired, p, t);
            for (measure, before, after) in [
                ("production", a.produced, b.produced),
                ("shipment", a.shipped, b.shipped),
                ("inventory", a.stock, b.stock),
                ("delivery", a.delivered, b.delivered),
            ] {
                if (before - after).abs() > DIFF_TOL {
                    out.push(ChangeRecord::QuantityChanged {
                        product: p.clone(),
                        period: t,
                        measure: measure.into(),
                        before,
                        after,
                    });
                }
            }
        }
    }
    let delivered = |plan: &ProductionPlan, id: &str| plan.deliveries.iter().find(|d| d.order == id).map(|d| d.quantity);
    for o in &inst.orders {
        let after = o.quantity - delivered(repaired, &o.id).unwrap_or(0.0);
        let before = delivered(incumbent, &o.id).map(|d| o.quantity - d);
        let changed = before.is_none_or(|b| (b - after).abs() > DIFF_TOL);
        if after > DIFF_TOL && changed {
            out.push(ChangeRecord::Shortfall {
                order: o.id.clone(),
                quantity: after,
            });
        }
    }
    out
}

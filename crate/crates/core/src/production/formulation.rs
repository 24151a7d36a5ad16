use std::collections::BTreeMap;

use super::{Period, ProductionError, ProductionInstance};
use crate::model::{ConstraintSpec, LinExpr, Model, Sense, VarId, VarKind, VarSpec};

pub const KPI_PRODUCTION_COST: &str = "production_cost";
pub const KPI_TRANSPORT_COST: &str = "transport_cost";
pub const KPI_HOLDING_COST: &str = "holding_cost";
pub const KPI_SHORTFALL_COST: &str = "shortfall_cost";
pub const KPI_TARGET_PENALTY: &str = "target_penalty";
pub const KPI_SHORTFALL_QTY: &str = "shortfall_qty";
pub const KPI_SERVICE_LEVEL: &str = "service_level";

pub(crate) fn prod_name(plant: &str, product: &str, t: Period) -> String {
    format!("prod[{plant},{product},{t}]")
}

pub(crate) fn ship_name(from: &str, to: &str, product: &str, t: Period) -> String {
    format!("ship[{from},{to},{product},{t}]")
}

pub(crate) fn inv_name(location: &str, product: &str, t: Period) -> String {
    format!("inv[{location},{product},{t}]")
}

pub(crate) fn dlv_name(order: &str) -> String {
    format!("dlv[{order}]")
}

pub(crate) fn short_name(order: &str) -> String {
    format!("short[{order}]")
}

pub(crate) fn tgap_name(location: &str, product: &str, t: Period) -> String {
    format!("tgap[{location},{product},{t}]")
}

fn add(model: &mut Model, name: String, kind: VarKind, upper: f64, t: Period) -> Result<VarId, ProductionError> {
    Ok(model.add_variable(VarSpec::new(name, kind, 0.0, upper).with_start(t as f64))?)
}

/// Continuous lot-sizing / transport LP (MILP when production is integral).
///
/// Rows: `balance[l,p,t]` (stock carried = stock in + production + inbound
/// − outbound − deliveries), `prodcap[plant,p,t]`, `lanecap[from,to,t]`,
/// `fulfil[o]` and `target[l,p,t]`. Hard orders get `dlv = quantity`,
/// relaxable at the hard-order penalty; soft orders get
/// `dlv + short = quantity`. Every variable carries its period as decision
/// time.
pub fn formulate_model(inst: &ProductionInstance) -> Result<Model, ProductionError> {
    inst.validate()?;
    let mut model = Model::new();
    let prod_kind = if inst.integral_production { VarKind::Integer } else { VarKind::Continuous };
    let inf = f64::INFINITY;

    // Keyed by (location, product, period).
    let mut balance: BTreeMap<(usize, usize, Period), LinExpr> = BTreeMap::new();
    let loc_index = |id: &str| inst.locations.iter().position(|l| l.id == id).expect("validated");
    let prod_index = |id: &str| inst.products.iter().position(|p| p == id).expect("validated");

    let mut production_cost = LinExpr::new();
    let mut transport_cost = LinExpr::new();
    let mut holding_cost = LinExpr::new();
    let mut shortfall_cost = LinExpr::new();
    let mut target_penalty = LinExpr::new();
    let mut shortfall_qty = LinExpr::new();

    for t in 1..=inst.periods {
        for c in &inst.capabilities {
            let v = add(&mut model, prod_name(&c.plant, &c.product, t), prod_kind, inf, t)?;
            production_cost.add_term(c.unit_cost, v);
            balance
                .entry((loc_index(&c.plant), prod_index(&c.product), t))
                .or_default()
                .add_term(-1.0, v);
            let e = LinExpr::new().term(1.0, v);
            let name = format!("prodcap[{},{},{t}]", c.plant, c.product);
            model.add_constraint(ConstraintSpec::new(name, e, Sense::Le, c.capacity))?;
        }
        for lane in &inst.lanes {
            let mut load = LinExpr::new();
            for p in &inst.products {
                let v = add(&mut model, ship_name(&lane.from, &lane.to, p, t), VarKind::Continuous, inf, t)?;
                transport_cost.add_term(lane.unit_cost, v);
                load.add_term(1.0, v);
                let pi = prod_index(p);
                balance.entry((loc_index(&lane.from), pi, t)).or_default().add_term(1.0, v);
                balance.entry((loc_index(&lane.to), pi, t)).or_default().add_term(-1.0, v);
            }
            if let Some(cap) = lane.capacity {
                let name = format!("lanecap[{},{},{t}]", lane.from, lane.to);
                model.add_constraint(ConstraintSpec::new(name, load, Sense::Le, cap))?;
            }
        }
        for param in &inst.inventory {
            let key = (loc_index(&param.location), prod_index(&param.product), t);
            let v = add(&mut model, inv_name(&param.location, &param.product, t), VarKind::Continuous, inf, t)?;
            holding_cost.add_term(param.holding_cost, v);
            balance.entry(key).or_default().add_term(1.0, v);
            if t > 1 {
                let prev = model
                    .var_by_name(&inv_name(&param.location, &param.product, t - 1))
                    .expect("created in previous period");
                balance.entry(key).or_default().add_term(-1.0, prev);
            }
            if let Some(target) = param.target {
                let gap = add(&mut model, tgap_name(&param.location, &param.product, t), VarKind::Continuous, inf, t)?;
                target_penalty.add_term(param.target_penalty, gap);
                let e = LinExpr::new().term(1.0, v).term(1.0, gap);
                let name = format!("target[{},{},{t}]", param.location, param.product);
                model.add_constraint(ConstraintSpec::new(name, e, Sense::Ge, target))?;
            }
        }
    }

    let mut delivered = LinExpr::new();
    let mut demand = 0.0;
    for o in &inst.orders {
        let dlv = add(&mut model, dlv_name(&o.id), VarKind::Continuous, inf, o.due)?;
        delivered.add_term(1.0, dlv);
        demand += o.quantity;
        balance
            .entry((loc_index(&o.customer), prod_index(&o.product), o.due))
            .or_default()
            .add_term(1.0, dlv);
        let name = format!("fulfil[{}]", o.id);
        if inst.is_hard(o) {
            let e = LinExpr::new().term(1.0, dlv);
            model.add_constraint(
                ConstraintSpec::new(name, e, Sense::Eq, o.quantity).relaxable(inst.hard_order_penalty),
            )?;
        } else {
            let short = add(&mut model, short_name(&o.id), VarKind::Continuous, inf, o.due)?;
            shortfall_cost.add_term(inst.shortfall_penalty, short);
            shortfall_qty.add_term(1.0, short);
            let e = LinExpr::new().term(1.0, dlv).term(1.0, short);
            model.add_constraint(ConstraintSpec::new(name, e, Sense::Eq, o.quantity))?;
        }
    }

    for ((l, p, t), expr) in balance {
        let loc = &inst.locations[l];
        let product = &inst.products[p];
        let initial = if t == 1 {
            inst.inventory_param(&loc.id, product).map_or(0.0, |i| i.initial_stock)
        } else {
            0.0
        };
        let name = format!("balance[{},{product},{t}]", loc.id);
        model.add_constraint(ConstraintSpec::new(name, expr, Sense::Eq, initial))?;
    }

    let mut objective = production_cost.clone();
    for part in [&transport_cost, &holding_cost, &shortfall_cost, &target_penalty] {
        objective.add_scaled(part, 1.0);
    }
    model.set_objective(objective)?;
    let service = if demand > 0.0 { delivered.scaled(1.0 / demand) } else { LinExpr::constant(1.0) };
    model.add_kpi(KPI_PRODUCTION_COST, production_cost)?;
    model.add_kpi(KPI_TRANSPORT_COST, transport_cost)?;
    model.add_kpi(KPI_HOLDING_COST, holding_cost)?;
    model.add_kpi(KPI_SHORTFALL_COST, shortfall_cost)?;
    model.add_kpi(KPI_TARGET_PENALTY, target_penalty)?;
    model.add_kpi(KPI_SHORTFALL_QTY, shortfall_qty)?;
    model.add_kpi(KPI_SERVICE_LEVEL, service)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::model::Status;
    use crate::{solve_lp, solve_milp, SolveParams};

    fn solve(inst: &ProductionInstance) -> (Model, crate::Solution) {
        let m = formulate_model(inst).unwrap();
        let (s, _) = solve_milp(&m, &SolveParams::default()).unwrap();
        (m, s)
    }

    #[test]
    fn p1_optimum() {
        let (m, s) = solve(&p1());
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value.unwrap() - 17.5).abs() < 1e-6);
        let v = |n: &str| s.value(m.var_by_name(n).unwrap()).unwrap();
        assert!((v("prod[plant1,widget,1]") - 5.0).abs() < 1e-6);
        assert!((v("prod[plant1,widget,2]") - 10.0).abs() < 1e-6);
        assert!((v("inv[plant1,widget,1]") - 5.0).abs() < 1e-6);
        assert!(m.check_feasible(&s, 1e-7).is_empty());
    }

    #[test]
    fn lp_and_milp_agree_on_continuous_model() {
        let m = formulate_model(&p1()).unwrap();
        let (a, _) = solve_lp(&m, &SolveParams::default()).unwrap();
        let (b, _) = solve_milp(&m, &SolveParams::default()).unwrap();
        assert!((a.objective_value.unwrap() - b.objective_value.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn objective_decomposes_into_cost_kpis() {
        let mut inst = p1();
        inst.orders.push(order("o2", 1, 4.0, 0));
        inst.inventory[0].target = Some(3.0);
        inst.inventory[0].target_penalty = 0.25;
        let (m, s) = solve(&inst);
        let k = m.kpi_report(&s).unwrap();
        let sum: f64 = [KPI_PRODUCTION_COST, KPI_TRANSPORT_COST, KPI_HOLDING_COST, KPI_SHORTFALL_COST, KPI_TARGET_PENALTY]
            .iter()
            .map(|n| k[*n])
            .sum();
        assert!((sum - s.objective_value.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn zero_orders_cost_nothing() {
        let mut inst = p1();
        inst.orders.clear();
        let (m, s) = solve(&inst);
        assert_eq!(s.objective_value, Some(0.0));
        assert!(s.values.iter().all(|&x| x.abs() < 1e-9));
        assert_eq!(m.kpi_report(&s).unwrap()[KPI_SERVICE_LEVEL], 1.0);
    }

    #[test]
    fn hard_demand_beyond_capacity_is_infeasible() {
        let mut inst = p1();
        inst.orders[0].quantity = 25.0;
        let (_, s) = solve(&inst);
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn soft_demand_beyond_capacity_falls_short() {
        let mut inst = p1();
        inst.orders[0].quantity = 25.0;
        inst.orders[0].priority = 0;
        let (m, s) = solve(&inst);
        assert_eq!(s.status, Status::Optimal);
        let k = m.kpi_report(&s).unwrap();
        assert!((k[KPI_SHORTFALL_QTY] - 5.0).abs() < 1e-6);
        assert!((k[KPI_SERVICE_LEVEL] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn integral_production_flag() {
        let mut inst = p1();
        inst.integral_production = true;
        let m = formulate_model(&inst).unwrap();
        assert!(m.has_integrality());
        let (s, _) = solve_milp(&m, &SolveParams::default()).unwrap();
        assert!((s.objective_value.unwrap() - 17.5).abs() < 1e-6);
    }

    #[test]
    fn lane_capacity_binds() {
        let mut inst = p1();
        inst.lanes[0].capacity = Some(12.0);
        let (_, s) = solve(&inst);
        assert_eq!(s.status, Status::Infeasible);
        // Stock at the customer would not help either: none is declared.
        inst.inventory.push(super::super::InventoryParam {
            location: "cust1".into(),
            product: "widget".into(),
            holding_cost: 0.1,
            initial_stock: 0.0,
            target: None,
            target_penalty: 0.0,
        });
        let (_, s) = solve(&inst);
        assert_eq!(s.status, Status::Optimal);
        // Build 5 early and ship it straight on: holding at the customer is cheaper.
        assert!((s.objective_value.unwrap() - 15.5).abs() < 1e-6);
    }
}

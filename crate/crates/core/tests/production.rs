mod common;

use common::{p1, p1_new_order_scan, p1_scan, scenario};
use reparo_core::domain::{apply_scenario, detect_conflicts, repair, solve_plan, Conflict, ProductionDomain, RepairMethod};
use reparo_core::model::Status;
use reparo_core::production::{validate_plan, ProductionPlan, ProductionViolation};
use reparo_core::repair::RepairSpec;
use reparo_core::SolveParams;

fn produced(plan: &ProductionPlan, period: u32) -> f64 {
    plan.production.iter().filter(|e| e.period == period).map(|e| e.quantity).sum()
}

#[test]
fn p1_matches_the_scan() {
    let (best, q1, q2) = p1_scan();
    assert_eq!((best, q1, q2), (17.5, 5.0, 10.0));
    let out = solve_plan::<ProductionDomain>(&p1(), &SolveParams::default()).unwrap();
    assert_eq!(out.status, Status::Optimal);
    assert!((out.objective.unwrap() - best).abs() < 1e-6);
    let plan = out.plan.unwrap();
    assert!((produced(&plan, 1) - q1).abs() < 1e-6);
    assert!((produced(&plan, 2) - q2).abs() < 1e-6);
    assert!(validate_plan(&p1(), &plan, 1e-6).unwrap().is_empty());
}

#[test]
fn rush_order_is_detected_and_shorted_optimally() {
    let plan = solve_plan::<ProductionDomain>(&p1(), &SolveParams::default()).unwrap().plan.unwrap();
    let s = scenario("p1_new_order.json");
    let perturbed = apply_scenario::<ProductionDomain>(&p1(), &s).unwrap();
    let conflicts = detect_conflicts::<ProductionDomain>(&perturbed, &plan).unwrap();
    assert!(matches!(
        conflicts.as_slice(),
        [Conflict::Violation(ProductionViolation::HardOrderShorted { order, .. })] if order == "o2"
    ));
    // The perturbed nominal model has no feasible point at all.
    assert_eq!(solve_plan::<ProductionDomain>(&perturbed, &SolveParams::default()).unwrap().status, Status::Infeasible);

    let (best, short) = p1_new_order_scan();
    let out = repair::<ProductionDomain>(&p1(), &plan, &s, &RepairSpec::default(), &RepairMethod::Exact, &SolveParams::default()).unwrap();
    assert!((out.result.repair_objective().unwrap() - best).abs() < 1e-6);
    let repaired = out.plan.unwrap();
    let delivered: f64 = repaired.deliveries.iter().map(|d| d.quantity).sum();
    assert!((23.0 - delivered - short).abs() < 1e-6);
    assert!((produced(&repaired, 1) - 10.0).abs() < 1e-6 && (produced(&repaired, 2) - 10.0).abs() < 1e-6);
}

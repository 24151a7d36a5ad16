//! Repair models: the perturbed model with frozen variables pinned to their
//! incumbent values, relaxable constraints made elastic, and an objective
//! mixing the original cost, deviation from the incumbent and violation
//! penalties.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::{solve_milp, SolveParams, SolveStats};
use crate::model::{ConstraintSpec, LinExpr, Model, Sense, Solution, Status, VarId, VarKind, VarSpec};

pub const KPI_ORIGINAL_OBJECTIVE: &str = "original_objective";
pub const KPI_DEVIATION_COUNT: &str = "deviation_count";
pub const KPI_CONTINUOUS_DEVIATION: &str = "continuous_deviation";
pub const KPI_VIOLATION_PENALTY: &str = "violation_penalty_total";
pub const KPI_REPAIR_OBJECTIVE: &str = "repair_objective";

const PIN_TOL: f64 = 1e-6;

/// Variable values keyed by variable name. Models formulated from different
/// versions of an instance share variables through their names.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreezeSpec {
    /// Regular expressions matched against whole variable names.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<String>,
    /// Freeze every variable whose decision time is before this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freeze_horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxRule {
    /// Regular expression matched against whole constraint names.
    pub pattern: String,
    /// Overrides the constraint's own penalty annotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairWeights {
    pub w_cost: f64,
    pub w_dev: f64,
    #[serde(default)]
    pub w_dev_cont: f64,
}

impl Default for RepairWeights {
    fn default() -> Self {
        Self {
            w_cost: 1.0,
            w_dev: 1.0,
            w_dev_cont: 0.0,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSpec {
    #[serde(default)]
    pub freeze: FreezeSpec,
    #[serde(default)]
    pub relax: Vec<RelaxRule>,
    #[serde(default)]
    pub weights: RepairWeights,
    /// Elasticize every constraint carrying a relax annotation, not only
    /// those matched by `relax`.
    #[serde(default = "yes")]
    pub auto_relax: bool,
}

impl Default for RepairSpec {
    fn default() -> Self {
        Self {
            freeze: FreezeSpec::default(),
            relax: Vec::new(),
            weights: RepairWeights::default(),
            auto_relax: true,
        }
    }
}

fn full_match(pattern: &str) -> Result<Regex, Error> {
    Regex::new(&format!("^(?:{pattern})$"))
        .map_err(|e| Error::InvalidSpec(format!("pattern `{pattern}`: {e}")))
}

impl RepairSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let spec: RepairSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let w = &self.weights;
        for (name, v) in [("w_cost", w.w_cost), ("w_dev", w.w_dev), ("w_dev_cont", w.w_dev_cont)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if w.w_cost == 0.0 && w.w_dev == 0.0 {
            return Err(Error::InvalidSpec("one of w_cost, w_dev must be positive".into()));
        }
        if self.freeze.freeze_horizon.is_some_and(|h| h.is_nan()) {
            return Err(Error::InvalidSpec("freeze_horizon is NaN".into()));
        }
        for p in &self.freeze.patterns {
            full_match(p)?;
        }
        for r in &self.relax {
            full_match(&r.pattern)?;
            if r.penalty.is_some_and(|p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidSpec(format!("penalty for `{}` must be finite and >= 0", r.pattern)));
            }
        }
        Ok(())
    }
}

/// Warnings produced while building a repair model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RepairNote {
    FreezePatternMatchedNothing { pattern: String },
    RelaxPatternMatchedNothing { pattern: String },
    /// A frozen variable's incumbent value is outside its current domain,
    /// so it was left free.
    ForcedUnfreeze { variable: String, value: f64, lower: f64, upper: f64 },
    /// A frozen variable was pinned to its projected value, which differs
    /// from the incumbent because the disruption broke the old decision.
    FrozenAtProjection { variable: String, incumbent: f64, value: f64 },
    /// Incumbent variables with no counterpart in the perturbed model.
    DroppedVariables { count: usize },
}

/// Human-readable difference between an incumbent and a repaired plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ChangeRecord {
    RouteChanged { aircraft: String, before: Vec<String>, after: Vec<String> },
    Cancelled { flight: String },
    QuantityChanged { product: String, period: u32, measure: String, before: f64, after: f64 },
    Shortfall { order: String, quantity: f64 },
}

#[derive(Debug, Clone)]
struct Elastic {
    expr: LinExpr,
    rhs: f64,
    /// Absorbs lhs above rhs.
    over: Option<VarId>,
    /// Absorbs lhs below rhs.
    under: Option<VarId>,
}

#[derive(Debug, Clone)]
pub struct RepairModel {
    model: Model,
    decisions: usize,
    incumbent: Vec<Option<f64>>,
    pinned: Vec<Option<f64>>,
    elastic: Vec<Elastic>,
    cont_dev: Vec<(VarId, VarId, VarId)>,
    weights: RepairWeights,
    notes: Vec<RepairNote>,
    start: Vec<f64>,
    start_feasible: bool,
}

/// Variables of `model` covered by the freeze patterns or horizon, and the
/// number of variables each pattern matched.
pub(crate) fn freeze_mask(model: &Model, spec: &RepairSpec) -> Result<(Vec<bool>, Vec<usize>), Error> {
    let freeze: Vec<Regex> = spec.freeze.patterns.iter().map(|p| full_match(p)).collect::<Result<_, _>>()?;
    let mut hits = vec![0usize; freeze.len()];
    let mask = model
        .variables()
        .iter()
        .map(|v| {
            let mut frozen = false;
            for (k, re) in freeze.iter().enumerate() {
                if re.is_match(&v.name) {
                    hits[k] += 1;
                    frozen = true;
                }
            }
            if let (Some(h), Some(s)) = (spec.freeze.freeze_horizon, v.start) {
                frozen |= s < h;
            }
            frozen
        })
        .collect();
    Ok((mask, hits))
}

/// Per-unit violation penalty of each constraint of `model`, `None` for
/// rows that stay hard, and the number of rows each relax rule matched.
/// The first matching rule wins.
pub(crate) fn relax_penalties(model: &Model, spec: &RepairSpec) -> Result<(Vec<Option<f64>>, Vec<usize>), Error> {
    let relax: Vec<Regex> = spec.relax.iter().map(|r| full_match(&r.pattern)).collect::<Result<_, _>>()?;
    let mut hits = vec![0usize; relax.len()];
    let mut out = Vec::with_capacity(model.num_constraints());
    for c in model.constraints() {
        let annotated = c.relax.map(|r| r.penalty_per_unit);
        out.push(match relax.iter().position(|re| re.is_match(&c.name)) {
            Some(k) => {
                hits[k] += 1;
                Some(
                    spec.relax[k]
                        .penalty
                        .or(annotated)
                        .ok_or_else(|| Error::MissingPenalty(c.name.clone()))?,
                )
            }
            None if spec.auto_relax => annotated,
            None => None,
        });
    }
    Ok((out, hits))
}

/// [`build_repair_model_from`] starting from the incumbent itself.
pub fn build_repair_model(perturbed: &Model, incumbent: &Assignment, spec: &RepairSpec) -> Result<RepairModel, Error> {
    build_repair_model_from(perturbed, incumbent, incumbent, spec)
}

/// Builds the repair model.
///
/// `incumbent` is what deviation is measured against. `start` is the
/// incumbent projected onto the perturbed instance; frozen variables are
/// pinned to it and it seeds [`RepairModel::start_point`]. Variables of
/// `perturbed` valued in neither map are new: they get no freeze and no
/// deviation term.
pub fn build_repair_model_from(
    perturbed: &Model,
    incumbent: &Assignment,
    start: &Assignment,
    spec: &RepairSpec,
) -> Result<RepairModel, Error> {
    spec.validate()?;
    let (frozen, freeze_hits) = freeze_mask(perturbed, spec)?;
    let (penalties_of, relax_hits) = relax_penalties(perturbed, spec)?;
    let n = perturbed.num_vars();
    let mut model = Model::new();
    let mut notes = Vec::new();
    let mut inc = vec![None; n];
    let mut pinned = vec![None; n];

    for (j, v) in perturbed.variables().iter().enumerate() {
        let id = model.add_variable(v.clone())?;
        inc[j] = incumbent.get(&v.name).copied();
        let Some(x_bar) = inc[j] else { continue };
        if !frozen[j] {
            continue;
        }
        let value = start.get(&v.name).copied().unwrap_or(x_bar);
        let off_grid = v.kind.is_integral() && (value - value.round()).abs() > PIN_TOL;
        if value < v.lower - PIN_TOL || value > v.upper + PIN_TOL || off_grid {
            notes.push(RepairNote::ForcedUnfreeze {
                variable: v.name.clone(),
                value,
                lower: v.lower,
                upper: v.upper,
            });
            continue;
        }
        let value = value.clamp(v.lower, v.upper);
        if (value - x_bar).abs() > PIN_TOL {
            notes.push(RepairNote::FrozenAtProjection {
                variable: v.name.clone(),
                incumbent: x_bar,
                value,
            });
        }
        model.set_bounds(id, value, value)?;
        pinned[j] = Some(value);
    }
    for (k, hits) in freeze_hits.iter().enumerate() {
        if *hits == 0 {
            notes.push(RepairNote::FreezePatternMatchedNothing {
                pattern: spec.freeze.patterns[k].clone(),
            });
        }
    }
    let dropped = incumbent.keys().filter(|k| perturbed.var_by_name(k).is_none()).count();
    if dropped > 0 {
        notes.push(RepairNote::DroppedVariables { count: dropped });
    }

    let mut elastic = Vec::new();
    let mut penalties = LinExpr::new();
    for (c, penalty) in perturbed.constraints().iter().zip(penalties_of) {
        let Some(penalty) = penalty else {
            let mut hard = c.clone();
            hard.relax = None;
            model.add_constraint(hard)?;
            continue;
        };
        let mut expr = c.expr.clone();
        let mut slack = |label: &str, coef: f64, model: &mut Model| -> Result<VarId, Error> {
            let v = model.add_variable(VarSpec::continuous(format!("{label}[{}]", c.name), 0.0, f64::INFINITY))?;
            expr.add_term(coef, v);
            penalties.add_term(penalty, v);
            Ok(v)
        };
        let over = match c.sense {
            Sense::Le | Sense::Eq => Some(slack("over", -1.0, &mut model)?),
            Sense::Ge => None,
        };
        let under = match c.sense {
            Sense::Ge | Sense::Eq => Some(slack("under", 1.0, &mut model)?),
            Sense::Le => None,
        };
        model.add_constraint(ConstraintSpec::new(c.name.clone(), expr, c.sense, c.rhs))?;
        elastic.push(Elastic {
            expr: c.expr.clone(),
            rhs: c.rhs,
            over,
            under,
        });
    }
    for (k, hits) in relax_hits.iter().enumerate() {
        if *hits == 0 {
            notes.push(RepairNote::RelaxPatternMatchedNothing {
                pattern: spec.relax[k].pattern.clone(),
            });
        }
    }

    // Binary deviation x̄(1 − x) + (1 − x̄)x; continuous deviation d⁺ + d⁻.
    let w = spec.weights;
    let mut dev_bin = LinExpr::new();
    let mut dev_cont = LinExpr::new();
    let mut cont_dev = Vec::new();
    for j in 0..n {
        let Some(x_bar) = inc[j] else { continue };
        let var = VarId(j);
        let v = perturbed.variable(var);
        if v.kind == VarKind::Binary {
            dev_bin.add_constant(x_bar);
            dev_bin.add_term(1.0 - 2.0 * x_bar, var);
        } else if w.w_dev_cont > 0.0 {
            let plus = model.add_variable(VarSpec::continuous(format!("dev+[{}]", v.name), 0.0, f64::INFINITY))?;
            let minus = model.add_variable(VarSpec::continuous(format!("dev-[{}]", v.name), 0.0, f64::INFINITY))?;
            let e = LinExpr::new().term(1.0, var).term(-1.0, plus).term(1.0, minus);
            model.add_constraint(ConstraintSpec::new(format!("dev[{}]", v.name), e, Sense::Eq, x_bar))?;
            dev_cont.add_term(1.0, plus);
            dev_cont.add_term(1.0, minus);
            cont_dev.push((var, plus, minus));
        }
    }

    let original = perturbed.objective().clone();
    let mut objective = original.scaled(w.w_cost);
    objective.add_scaled(&dev_bin, w.w_dev);
    objective.add_scaled(&dev_cont, w.w_dev_cont);
    objective.add_scaled(&penalties, 1.0);
    model.set_objective(objective.clone())?;
    for k in perturbed.kpis() {
        model.add_kpi(k.name.clone(), k.expr.clone())?;
    }
    model.add_kpi(KPI_ORIGINAL_OBJECTIVE, original)?;
    model.add_kpi(KPI_DEVIATION_COUNT, dev_bin)?;
    model.add_kpi(KPI_VIOLATION_PENALTY, penalties)?;
    model.add_kpi(KPI_REPAIR_OBJECTIVE, objective)?;

    let mut rm = RepairModel {
        model,
        decisions: n,
        incumbent: inc,
        pinned,
        elastic,
        cont_dev,
        weights: w,
        notes,
        start: Vec::new(),
        start_feasible: false,
    };
    let decision: Vec<f64> = perturbed
        .variables()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            rm.pinned[j]
                .or_else(|| start.get(&v.name).copied())
                .or(rm.incumbent[j])
                .unwrap_or(0.0)
                .clamp(v.lower, v.upper)
        })
        .collect();
    rm.start = rm.complete_point(&decision)?;
    rm.start_feasible = rm.model.check_point(&rm.start, PIN_TOL).is_empty();
    Ok(rm)
}

impl RepairModel {
    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Variables `0..decision_count()` are those of the perturbed model;
    /// the rest are slacks and deviation helpers.
    pub fn decision_count(&self) -> usize {
        self.decisions
    }

    pub fn is_frozen(&self, var: VarId) -> bool {
        self.pinned.get(var.0).is_some_and(Option::is_some)
    }

    pub fn incumbent_value(&self, var: VarId) -> Option<f64> {
        self.incumbent.get(var.0).copied().flatten()
    }

    pub fn weights(&self) -> RepairWeights {
        self.weights
    }

    pub fn notes(&self) -> &[RepairNote] {
        &self.notes
    }

    /// The projected incumbent with every violation absorbed by slacks.
    pub fn start_point(&self) -> &[f64] {
        &self.start
    }

    /// Whether [`start_point`](Self::start_point) satisfies the repair
    /// model. Fails only when the projection breaks a hard constraint.
    pub fn start_feasible(&self) -> bool {
        self.start_feasible
    }

    /// Extends decision values with the smallest slacks and deviation
    /// helpers consistent with them.
    pub fn complete_point(&self, decision: &[f64]) -> Result<Vec<f64>, Error> {
        let mut x = vec![0.0; self.model.num_vars()];
        x[..self.decisions].copy_from_slice(&decision[..self.decisions]);
        for e in &self.elastic {
            let lhs = e.expr.evaluate(decision)?;
            if let Some(v) = e.over {
                x[v.0] = (lhs - e.rhs).max(0.0);
            }
            if let Some(v) = e.under {
                x[v.0] = (e.rhs - lhs).max(0.0);
            }
        }
        for &(var, plus, minus) in &self.cont_dev {
            let diff = x[var.0] - self.incumbent[var.0].unwrap_or(0.0);
            x[plus.0] = diff.max(0.0);
            x[minus.0] = (-diff).max(0.0);
        }
        Ok(x)
    }

    /// Repair objective at a complete point.
    pub fn objective_at(&self, point: &[f64]) -> Result<f64, Error> {
        Ok(self.model.objective().evaluate(point)?)
    }

    /// Decision variables of a repair-model point, keyed by name.
    pub fn assignment(&self, point: &[f64]) -> Assignment {
        self.model.variables()[..self.decisions]
            .iter()
            .zip(point)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }

    /// L1 distance of continuous and integer variables from the incumbent.
    pub fn continuous_deviation(&self, point: &[f64]) -> f64 {
        (0..self.decisions)
            .filter(|&j| self.model.variables()[j].kind != VarKind::Binary)
            .filter_map(|j| self.incumbent[j].map(|x_bar| (point[j] - x_bar).abs()))
            .sum()
    }

    /// Wraps a solve of this model into a result (without a diff).
    pub fn result(&self, solution: Solution, stats: SolveStats) -> RepairResult {
        let mut kpis = BTreeMap::new();
        let mut assignment = Assignment::new();
        if solution.has_point() {
            if let Ok(k) = self.model.kpi_report(&solution) {
                kpis = k;
            }
            kpis.insert(KPI_CONTINUOUS_DEVIATION.to_string(), self.continuous_deviation(&solution.values));
            assignment = self.assignment(&solution.values);
        }
        RepairResult {
            status: solution.status,
            solution,
            assignment,
            kpis,
            diff: Vec::new(),
            notes: self.notes.clone(),
            stats,
            trajectory: Vec::new(),
        }
    }
}

/// One VNS iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    pub k: usize,
    pub blocks: Vec<String>,
    pub accepted: bool,
    /// Best repair objective after this iteration; absent while no
    /// feasible point is known.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairResult {
    pub status: Status,
    /// Solution of the repair model, slacks and helpers included.
    pub solution: Solution,
    /// Decision variables only, by name.
    pub assignment: Assignment,
    pub kpis: BTreeMap<String, f64>,
    pub diff: Vec<ChangeRecord>,
    pub notes: Vec<RepairNote>,
    pub stats: SolveStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<TrajectoryRecord>,
}

impl RepairResult {
    pub fn repair_objective(&self) -> Option<f64> {
        self.solution.objective_value
    }
}

/// Solves the repair model exactly. If the node or time limit stops the
/// search before any incumbent, the projected start point is returned when
/// it is feasible.
pub fn repair_exact(rm: &RepairModel, params: &SolveParams) -> Result<RepairResult, Error> {
    let (mut solution, stats) = solve_milp(&rm.model, params)?;
    if !solution.has_point() && solution.status == Status::LimitReached && rm.start_feasible {
        solution = Solution {
            status: Status::LimitReached,
            values: rm.start.clone(),
            objective_value: Some(rm.objective_at(&rm.start)?),
        };
    }
    Ok(rm.result(solution, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::fixtures::*;
    use crate::tail::{encode_plan, formulate_mip};

    fn t1_setup() -> (Model, Assignment) {
        let tt = t1();
        let m = formulate_mip(&tt).unwrap();
        let plan = route(&[("ac1", &["f1", "f2"]), ("ac2", &["f3", "f4"])]);
        let inc = encode_plan(&tt, &m, &plan).unwrap();
        (m, inc)
    }

    fn spec(w_cost: f64, w_dev: f64) -> RepairSpec {
        RepairSpec {
            weights: RepairWeights {
                w_cost,
                w_dev,
                w_dev_cont: 0.0,
            },
            ..RepairSpec::default()
        }
    }

    #[test]
    fn spec_json_defaults_and_validation() {
        let s = RepairSpec::from_json(r#"{"weights":{"w_cost":1,"w_dev":2}}"#).unwrap();
        assert!(s.auto_relax);
        assert_eq!(s.weights.w_dev_cont, 0.0);
        assert!(RepairSpec::from_json(r#"{"weights":{"w_cost":0,"w_dev":0}}"#).is_err());
        assert!(RepairSpec::from_json(r#"{"freeze":{"patterns":["x["]}}"#).is_err());
        assert!(RepairSpec::from_json(r#"{"weights":{"w_cost":-1,"w_dev":1}}"#).is_err());
        let full = r#"{"freeze":{"patterns":["src\\[.*"],"freeze_horizon":500},
            "relax":[{"pattern":"cover\\[f2\\]","penalty":5}],
            "weights":{"w_cost":1,"w_dev":1,"w_dev_cont":0.5},"auto_relax":false}"#;
        let s = RepairSpec::from_json(full).unwrap();
        assert_eq!(s.freeze.freeze_horizon, Some(500.0));
        assert_eq!(s.relax[0].penalty, Some(5.0));
    }

    #[test]
    fn freezing_everything_leaves_only_the_incumbent() {
        let (m, inc) = t1_setup();
        let s = RepairSpec {
            freeze: FreezeSpec {
                patterns: vec![".*".into()],
                freeze_horizon: None,
            },
            ..spec(1.0, 1.0)
        };
        let rm = build_repair_model(&m, &inc, &s).unwrap();
        assert!(rm.start_feasible());
        for v in m.var_ids() {
            let spec = rm.model().variable(v);
            assert_eq!(spec.lower, spec.upper);
            assert_eq!(spec.lower, inc[&spec.name]);
        }
        let r = repair_exact(&rm, &SolveParams::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.kpis[KPI_DEVIATION_COUNT], 0.0);
        assert_eq!(r.assignment, inc);
    }

    #[test]
    fn zero_deviation_weight_preserves_argmin() {
        let (m, inc) = t1_setup();
        let rm = build_repair_model(&m, &inc, &spec(1.0, 0.0)).unwrap();
        let (nominal, _) = solve_milp(&m, &SolveParams::default()).unwrap();
        let r = repair_exact(&rm, &SolveParams::default()).unwrap();
        assert!((r.repair_objective().unwrap() - nominal.objective_value.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn kpis_decompose_the_repair_objective() {
        let (m, inc) = t1_setup();
        let mut s = spec(2.0, 3.0);
        s.weights.w_dev_cont = 0.5;
        let rm = build_repair_model(&m, &inc, &s).unwrap();
        let r = repair_exact(&rm, &SolveParams::default()).unwrap();
        let k = &r.kpis;
        let recomposed = 2.0 * k[KPI_ORIGINAL_OBJECTIVE]
            + 3.0 * k[KPI_DEVIATION_COUNT]
            + 0.5 * k[KPI_CONTINUOUS_DEVIATION]
            + k[KPI_VIOLATION_PENALTY];
        assert!((recomposed - k[KPI_REPAIR_OBJECTIVE]).abs() < 1e-6);
        assert!((k[KPI_REPAIR_OBJECTIVE] - r.repair_objective().unwrap()).abs() < 1e-9);
        // Route-level KPIs of the domain model are carried over.
        assert!(k.contains_key("route_cost"));
    }

    #[test]
    fn coverage_rows_become_elastic() {
        let (m, inc) = t1_setup();
        let rm = build_repair_model(&m, &inc, &spec(1.0, 1.0)).unwrap();
        for f in ["f1", "f2", "f3", "f4"] {
            assert!(rm.model().var_by_name(&format!("over[cover[{f}]]")).is_some());
            assert!(rm.model().var_by_name(&format!("under[cover[{f}]]")).is_some());
        }
        let hard = RepairSpec {
            auto_relax: false,
            ..spec(1.0, 1.0)
        };
        let rm = build_repair_model(&m, &inc, &hard).unwrap();
        assert_eq!(rm.model().num_vars(), m.num_vars());
    }

    #[test]
    fn relax_rule_without_penalty_needs_annotation() {
        let (m, inc) = t1_setup();
        let mut s = spec(1.0, 1.0);
        s.relax.push(RelaxRule {
            pattern: r"start\[.*\]".into(),
            penalty: None,
        });
        assert!(matches!(build_repair_model(&m, &inc, &s), Err(Error::MissingPenalty(_))));
        s.relax[0].penalty = Some(7.0);
        let rm = build_repair_model(&m, &inc, &s).unwrap();
        assert!(rm.model().var_by_name("over[start[ac1]]").is_some());
    }

    #[test]
    fn notes_for_empty_patterns_and_forced_unfreeze() {
        let (mut m, inc) = t1_setup();
        let v = m.var_by_name("src[ac1,f1]").unwrap();
        m.set_bounds(v, 0.0, 0.0).unwrap();
        let s = RepairSpec {
            freeze: FreezeSpec {
                patterns: vec!["nothing".into(), r"src\[ac1,f1\]".into()],
                freeze_horizon: None,
            },
            ..spec(1.0, 1.0)
        };
        let rm = build_repair_model(&m, &inc, &s).unwrap();
        assert!(rm.notes().contains(&RepairNote::FreezePatternMatchedNothing { pattern: "nothing".into() }));
        assert!(rm
            .notes()
            .iter()
            .any(|n| matches!(n, RepairNote::ForcedUnfreeze { variable, .. } if variable == "src[ac1,f1]")));
        assert!(!rm.is_frozen(v));
    }

    #[test]
    fn horizon_freezes_early_decisions() {
        let (m, inc) = t1_setup();
        let s = RepairSpec {
            freeze: FreezeSpec {
                patterns: Vec::new(),
                freeze_horizon: Some(500.0),
            },
            ..spec(1.0, 1.0)
        };
        let rm = build_repair_model(&m, &inc, &s).unwrap();
        // Only f1 departs before 500.
        let frozen: Vec<_> = m.var_ids().filter(|&v| rm.is_frozen(v)).map(|v| m.variable(v).name.clone()).collect();
        assert_eq!(frozen, ["src[ac1,f1]", "src[ac2,f1]"]);
    }

    #[test]
    fn start_point_absorbs_violations() {
        let (m, mut inc) = t1_setup();
        // Drop f4 from ac2's route: coverage of f4 is violated by one.
        inc.insert("x[ac2,f3,f4]".into(), 0.0);
        let rm = build_repair_model(&m, &inc, &spec(1.0, 1.0)).unwrap();
        assert!(rm.start_feasible());
        let under = rm.model().var_by_name("under[cover[f4]]").unwrap();
        assert_eq!(rm.start_point()[under.index()], 1.0);
        assert_eq!(rm.objective_at(rm.start_point()).unwrap(), 15.0 + 10_000.0);
    }
}

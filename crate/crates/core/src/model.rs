//! MILP model representation.
//!
//! A [`Model`] owns typed variables, linear constraints (optionally annotated
//! as relaxable with a per-unit penalty), a minimization objective and a list
//! of named KPI expressions. Maximization is expressed by negating the
//! objective at build time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance used for constraint and integrality checks.
pub const DEFAULT_FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstrId(pub(crate) usize);

impl ConstrId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

/// Variable declaration. `start` is an optional decision time used by
/// time-horizon freezing during repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub kind: VarKind,
    #[serde(with = "lower_bound")]
    pub lower: f64,
    #[serde(with = "upper_bound")]
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
}

impl VarSpec {
    pub fn new(name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            lower,
            upper,
            start: None,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::new(name, VarKind::Continuous, lower, upper)
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self::new(name, VarKind::Integer, lower, upper)
    }

    pub fn with_start(mut self, start: f64) -> Self {
        self.start = Some(start);
        self
    }
}

/// Linear expression in canonical form: terms sorted by variable, one term
/// per variable, no zero coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    #[serde(with = "term_list")]
    terms: Vec<(f64, VarId)>,
    #[serde(default)]
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (f64, VarId)>) -> Self {
        let mut expr = Self::new();
        for (c, v) in terms {
            expr.add_term(c, v);
        }
        expr
    }

    /// Builder-style [`LinExpr::add_term`].
    pub fn term(mut self, coefficient: f64, var: VarId) -> Self {
        self.add_term(coefficient, var);
        self
    }

    pub fn plus_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn add_term(&mut self, coefficient: f64, var: VarId) {
        match self.terms.binary_search_by_key(&var, |&(_, v)| v) {
            Ok(pos) => {
                self.terms[pos].0 += coefficient;
                if self.terms[pos].0 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => {
                if coefficient != 0.0 {
                    self.terms.insert(pos, (coefficient, var));
                }
            }
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        for &(c, v) in &other.terms {
            self.add_term(scale * c, v);
        }
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_scaled(self, scale);
        out
    }

    pub fn terms(&self) -> &[(f64, VarId)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn coefficient(&self, var: VarId) -> f64 {
        self.terms
            .binary_search_by_key(&var, |&(_, v)| v)
            .map(|pos| self.terms[pos].0)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Σ coefficient·value + constant.
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, ModelError> {
        let mut acc = self.constant;
        for &(c, v) in &self.terms {
            let x = values
                .get(v.0)
                .ok_or(ModelError::UnvaluedVariable(v.0))?;
            acc += c * x;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relax {
    pub penalty_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub name: String,
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax: Option<Relax>,
}

impl ConstraintSpec {
    pub fn new(name: impl Into<String>, expr: LinExpr, sense: Sense, rhs: f64) -> Self {
        Self {
            name: name.into(),
            expr,
            sense,
            rhs,
            relax: None,
        }
    }

    pub fn relaxable(mut self, penalty_per_unit: f64) -> Self {
        self.relax = Some(Relax { penalty_per_unit });
        self
    }

    /// Amount by which the constraint is violated at `values`; always ≥ 0.
    pub fn violation(&self, values: &[f64]) -> Result<f64, ModelError> {
        let lhs = self.expr.evaluate(values)?;
        Ok(match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpi {
    pub name: String,
    pub expr: LinExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    LimitReached,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Solver output. `values` is indexed by [`VarId`]; it is empty when no
/// point is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective_value: Option<f64>,
}

impl Solution {
    pub fn without_point(status: Status) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective_value: None,
        }
    }

    /// Wraps a point as a `Feasible` solution, evaluating the objective.
    pub fn from_values(model: &Model, values: Vec<f64>) -> Result<Self, ModelError> {
        let objective_value = model.objective().evaluate(&values)?;
        Ok(Self {
            status: Status::Feasible,
            values,
            objective_value: Some(objective_value),
        })
    }

    pub fn value(&self, var: VarId) -> Option<f64> {
        self.values.get(var.0).copied()
    }

    pub fn has_point(&self) -> bool {
        self.objective_value.is_some() && !self.values.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("duplicate KPI name `{0}`")]
    DuplicateKpi(String),
    #[error("variable `{name}` has lower bound {lower} > upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    InvalidBinaryBounds(String),
    #[error("constraint `{name}` has invalid relax penalty {penalty}")]
    InvalidPenalty { name: String, penalty: f64 },
    #[error("non-finite coefficient or right-hand side in `{0}`")]
    NonFinite(String),
    #[error("expression references unknown variable v{0}")]
    UnknownVariable(usize),
    #[error("variable v{0} has no value")]
    UnvaluedVariable(usize),
    #[error("solution with status {0} carries no values")]
    NotValued(Status),
    #[error("unsupported objective sense `{0}`")]
    UnsupportedSense(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    variables: Vec<VarSpec>,
    constraints: Vec<ConstraintSpec>,
    objective: LinExpr,
    kpis: Vec<Kpi>,
    var_index: HashMap<String, VarId>,
    con_index: HashMap<String, ConstrId>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, spec: VarSpec) -> Result<VarId, ModelError> {
        if self.var_index.contains_key(&spec.name) {
            return Err(ModelError::DuplicateVariable(spec.name));
        }
        if spec.lower.is_nan() || spec.upper.is_nan() || spec.lower > spec.upper {
            return Err(ModelError::InvalidBounds {
                name: spec.name,
                lower: spec.lower,
                upper: spec.upper,
            });
        }
        if spec.kind == VarKind::Binary && (spec.lower < 0.0 || spec.upper > 1.0) {
            return Err(ModelError::InvalidBinaryBounds(spec.name));
        }
        let id = VarId(self.variables.len());
        self.var_index.insert(spec.name.clone(), id);
        self.variables.push(spec);
        Ok(id)
    }

    pub fn add_constraint(&mut self, spec: ConstraintSpec) -> Result<ConstrId, ModelError> {
        if self.con_index.contains_key(&spec.name) {
            return Err(ModelError::DuplicateConstraint(spec.name));
        }
        self.check_expr(&spec.expr, &spec.name)?;
        if !spec.rhs.is_finite() {
            return Err(ModelError::NonFinite(spec.name));
        }
        if let Some(r) = spec.relax {
            if !(r.penalty_per_unit.is_finite() && r.penalty_per_unit >= 0.0) {
                return Err(ModelError::InvalidPenalty {
                    name: spec.name,
                    penalty: r.penalty_per_unit,
                });
            }
        }
        let id = ConstrId(self.constraints.len());
        self.con_index.insert(spec.name.clone(), id);
        self.constraints.push(spec);
        Ok(id)
    }

    pub fn set_objective(&mut self, expr: LinExpr) -> Result<(), ModelError> {
        self.check_expr(&expr, "objective")?;
        self.objective = expr;
        Ok(())
    }

    /// Sets `minimize -expr`.
    pub fn set_objective_maximize(&mut self, expr: &LinExpr) -> Result<(), ModelError> {
        self.set_objective(expr.scaled(-1.0))
    }

    pub fn add_kpi(&mut self, name: impl Into<String>, expr: LinExpr) -> Result<(), ModelError> {
        let name = name.into();
        if self.kpis.iter().any(|k| k.name == name) {
            return Err(ModelError::DuplicateKpi(name));
        }
        self.check_expr(&expr, &name)?;
        self.kpis.push(Kpi { name, expr });
        Ok(())
    }

    fn check_expr(&self, expr: &LinExpr, owner: &str) -> Result<(), ModelError> {
        if !expr.constant.is_finite() {
            return Err(ModelError::NonFinite(owner.to_string()));
        }
        for &(c, v) in &expr.terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable(v.0));
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite(owner.to_string()));
            }
        }
        Ok(())
    }

    /// Overrides the bounds of an existing variable (used when freezing).
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let spec = self
            .variables
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable(var.0))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvalidBounds {
                name: spec.name.clone(),
                lower,
                upper,
            });
        }
        spec.lower = lower;
        spec.upper = upper;
        Ok(())
    }

    pub fn variables(&self) -> &[VarSpec] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &VarSpec {
        &self.variables[var.0]
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn constraints(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstrId) -> &ConstraintSpec {
        &self.constraints[id.0]
    }

    pub fn constraint_by_name(&self, name: &str) -> Option<ConstrId> {
        self.con_index.get(name).copied()
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn kpis(&self) -> &[Kpi] {
        &self.kpis
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integrality(&self) -> bool {
        self.variables.iter().any(|v| v.kind.is_integral())
    }

    /// Violations beyond `tol`: constraints, then bound and integrality
    /// breaches. Empty iff the point is feasible within `tol`.
    pub fn check_feasible(&self, solution: &Solution, tol: f64) -> Vec<Breach> {
        self.check_point(&solution.values, tol)
    }

    pub fn check_point(&self, values: &[f64], tol: f64) -> Vec<Breach> {
        let mut out = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            let amount = match c.violation(values) {
                Ok(a) => a,
                Err(_) => f64::INFINITY,
            };
            if amount > tol || amount.is_nan() {
                out.push(Breach {
                    target: BreachTarget::Constraint(ConstrId(i)),
                    name: c.name.clone(),
                    amount,
                });
            }
        }
        for (j, v) in self.variables.iter().enumerate() {
            let Some(&x) = values.get(j) else {
                out.push(Breach {
                    target: BreachTarget::Bound(VarId(j)),
                    name: v.name.clone(),
                    amount: f64::INFINITY,
                });
                continue;
            };
            let bound_gap = (v.lower - x).max(x - v.upper).max(0.0);
            if bound_gap > tol || x.is_nan() {
                out.push(Breach {
                    target: BreachTarget::Bound(VarId(j)),
                    name: v.name.clone(),
                    amount: bound_gap,
                });
            }
            if v.kind.is_integral() {
                let frac = (x - x.round()).abs();
                if frac > tol {
                    out.push(Breach {
                        target: BreachTarget::Integrality(VarId(j)),
                        name: v.name.clone(),
                        amount: frac,
                    });
                }
            }
        }
        out
    }

    /// Evaluates every KPI on a valued solution, keyed (and ordered) by name.
    pub fn kpi_report(&self, solution: &Solution) -> Result<BTreeMap<String, f64>, ModelError> {
        let valued = matches!(solution.status, Status::Optimal | Status::Feasible)
            || solution.has_point();
        if !valued || solution.values.len() < self.variables.len() {
            return Err(ModelError::NotValued(solution.status));
        }
        self.kpis
            .iter()
            .map(|k| Ok((k.name.clone(), k.expr.evaluate(&solution.values)?)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum BreachTarget {
    Constraint(ConstrId),
    Bound(VarId),
    Integrality(VarId),
}

/// One entry of [`Model::check_feasible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub target: BreachTarget,
    pub name: String,
    pub amount: f64,
}

// Canonical JSON document.

#[derive(Serialize, Deserialize)]
struct VarDoc {
    id: VarId,
    #[serde(flatten)]
    spec: VarSpec,
}

#[derive(Serialize, Deserialize)]
struct ConstraintDoc {
    id: ConstrId,
    #[serde(flatten)]
    spec: ConstraintSpec,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveDoc {
    sense: String,
    expr: LinExpr,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    variables: Vec<VarDoc>,
    constraints: Vec<ConstraintDoc>,
    objective: ObjectiveDoc,
    kpis: Vec<Kpi>,
}

impl Serialize for Model {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let doc = ModelDoc {
            variables: self
                .variables
                .iter()
                .enumerate()
                .map(|(i, v)| VarDoc {
                    id: VarId(i),
                    spec: v.clone(),
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .enumerate()
                .map(|(i, c)| ConstraintDoc {
                    id: ConstrId(i),
                    spec: c.clone(),
                })
                .collect(),
            objective: ObjectiveDoc {
                sense: "minimize".into(),
                expr: self.objective.clone(),
            },
            kpis: self.kpis.clone(),
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ModelDoc::deserialize(deserializer)?;
        Model::try_from(doc).map_err(D::Error::custom)
    }
}

impl TryFrom<ModelDoc> for Model {
    type Error = String;

    fn try_from(doc: ModelDoc) -> Result<Self, Self::Error> {
        let mut model = Model::new();
        for (i, v) in doc.variables.into_iter().enumerate() {
            if v.id.0 != i {
                return Err(format!("variable ids must be dense and ordered, found {} at {i}", v.id));
            }
            model.add_variable(v.spec).map_err(|e| e.to_string())?;
        }
        for (i, c) in doc.constraints.into_iter().enumerate() {
            if c.id.0 != i {
                return Err(format!("constraint ids must be dense and ordered, found {} at {i}", c.id.0));
            }
            model.add_constraint(c.spec).map_err(|e| e.to_string())?;
        }
        if doc.objective.sense != "minimize" {
            return Err(ModelError::UnsupportedSense(doc.objective.sense).to_string());
        }
        model
            .set_objective(doc.objective.expr)
            .map_err(|e| e.to_string())?;
        for k in doc.kpis {
            model.add_kpi(k.name, k.expr).map_err(|e| e.to_string())?;
        }
        Ok(model)
    }
}

mod term_list {
    use super::VarId;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Term {
        coefficient: f64,
        var: VarId,
    }

    pub fn serialize<S: Serializer>(terms: &[(f64, VarId)], s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<Term> = terms
            .iter()
            .map(|&(coefficient, var)| Term { coefficient, var })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, VarId)>, D::Error> {
        let list = Vec::<Term>::deserialize(d)?;
        // Re-canonicalize: merge duplicates and drop zeros.
        let mut expr = super::LinExpr::new();
        for t in list {
            expr.add_term(t.coefficient, t.var);
        }
        Ok(expr.terms)
    }
}

// Infinite bounds travel as `null`.
mod lower_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod upper_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_var_model() -> (Model, VarId, VarId) {
        let mut m = Model::new();
        let x = m.add_variable(VarSpec::continuous("x", 0.0, 10.0)).unwrap();
        let y = m.add_variable(VarSpec::continuous("y", 0.0, 10.0)).unwrap();
        (m, x, y)
    }

    #[test]
    fn add_binary_variable() {
        let mut m = Model::new();
        let x = m.add_variable(VarSpec::binary("x")).unwrap();
        assert_eq!(m.num_vars(), 1);
        assert_eq!(m.variable(x).kind, VarKind::Binary);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = Model::new();
        let err = m.add_variable(VarSpec::continuous("p", 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::InvalidBounds { .. }));
        assert_eq!(m.num_vars(), 0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = Model::new();
        m.add_variable(VarSpec::binary("x")).unwrap();
        assert_eq!(
            m.add_variable(VarSpec::binary("x")),
            Err(ModelError::DuplicateVariable("x".into()))
        );
        assert!(m.add_variable(VarSpec::new("b", VarKind::Binary, 0.0, 2.0)).is_err());
    }

    #[test]
    fn handles_are_distinct_and_ordered() {
        let mut m = Model::new();
        let ids: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|n| m.add_variable(VarSpec::binary(*n)).unwrap())
            .collect();
        assert_eq!(ids, vec![VarId(0), VarId(1), VarId(2)]);
        let names: Vec<_> = m.variables().iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn evaluate_examples() {
        let (_, x, y) = two_var_model();
        let e = LinExpr::new().term(2.0, x).plus_constant(3.0);
        assert_eq!(e.evaluate(&[1.0, 0.0]).unwrap(), 5.0);
        assert_eq!(LinExpr::new().evaluate(&[]).unwrap(), 0.0);
        let e = LinExpr::new().term(1.5, x).term(-0.5, y).plus_constant(1.0);
        assert_eq!(e.evaluate(&[2.0, 4.0]).unwrap(), 2.0);
        assert_eq!(e.evaluate(&[2.0]), Err(ModelError::UnvaluedVariable(1)));
    }

    #[test]
    fn duplicate_terms_merge_and_zeros_drop() {
        let (_, x, y) = two_var_model();
        let e = LinExpr::new().term(1.0, y).term(2.0, x).term(3.0, x).term(0.0, y);
        assert_eq!(e.terms(), &[(5.0, x), (1.0, y)]);
        let e = e.term(-1.0, y);
        assert_eq!(e.terms(), &[(5.0, x)]);
    }

    #[test]
    fn violation_examples() {
        let (_, x, y) = two_var_model();
        let c = ConstraintSpec::new("c", LinExpr::new().term(1.0, x), Sense::Le, 1.0);
        assert_eq!(c.violation(&[1.5, 0.0]).unwrap(), 0.5);
        let c = ConstraintSpec::new("c", LinExpr::new().term(1.0, x), Sense::Ge, 0.0);
        assert_eq!(c.violation(&[0.0, 0.0]).unwrap(), 0.0);
        let c = ConstraintSpec::new("c", LinExpr::new().term(1.0, x).term(1.0, y), Sense::Eq, 3.0);
        assert_eq!(c.violation(&[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn check_feasible_reports_single_capacity_breach() {
        let (mut m, x, y) = two_var_model();
        m.add_constraint(ConstraintSpec::new(
            "cap",
            LinExpr::new().term(1.0, x).term(1.0, y),
            Sense::Le,
            5.0,
        ))
        .unwrap();
        m.add_constraint(ConstraintSpec::new("lo", LinExpr::new().term(1.0, x), Sense::Ge, 1.0))
            .unwrap();
        let s = Solution::from_values(&m, vec![4.0, 3.0]).unwrap();
        let breaches = m.check_feasible(&s, 1e-6);
        assert_eq!(breaches.len(), 1);
        assert_eq!(breaches[0].target, BreachTarget::Constraint(ConstrId(0)));
        assert!((breaches[0].amount - 2.0).abs() < 1e-12);
    }

    #[test]
    fn check_feasible_reports_integrality_and_bounds() {
        let mut m = Model::new();
        let z = m.add_variable(VarSpec::integer("z", 0.0, 3.0)).unwrap();
        let w = m.add_variable(VarSpec::continuous("w", 0.0, 1.0)).unwrap();
        let s = Solution::from_values(&m, vec![0.5, 2.0]).unwrap();
        let breaches = m.check_feasible(&s, 1e-6);
        assert!(breaches
            .iter()
            .any(|b| b.target == BreachTarget::Integrality(z) && (b.amount - 0.5).abs() < 1e-12));
        assert!(breaches
            .iter()
            .any(|b| b.target == BreachTarget::Bound(w) && (b.amount - 1.0).abs() < 1e-12));
    }

    #[test]
    fn kpi_report_is_alphabetical() {
        let (mut m, x, y) = two_var_model();
        let cost = LinExpr::new().term(1.0, x).term(2.0, y);
        m.set_objective(cost.clone()).unwrap();
        m.add_kpi("zeta", LinExpr::new().term(1.0, y)).unwrap();
        m.add_kpi("cost", cost).unwrap();
        let s = Solution::from_values(&m, vec![1.0, 2.0]).unwrap();
        let report = m.kpi_report(&s).unwrap();
        let keys: Vec<_> = report.keys().cloned().collect();
        assert_eq!(keys, ["cost", "zeta"]);
        assert_eq!(report["cost"], s.objective_value.unwrap());
        assert!(Model::new().kpi_report(&Solution::from_values(&Model::new(), vec![]).unwrap()).unwrap().is_empty());
        assert!(m.kpi_report(&Solution::without_point(Status::Infeasible)).is_err());
    }

    #[test]
    fn json_round_trip_with_infinite_bounds() {
        let mut m = Model::new();
        let x = m.add_variable(VarSpec::continuous("x", f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        let y = m.add_variable(VarSpec::binary("y").with_start(480.0)).unwrap();
        m.add_constraint(
            ConstraintSpec::new("c", LinExpr::new().term(1.0, x).term(-2.0, y), Sense::Ge, 1.0)
                .relaxable(5.0),
        )
        .unwrap();
        m.set_objective(LinExpr::new().term(1.0, x)).unwrap();
        m.add_kpi("k", LinExpr::constant(2.0)).unwrap();
        let text = m.to_json();
        let back: Model = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["variables"][0]["lower"].is_null());
        assert_eq!(v["objective"]["sense"], "minimize");
    }

    #[test]
    fn maximize_negates() {
        let (mut m, x, _) = two_var_model();
        m.set_objective_maximize(&LinExpr::new().term(3.0, x)).unwrap();
        assert_eq!(m.objective().coefficient(x), -3.0);
    }

    fn arb_expr(n: usize) -> impl Strategy<Value = LinExpr> {
        (
            proptest::collection::vec((-10.0f64..10.0, 0..n), 0..6),
            -5.0f64..5.0,
        )
            .prop_map(|(terms, c)| {
                LinExpr::from_terms(terms.into_iter().map(|(a, v)| (a, VarId(v)))).plus_constant(c)
            })
    }

    proptest! {
        #[test]
        fn violation_nonnegative_and_zero_iff_satisfied(
            expr in arb_expr(4),
            rhs in -10.0f64..10.0,
            sense in prop_oneof![Just(Sense::Le), Just(Sense::Eq), Just(Sense::Ge)],
            point in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let c = ConstraintSpec::new("c", expr.clone(), sense, rhs);
            let v = c.violation(&point).unwrap();
            prop_assert!(v >= 0.0);
            let lhs = expr.evaluate(&point).unwrap();
            let satisfied = match sense {
                Sense::Le => lhs <= rhs,
                Sense::Ge => lhs >= rhs,
                Sense::Eq => lhs == rhs,
            };
            prop_assert_eq!(v == 0.0, satisfied);
        }

        #[test]
        fn evaluate_is_linear(
            e1 in arb_expr(4),
            e2 in arb_expr(4),
            a in -4.0f64..4.0,
            b in -4.0f64..4.0,
            point in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let mut combo = e1.scaled(a);
            combo.add_scaled(&e2, b);
            let lhs = combo.evaluate(&point).unwrap();
            let rhs = a * e1.evaluate(&point).unwrap() + b * e2.evaluate(&point).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn empty_breach_list_means_all_violations_within_tol(
            rows in proptest::collection::vec((arb_expr(3), -5.0f64..5.0), 1..5),
            point in proptest::collection::vec(0.0f64..1.0, 3),
        ) {
            let mut m = Model::new();
            for i in 0..3 {
                m.add_variable(VarSpec::continuous(format!("x{i}"), 0.0, 1.0)).unwrap();
            }
            for (i, (e, rhs)) in rows.iter().enumerate() {
                m.add_constraint(ConstraintSpec::new(format!("c{i}"), e.clone(), Sense::Le, *rhs)).unwrap();
            }
            let s = Solution::from_values(&m, point.clone()).unwrap();
            let breaches = m.check_feasible(&s, 1e-6);
            let direct_ok = m.constraints().iter().all(|c| c.violation(&point).unwrap() <= 1e-6);
            prop_assert_eq!(breaches.is_empty(), direct_ok);
        }
    }
}

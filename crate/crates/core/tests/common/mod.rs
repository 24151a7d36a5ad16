//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here calls the simplex or branch-and-bound code: every expected
//! value is produced by enumeration.
#![allow(dead_code)]

pub mod tail_oracle;

use std::path::PathBuf;

use reparo_core::model::{ConstraintSpec, LinExpr, Model, Sense, VarSpec};
use reparo_core::production::ProductionInstance;
use reparo_core::rng::XorShift64Star;
use reparo_core::scenario::Scenario;
use reparo_core::tail::{TailPlan, Timetable};

pub fn fixture_dir() -> PathBuf {
    let base = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = base.join("fixtures");
    if own.join("t1.json").exists() {
        own
    } else {
        base.join("../core/fixtures")
    }
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn t1() -> Timetable {
    Timetable::from_json(&fixture("t1.json")).unwrap()
}

pub fn t1_plan() -> TailPlan {
    serde_json::from_str(&fixture("t1_plan.json")).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::from_json(&fixture(name)).unwrap()
}

pub fn p1() -> ProductionInstance {
    ProductionInstance::from_json(&fixture("p1.json")).unwrap()
}

/// P1 by scanning period-1 production on a quarter-unit grid: 15 units due
/// in period 2, capacity 10 per period, unit cost 1, holding 0.5 per unit
/// and period. Returns (objective, q1, q2).
pub fn p1_scan() -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=40 {
        let q1 = i as f64 * 0.25;
        let q2 = 15.0 - q1;
        if q2 > 10.0 {
            continue;
        }
        let cost = q1 + q2 + 0.5 * q1;
        if cost < best.0 {
            best = (cost, q1, q2);
        }
    }
    best
}

/// P1 plus a hard order of 8 due in period 2, every unit short penalized at
/// 1000: scan both periods' production. Returns (objective, shortfall).
pub fn p1_new_order_scan() -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=40 {
        for j in 0..=40 {
            let (q1, q2) = (i as f64 * 0.25, j as f64 * 0.25);
            let delivered = (q1 + q2).min(23.0);
            let cost = q1 + q2 + 0.5 * q1 + 1000.0 * (23.0 - delivered);
            if cost < best.0 {
                best = (cost, 23.0 - delivered);
            }
        }
    }
    best
}

/// Dense LP/ILP data: minimize c·x subject to rows, lo ≤ x ≤ hi.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DenseProblem {
    pub fn to_model(&self, binary: bool) -> Model {
        let mut m = Model::new();
        let vars: Vec<_> = (0..self.c.len())
            .map(|j| {
                let spec = if binary {
                    VarSpec::binary(format!("x{j}"))
                } else {
                    VarSpec::continuous(format!("x{j}"), self.lo[j], self.hi[j])
                };
                m.add_variable(spec).unwrap()
            })
            .collect();
        for (i, (a, sense, b)) in self.rows.iter().enumerate() {
            let e = LinExpr::from_terms(a.iter().zip(&vars).map(|(&c, &v)| (c, v)));
            m.add_constraint(ConstraintSpec::new(format!("r{i}"), e, *sense, *b))
                .unwrap();
        }
        m.set_objective(LinExpr::from_terms(self.c.iter().zip(&vars).map(|(&c, &v)| (c, v))))
            .unwrap();
        m
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|(a, sense, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            match sense {
                Sense::Le => lhs <= b + tol,
                Sense::Ge => lhs >= b - tol,
                Sense::Eq => (lhs - b).abs() <= tol,
            }
        }) && x
            .iter()
            .enumerate()
            .all(|(j, &v)| v >= self.lo[j] - tol && v <= self.hi[j] + tol)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Minimum over all 2^n binary points; `None` when none is feasible.
pub fn enumerate_binary(p: &DenseProblem) -> Option<f64> {
    let n = p.c.len();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = ((mask >> j) & 1) as f64;
        }
        if p.feasible(&x, 1e-9) {
            let o = p.objective(&x);
            best = Some(best.map_or(o, |b: f64| b.min(o)));
        }
    }
    best
}

/// Best vertex over every choice of n active constraints among rows and
/// finite bounds. Requires finite bounds so the feasible set is a polytope.
pub fn enumerate_vertices(p: &DenseProblem) -> Option<f64> {
    let n = p.c.len();
    let mut planes: Vec<(Vec<f64>, f64)> = p.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lo[j]));
        planes.push((e, p.hi[j]));
    }
    let mut best: Option<f64> = None;
    for subset in combinations(planes.len(), n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if p.feasible(&x, 1e-8) {
                let o = p.objective(&x);
                best = Some(best.map_or(o, |v: f64| v.min(o)));
            }
        }
    }
    best
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Random binary program: n ≤ 12 variables, m ≤ 10 rows with small integer
/// coefficients.
pub fn random_binary_problem(rng: &mut XorShift64Star, n: usize, m: usize) -> DenseProblem {
    let c = (0..n).map(|_| rng.range_i64(-9, 9) as f64).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.range_i64(-5, 5) as f64).collect();
            let sense = match rng.below(3) {
                0 => Sense::Le,
                1 => Sense::Ge,
                _ => {
                    if rng.below(4) == 0 {
                        Sense::Eq
                    } else {
                        Sense::Le
                    }
                }
            };
            // Anchor the rhs near a random point so many instances are feasible.
            let anchor: f64 = a.iter().map(|&v| v * rng.below(2) as f64).sum();
            let b = anchor
                + match sense {
                    Sense::Le => rng.range_i64(0, 4) as f64,
                    Sense::Ge => -(rng.range_i64(0, 4) as f64),
                    Sense::Eq => 0.0,
                };
            (a, sense, b)
        })
        .collect();
    DenseProblem {
        c,
        rows,
        lo: vec![0.0; n],
        hi: vec![1.0; n],
    }
}

/// Random bounded LP with `n` variables and `m` inequality rows.
pub fn random_lp(rng: &mut XorShift64Star, n: usize, m: usize) -> DenseProblem {
    let c = (0..n).map(|_| rng.range_f64(-5.0, 5.0)).collect();
    let hi: Vec<f64> = (0..n).map(|_| rng.range_f64(1.0, 6.0)).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.range_f64(-3.0, 3.0)).collect();
            let sense = if rng.below(2) == 0 { Sense::Le } else { Sense::Ge };
            let b = rng.range_f64(-4.0, 8.0);
            (a, sense, b)
        })
        .collect();
    DenseProblem {
        c,
        rows,
        lo: vec![0.0; n],
        hi,
    }
}

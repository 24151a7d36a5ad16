use std::time::Instant;

use super::{check_size, KernelError, SolveParams, SolveStats, BLAND_AFTER_DEGENERATE};
use crate::model::{Model, Sense, Solution, Status};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

/// Constraint data extracted from a [`Model`], shared by every node LP of a
/// branch-and-bound run.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub cost_constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    pub fn from_model(model: &Model) -> Self {
        let mut rows = Vec::with_capacity(model.num_constraints());
        let mut senses = Vec::with_capacity(model.num_constraints());
        let mut rhs = Vec::with_capacity(model.num_constraints());
        for c in model.constraints() {
            rows.push(c.expr.terms().iter().map(|&(a, v)| (v.index(), a)).collect());
            senses.push(c.sense);
            rhs.push(c.rhs - c.expr.constant_term());
        }
        let mut cost = vec![0.0; model.num_vars()];
        for &(c, v) in model.objective().terms() {
            cost[v.index()] = c;
        }
        Self {
            n: model.num_vars(),
            rows,
            senses,
            rhs,
            cost,
            cost_constant: model.objective().constant_term(),
            lower: model.variables().iter().map(|v| v.lower).collect(),
            upper: model.variables().iter().map(|v| v.upper).collect(),
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost_constant + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row violation of `x` (bounds excluded).
    pub fn max_row_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.senses)
            .zip(&self.rhs)
            .map(|((row, sense), &b)| {
                let lhs: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
                match sense {
                    Sense::Le => (lhs - b).max(0.0),
                    Sense::Ge => (b - lhs).max(0.0),
                    Sense::Eq => (lhs - b).abs(),
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap or numerical breakdown.
    Failed,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable parked at zero.
    Zero,
}

/// Dense tableau over columns `[structural | slack | artificial]`, one slack
/// and one artificial per row.
struct Tableau {
    m: usize,
    width: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    place: Vec<Place>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    // Initial basis column per row and its sign, for recovering B^-1.
    init_col: Vec<usize>,
    init_sign: Vec<f64>,
    iterations: u64,
    max_iterations: u64,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn new(data: &LpData, lower: &[f64], upper: &[f64]) -> Self {
        let n = data.n;
        let m = data.rows.len();
        let width = n + 2 * m;
        let mut lo = Vec::with_capacity(width);
        let mut up = Vec::with_capacity(width);
        lo.extend_from_slice(lower);
        up.extend_from_slice(upper);
        for s in &data.senses {
            let (l, u) = match s {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            up.push(u);
        }
        for _ in 0..m {
            lo.push(0.0);
            up.push(0.0);
        }

        let mut x = vec![0.0; width];
        let mut place = vec![Place::Lower; width];
        for j in 0..n {
            if lo[j].is_finite() {
                x[j] = lo[j];
                place[j] = Place::Lower;
            } else if up[j].is_finite() {
                x[j] = up[j];
                place[j] = Place::Upper;
            } else {
                x[j] = 0.0;
                place[j] = Place::Zero;
            }
        }

        let mut tab = vec![0.0; m * width];
        let mut basis = Vec::with_capacity(m);
        let mut init_col = Vec::with_capacity(m);
        let mut init_sign = Vec::with_capacity(m);
        for (i, row) in data.rows.iter().enumerate() {
            let residual = data.rhs[i] - row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
            let slack = n + i;
            let art = n + m + i;
            let (col, sign) = if residual >= lo[slack] && residual <= up[slack] {
                x[slack] = residual;
                (slack, 1.0)
            } else {
                x[slack] = 0.0;
                place[slack] = if up[slack] == 0.0 && lo[slack] == f64::NEG_INFINITY {
                    Place::Upper
                } else {
                    Place::Lower
                };
                let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
                up[art] = f64::INFINITY;
                x[art] = residual.abs();
                (art, sign)
            };
            // Row i of B^-1 A with B = diag(sign).
            let r = &mut tab[i * width..(i + 1) * width];
            for &(j, a) in row {
                r[j] += sign * a;
            }
            r[slack] = sign;
            r[art] = 1.0;
            place[col] = Place::Basic;
            basis.push(col);
            init_col.push(col);
            init_sign.push(sign);
        }
        let max_iterations = 20_000 + 50 * (m as u64 + width as u64);
        Self {
            m,
            width,
            tab,
            basis,
            place,
            x,
            lower: lo,
            upper: up,
            cost: vec![0.0; width],
            d: vec![0.0; width],
            init_col,
            init_sign,
            iterations: 0,
            max_iterations,
        }
    }

    fn n_structural(&self) -> usize {
        self.width - 2 * self.m
    }

    fn artificial(&self, i: usize) -> usize {
        self.width - self.m + i
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.width..(i + 1) * self.width];
                for (dj, &t) in self.d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    /// x_B = B^-1 (b - N x_N), using the stored original columns.
    fn recompute_basic_values(&mut self, data: &LpData) {
        let n = self.n_structural();
        let m = self.m;
        let mut residual = data.rhs.clone();
        for (i, row) in data.rows.iter().enumerate() {
            for &(j, a) in row {
                if self.place[j] != Place::Basic {
                    residual[i] -= a * self.x[j];
                }
            }
            if self.place[n + i] != Place::Basic {
                residual[i] -= self.x[n + i];
            }
            let art = n + m + i;
            if self.place[art] != Place::Basic {
                residual[i] -= self.init_sign[i] * self.x[art];
            }
        }
        for i in 0..m {
            let row = &self.tab[i * self.width..(i + 1) * self.width];
            let mut v = 0.0;
            for k in 0..m {
                v += row[self.init_col[k]] * self.init_sign[k] * residual[k];
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.tab[r * w + q];
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for chunk in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = chunk[q];
            if f != 0.0 {
                for (v, &pr) in chunk.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
                chunk[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, &pr) in self.d.iter_mut().zip(pivot_row.iter()) {
                *dj -= f * pr;
            }
            self.d[q] = 0.0;
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.width {
            let place = self.place[j];
            if place == Place::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -OPT_TOL && matches!(place, Place::Lower | Place::Zero) {
                1.0
            } else if dj > OPT_TOL && matches!(place, Place::Upper | Place::Zero) {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run_phase(&mut self) -> PhaseEnd {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::IterationLimit;
            }
            let bland = degenerate_run >= BLAND_AFTER_DEGENERATE;
            let Some((q, dir)) = self.entering(bland) else {
                return PhaseEnd::Optimal;
            };

            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = self.tab[i * self.width + q];
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let delta = -dir * alpha;
                let (limit, bound) = if delta < 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    (((self.x[b] - self.lower[b]) / -delta).max(0.0), self.lower[b])
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (((self.upper[b] - self.x[b]) / delta).max(0.0), self.upper[b])
                };
                let better = match leave {
                    None => limit < theta,
                    Some((r, _)) => {
                        if limit < theta - DEGENERATE_STEP {
                            true
                        } else if limit <= theta + DEGENERATE_STEP {
                            if bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, bound));
                    leave_alpha = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return PhaseEnd::Unbounded;
            }
            self.iterations += 1;
            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            if theta > 0.0 {
                self.x[q] += dir * theta;
                for i in 0..self.m {
                    let alpha = self.tab[i * self.width + q];
                    if alpha != 0.0 {
                        self.x[self.basis[i]] -= dir * alpha * theta;
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.place[q] = Place::Upper;
                    } else {
                        self.x[q] = self.lower[q];
                        self.place[q] = Place::Lower;
                    }
                }
                Some((r, bound)) => {
                    let b = self.basis[r];
                    self.x[b] = bound;
                    self.place[b] = if bound == self.lower[b] {
                        Place::Lower
                    } else {
                        Place::Upper
                    };
                    self.pivot(r, q);
                    self.basis[r] = q;
                    self.place[q] = Place::Basic;
                }
            }
        }
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.m).map(|i| self.x[self.artificial(i)].max(0.0)).sum()
    }
}

/// Solves the LP relaxation of `data` under the given structural bounds.
pub(crate) fn solve_relaxation(
    data: &LpData,
    lower: &[f64],
    upper: &[f64],
    params: &SolveParams,
) -> LpOutcome {
    let n = data.n;
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return LpOutcome {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            iterations: 0,
        };
    }
    let mut t = Tableau::new(data, lower, upper);
    let m = t.m;

    // Phase 1: minimize the sum of artificial variables in use.
    let needs_phase1 = (0..m).any(|i| t.basis[i] == t.artificial(i));
    if needs_phase1 {
        for i in 0..m {
            let a = t.artificial(i);
            t.cost[a] = if t.upper[a] > 0.0 { 1.0 } else { 0.0 };
        }
        t.recompute_reduced_costs();
        let end = t.run_phase();
        t.recompute_basic_values(data);
        if matches!(end, PhaseEnd::IterationLimit) {
            return failed(&t);
        }
        let scale = data.rhs.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
        if t.artificial_sum() > params.feas_tol * scale {
            return LpOutcome {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::INFINITY,
                iterations: t.iterations,
            };
        }
        // Pin artificials at zero for phase 2.
        for i in 0..m {
            let a = t.artificial(i);
            t.upper[a] = 0.0;
            t.lower[a] = 0.0;
            t.x[a] = 0.0;
            if t.place[a] != Place::Basic {
                t.place[a] = Place::Lower;
            }
            t.cost[a] = 0.0;
        }
        t.recompute_basic_values(data);
    }

    t.cost[..n].copy_from_slice(&data.cost);
    t.recompute_reduced_costs();
    let mut end = t.run_phase();
    t.recompute_basic_values(data);
    if matches!(end, PhaseEnd::Optimal) {
        // Drift check: a second pass from recomputed values must not move.
        t.recompute_reduced_costs();
        end = t.run_phase();
        t.recompute_basic_values(data);
    }
    match end {
        PhaseEnd::Unbounded => {
            return LpOutcome {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations: t.iterations,
            }
        }
        PhaseEnd::IterationLimit => return failed(&t),
        PhaseEnd::Optimal => {}
    }

    let mut x: Vec<f64> = t.x[..n].to_vec();
    for j in 0..n {
        x[j] = x[j].clamp(lower[j], upper[j]);
    }
    let bound_ok = (0..n).all(|j| {
        t.x[j] >= lower[j] - params.feas_tol && t.x[j] <= upper[j] + params.feas_tol
    });
    if !bound_ok || data.max_row_violation(&x) > params.feas_tol {
        return failed(&t);
    }
    LpOutcome {
        status: LpStatus::Optimal,
        objective: data.objective(&x),
        x,
        iterations: t.iterations,
    }
}

fn failed(t: &Tableau) -> LpOutcome {
    LpOutcome {
        status: LpStatus::Failed,
        x: Vec::new(),
        objective: f64::NAN,
        iterations: t.iterations,
    }
}

/// Solves the continuous relaxation of `model` (integrality ignored).
pub fn solve_lp(model: &Model, params: &SolveParams) -> Result<(Solution, SolveStats), KernelError> {
    params.validate()?;
    check_size(model)?;
    let start = Instant::now();
    let data = LpData::from_model(model);
    let out = solve_relaxation(&data, &data.lower, &data.upper, params);
    let mut stats = SolveStats {
        simplex_iterations: out.iterations,
        nodes_explored: 1,
        ..SolveStats::default()
    };
    let solution = match out.status {
        LpStatus::Optimal => {
            stats.best_bound = out.objective;
            Solution {
                status: Status::Optimal,
                values: out.x,
                objective_value: Some(out.objective),
            }
        }
        LpStatus::Infeasible => Solution::without_point(Status::Infeasible),
        LpStatus::Unbounded => Solution::without_point(Status::Unbounded),
        LpStatus::Failed => Solution::without_point(Status::LimitReached),
    };
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok((solution, stats))
}

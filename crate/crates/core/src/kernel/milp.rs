use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::lp::{solve_relaxation, LpData, LpStatus};
use super::{check_size, KernelError, SolveParams, SolveStats};
use crate::model::{Model, Solution, Status};

struct Node {
    bound: f64,
    seq: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

// Min-heap on (bound, seq): best-first, FIFO among ties.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

enum Evaluated {
    Pruned,
    Integral(Vec<f64>, f64),
    Open(Node),
    Unbounded,
    Failed,
}

struct Search<'a> {
    model: &'a Model,
    data: LpData,
    integral: Vec<usize>,
    params: &'a SolveParams,
    stats: SolveStats,
    seq: u64,
    incumbent: Option<(Vec<f64>, f64)>,
    heap: BinaryHeap<Node>,
    failed: bool,
    unbounded: bool,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => obj - self.params.gap_tol * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn evaluate(&mut self, lower: Vec<f64>, upper: Vec<f64>) -> Evaluated {
        self.stats.nodes_explored += 1;
        let out = solve_relaxation(&self.data, &lower, &upper, self.params);
        self.stats.simplex_iterations += out.iterations;
        match out.status {
            LpStatus::Infeasible => return Evaluated::Pruned,
            LpStatus::Unbounded => return Evaluated::Unbounded,
            LpStatus::Failed => return Evaluated::Failed,
            LpStatus::Optimal => {}
        }
        if out.objective >= self.cutoff() {
            return Evaluated::Pruned;
        }
        let fractional = self
            .integral
            .iter()
            .any(|&j| (out.x[j] - out.x[j].round()).abs() > self.params.int_tol);
        if !fractional {
            let (x, obj) = self.snap(out.x, out.objective);
            return Evaluated::Integral(x, obj);
        }
        self.seq += 1;
        Evaluated::Open(Node {
            bound: out.objective,
            seq: self.seq,
            lower,
            upper,
            x: out.x,
        })
    }

    /// Rounds integer variables when doing so keeps the point feasible.
    fn snap(&self, x: Vec<f64>, obj: f64) -> (Vec<f64>, f64) {
        let mut snapped = x.clone();
        for &j in &self.integral {
            snapped[j] = snapped[j].round();
        }
        if self.model.check_point(&snapped, self.params.feas_tol).is_empty() {
            let o = self.data.objective(&snapped);
            (snapped, o)
        } else {
            (x, obj)
        }
    }

    fn absorb(&mut self, ev: Evaluated) {
        match ev {
            Evaluated::Pruned => {}
            Evaluated::Integral(x, obj) => {
                if self.incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                    self.incumbent = Some((x, obj));
                }
            }
            Evaluated::Open(node) => self.heap.push(node),
            Evaluated::Unbounded => self.unbounded = true,
            Evaluated::Failed => self.failed = true,
        }
    }

    fn branch_var(&self, x: &[f64]) -> usize {
        let mut best = self.integral[0];
        let mut best_score = -1.0;
        for &j in &self.integral {
            let frac = x[j] - x[j].floor();
            let score = frac.min(1.0 - frac);
            if score > self.params.int_tol && score > best_score {
                best_score = score;
                best = j;
            }
        }
        best
    }
}

/// Best-first branch-and-bound over [`solve_lp`](super::solve_lp)
/// relaxations.
pub fn solve_milp(model: &Model, params: &SolveParams) -> Result<(Solution, SolveStats), KernelError> {
    params.validate()?;
    check_size(model)?;
    let start = Instant::now();
    let deadline = params.time_limit.map(|t| start + Duration::from_secs_f64(t));
    let data = LpData::from_model(model);
    let integral: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind.is_integral())
        .map(|(j, _)| j)
        .collect();

    let mut lower = data.lower.clone();
    let mut upper = data.upper.clone();
    for &j in &integral {
        lower[j] = (lower[j] - params.int_tol).ceil();
        upper[j] = (upper[j] + params.int_tol).floor();
    }

    let mut search = Search {
        model,
        data,
        integral,
        params,
        stats: SolveStats::default(),
        seq: 0,
        incumbent: None,
        heap: BinaryHeap::new(),
        failed: false,
        unbounded: false,
    };

    let root = search.evaluate(lower, upper);
    search.absorb(root);

    let mut limit_hit = false;
    while !search.unbounded {
        let Some(node) = search.heap.pop() else { break };
        if node.bound >= search.cutoff() {
            continue;
        }
        let over_nodes = search.stats.nodes_explored as usize >= params.node_limit;
        let over_time = deadline.is_some_and(|d| Instant::now() >= d);
        if over_nodes || over_time {
            search.heap.push(node);
            limit_hit = true;
            break;
        }
        let j = search.branch_var(&node.x);
        let v = node.x[j];

        let mut down_upper = node.upper.clone();
        down_upper[j] = v.floor();
        let down = search.evaluate(node.lower.clone(), down_upper);
        search.absorb(down);

        let mut up_lower = node.lower;
        up_lower[j] = v.ceil();
        let up = search.evaluate(up_lower, node.upper);
        search.absorb(up);
    }

    let failed = search.failed;
    let mut stats = search.stats;
    stats.wall_time = start.elapsed().as_secs_f64();
    let open_bound = search.heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);

    if search.unbounded {
        stats.best_bound = f64::NEG_INFINITY;
        return Ok((Solution::without_point(Status::Unbounded), stats));
    }
    let solution = match search.incumbent {
        Some((x, obj)) => {
            let proven = !limit_hit && !failed;
            stats.best_bound = if proven { obj } else { open_bound.min(obj) };
            Solution {
                status: if proven { Status::Optimal } else { Status::LimitReached },
                values: x,
                objective_value: Some(obj),
            }
        }
        None => {
            stats.best_bound = open_bound;
            if limit_hit || failed {
                Solution::without_point(Status::LimitReached)
            } else {
                Solution::without_point(Status::Infeasible)
            }
        }
    };
    Ok((solution, stats))
}

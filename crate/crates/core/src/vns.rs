//! Variable neighbourhood search over repair models.
//!
//! Decision variables are grouped into blocks supplied by the domain. Each
//! iteration frees `k` random blocks, fixes every other decision at the
//! current point and solves the restricted repair MILP exactly. Improving
//! moves are accepted and reset `k` to 1; otherwise `k` grows up to `k_max`
//! and wraps around.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::{solve_milp, SolveParams, SolveStats};
use crate::model::{Solution, Status, VarId};
use crate::repair::{RepairModel, RepairResult, TrajectoryRecord};
use crate::rng::XorShift64Star;

/// Unit of unfreezing: a named group of decision variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: String,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VnsParams {
    /// Largest neighbourhood, in blocks. Absent means every block; larger
    /// values are capped at the block count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Number of restricted subproblems solved.
    pub iter_budget: usize,
    /// Node limit of each subproblem.
    pub sub_node_limit: usize,
    pub seed: u64,
}

impl Default for VnsParams {
    fn default() -> Self {
        Self {
            k_max: None,
            iter_budget: 200,
            sub_node_limit: 10_000,
            seed: 0,
        }
    }
}

impl VnsParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.k_max == Some(0) {
            return Err(Error::InvalidParams("k_max must be >= 1".into()));
        }
        if self.iter_budget == 0 || self.sub_node_limit == 0 {
            return Err(Error::InvalidParams("iter_budget and sub_node_limit must be >= 1".into()));
        }
        Ok(())
    }
}

/// `blocks` restricted to the repair model's unfrozen decision variables.
/// Names unknown to the model are skipped and empty blocks dropped.
pub fn unfrozen_blocks(rm: &RepairModel, blocks: &[Block]) -> Vec<Block> {
    blocks
        .iter()
        .filter_map(|b| {
            let variables: Vec<String> = b
                .variables
                .iter()
                .filter(|name| {
                    rm.model()
                        .var_by_name(name)
                        .is_some_and(|v| v.index() < rm.decision_count() && !rm.is_frozen(v))
                })
                .cloned()
                .collect();
            (!variables.is_empty()).then(|| Block { id: b.id.clone(), variables })
        })
        .collect()
}

/// One JSON object per line, for progress logs.
pub fn trajectory_jsonl(records: &[TrajectoryRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

fn improves(candidate: f64, current: f64) -> bool {
    if !current.is_finite() {
        return candidate.is_finite();
    }
    candidate < current - 1e-9 * current.abs().max(1.0)
}

/// Runs VNS from the repair model's start point.
pub fn vns_repair(rm: &RepairModel, blocks: &[Block], params: &VnsParams, solve: &SolveParams) -> Result<RepairResult, Error> {
    params.validate()?;
    solve.validate()?;
    let blocks = unfrozen_blocks(rm, blocks);
    let ids: Vec<Vec<VarId>> = blocks
        .iter()
        .map(|b| b.variables.iter().filter_map(|n| rm.model().var_by_name(n)).collect())
        .collect();
    let mut current = rm.start_point().to_vec();
    let mut best = if rm.start_feasible() {
        rm.objective_at(&current)?
    } else {
        f64::INFINITY
    };
    let mut stats = SolveStats::default();
    let mut trajectory = Vec::new();
    let n = blocks.len();
    let sub = SolveParams {
        node_limit: params.sub_node_limit,
        ..solve.clone()
    };

    if n > 0 {
        let k_max = params.k_max.unwrap_or(n).clamp(1, n);
        let mut rng = XorShift64Star::new(params.seed);
        let mut k = 1;
        for iteration in 0..params.iter_budget {
            let picked = rng.sample_distinct(n, k);
            let mut free = vec![false; rm.decision_count()];
            for &b in &picked {
                for v in &ids[b] {
                    free[v.index()] = true;
                }
            }
            let mut restricted = rm.model().clone();
            for (j, &is_free) in free.iter().enumerate() {
                let v = crate::model::VarId(j);
                if !is_free && !rm.is_frozen(v) {
                    restricted.set_bounds(v, current[j], current[j])?;
                }
            }
            let (s, st) = solve_milp(&restricted, &sub)?;
            stats.absorb(&st);
            let accepted = s.has_point() && improves(s.objective_value.unwrap_or(f64::INFINITY), best);
            let used_k = k;
            if accepted {
                best = s.objective_value.unwrap_or(f64::INFINITY);
                current = s.values;
                debug_assert!(rm.model().check_point(&current, 1e-6).is_empty());
                k = 1;
            } else {
                k = if k >= k_max { 1 } else { k + 1 };
            }
            trajectory.push(TrajectoryRecord {
                iteration,
                k: used_k,
                blocks: picked.iter().map(|&b| blocks[b].id.clone()).collect(),
                accepted,
                objective: best.is_finite().then_some(best),
            });
            // Freeing every block solved the full repair model: nothing
            // left to find.
            if !accepted && used_k == n && s.status != Status::LimitReached {
                break;
            }
        }
    }

    let solution = if best.is_finite() {
        Solution {
            status: Status::Feasible,
            values: current,
            objective_value: Some(best),
        }
    } else {
        Solution::without_point(Status::Infeasible)
    };
    let mut result = rm.result(solution, stats);
    result.trajectory = trajectory;
    Ok(result)
}

//! Best-bound branch and bound over the binary variables of a
//! [`ConvexSubproblem`].
//!
//! Nodes are ordered by their parent's relaxation value, ties broken by
//! creation order. The lowest-index fractional binary is branched on, down
//! branch first. A node is pruned when its bound is not better than the
//! incumbent by more than a relative `1e-6`, so among tied optima the first
//! one found is kept.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::{solve_convex, ConvexSubproblem, SolveStatus, SubproblemSolution, TOL_FEAS_MIXED};

/// Primal heuristic: maps a relaxation point to a candidate full point that the
/// search verifies before accepting.
pub type Heuristic<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

/// Options of [`solve_mixed_binary`].
#[derive(Clone)]
pub struct MixedBinaryOptions<'a> {
    pub tol_feas: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Refuse problems with more binaries than this.
    pub max_binaries: usize,
    /// Tolerance below which a binary value counts as integral.
    pub int_tol: f64,
    pub heuristic: Option<Heuristic<'a>>,
}

impl Default for MixedBinaryOptions<'_> {
    fn default() -> Self {
        MixedBinaryOptions {
            tol_feas: TOL_FEAS_MIXED,
            node_limit: 100_000,
            time_limit: None,
            max_binaries: 24,
            int_tol: 1e-6,
            heuristic: None,
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixed: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smaller bound, then smaller id, is "greater".
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn with_fixings(p: &ConvexSubproblem, fixed: &[(usize, f64)]) -> ConvexSubproblem {
    let mut q = p.clone();
    for &(k, v) in fixed {
        q.lower[k] = v;
        q.upper[k] = v;
    }
    q
}

fn prune_gap(incumbent: f64) -> f64 {
    1e-6 * incumbent.abs().max(1.0)
}

/// Solves a problem whose integer-flagged variables are binary.
///
/// Returns `Optimal` with a proven optimum, `Infeasible` when the tree is
/// exhausted without a feasible point, and `NumericFailure` when a limit was
/// hit or a node solve failed; in that case `point`/`value` carry the
/// incumbent (if any) and `best_bound` the smallest open bound.
pub fn solve_mixed_binary(p: &ConvexSubproblem, opts: &MixedBinaryOptions) -> SubproblemSolution {
    let n = p.num_vars();
    let bins = p.binaries();
    if bins.len() > opts.max_binaries || bins.iter().any(|&k| p.lower[k] < 0.0 || p.upper[k] > 1.0) {
        return SubproblemSolution::failed(SolveStatus::NumericFailure, n);
    }
    let started = Instant::now();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, id: 0, fixed: Vec::new() });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut failed = false;
    let mut limit_hit = false;

    let try_accept = |incumbent: &mut Option<(f64, Vec<f64>)>, y: Vec<f64>| {
        let integral = bins.iter().all(|&k| y[k] == 0.0 || y[k] == 1.0);
        if !integral || p.max_violation(&y) > opts.tol_feas {
            return;
        }
        let v = p.objective.eval(&y);
        let better = match incumbent {
            Some((best, _)) => v < *best - prune_gap(*best),
            None => true,
        };
        if better {
            *incumbent = Some((v, y));
        }
    };

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - prune_gap(*best) {
                continue;
            }
        }
        let out_of_time = opts.time_limit.is_some_and(|t| started.elapsed() >= t);
        if nodes >= opts.node_limit || out_of_time {
            heap.push(node);
            limit_hit = true;
            break;
        }
        nodes += 1;
        let relax = solve_convex(&with_fixings(p, &node.fixed), opts.tol_feas.min(1e-8));
        match relax.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded if node.fixed.is_empty() => {
                let mut out = SubproblemSolution::failed(SolveStatus::Unbounded, n);
                out.nodes = nodes;
                return out;
            }
            SolveStatus::Optimal => {}
            _ => {
                failed = true;
                continue;
            }
        }
        if let Some((best, _)) = &incumbent {
            if relax.value >= best - prune_gap(*best) {
                continue;
            }
        }
        if let Some(h) = opts.heuristic {
            if let Some(y) = h(&relax.point) {
                try_accept(&mut incumbent, y);
            }
        }
        let frac = bins.iter().copied().find(|&k| (relax.point[k] - relax.point[k].round()).abs() > opts.int_tol);
        match frac {
            None => {
                let mut fixed = node.fixed.clone();
                for &k in &bins {
                    if !fixed.iter().any(|f| f.0 == k) {
                        fixed.push((k, relax.point[k].round()));
                    }
                }
                let polished = solve_convex(&with_fixings(p, &fixed), opts.tol_feas.min(1e-8));
                if polished.status == SolveStatus::Optimal {
                    try_accept(&mut incumbent, polished.point);
                } else if polished.status != SolveStatus::Infeasible {
                    failed = true;
                }
            }
            Some(k) => {
                for v in [0.0, 1.0] {
                    let mut fixed = node.fixed.clone();
                    fixed.push((k, v));
                    heap.push(Node { bound: relax.value, id: next_id, fixed });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let (status, value, point) = match incumbent {
        Some((v, y)) => {
            let st = if limit_hit || failed { SolveStatus::NumericFailure } else { SolveStatus::Optimal };
            (st, v, y)
        }
        None => {
            let st = if limit_hit || failed { SolveStatus::NumericFailure } else { SolveStatus::Infeasible };
            (st, f64::INFINITY, vec![f64::NAN; n])
        }
    };
    let best_bound = if status == SolveStatus::Optimal { value } else { open_bound.min(value) };
    SubproblemSolution { status, value, point, dual_residual: 0.0, best_bound, nodes }
}

#[cfg(test)]
mod tests {
    use super::super::LinExpr;
    use super::*;
    use proptest::prelude::*;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> ConvexSubproblem {
        let mut p = ConvexSubproblem::new();
        let xs: Vec<usize> = values.iter().map(|_| p.add_var(0.0, 1.0, true)).collect();
        p.objective = xs.iter().zip(values).fold(LinExpr::new(), |e, (&k, v)| e.with(k, -v));
        p.add_le(xs.iter().zip(weights).fold(LinExpr::constant(-cap), |e, (&k, w)| e.with(k, *w)));
        p
    }

    fn enumerate(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0..1u32 << n)
            .filter_map(|mask| {
                let pick = |v: &[f64]| (0..n).filter(|k| mask >> k & 1 == 1).map(|k| v[k]).sum::<f64>();
                (pick(weights) <= cap).then(|| -pick(values))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn single_binary() {
        let mut p = ConvexSubproblem::new();
        let x = p.add_var(0.0, 1.0, true);
        p.objective = LinExpr::var(x).scaled(-1.0);
        let s = solve_mixed_binary(&p, &MixedBinaryOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!((s.value, s.point[0]), (-1.0, 1.0));
    }

    #[test]
    fn ten_item_knapsack_matches_enumeration() {
        let v = [10.0, 13.0, 7.0, 8.0, 2.0, 9.0, 11.0, 4.0, 6.0, 5.0];
        let w = [5.0, 7.0, 4.0, 3.0, 1.0, 6.0, 8.0, 2.0, 3.0, 4.0];
        let s = solve_mixed_binary(&knapsack(&v, &w, 20.0), &MixedBinaryOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value - enumerate(&v, &w, 20.0)).abs() < 1e-6);
    }

    #[test]
    fn node_limit_reports_failure_with_bound() {
        let v = [10.0, 13.0, 7.0, 8.0, 2.0, 9.0, 11.0, 4.0, 6.0, 5.0];
        let w = [5.5, 7.2, 4.1, 3.3, 1.7, 6.4, 8.9, 2.2, 3.6, 4.5];
        let opts = MixedBinaryOptions { node_limit: 2, ..Default::default() };
        let s = solve_mixed_binary(&knapsack(&v, &w, 20.0), &opts);
        assert_eq!(s.status, SolveStatus::NumericFailure);
        assert!(s.best_bound <= enumerate(&v, &w, 20.0) + 1e-6);
    }

    #[test]
    fn too_many_binaries_is_refused() {
        let v = vec![1.0; 30];
        let s = solve_mixed_binary(&knapsack(&v, &v, 3.0), &MixedBinaryOptions::default());
        assert_eq!(s.status, SolveStatus::NumericFailure);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn branch_and_bound_equals_enumeration(
            v in proptest::collection::vec(1u32..30, 1..=12),
            seed in proptest::collection::vec(1u32..20, 12),
            frac in 0.2f64..0.8,
        ) {
            let values: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            let weights: Vec<f64> = seed[..values.len()].iter().map(|&a| a as f64).collect();
            let cap = (frac * weights.iter().sum::<f64>()).floor();
            let s = solve_mixed_binary(&knapsack(&values, &weights, cap), &MixedBinaryOptions::default());
            prop_assert_eq!(s.status, SolveStatus::Optimal);
            prop_assert!((s.value - enumerate(&values, &weights, cap)).abs() < 1e-6);
        }
    }
}

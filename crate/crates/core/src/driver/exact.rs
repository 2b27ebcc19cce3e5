//! Exact baselines: the Big-M mixed-binary model of the type-∞ chance
//! constraint and exhaustive enumeration.

use std::cell::Cell;
use std::time::{Duration, Instant};

use crate::approx::{a_exprs, add_dual_norm, base_problem, linear, margin_expr};
use crate::error::{DrccpError, Result};
use crate::model::{DrccpInstance, Order, ReferenceDistribution};
use crate::risk::{self, violation_budget};
use crate::subsolver::{solve_convex, solve_mixed_binary, LinExpr, MixedBinaryOptions, SolveStatus, TOL_FEAS_CONTINUOUS};

use super::{is_feasible, Method, SolveReport, CHECK_TOL};

/// Options of [`big_m_exact`].
#[derive(Debug, Clone)]
pub struct BigMOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Largest number of indicator plus decision binaries accepted.
    pub max_binaries: usize,
    /// Run the rounding heuristic at the root and every 16th node.
    pub heuristic: bool,
}

impl Default for BigMOptions {
    fn default() -> Self {
        BigMOptions { node_limit: 100_000, time_limit: None, max_binaries: 4096, heuristic: true }
    }
}

/// Interval `[lo, hi]` of `row⊤x + c` over the box `[lower, upper]`.
fn interval(row: &[f64], c: f64, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut lo = c;
    let mut hi = c;
    for ((r, l), u) in row.iter().zip(lower).zip(upper) {
        if *r == 0.0 {
            continue;
        }
        let (a, b) = (r * l, r * u);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

/// Big-M model `θ‖a_i(x)‖_* + a_i(x)⊤ζ^j − b_i(x) ≤ M_{ij} z_j` with
/// `Σ_j z_j ≤ ⌊Nε⌋` (or `Σ_j p_j z_j ≤ ε` for unequal probabilities) per
/// chance group. Each `M_{ij}` bounds the robust margin over the box of X by
/// interval arithmetic; scenarios with `M_{ij} ≤ 0` for every `i` need no
/// indicator.
pub fn big_m_exact(inst: &DrccpInstance, opts: &BigMOptions) -> Result<SolveReport> {
    let started = Instant::now();
    let ReferenceDistribution::Empirical { scenarios, probabilities } = &inst.distribution else {
        return Err(DrccpError::Unsupported("the Big-M model needs an empirical distribution".into()));
    };
    if inst.q != Order::Infinity {
        return Err(DrccpError::Unsupported("the Big-M model needs a type-∞ ball".into()));
    }
    if !inst.set.is_bounded() {
        return Err(DrccpError::Unsupported("the Big-M model needs a bounded X".into()));
    }
    let dn = inst.dual_norm()?;
    let weights = dn.l1_weights();
    let (lower, upper) = inst.set.bounds();
    let (mut p, xv) = base_problem(inst);
    let uniform = probabilities.iter().all(|v| (v - 1.0 / probabilities.len() as f64).abs() <= 1e-15);
    let mut group_z: Vec<Vec<(usize, f64)>> = Vec::new();

    for g in inst.chance_groups() {
        let norms: Vec<(LinExpr, f64)> = g
            .iter()
            .map(|&i| {
                let c = &inst.constraints[i];
                if inst.theta == 0.0 {
                    return (LinExpr::new(), 0.0);
                }
                let bound: f64 = c
                    .a_mat
                    .iter()
                    .zip(&c.a_vec)
                    .zip(&weights)
                    .map(|((row, a0), w)| {
                        let (lo, hi) = interval(row, *a0, &lower, &upper);
                        w * lo.abs().max(hi.abs())
                    })
                    .sum();
                let w = add_dual_norm(&mut p, &dn, &a_exprs(c, &xv));
                (w.scaled(inst.theta), inst.theta * bound)
            })
            .collect();
        let mut zs = Vec::new();
        let mut budget = LinExpr::new();
        for (z, pj) in scenarios.iter().zip(probabilities) {
            let rows: Vec<(LinExpr, f64)> = g
                .iter()
                .zip(&norms)
                .map(|(&i, (term, bound))| {
                    let c = &inst.constraints[i];
                    let (gv, g0) = c.margin_affine(z);
                    let (_, hi) = interval(&gv, g0, &lower, &upper);
                    let mut row = margin_expr(c, &xv, z);
                    row.add_expr(term, 1.0);
                    (row, hi + bound)
                })
                .collect();
            if rows.iter().all(|(_, m)| *m <= 0.0) {
                continue;
            }
            let zk = p.add_var(0.0, 1.0, true);
            for (row, m) in rows {
                if m > 0.0 {
                    p.add_le(row.with(zk, -m));
                } else {
                    p.add_le(row);
                }
            }
            let weight = if uniform { 1.0 } else { *pj };
            budget.add(zk, weight);
            zs.push((zk, weight));
        }
        if !zs.is_empty() {
            let cap = if uniform { violation_budget(scenarios.len(), inst.epsilon) as f64 } else { inst.epsilon };
            p.add_le(budget.plus(-cap));
        }
        group_z.push(zs);
    }
    p.objective = linear(&inst.objective, &xv, 0.0);

    // Rounding heuristic: per group keep the indicators with the largest
    // relaxed values within the budget, then re-solve with z fixed.
    let calls = Cell::new(0usize);
    let heuristic = |y: &[f64]| -> Option<Vec<f64>> {
        let k = calls.get();
        calls.set(k + 1);
        if !k.is_multiple_of(16) {
            return None;
        }
        let mut fixed = p.clone();
        let cap = if uniform { violation_budget(scenarios.len(), inst.epsilon) as f64 } else { inst.epsilon };
        for zs in &group_z {
            let mut order = zs.clone();
            order.sort_by(|a, b| y[b.0].total_cmp(&y[a.0]).then(a.0.cmp(&b.0)));
            let mut used = 0.0;
            for (zk, weight) in order {
                let one = y[zk] > 1e-9 && used + weight <= cap + 1e-12;
                if one {
                    used += weight;
                }
                let v = if one { 1.0 } else { 0.0 };
                fixed.lower[zk] = v;
                fixed.upper[zk] = v;
            }
        }
        if inst.set.is_binary() {
            for &k in &xv {
                let v = y[k].round();
                fixed.lower[k] = v;
                fixed.upper[k] = v;
            }
        }
        fixed.integer.iter_mut().for_each(|b| *b = false);
        let sol = solve_convex(&fixed, TOL_FEAS_CONTINUOUS);
        (sol.status == SolveStatus::Optimal).then_some(sol.point)
    };
    let mixed = MixedBinaryOptions {
        node_limit: opts.node_limit,
        time_limit: opts.time_limit,
        max_binaries: opts.max_binaries,
        heuristic: if opts.heuristic { Some(&heuristic) } else { None },
        ..MixedBinaryOptions::default()
    };
    let sol = solve_mixed_binary(&p, &mixed);
    let has_point = sol.point.iter().all(|v| v.is_finite()) && sol.value.is_finite();
    if !has_point {
        if sol.status == SolveStatus::NumericFailure && (opts.time_limit.is_some() || sol.nodes >= opts.node_limit) {
            return Ok(SolveReport::infeasible(Method::BigM, started));
        }
        return match sol.status {
            SolveStatus::Infeasible => Ok(SolveReport::infeasible(Method::BigM, started)),
            other => Err(DrccpError::Subsolver { t: f64::NAN, message: format!("Big-M solve ended with {other:?}") }),
        };
    }
    let x: Vec<f64> = xv.iter().map(|&k| if inst.set.is_binary() { sol.point[k].round() } else { sol.point[k] }).collect();
    let feasible = is_feasible(inst, &x, CHECK_TOL)? && risk::verify_independent(inst, &x, CHECK_TOL)?;
    let value = inst.objective_value(&x);
    let gap = if sol.status == SolveStatus::Optimal { 0.0 } else { (value - sol.best_bound).max(0.0) };
    Ok(SolveReport {
        method: Method::BigM,
        value,
        x,
        feasible,
        trace: None,
        wall_time: started.elapsed().as_secs_f64(),
        gap: Some(gap),
    })
}

/// Largest number of grid points [`brute_force`] evaluates.
pub const BRUTE_FORCE_POINT_LIMIT: usize = 5_000_000;

/// Exhaustive search for the best point passing the chance check: all of
/// `{0,1}ⁿ` (n ≤ 20) for binary X, or the grid `lower + step·k` of a bounded
/// box or polyhedron. Ties keep the first point in enumeration order.
pub fn brute_force(inst: &DrccpInstance, grid_step: Option<f64>) -> Result<SolveReport> {
    let started = Instant::now();
    let n = inst.n();
    let axes: Vec<Vec<f64>> = if inst.set.is_binary() {
        if n > 20 {
            return Err(DrccpError::Unsupported("brute force enumerates at most 20 binaries".into()));
        }
        vec![vec![0.0, 1.0]; n]
    } else {
        let step = grid_step
            .filter(|s| *s > 0.0)
            .ok_or_else(|| DrccpError::Invalid(vec!["brute force on a continuous set needs a positive grid step".into()]))?;
        if !inst.set.is_bounded() {
            return Err(DrccpError::Unsupported("brute force needs a bounded X".into()));
        }
        let (lo, hi) = inst.set.bounds();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| {
                let count = ((h - l) / step + 1e-9).floor() as usize;
                (0..=count).map(|k| l + step * k as f64).collect()
            })
            .collect()
    };
    let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    if total.is_none_or(|t| t > BRUTE_FORCE_POINT_LIMIT) {
        return Err(DrccpError::Unsupported("brute-force grid is too large".into()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        let v = inst.objective_value(&x);
        if best.as_ref().is_none_or(|(b, _)| v < *b) && is_feasible(inst, &x, CHECK_TOL)? {
            best = Some((v, x.clone()));
        }
        // Odometer increment, first coordinate slowest.
        let mut k = n;
        loop {
            if k == 0 {
                let (value, x, feasible) = match best {
                    Some((v, x)) => (v, x, true),
                    None => (f64::INFINITY, Vec::new(), false),
                };
                return Ok(SolveReport {
                    method: Method::BruteForce,
                    value,
                    x,
                    feasible,
                    trace: None,
                    wall_time: started.elapsed().as_secs_f64(),
                    gap: Some(0.0),
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                x[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = axes[k][0];
        }
    }
}

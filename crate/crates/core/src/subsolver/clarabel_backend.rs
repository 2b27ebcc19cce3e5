//! Continuous solves through the Clarabel interior-point solver.
//!
//! Rows are mapped to Clarabel's standard form `A y + s = b, s ∈ K`: equality
//! rows to the zero cone, inequality rows and finite bounds to the
//! nonnegative orthant, and cone rows to second-order and power cones.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{ConvexSubproblem, LinExpr, Sense, SolveStatus, SubproblemSolution};

struct Rows {
    ri: Vec<usize>,
    ci: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends a row whose slack equals `expr(y)`: `A = −coef`, `b = constant`.
    fn push_slack(&mut self, expr: &LinExpr) {
        let r = self.b.len();
        for &(k, c) in &expr.normalized().terms {
            self.ri.push(r);
            self.ci.push(k);
            self.vals.push(-c);
        }
        self.b.push(expr.constant);
    }
}

fn settings(tol: f64) -> DefaultSettings<f64> {
    DefaultSettings {
        verbose: false,
        max_iter: 400,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        tol_infeas_abs: 1e-9,
        tol_infeas_rel: 1e-9,
        tol_ktratio: 1e-7,
        max_threads: 1,
        ..DefaultSettings::default()
    }
}

/// Solves a problem without integrality restrictions (integer flags are
/// ignored, which yields the continuous relaxation).
///
/// A point is reported as optimal only after it passes
/// [`ConvexSubproblem::max_violation`] with tolerance `tol_feas`.
pub fn solve_convex(p: &ConvexSubproblem, tol_feas: f64) -> SubproblemSolution {
    let n = p.num_vars();
    if !p.is_well_formed() {
        return SubproblemSolution::failed(SolveStatus::NumericFailure, n);
    }
    if (0..n).any(|k| p.lower[k] > p.upper[k]) {
        return SubproblemSolution::failed(SolveStatus::Infeasible, n);
    }
    let mut rows = Rows { ri: Vec::new(), ci: Vec::new(), vals: Vec::new(), b: Vec::new() };
    let mut cones = Vec::new();

    // Equalities: slack −expr must be zero.
    let eqs: Vec<&LinExpr> = p.linear.iter().filter(|r| r.sense == Sense::Eq).map(|r| &r.expr).collect();
    for e in &eqs {
        rows.push_slack(&e.scaled(-1.0));
    }
    if !eqs.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }

    // Inequalities expr ≤ 0 and bounds: slack −expr must be nonnegative.
    let start = rows.b.len();
    for r in p.linear.iter().filter(|r| r.sense == Sense::Le) {
        rows.push_slack(&r.expr.scaled(-1.0));
    }
    for k in 0..n {
        if p.upper[k].is_finite() {
            rows.push_slack(&LinExpr::var(k).scaled(-1.0).plus(p.upper[k]));
        }
        if p.lower[k].is_finite() {
            rows.push_slack(&LinExpr::var(k).plus(-p.lower[k]));
        }
    }
    if rows.b.len() > start {
        cones.push(SupportedConeT::NonnegativeConeT(rows.b.len() - start));
    }

    for c in &p.soc {
        rows.push_slack(&c.bound);
        for e in &c.norm_of {
            rows.push_slack(e);
        }
        cones.push(SupportedConeT::SecondOrderConeT(c.norm_of.len() + 1));
    }
    for c in &p.power {
        rows.push_slack(&c.x);
        rows.push_slack(&c.w);
        rows.push_slack(&c.z);
        cones.push(SupportedConeT::PowerConeT(c.alpha));
    }

    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.ri, rows.ci, rows.vals);
    let pmat = CscMatrix::zeros((n, n));
    let obj = p.objective.normalized();
    let mut q = vec![0.0; n];
    for &(k, c) in &obj.terms {
        q[k] = c;
    }

    let mut solver = match DefaultSolver::new(&pmat, &q, &a, &rows.b, &cones, settings(1e-10)) {
        Ok(s) => s,
        Err(_) => return SubproblemSolution::failed(SolveStatus::NumericFailure, n),
    };
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return SubproblemSolution::failed(SolveStatus::Infeasible, n)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            return SubproblemSolution::failed(SolveStatus::Unbounded, n)
        }
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::MaxIterations | SolverStatus::InsufficientProgress | SolverStatus::MaxTime => {
            let gap = (sol.obj_val - sol.obj_val_dual).abs();
            if gap <= 1e-6 * (1.0 + sol.obj_val.abs()) {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericFailure
            }
        }
        _ => SolveStatus::NumericFailure,
    };

    // Clip to the bounds: the interior-point iterate may sit a hair outside.
    let point: Vec<f64> = (0..n).map(|k| sol.x[k].clamp(p.lower[k], p.upper[k])).collect();
    let feasible = p.max_violation(&point) <= tol_feas;
    let status = if status == SolveStatus::Optimal && !feasible { SolveStatus::NumericFailure } else { status };
    let value = obj.eval(&point);
    SubproblemSolution {
        status,
        value: if status == SolveStatus::Optimal { value } else { f64::INFINITY },
        point,
        dual_residual: sol.r_dual,
        best_bound: if status == SolveStatus::Optimal { value } else { f64::NEG_INFINITY },
        nodes: 0,
    }
}

//! Canonical convex subproblems and the solvers behind them.
//!
//! A [`ConvexSubproblem`] is a linear objective over a vector of variables with
//! linear rows, second-order-cone rows `‖(e_1(y), …, e_k(y))‖₂ ≤ e_0(y)`,
//! three-dimensional power-cone rows and box bounds. Continuous problems go to
//! the interior-point backend ([`solve_convex`]); problems with binary
//! variables go through a best-bound branch and bound on top of it
//! ([`solve_mixed_binary`]).

mod branch_bound;
mod clarabel_backend;

pub use branch_bound::{solve_mixed_binary, Heuristic, MixedBinaryOptions};
pub use clarabel_backend::solve_convex;

/// Sparse affine expression `Σ coef_k y_k + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    /// The zero expression.
    pub fn new() -> Self {
        Self::default()
    }

    /// A constant expression.
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    /// The single variable `y_k`.
    pub fn var(k: usize) -> Self {
        LinExpr { terms: vec![(k, 1.0)], constant: 0.0 }
    }

    /// Adds `coef · y_k` and returns the expression.
    pub fn with(mut self, k: usize, coef: f64) -> Self {
        self.add(k, coef);
        self
    }

    /// Adds a constant and returns the expression.
    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Adds `coef · y_k` in place (zero coefficients are dropped).
    pub fn add(&mut self, k: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((k, coef));
        }
    }

    /// Adds `scale · other` in place.
    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        for &(k, c) in &other.terms {
            self.add(k, scale * c);
        }
        self.constant += scale * other.constant;
    }

    /// Returns `scale · self`.
    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_expr(self, scale);
        out
    }

    /// Evaluates the expression at `y`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, c)| c * y[k]).sum::<f64>() + self.constant
    }

    /// Magnitude `Σ |coef_k y_k| + |constant|`, used to scale feasibility checks.
    pub fn magnitude(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, c)| (c * y[k]).abs()).sum::<f64>() + self.constant.abs()
    }

    /// Merges duplicate variables and sorts terms by index.
    pub fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (k, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }
}

/// Row sense: `expr ≤ 0` or `expr = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// Linear row `expr (≤|=) 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub expr: LinExpr,
    pub sense: Sense,
}

/// Second-order-cone row `‖(norm_of_1(y), …)‖₂ ≤ bound(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub norm_of: Vec<LinExpr>,
    pub bound: LinExpr,
}

/// Power-cone row `x(y)^α · w(y)^{1−α} ≥ |z(y)|` with `x, w ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConstraint {
    pub x: LinExpr,
    pub w: LinExpr,
    pub z: LinExpr,
    pub alpha: f64,
}

/// A linear objective over linear, second-order-cone and power-cone rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexSubproblem {
    pub objective: LinExpr,
    pub linear: Vec<LinearConstraint>,
    pub soc: Vec<SocConstraint>,
    pub power: Vec<PowerConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
}

impl ConvexSubproblem {
    /// An empty problem.
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of declared variables.
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    /// Declares a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, integer: bool) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(integer);
        self.lower.len() - 1
    }

    /// Adds `expr ≤ 0`.
    pub fn add_le(&mut self, expr: LinExpr) {
        self.linear.push(LinearConstraint { expr, sense: Sense::Le });
    }

    /// Adds `expr = 0`.
    pub fn add_eq(&mut self, expr: LinExpr) {
        self.linear.push(LinearConstraint { expr, sense: Sense::Eq });
    }

    /// Adds `‖norm_of‖₂ ≤ bound`.
    pub fn add_soc(&mut self, norm_of: Vec<LinExpr>, bound: LinExpr) {
        self.soc.push(SocConstraint { norm_of, bound });
    }

    /// Adds `x^α w^{1−α} ≥ |z|`.
    pub fn add_power(&mut self, x: LinExpr, w: LinExpr, z: LinExpr, alpha: f64) {
        self.power.push(PowerConstraint { x, w, z, alpha });
    }

    /// Indices of integer-flagged variables.
    pub fn binaries(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&k| self.integer[k]).collect()
    }

    /// Checks that every variable index used by the rows is declared.
    pub fn is_well_formed(&self) -> bool {
        let n = self.num_vars();
        let ok = |e: &LinExpr| e.terms.iter().all(|t| t.0 < n);
        self.upper.len() == n
            && self.integer.len() == n
            && ok(&self.objective)
            && self.linear.iter().all(|r| ok(&r.expr))
            && self.soc.iter().all(|r| ok(&r.bound) && r.norm_of.iter().all(ok))
            && self.power.iter().all(|r| ok(&r.x) && ok(&r.w) && ok(&r.z) && r.alpha > 0.0 && r.alpha < 1.0)
    }

    /// Largest scaled violation of any row or bound at `y` (nonpositive means
    /// feasible). Each violation is divided by `1 + magnitude` of the row.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..self.num_vars() {
            let s = 1.0 + y[k].abs();
            worst = worst.max((self.lower[k] - y[k]) / s).max((y[k] - self.upper[k]) / s);
        }
        for row in &self.linear {
            let v = row.expr.eval(y) / (1.0 + row.expr.magnitude(y));
            worst = worst.max(match row.sense {
                Sense::Le => v,
                Sense::Eq => v.abs(),
            });
        }
        for row in &self.soc {
            let norm = row.norm_of.iter().map(|e| e.eval(y).powi(2)).sum::<f64>().sqrt();
            let scale = 1.0 + row.bound.magnitude(y) + row.norm_of.iter().map(|e| e.magnitude(y)).sum::<f64>();
            worst = worst.max((norm - row.bound.eval(y)) / scale);
        }
        for row in &self.power {
            let (x, w, z) = (row.x.eval(y), row.w.eval(y), row.z.eval(y));
            let scale = 1.0 + row.x.magnitude(y) + row.w.magnitude(y) + row.z.magnitude(y);
            let lhs = x.max(0.0).powf(row.alpha) * w.max(0.0).powf(1.0 - row.alpha);
            worst = worst.max(-x / scale).max(-w / scale).max((z.abs() - lhs) / scale);
        }
        worst
    }
}

/// Outcome class of a subproblem solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

/// Result of a subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub status: SolveStatus,
    /// Objective value at `point` (infinite when no point is available).
    pub value: f64,
    pub point: Vec<f64>,
    /// Dual residual reported by the backend (zero for branch and bound).
    pub dual_residual: f64,
    /// Best proven lower bound (branch and bound only; equals `value` for
    /// continuous solves).
    pub best_bound: f64,
    /// Number of branch-and-bound nodes processed.
    pub nodes: usize,
}

impl SubproblemSolution {
    pub(crate) fn failed(status: SolveStatus, n: usize) -> Self {
        let value = match status {
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        SubproblemSolution { status, value, point: vec![f64::NAN; n], dual_residual: f64::NAN, best_bound: value, nodes: 0 }
    }

    /// Whether the solve proved optimality.
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Default feasibility tolerance for continuous solves.
pub const TOL_FEAS_CONTINUOUS: f64 = 1e-8;
/// Default feasibility tolerance for mixed-binary solves.
pub const TOL_FEAS_MIXED: f64 = 1e-6;

/// Solves `p` with the continuous or mixed-binary solver depending on its
/// integrality flags.
pub fn solve_auto(p: &ConvexSubproblem, opts: &MixedBinaryOptions) -> SubproblemSolution {
    if p.integer.iter().any(|b| *b) {
        solve_mixed_binary(p, opts)
    } else {
        solve_convex(p, TOL_FEAS_CONTINUOUS)
    }
}

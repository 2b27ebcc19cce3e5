//! Lower-level programs of the bilevel methods and the CVaR approximation.
//!
//! For an objective cap `t`, the lower levels minimize over
//! `x ∈ X, c⊤x ≤ t` the worst-case expected loss of the chance constraint:
//!
//! * ALSO-X: the hinge loss `E[max_i(θ‖a_i(x)‖_* + a_i(x)⊤ζ − b_i(x))₊]`
//!   (type-∞), or `λθ^q + E[max_i(a_i(x)⊤ζ − b_i(x) + P_{q,i}(x,λ))₊]`
//!   (type-q);
//! * ALSO-X#: the CVaR loss `εβ + E[(max_i(…) − β)₊]` with `β ≤ 0`;
//! * the weak variant of ALSO-X#: the same loss with β free.
//!
//! The CVaR approximation imposes the worst-case CVaR constraint directly and
//! minimizes `c⊤x` in a single solve.
//!
//! Empirical references are handled by epigraph reformulations with one
//! slack per scenario. Elliptical references use the closed-form loss
//! `σ(x)ρ(m(x)/σ(x))` of the standardized generator, minimized by a cutting
//! plane method (see [`elliptic`]).

pub mod elliptic;

use std::time::Duration;

use crate::error::{DrccpError, Result};
use crate::model::{AffineConstraint, DrccpInstance, DualKind, DualNorm, Order, PNorm, ReferenceDistribution};
use crate::risk::{upper_quantile, LossSample};
use crate::subsolver::{solve_auto, ConvexSubproblem, LinExpr, MixedBinaryOptions, SolveStatus};

/// Sign restriction on the auxiliary variable β of the CVaR loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSign {
    /// `β ≤ 0` (ALSO-X#).
    NonPositive,
    /// β free (the weak variant).
    Free,
    /// β pinned to a value; `Fixed(0.0)` reproduces the hinge loss.
    Fixed(f64),
}

/// Which lower-level loss to minimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerKind {
    /// ALSO-X hinge loss.
    Hinge,
    /// CVaR loss with the given β restriction.
    Cvar(BetaSign),
}

/// Solver limits shared by all programs built here.
#[derive(Debug, Clone)]
pub struct LowerOptions {
    /// Branch-and-bound node limit for binary X.
    pub node_limit: usize,
    /// Branch-and-bound time limit for binary X.
    pub time_limit: Option<Duration>,
    /// Largest number of binary variables accepted.
    pub max_binaries: usize,
    /// Pins every λ to this value (type-q only); used to profile the
    /// objective in λ.
    pub fixed_lambda: Option<f64>,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions { node_limit: 100_000, time_limit: None, max_binaries: 24, fixed_lambda: None }
    }
}

impl LowerOptions {
    fn mixed(&self) -> MixedBinaryOptions<'static> {
        MixedBinaryOptions {
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            max_binaries: self.max_binaries,
            ..MixedBinaryOptions::default()
        }
    }
}

/// Solution of a lower-level program or of the CVaR approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerLevelResult {
    pub x: Vec<f64>,
    /// One β per chance group; empty for the hinge loss.
    pub beta: Vec<f64>,
    /// One λ per chance group; empty for type-∞ balls and for θ = 0.
    pub lambda: Vec<f64>,
    /// Lower-level objective at `(x, β, λ)`; `c⊤x` for the CVaR approximation.
    pub value: f64,
    pub status: SolveStatus,
}

/// `c_q = q^{−q/(q−1)}(q−1)`, the constant of `P_{q,i}`.
pub fn p_constant(q: f64) -> f64 {
    q.powf(-q / (q - 1.0)) * (q - 1.0)
}

/// `P_{q,i}(x,λ) = ‖a_i(x)‖_*^{q/(q−1)} λ^{−1/(q−1)} c_q` for `q ∈ (1,∞)`.
pub fn p_term(norm: f64, lambda: f64, q: f64) -> f64 {
    if norm == 0.0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    norm.powf(q / (q - 1.0)) * lambda.powf(-1.0 / (q - 1.0)) * p_constant(q)
}

/// Minimizer of `λθ^q + ε P_{q,1}(x,λ)` over `λ ≥ 0`:
/// `λ* = ε^{(q−1)/q} ‖a‖_* q^{−1} θ^{−(q−1)}`.
pub fn lambda_star(norm: f64, q: f64, epsilon: f64, theta: f64) -> f64 {
    epsilon.powf((q - 1.0) / q) * norm / q * theta.powf(-(q - 1.0))
}

/// Dual norms of every `a_i(x)` and the minimizer λ* for the first
/// constraint (the relevant one when all norms coincide).
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProfile {
    pub norms: Vec<f64>,
    pub lambda_star: f64,
}

/// Evaluates [`LambdaProfile`] at `x` for order `q ∈ (1,∞)`.
pub fn lambda_profile(inst: &DrccpInstance, x: &[f64], q: f64) -> Result<LambdaProfile> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(DrccpError::Unsupported("lambda_profile needs 1 < q < ∞".into()));
    }
    let dn = inst.dual_norm()?;
    let norms: Vec<f64> = inst.constraints.iter().map(|c| dn.eval(&c.a_of(x))).collect();
    let lambda_star = lambda_star(norms[0], q, inst.epsilon, inst.theta);
    Ok(LambdaProfile { norms, lambda_star })
}

/// ALSO-X lower level at cap `t`.
pub fn alsox_lower(inst: &DrccpInstance, t: f64, opts: &LowerOptions) -> Result<LowerLevelResult> {
    lower_level(inst, t, LowerKind::Hinge, opts)
}

/// ALSO-X# lower level (`NonPositive`) or its weak variant (`Free`) at cap `t`.
pub fn alsox_sharp_lower(inst: &DrccpInstance, t: f64, sign: BetaSign, opts: &LowerOptions) -> Result<LowerLevelResult> {
    lower_level(inst, t, LowerKind::Cvar(sign), opts)
}

/// Lower level of the given kind at cap `t`.
pub fn lower_level(inst: &DrccpInstance, t: f64, kind: LowerKind, opts: &LowerOptions) -> Result<LowerLevelResult> {
    match inst.distribution {
        ReferenceDistribution::Elliptical { .. } => elliptic::elliptical_lower(inst, t, kind, opts),
        ReferenceDistribution::Empirical { .. } => {
            let built = build(inst, Mode::Lower { t, kind }, opts)?;
            built.solve_lower(inst, kind, opts)
        }
    }
}

/// CVaR approximation: `min c⊤x` over `x ∈ X` with the worst-case CVaR
/// constraint of every chance group.
pub fn cvar_approximation(inst: &DrccpInstance, opts: &LowerOptions) -> Result<LowerLevelResult> {
    match inst.distribution {
        ReferenceDistribution::Elliptical { .. } => elliptic::elliptical_cvar(inst, opts),
        ReferenceDistribution::Empirical { .. } => {
            let built = build(inst, Mode::Cvar { shortcut: true }, opts)?;
            built.solve_cvar(inst, opts)
        }
    }
}

/// CVaR approximation that always keeps `(λ, β)` explicit, even when the
/// norms-equal shortcut applies. Used to cross-check the shortcut.
pub fn cvar_approximation_general(inst: &DrccpInstance, opts: &LowerOptions) -> Result<LowerLevelResult> {
    let built = build(inst, Mode::Cvar { shortcut: false }, opts)?;
    built.solve_cvar(inst, opts)
}

#[derive(Clone, Copy)]
enum Mode {
    Lower { t: f64, kind: LowerKind },
    Cvar { shortcut: bool },
}

/// Variables `x` with the set constraints and bounds of X.
pub(crate) fn base_problem(inst: &DrccpInstance) -> (ConvexSubproblem, Vec<usize>) {
    let mut p = ConvexSubproblem::new();
    let (lo, hi) = inst.set.bounds();
    let binary = inst.set.is_binary();
    let xv: Vec<usize> = (0..inst.n()).map(|k| p.add_var(lo[k], hi[k], binary)).collect();
    for (row, d) in inst.set.rows() {
        p.add_le(linear(&row, &xv, -d));
    }
    (p, xv)
}

/// `row⊤x + constant` as an expression over the variables `xv`.
pub(crate) fn linear(row: &[f64], xv: &[usize], constant: f64) -> LinExpr {
    row.iter().zip(xv).filter(|(c, _)| **c != 0.0).fold(LinExpr::constant(constant), |e, (c, &k)| e.with(k, *c))
}

/// Components of `a_i(x)` as expressions.
pub(crate) fn a_exprs(c: &AffineConstraint, xv: &[usize]) -> Vec<LinExpr> {
    c.a_mat.iter().zip(&c.a_vec).map(|(row, a0)| linear(row, xv, *a0)).collect()
}

/// Nominal margin `a_i(x)⊤ζ − b_i(x)` as an expression.
pub(crate) fn margin_expr(c: &AffineConstraint, xv: &[usize], zeta: &[f64]) -> LinExpr {
    let (g, g0) = c.margin_affine(zeta);
    linear(&g, xv, g0)
}

/// Returns an expression `w` with `w ≥ ‖a‖_*` enforced by new rows.
pub(crate) fn add_dual_norm(p: &mut ConvexSubproblem, dn: &DualNorm, comps: &[LinExpr]) -> LinExpr {
    let free: Vec<&LinExpr> = comps.iter().zip(&dn.free).filter(|(_, f)| **f).map(|(e, _)| e).collect();
    if comps.iter().all(|e| e.normalized().terms.is_empty()) {
        let values: Vec<f64> = comps.iter().map(|e| e.constant).collect();
        return LinExpr::constant(dn.eval(&values));
    }
    match &dn.kind {
        DualKind::P(PNorm::Two) => {
            let w = p.add_var(0.0, f64::INFINITY, false);
            p.add_soc(free.into_iter().cloned().collect(), LinExpr::var(w));
            LinExpr::var(w)
        }
        DualKind::P(PNorm::One) => {
            // One epigraph variable keeps the rows that reuse the norm sparse.
            let w = p.add_var(0.0, f64::INFINITY, false);
            let mut sum = LinExpr::var(w).scaled(-1.0);
            for e in free {
                let v = p.add_var(0.0, f64::INFINITY, false);
                p.add_le(e.clone().with(v, -1.0));
                p.add_le(e.scaled(-1.0).with(v, -1.0));
                sum.add(v, 1.0);
            }
            p.add_le(sum);
            LinExpr::var(w)
        }
        DualKind::P(PNorm::Inf) => {
            let w = p.add_var(0.0, f64::INFINITY, false);
            for e in free {
                p.add_le(e.clone().with(w, -1.0));
                p.add_le(e.scaled(-1.0).with(w, -1.0));
            }
            LinExpr::var(w)
        }
        DualKind::Factor(rows) => {
            let w = p.add_var(0.0, f64::INFINITY, false);
            let mapped = rows
                .iter()
                .map(|row| {
                    let mut e = LinExpr::new();
                    for (f, c) in row.iter().zip(comps) {
                        if *f != 0.0 {
                            e.add_expr(c, *f);
                        }
                    }
                    e
                })
                .collect();
            p.add_soc(mapped, LinExpr::var(w));
            LinExpr::var(w)
        }
    }
}

/// Whether all constraints of a group share the same `a_i(x)`.
fn same_a(inst: &DrccpInstance, g: &[usize]) -> bool {
    let first = &inst.constraints[g[0]];
    g.iter().all(|&i| {
        let c = &inst.constraints[i];
        c.a_mat == first.a_mat && c.a_vec == first.a_vec
    })
}

struct GroupVars {
    beta: Option<usize>,
    lambda: Option<usize>,
}

struct Built {
    p: ConvexSubproblem,
    xv: Vec<usize>,
    groups: Vec<GroupVars>,
}

fn build(inst: &DrccpInstance, mode: Mode, opts: &LowerOptions) -> Result<Built> {
    let (scenarios, probs) =
        inst.empirical().ok_or_else(|| DrccpError::Unsupported("empirical distribution required".into()))?;
    let dn = inst.dual_norm()?;
    let (mut p, xv) = base_problem(inst);
    let theta = inst.theta;
    let eps = inst.epsilon;
    let q = inst.q;
    let robust = theta > 0.0;
    let mut groups = Vec::new();
    let mut lower_objective = LinExpr::new();

    for g in inst.chance_groups() {
        let shortcut = matches!(mode, Mode::Cvar { shortcut: true }) && robust && q.finite().is_some() && same_a(inst, &g);
        let beta_bounds = match mode {
            Mode::Lower { kind: LowerKind::Hinge, .. } => None,
            Mode::Lower { kind: LowerKind::Cvar(BetaSign::NonPositive), .. } => Some((f64::NEG_INFINITY, 0.0)),
            Mode::Lower { kind: LowerKind::Cvar(BetaSign::Fixed(b)), .. } => Some((b, b)),
            _ => Some((f64::NEG_INFINITY, f64::INFINITY)),
        };
        let beta = beta_bounds.map(|(lo, hi)| p.add_var(lo, hi, false));
        let lambda = match q {
            Order::Finite(_) if robust && !shortcut => {
                let (lo, hi) = opts.fixed_lambda.map_or((0.0, f64::INFINITY), |v| (v, v));
                Some(p.add_var(lo, hi, false))
            }
            _ => None,
        };

        // Robust term added to each constraint's margin.
        let mut terms: Vec<LinExpr> = Vec::with_capacity(g.len());
        let mut group_extra = LinExpr::new();
        if shortcut {
            let qv = q.finite().unwrap_or(1.0);
            let w = add_dual_norm(&mut p, &dn, &a_exprs(&inst.constraints[g[0]], &xv));
            group_extra.add_expr(&w, theta * eps.powf(1.0 - 1.0 / qv));
            terms = vec![LinExpr::new(); g.len()];
        } else {
            for &i in &g {
                if !robust {
                    terms.push(LinExpr::new());
                    continue;
                }
                let w = add_dual_norm(&mut p, &dn, &a_exprs(&inst.constraints[i], &xv));
                let lam = lambda.map(LinExpr::var);
                terms.push(match (q, lam) {
                    (Order::Infinity, _) => w.scaled(theta),
                    (Order::Finite(qv), Some(lam)) if qv == 1.0 => {
                        let mut row = w.clone();
                        row.add_expr(&lam, -1.0);
                        p.add_le(row);
                        LinExpr::new()
                    }
                    (Order::Finite(qv), Some(lam)) if qv == 2.0 => {
                        let u = p.add_var(0.0, f64::INFINITY, false);
                        let mut diff = lam.clone();
                        diff.add(u, -1.0);
                        let mut sum = lam.clone();
                        sum.add(u, 1.0);
                        p.add_soc(vec![w, diff], sum);
                        LinExpr::var(u)
                    }
                    (Order::Finite(qv), Some(lam)) => {
                        let u = p.add_var(0.0, f64::INFINITY, false);
                        let cq = p_constant(qv);
                        p.add_power(LinExpr::var(u).scaled(1.0 / cq), lam, w, (qv - 1.0) / qv);
                        LinExpr::var(u)
                    }
                    (Order::Finite(_), None) => unreachable!("λ exists for robust type-q groups"),
                });
            }
        }
        if let (Order::Finite(qv), Some(lam)) = (q, lambda) {
            group_extra.add(lam, theta.powf(qv));
        }

        // Scenario slacks s_j ≥ term_i + margin_ij and s_j ≥ β (or 0).
        let mut loss = group_extra;
        for (z, pj) in scenarios.iter().zip(probs) {
            let s = p.add_var(if beta.is_none() { 0.0 } else { f64::NEG_INFINITY }, f64::INFINITY, false);
            if let Some(b) = beta {
                p.add_le(LinExpr::var(b).with(s, -1.0));
            }
            for (&i, term) in g.iter().zip(&terms) {
                let mut row = margin_expr(&inst.constraints[i], &xv, z);
                row.add_expr(term, 1.0);
                row.add(s, -1.0);
                p.add_le(row);
            }
            loss.add(s, *pj);
        }
        if let Some(b) = beta {
            loss.add(b, -(1.0 - eps));
        }
        match mode {
            Mode::Cvar { .. } => p.add_le(loss),
            Mode::Lower { .. } => lower_objective.add_expr(&loss, 1.0),
        }
        groups.push(GroupVars { beta, lambda });
    }

    match mode {
        Mode::Lower { t, .. } => {
            p.add_le(linear(&inst.objective, &xv, -t));
            p.objective = lower_objective;
        }
        Mode::Cvar { .. } => p.objective = linear(&inst.objective, &xv, 0.0),
    }
    Ok(Built { p, xv, groups })
}

fn has_point(status: SolveStatus, point: &[f64]) -> bool {
    matches!(status, SolveStatus::Optimal | SolveStatus::NumericFailure) && point.iter().all(|v| v.is_finite())
}

impl Built {
    fn raw(&self, opts: &LowerOptions) -> Result<Option<(SolveStatus, Vec<f64>, Vec<f64>, Vec<f64>, f64)>> {
        let sol = solve_auto(&self.p, &opts.mixed());
        match sol.status {
            SolveStatus::Infeasible => return Ok(None),
            SolveStatus::Unbounded => return Err(DrccpError::Numeric("lower-level program is unbounded".into())),
            _ => {}
        }
        if !has_point(sol.status, &sol.point) {
            return Err(DrccpError::Numeric(format!("conic solve failed with status {:?}", sol.status)));
        }
        let x = self.xv.iter().map(|&k| sol.point[k]).collect();
        let beta = self.groups.iter().filter_map(|g| g.beta.map(|b| sol.point[b])).collect();
        let lambda = self.groups.iter().filter_map(|g| g.lambda.map(|l| sol.point[l])).collect();
        Ok(Some((sol.status, x, beta, lambda, sol.value)))
    }

    fn solve_cvar(&self, inst: &DrccpInstance, opts: &LowerOptions) -> Result<LowerLevelResult> {
        Ok(match self.raw(opts)? {
            None => infeasible(inst.n()),
            Some((status, x, beta, lambda, _)) => {
                let value = inst.objective_value(&x);
                LowerLevelResult { x, beta, lambda, value, status }
            }
        })
    }

    fn solve_lower(&self, inst: &DrccpInstance, kind: LowerKind, opts: &LowerOptions) -> Result<LowerLevelResult> {
        let Some((status, x, beta, lambda, solver_value)) = self.raw(opts)? else {
            return Ok(infeasible(inst.n()));
        };
        let (beta, value) = polish(inst, &x, &lambda, kind).unwrap_or((beta, solver_value));
        Ok(LowerLevelResult { x, beta, lambda, value, status })
    }
}

fn infeasible(n: usize) -> LowerLevelResult {
    LowerLevelResult {
        x: vec![f64::NAN; n],
        beta: Vec::new(),
        lambda: Vec::new(),
        value: f64::INFINITY,
        status: SolveStatus::Infeasible,
    }
}

/// Per-group worst margins `max_i(term_i + a_i(x)⊤ζ^j − b_i(x))` with the
/// robust terms evaluated exactly at the given λ.
pub fn group_losses(inst: &DrccpInstance, x: &[f64], lambda: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (scenarios, _) =
        inst.empirical().ok_or_else(|| DrccpError::Unsupported("empirical distribution required".into()))?;
    let dn = inst.dual_norm()?;
    let groups = inst.chance_groups();
    Ok(groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let terms: Vec<f64> = g
                .iter()
                .map(|&i| {
                    let norm = dn.eval(&inst.constraints[i].a_of(x));
                    if inst.theta == 0.0 {
                        return 0.0;
                    }
                    match inst.q {
                        Order::Infinity => inst.theta * norm,
                        Order::Finite(q) if q == 1.0 => 0.0,
                        Order::Finite(q) => p_term(norm, lambda.get(gi).copied().unwrap_or(0.0), q),
                    }
                })
                .collect();
            scenarios
                .iter()
                .map(|z| {
                    g.iter()
                        .zip(&terms)
                        .map(|(&i, t)| t + inst.constraints[i].nominal_margin(x, z))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect())
}

/// Recomputes β (largest minimizer) and the lower-level value from exact
/// margins. Returns `None` when the exact terms are not finite.
fn polish(inst: &DrccpInstance, x: &[f64], lambda: &[f64], kind: LowerKind) -> Option<(Vec<f64>, f64)> {
    let (_, probs) = inst.empirical()?;
    let losses = group_losses(inst, x, lambda).ok()?;
    let mut betas = Vec::new();
    let mut value = 0.0;
    for (gi, m) in losses.iter().enumerate() {
        if m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let penalty = match inst.q {
            Order::Finite(q) => lambda.get(gi).map_or(0.0, |l| l * inst.theta.powf(q)),
            Order::Infinity => 0.0,
        };
        let beta = match kind {
            LowerKind::Hinge => 0.0,
            LowerKind::Cvar(BetaSign::Fixed(b)) => b,
            LowerKind::Cvar(sign) => {
                let sample = LossSample { values: m.clone(), probabilities: probs.to_vec() };
                let b = upper_quantile(&sample, inst.epsilon);
                if sign == BetaSign::NonPositive {
                    b.min(0.0)
                } else {
                    b
                }
            }
        };
        let excess: f64 = m.iter().zip(probs).map(|(v, p)| p * (v - beta).max(0.0)).sum();
        let eps_beta = if kind == LowerKind::Hinge { 0.0 } else { inst.epsilon * beta };
        value += penalty + eps_beta + excess;
        if kind != LowerKind::Hinge {
            betas.push(beta);
        }
    }
    Some((betas, value))
}

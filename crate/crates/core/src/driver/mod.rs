//! End-to-end pipelines: the bisection over the objective bound `t`, the
//! one-shot CVaR approximation, exact baselines and instance diagnostics.
//!
//! The bisection keeps an interval `[t_L, t_U]`. At each midpoint `t` it
//! solves the method's lower level and checks the chance constraint at the
//! lower-level solution. A feasible probe lowers `t_U` to `t`, an infeasible
//! one raises `t_L`. The report carries the best feasible point seen over all
//! probes, re-verified by [`risk::verify_independent`].

mod classify;
mod exact;

pub use classify::{classify, Diagnostics, ExactnessClass, Uniqueness};
pub use exact::{big_m_exact, brute_force, BigMOptions};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::approx::{self, BetaSign, LowerKind, LowerOptions};
use crate::error::{DrccpError, Result};
use crate::model::{ext_f64, DrccpInstance};
use crate::risk;
use crate::subsolver::{solve_convex, SolveStatus, TOL_FEAS_CONTINUOUS};

/// Relative margin tolerance of the feasibility checks run by the pipelines.
pub const CHECK_TOL: f64 = 1e-7;
/// Tolerance of the membership test `x ∈ X`.
const SET_TOL: f64 = 1e-6;
/// Number of doublings allowed when a bound of the bisection has to be found.
const EXPANSION_CAP: usize = 60;

/// Solution method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "alsox")]
    AlsoX,
    #[serde(rename = "alsox-sharp")]
    AlsoXSharp,
    #[serde(rename = "alsox-weak")]
    AlsoXWeakSharp,
    #[serde(rename = "cvar")]
    CVaR,
    #[serde(rename = "bigm")]
    BigM,
    #[serde(rename = "brute")]
    BruteForce,
}

impl Method {
    /// All methods in report order.
    pub const ALL: [Method; 6] =
        [Method::AlsoX, Method::AlsoXSharp, Method::AlsoXWeakSharp, Method::CVaR, Method::BigM, Method::BruteForce];

    /// Command-line name of the method.
    pub fn name(self) -> &'static str {
        match self {
            Method::AlsoX => "alsox",
            Method::AlsoXSharp => "alsox-sharp",
            Method::AlsoXWeakSharp => "alsox-weak",
            Method::CVaR => "cvar",
            Method::BigM => "bigm",
            Method::BruteForce => "brute",
        }
    }

    /// Lower-level loss of a bisection method.
    pub fn lower_kind(self) -> Option<LowerKind> {
        match self {
            Method::AlsoX => Some(LowerKind::Hinge),
            Method::AlsoXSharp => Some(LowerKind::Cvar(BetaSign::NonPositive)),
            Method::AlsoXWeakSharp => Some(LowerKind::Cvar(BetaSign::Free)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = DrccpError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DrccpError::Invalid(vec![format!("unknown method \"{s}\"")]))
    }
}

/// One probe of the bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub t: f64,
    /// Lower-level objective; `inf` when the cap leaves X empty.
    #[serde(with = "ext_f64")]
    pub lower_value: f64,
    pub feasible: bool,
}

/// Record of a bisection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionTrace {
    pub iterations: Vec<BisectionStep>,
    #[serde(with = "ext_f64")]
    pub t_lower: f64,
    #[serde(with = "ext_f64")]
    pub t_upper: f64,
    pub delta1: f64,
}

/// Outcome of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    /// `c⊤x` of the reported point; `inf` when no feasible point was found.
    #[serde(with = "ext_f64")]
    pub value: f64,
    /// Reported point; empty when no feasible point was found.
    pub x: Vec<f64>,
    pub feasible: bool,
    pub trace: Option<BisectionTrace>,
    /// Wall-clock time in seconds.
    pub wall_time: f64,
    /// Gap between the incumbent and the best bound of an exact method
    /// stopped by a limit; 0 for a proven optimum.
    pub gap: Option<f64>,
}

impl SolveReport {
    pub(crate) fn infeasible(method: Method, started: Instant) -> Self {
        SolveReport {
            method,
            value: f64::INFINITY,
            x: Vec::new(),
            feasible: false,
            trace: None,
            wall_time: started.elapsed().as_secs_f64(),
            gap: None,
        }
    }
}

/// Options of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Bisection width; defaults to 0.5 for binary X with an integral
    /// objective and 1e-2 otherwise.
    pub delta1: Option<f64>,
    pub lower: LowerOptions,
    /// Relative tolerance of the chance checks.
    pub check_tol: f64,
    /// Grid step of [`brute_force`] on continuous sets.
    pub grid_step: Option<f64>,
    pub big_m: BigMOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            delta1: None,
            lower: LowerOptions::default(),
            check_tol: CHECK_TOL,
            grid_step: None,
            big_m: BigMOptions::default(),
        }
    }
}

/// Default bisection width for the instance.
pub fn default_delta1(inst: &DrccpInstance) -> f64 {
    let integral = inst.objective.iter().all(|c| c.fract() == 0.0);
    if inst.set.is_binary() && integral {
        0.5
    } else {
        1e-2
    }
}

/// Whether `x` lies in X and passes the matching chance check.
pub fn is_feasible(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    Ok(inst.set.contains(x, SET_TOL) && risk::chance_check(inst, x, tol)?)
}

/// Runs a pipeline end to end.
pub fn solve(inst: &DrccpInstance, method: Method, opts: &SolveOptions) -> Result<SolveReport> {
    let errors = crate::model::validate(inst);
    if !errors.is_empty() {
        return Err(DrccpError::Invalid(errors));
    }
    match method {
        Method::CVaR => cvar_pipeline(inst, opts),
        Method::BigM => big_m_exact(inst, &opts.big_m),
        Method::BruteForce => brute_force(inst, opts.grid_step),
        _ => {
            let delta1 = opts.delta1.unwrap_or_else(|| default_delta1(inst));
            let (t_l, t_u) = initial_bounds(inst, &opts.lower)?;
            bisect(inst, method, delta1, t_l, t_u, opts)
        }
    }
}

/// CVaR approximation as a pipeline.
pub fn cvar_pipeline(inst: &DrccpInstance, opts: &SolveOptions) -> Result<SolveReport> {
    let started = Instant::now();
    let r = approx::cvar_approximation(inst, &opts.lower)?;
    if r.status == SolveStatus::Infeasible {
        return Ok(SolveReport::infeasible(Method::CVaR, started));
    }
    let feasible = is_feasible(inst, &r.x, opts.check_tol)? && risk::verify_independent(inst, &r.x, opts.check_tol)?;
    Ok(SolveReport {
        method: Method::CVaR,
        value: inst.objective_value(&r.x),
        x: r.x,
        feasible,
        trace: None,
        wall_time: started.elapsed().as_secs_f64(),
        gap: None,
    })
}

/// Initial bounds `(t_L, t_U)`: `t_U` is the CVaR approximation value (`+∞`
/// if it is infeasible) and `t_L` the minimum of `c⊤x` over the continuous
/// relaxation of X (`−∞` if unbounded). [`bisect`] expands infinite bounds.
pub fn initial_bounds(inst: &DrccpInstance, opts: &LowerOptions) -> Result<(f64, f64)> {
    let (mut p, xv) = approx::base_problem(inst);
    p.integer.iter_mut().for_each(|b| *b = false);
    p.objective = approx::linear(&inst.objective, &xv, 0.0);
    let relax = solve_convex(&p, TOL_FEAS_CONTINUOUS);
    let t_l = match relax.status {
        SolveStatus::Optimal => relax.value,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        SolveStatus::Infeasible => return Err(DrccpError::Invalid(vec!["the set X is empty".into()])),
        SolveStatus::NumericFailure => {
            return Err(DrccpError::Subsolver { t: f64::NEG_INFINITY, message: "relaxation of X failed".into() })
        }
    };
    let cvar = approx::cvar_approximation(inst, opts)?;
    let t_u = if cvar.status == SolveStatus::Infeasible { f64::INFINITY } else { cvar.value };
    Ok((t_l, t_u.max(t_l)))
}

/// Largest objective value over the relaxation of a bounded X, or `+∞`.
/// Above it the budget `c⊤x ≤ t` no longer restricts the lower level.
fn objective_ceiling(inst: &DrccpInstance) -> f64 {
    if !inst.set.is_bounded() {
        return f64::INFINITY;
    }
    let (mut p, xv) = approx::base_problem(inst);
    p.integer.iter_mut().for_each(|b| *b = false);
    let negated: Vec<f64> = inst.objective.iter().map(|c| -c).collect();
    p.objective = approx::linear(&negated, &xv, 0.0);
    let sol = solve_convex(&p, TOL_FEAS_CONTINUOUS);
    if sol.status == SolveStatus::Optimal {
        -sol.value
    } else {
        f64::INFINITY
    }
}

struct Bisection<'a> {
    inst: &'a DrccpInstance,
    kind: LowerKind,
    opts: &'a SolveOptions,
    steps: Vec<BisectionStep>,
    best: Option<(f64, Vec<f64>)>,
}

impl Bisection<'_> {
    fn probe(&mut self, t: f64) -> Result<bool> {
        let r = approx::lower_level(self.inst, t, self.kind, &self.opts.lower).map_err(|e| match e {
            DrccpError::Subsolver { .. } => e,
            other => DrccpError::Subsolver { t, message: other.to_string() },
        })?;
        if r.status == SolveStatus::Infeasible {
            self.steps.push(BisectionStep { t, lower_value: f64::INFINITY, feasible: false });
            return Ok(false);
        }
        let feasible = is_feasible(self.inst, &r.x, self.opts.check_tol)?
            && risk::verify_independent(self.inst, &r.x, self.opts.check_tol)?;
        self.steps.push(BisectionStep { t, lower_value: r.value, feasible });
        if feasible {
            let v = self.inst.objective_value(&r.x);
            if self.best.as_ref().is_none_or(|(b, _)| v < *b) {
                self.best = Some((v, r.x));
            }
        }
        Ok(feasible)
    }
}

/// Algorithm-1 bisection of a bilevel method between `t_l0` and `t_u0`.
///
/// Infinite bounds are first replaced by finite ones: `t_u0 = +∞` is expanded
/// upward from `t_l0` until a probe is feasible and `t_l0 = −∞` downward from
/// `t_u0` until a probe is infeasible, each for at most 60 doublings.
pub fn bisect(
    inst: &DrccpInstance,
    method: Method,
    delta1: f64,
    t_l0: f64,
    t_u0: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let started = Instant::now();
    let kind = method
        .lower_kind()
        .ok_or_else(|| DrccpError::Unsupported(format!("{method} is not a bisection method")))?;
    if !(delta1 > 0.0) || t_l0 > t_u0 {
        return Err(DrccpError::Invalid(vec!["bisection needs delta1 > 0 and t_L ≤ t_U".into()]));
    }
    let mut b = Bisection { inst, kind, opts, steps: Vec::new(), best: None };
    let (mut t_l, mut t_u) = (t_l0, t_u0);

    if t_u.is_infinite() {
        let base = if t_l.is_finite() { t_l } else { 0.0 };
        let ceiling = objective_ceiling(inst);
        let mut width = base.abs().max(1.0);
        let mut found = false;
        for _ in 0..EXPANSION_CAP {
            let t = (base + width).min(ceiling);
            if b.probe(t)? {
                t_u = t;
                found = true;
                break;
            }
            t_l = t_l.max(t);
            if t >= ceiling {
                break;
            }
            width *= 2.0;
        }
        if !found {
            return Ok(finish(b, method, t_l, t_u, delta1, started));
        }
    } else if !b.probe(t_u)? {
        return Ok(finish(b, method, t_l, t_u, delta1, started));
    }

    if t_l.is_infinite() {
        let mut width = t_u.abs().max(1.0);
        loop {
            let t = t_u - width;
            let feasible = b.probe(t)?;
            if !feasible || b.steps.len() > EXPANSION_CAP {
                t_l = t;
                break;
            }
            t_u = t;
            width *= 2.0;
        }
    }

    while t_u - t_l > delta1 {
        let t = 0.5 * (t_l + t_u);
        if b.probe(t)? {
            t_u = t;
        } else {
            t_l = t;
        }
    }
    Ok(finish(b, method, t_l, t_u, delta1, started))
}

fn finish(b: Bisection, method: Method, t_l: f64, t_u: f64, delta1: f64, started: Instant) -> SolveReport {
    let trace = BisectionTrace { iterations: b.steps, t_lower: t_l, t_upper: t_u, delta1 };
    let (value, x, feasible) = match b.best {
        Some((v, x)) => (v, x, true),
        None => (f64::INFINITY, Vec::new(), false),
    };
    SolveReport { method, value, x, feasible, trace: Some(trace), wall_time: started.elapsed().as_secs_f64(), gap: None }
}

#[cfg(test)]
mod tests;

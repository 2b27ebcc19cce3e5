//! Lower levels and CVaR approximation for an elliptical reference.
//!
//! With a single constraint, `m(x) = μ⊤a(x) − b(x)` and
//! `σ(x) = √(a(x)⊤Σa(x))`, every worst-case loss has the form
//! `h(x) = σ ρ(m/σ)` for a convex scalar function ρ of the standardized
//! margin `r`. With `ψ(u) = φ(u) + uΦ(u)`, `z = Φ⁻¹(1−ε)` and
//! `S(u) = εu + φ(z)` for `u ≤ −z`, `S(u) = ψ(u)` otherwise:
//!
//! | loss  | q = ∞        | q = 1        | 1 < q < ∞                               |
//! |-------|--------------|--------------|-----------------------------------------|
//! | hinge | `ψ(r+θ)`     | `θ + ψ(r)`   | `min_ℓ ℓθ^q + ψ(r + c_q ℓ^{−1/(q−1)})`  |
//! | sharp | `S(r+θ)`     | `θ + S(r)`   | `min_ℓ ℓθ^q + S(r + c_q ℓ^{−1/(q−1)})`  |
//! | weak  | `ε(r + θε^{−1/q}) + φ(z)` for every q                       |||
//!
//! The perspective `σρ(m/σ)` is jointly convex and nondecreasing in σ, so it
//! is the supremum of the planes `α s + γ m` with `γ = ρ'(r_k)` and
//! `α = ρ(r_k) − r_kρ'(r_k) ≥ 0`, where `s ≥ σ(x)` is a second-order cone
//! epigraph. The master problem keeps a growing set of these planes.

use crate::approx::{a_exprs, base_problem, linear, BetaSign, LowerKind, LowerLevelResult, LowerOptions};
use crate::elliptical::GeneratorKind;
use crate::error::{DrccpError, Result};
use crate::model::{dot, psd_factor, DrccpInstance, Order, ReferenceDistribution};
use crate::subsolver::{solve_auto, ConvexSubproblem, LinExpr, SolveStatus};

use super::p_constant;

/// Shape of the standardized loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Hinge,
    Sharp,
    Weak,
}

impl Shape {
    fn of(kind: LowerKind) -> Result<Shape> {
        match kind {
            LowerKind::Hinge => Ok(Shape::Hinge),
            LowerKind::Cvar(BetaSign::Fixed(b)) if b == 0.0 => Ok(Shape::Hinge),
            LowerKind::Cvar(BetaSign::NonPositive) => Ok(Shape::Sharp),
            LowerKind::Cvar(BetaSign::Free) => Ok(Shape::Weak),
            LowerKind::Cvar(BetaSign::Fixed(_)) => {
                Err(DrccpError::Unsupported("a nonzero fixed β is not supported for elliptical references".into()))
            }
        }
    }
}

/// Parameters of ρ for one instance.
#[derive(Debug, Clone, Copy)]
pub struct Standardized {
    pub shape: Shape,
    pub q: Order,
    pub epsilon: f64,
    pub theta: f64,
    pub gen: GeneratorKind,
    z: f64,
    phi_z: f64,
}

/// Value, slope and the shift `u − r` of the optimal inner argument.
#[derive(Debug, Clone, Copy)]
pub struct RhoEval {
    pub value: f64,
    pub slope: f64,
    pub shift: f64,
}

impl Standardized {
    pub fn new(shape: Shape, q: Order, epsilon: f64, theta: f64, gen: GeneratorKind) -> Self {
        let z = gen.quantile(1.0 - epsilon);
        Standardized { shape, q, epsilon, theta, gen, z, phi_z: gen.pdf(z) }
    }

    /// `ψ(u)` and `ψ'(u)`, or `S(u)` and `S'(u)`.
    fn inner(&self, u: f64) -> (f64, f64) {
        if self.shape == Shape::Sharp && u <= -self.z {
            return (self.epsilon * u + self.phi_z, self.epsilon);
        }
        let cdf = self.gen.cdf(u);
        (self.gen.pdf(u) + u * cdf, cdf)
    }

    /// Evaluates ρ at the standardized margin `r`.
    pub fn rho(&self, r: f64) -> RhoEval {
        let (eps, theta) = (self.epsilon, self.theta);
        if self.shape == Shape::Weak {
            let qinv = self.q.finite().map_or(0.0, |q| 1.0 / q);
            let shift = theta * eps.powf(-qinv);
            return RhoEval { value: eps * (r + shift) + self.phi_z, slope: eps, shift };
        }
        let (offset, shift) = match self.q {
            Order::Infinity => (0.0, theta),
            Order::Finite(q) if q == 1.0 || theta == 0.0 => (theta, 0.0),
            Order::Finite(q) => {
                let l = self.best_ell(r, q);
                (l * theta.powf(q), p_constant(q) * l.powf(-1.0 / (q - 1.0)))
            }
        };
        let (v, d) = self.inner(r + shift);
        RhoEval { value: offset + v, slope: d, shift }
    }

    /// Minimizer of `ℓθ^q + L(r + c_q ℓ^{−1/(q−1)})`, found by bisection on
    /// the increasing derivative over `log ℓ`.
    fn best_ell(&self, r: f64, q: f64) -> f64 {
        let cq = p_constant(q);
        let tq = self.theta.powf(q);
        let deriv = |l: f64| {
            let u = r + cq * l.powf(-1.0 / (q - 1.0));
            tq - self.inner(u).1 * cq / (q - 1.0) * l.powf(-q / (q - 1.0))
        };
        let hi = self.theta.powf(-(q - 1.0)) / q;
        let (mut a, mut b) = (hi.ln() - 70.0, hi.ln());
        if deriv(a.exp()) >= 0.0 {
            return a.exp();
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if deriv(mid.exp()) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        (0.5 * (a + b)).exp()
    }

    /// Loss `σρ(m/σ)` with its limit at σ = 0.
    pub fn loss(&self, m: f64, sigma: f64) -> f64 {
        if sigma <= 1e-300 {
            return self.recession_slopes().iter().map(|g| g * m).fold(f64::NEG_INFINITY, f64::max);
        }
        sigma * self.rho(m / sigma).value
    }

    /// Slopes γ of the planes `γ m` that describe the loss at σ = 0.
    fn recession_slopes(&self) -> Vec<f64> {
        match self.shape {
            Shape::Hinge => vec![0.0, 1.0],
            Shape::Sharp => vec![self.epsilon, 1.0],
            Shape::Weak => vec![self.epsilon],
        }
    }

    /// Plane `(α, γ)` tangent to the perspective along the ray of `r`.
    fn cut(&self, r: f64) -> (f64, f64) {
        let e = self.rho(r);
        ((e.value - r * e.slope).max(0.0), e.slope)
    }
}

struct Parts {
    mu: Vec<f64>,
    factor: Vec<Vec<f64>>,
    gen: GeneratorKind,
}

fn parts(inst: &DrccpInstance) -> Result<Parts> {
    let ReferenceDistribution::Elliptical { mu, sigma, generator } = &inst.distribution else {
        return Err(DrccpError::Unsupported("elliptical distribution required".into()));
    };
    if inst.constraints.len() != 1 {
        return Err(DrccpError::Unsupported("elliptical references support a single constraint".into()));
    }
    Ok(Parts { mu: mu.clone(), factor: psd_factor(sigma)?, gen: *generator })
}

/// Adds `s ≥ ‖F a(x)‖` and returns `(s, m(x))` as expressions.
fn add_sigma(p: &mut ConvexSubproblem, inst: &DrccpInstance, parts: &Parts, xv: &[usize]) -> (LinExpr, LinExpr) {
    let c = &inst.constraints[0];
    let comps = a_exprs(c, xv);
    let s = p.add_var(0.0, f64::INFINITY, false);
    let rows = parts
        .factor
        .iter()
        .map(|row| {
            let mut e = LinExpr::new();
            for (f, comp) in row.iter().zip(&comps) {
                if *f != 0.0 {
                    e.add_expr(comp, *f);
                }
            }
            e
        })
        .collect();
    p.add_soc(rows, LinExpr::var(s));
    let mut m = LinExpr::new();
    for (mu, comp) in parts.mu.iter().zip(&comps) {
        m.add_expr(comp, *mu);
    }
    m.add_expr(&linear(&c.b_vec, xv, c.b0), -1.0);
    (LinExpr::var(s), m)
}

fn mean_and_sd(inst: &DrccpInstance, parts: &Parts, x: &[f64]) -> (f64, f64) {
    let c = &inst.constraints[0];
    let a = c.a_of(x);
    let sd = parts.factor.iter().map(|row| dot(row, &a).powi(2)).sum::<f64>().sqrt();
    (dot(&parts.mu, &a) - c.b_of(x), sd)
}

/// Cutting plane solve of the elliptical lower level at cap `t`.
pub fn elliptical_lower(inst: &DrccpInstance, t: f64, kind: LowerKind, opts: &LowerOptions) -> Result<LowerLevelResult> {
    let parts = parts(inst)?;
    let model = Standardized::new(Shape::of(kind)?, inst.q, inst.epsilon, inst.theta, parts.gen);
    let (mut p, xv) = base_problem(inst);
    p.add_le(linear(&inst.objective, &xv, -t));
    let (s, m) = add_sigma(&mut p, inst, &parts, &xv);
    let tau = p.add_var(f64::NEG_INFINITY, f64::INFINITY, false);
    p.objective = LinExpr::var(tau);
    let add_plane = |p: &mut ConvexSubproblem, alpha: f64, gamma: f64| {
        let mut row = s.scaled(alpha);
        row.add_expr(&m, gamma);
        row.add(tau, -1.0);
        p.add_le(row);
    };
    for g in model.recession_slopes() {
        add_plane(&mut p, 0.0, g);
    }
    if model.shape != Shape::Weak {
        for k in 0..=24 {
            let (a, g) = model.cut(-6.0 + 0.5 * k as f64);
            add_plane(&mut p, a, g);
        }
    } else {
        let (a, g) = model.cut(0.0);
        add_plane(&mut p, a, g);
    }
    let mixed = opts.mixed();
    for _ in 0..200 {
        let sol = solve_auto(&p, &mixed);
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Ok(super::infeasible(inst.n())),
            other => return Err(DrccpError::Numeric(format!("elliptical master solve ended with {other:?}"))),
        }
        let x: Vec<f64> = xv.iter().map(|&k| sol.point[k]).collect();
        let (mean, sd) = mean_and_sd(inst, &parts, &x);
        let h = model.loss(mean, sd);
        let tau_v = sol.point[tau];
        if h <= tau_v + 1e-10 * (1.0 + h.abs()) || sd <= 1e-300 {
            let beta = match model.shape {
                Shape::Hinge => Vec::new(),
                _ if sd <= 1e-300 => vec![0.0],
                shape => {
                    let r = mean / sd;
                    let var = sd * (r + model.rho(r).shift + model.z);
                    vec![if shape == Shape::Sharp { var.min(0.0) } else { var }]
                }
            };
            return Ok(LowerLevelResult { x, beta, lambda: Vec::new(), value: h, status: SolveStatus::Optimal });
        }
        let (a, g) = model.cut(mean / sd);
        add_plane(&mut p, a, g);
    }
    Err(DrccpError::Numeric("elliptical cutting plane did not converge".into()))
}

/// `φ(z)/ε + θε^{−1/q}` (`θ` for q = ∞): the coefficient of σ in the
/// worst-case CVaR of an elliptical margin.
pub fn cvar_coefficient(gen: GeneratorKind, q: Order, epsilon: f64, theta: f64) -> f64 {
    let z = gen.quantile(1.0 - epsilon);
    let qinv = q.finite().map_or(0.0, |q| 1.0 / q);
    gen.pdf(z) / epsilon + theta * epsilon.powf(-qinv)
}

/// Elliptical CVaR approximation `min c⊤x` s.t. `m(x) + κσ(x) ≤ 0`.
pub fn elliptical_cvar(inst: &DrccpInstance, opts: &LowerOptions) -> Result<LowerLevelResult> {
    let parts = parts(inst)?;
    let kappa = cvar_coefficient(parts.gen, inst.q, inst.epsilon, inst.theta);
    let (mut p, xv) = base_problem(inst);
    let (s, mut m) = add_sigma(&mut p, inst, &parts, &xv);
    m.add_expr(&s, kappa);
    p.add_le(m);
    p.objective = linear(&inst.objective, &xv, 0.0);
    let sol = solve_auto(&p, &opts.mixed());
    match sol.status {
        SolveStatus::Optimal => {
            let x: Vec<f64> = xv.iter().map(|&k| sol.point[k]).collect();
            let value = inst.objective_value(&x);
            Ok(LowerLevelResult { x, beta: Vec::new(), lambda: Vec::new(), value, status: SolveStatus::Optimal })
        }
        SolveStatus::Infeasible => Ok(super::infeasible(inst.n())),
        other => Err(DrccpError::Numeric(format!("elliptical CVaR solve ended with {other:?}"))),
    }
}

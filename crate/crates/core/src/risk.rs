//! Risk functionals and worst-case chance-constraint checks.
//!
//! The checks decide whether a candidate `x` satisfies
//! `inf_{P ∈ 𝒫} P{a_i(x)⊤ζ ≤ b_i(x) ∀ i} ≥ 1 − ε`:
//!
//! * type-∞ balls count scenarios whose robust margins
//!   `θ‖a_i(x)‖_* + a_i(x)⊤ζ − b_i(x)` are nonpositive;
//! * type-q balls evaluate the distance `f(x, ζ)` from each scenario to the
//!   unsafe region and test the CVaR and VaR conditions on `f^q`;
//! * elliptical references use `b − μ⊤a ≥ η_q* √(a⊤Σa)`.
//!
//! Margins are compared against a relative tolerance: a margin counts as
//! satisfied when it is at most `tol · (1 + scale)`, where `scale` sums the
//! magnitudes of the terms that make up the margin.

use num_rational::Ratio;

use crate::elliptical::{eta_star, tail_moment, GeneratorKind};
use crate::error::{DrccpError, Result};
use crate::model::{dot, DrccpInstance, DualNorm, NormSpec, Order, ReferenceDistribution};

/// Default margin tolerance of the checks.
pub const DEFAULT_TOL: f64 = 1e-8;

/// A discrete random loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl LossSample {
    /// Builds a sample, checking lengths, signs and normalization.
    pub fn new(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if values.len() != probabilities.len() || values.is_empty() {
            return Err(DrccpError::Invalid(vec!["values and probabilities differ in length".into()]));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(DrccpError::Invalid(vec!["probabilities must be nonnegative and sum to 1".into()]));
        }
        Ok(LossSample { values, probabilities })
    }

    /// Equiprobable sample.
    pub fn uniform(values: Vec<f64>) -> Self {
        let n = values.len();
        LossSample { values, probabilities: vec![1.0 / n as f64; n] }
    }

    fn sorted_ascending(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.values.iter().copied().zip(self.probabilities.iter().copied()).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

const CUM_TOL: f64 = 1e-12;

/// `VaR_{1−ε} = min{s : F(s) ≥ 1 − ε}`.
pub fn var(sample: &LossSample, epsilon: f64) -> f64 {
    let sorted = sample.sorted_ascending();
    let mut cum = 0.0;
    for (v, p) in &sorted {
        cum += p;
        if cum >= 1.0 - epsilon - CUM_TOL {
            return *v;
        }
    }
    sorted.last().map_or(f64::NAN, |s| s.0)
}

/// Upper quantile `min{s : F(s) > 1 − ε}`, the largest minimizer of
/// `εβ + E[(X − β)₊]`.
pub fn upper_quantile(sample: &LossSample, epsilon: f64) -> f64 {
    let sorted = sample.sorted_ascending();
    let mut cum = 0.0;
    for (v, p) in &sorted {
        cum += p;
        if cum > 1.0 - epsilon + CUM_TOL {
            return *v;
        }
    }
    sorted.last().map_or(f64::NAN, |s| s.0)
}

/// `CVaR_{1−ε}`: average of the upper ε tail, splitting the boundary atom.
pub fn cvar(sample: &LossSample, epsilon: f64) -> f64 {
    let mut sorted = sample.sorted_ascending();
    sorted.reverse();
    let mut remaining = epsilon;
    let mut acc = 0.0;
    let mut last = f64::NAN;
    for (v, p) in sorted {
        if remaining <= 0.0 {
            break;
        }
        let take = p.min(remaining);
        acc += take * v;
        remaining -= take;
        last = v;
    }
    if remaining > 0.0 {
        acc += remaining * last;
    }
    acc / epsilon
}

/// `CVaR_{1−ε}` through `min_β {β + E[(X − β)₊]/ε}`, minimized over the
/// atoms (the objective is piecewise linear with kinks there).
pub fn cvar_by_minimization(sample: &LossSample, epsilon: f64) -> f64 {
    sample
        .values
        .iter()
        .map(|&beta| {
            let excess: f64 =
                sample.values.iter().zip(&sample.probabilities).map(|(v, p)| p * (v - beta).max(0.0)).sum();
            beta + excess / epsilon
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean of the lower ε tail of a sample that may contain `+∞`.
pub fn lower_tail_mean(sample: &LossSample, epsilon: f64) -> f64 {
    let sorted = sample.sorted_ascending();
    let mut remaining = epsilon;
    let mut acc = 0.0;
    for (v, p) in sorted {
        if remaining <= 0.0 {
            break;
        }
        let take = p.min(remaining);
        if take > 0.0 {
            acc += take * v;
        }
        remaining -= take;
    }
    acc / epsilon
}

/// `⌊Nε⌋` computed on the rational reduction of ε.
pub fn violation_budget(n: usize, epsilon: f64) -> usize {
    match Ratio::<i64>::approximate_float(epsilon) {
        Some(r) if *r.denom() > 0 => {
            let num = i128::from(*r.numer()) * n as i128;
            (num.div_euclid(i128::from(*r.denom()))).max(0) as usize
        }
        _ => (n as f64 * epsilon).floor() as usize,
    }
}

fn is_uniform(p: &[f64]) -> bool {
    let u = 1.0 / p.len() as f64;
    p.iter().all(|v| (v - u).abs() <= 1e-15)
}

/// Whether the satisfied scenarios carry enough mass: `count ≥ N − ⌊Nε⌋`
/// for equiprobable scenarios, `Σ p_j ≥ 1 − ε` otherwise.
pub fn enough_mass(satisfied: &[bool], probabilities: &[f64], epsilon: f64) -> bool {
    let n = satisfied.len();
    if is_uniform(probabilities) {
        let count = satisfied.iter().filter(|s| **s).count();
        count >= n - violation_budget(n, epsilon).min(n)
    } else {
        let mass: f64 = satisfied.iter().zip(probabilities).filter(|(s, _)| **s).map(|(_, p)| p).sum();
        mass >= 1.0 - epsilon - CUM_TOL
    }
}

/// Per-constraint quantities at a fixed `x`.
struct Evaluated {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    norm: Vec<f64>,
}

fn evaluate(inst: &DrccpInstance, dn: &DualNorm, x: &[f64]) -> Evaluated {
    let a: Vec<Vec<f64>> = inst.constraints.iter().map(|c| c.a_of(x)).collect();
    let b = inst.constraints.iter().map(|c| c.b_of(x)).collect();
    let norm = a.iter().map(|v| dn.eval(v)).collect();
    Evaluated { a, b, norm }
}

impl Evaluated {
    /// Nominal margin and its scale for constraint i at scenario ζ.
    fn nominal(&self, i: usize, zeta: &[f64]) -> (f64, f64) {
        let m = dot(&self.a[i], zeta) - self.b[i];
        let scale = self.a[i].iter().zip(zeta).map(|(a, z)| (a * z).abs()).sum::<f64>() + self.b[i].abs();
        (m, scale)
    }
}

fn require_empirical(inst: &DrccpInstance) -> Result<(&[Vec<f64>], &[f64])> {
    inst.empirical().ok_or_else(|| DrccpError::Unsupported("this check needs an empirical distribution".into()))
}

/// Robust margin `θ‖a_i(x)‖_* + a_i(x)⊤ζ^j − b_i(x)` of constraint `i` at
/// scenario `j`.
pub fn robust_margin_inf(inst: &DrccpInstance, x: &[f64], j: usize, i: usize) -> Result<f64> {
    let (scenarios, _) = require_empirical(inst)?;
    let dn = inst.dual_norm()?;
    let c = &inst.constraints[i];
    let a = c.a_of(x);
    Ok(inst.theta * dn.eval(&a) + dot(&a, &scenarios[j]) - c.b_of(x))
}

/// Per-scenario worst robust margin of each group (used by the lower levels
/// and the Big-M bounds as well).
pub fn group_robust_margins(inst: &DrccpInstance, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (scenarios, _) = require_empirical(inst)?;
    let dn = inst.dual_norm()?;
    let ev = evaluate(inst, &dn, x);
    Ok(inst
        .chance_groups()
        .iter()
        .map(|g| {
            scenarios
                .iter()
                .map(|z| g.iter().map(|&i| inst.theta * ev.norm[i] + ev.nominal(i, z).0).fold(f64::NEG_INFINITY, f64::max))
                .collect()
        })
        .collect())
}

/// Type-∞ chance check: in every group, the scenarios whose robust margins
/// are all nonpositive carry mass at least `1 − ε`.
pub fn chance_check_inf(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    let (scenarios, probs) = require_empirical(inst)?;
    let dn = inst.dual_norm()?;
    let ev = evaluate(inst, &dn, x);
    let theta = inst.theta;
    for g in inst.chance_groups() {
        let satisfied: Vec<bool> = scenarios
            .iter()
            .map(|z| {
                g.iter().all(|&i| {
                    let (m, scale) = ev.nominal(i, z);
                    let robust = theta * ev.norm[i];
                    m + robust <= tol * (1.0 + scale + robust)
                })
            })
            .collect();
        if !enough_mass(&satisfied, probs, inst.epsilon) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Distances `f(x, ζ^j)` from each scenario to the unsafe region of group `g`
/// together with the nominal verdicts. A violated scenario has distance 0;
/// a constraint with `‖a_i(x)‖_* = 0` that holds contributes `+∞`.
fn unsafe_distances(inst: &DrccpInstance, ev: &Evaluated, g: &[usize], tol: f64) -> (Vec<f64>, Vec<bool>) {
    let (scenarios, _) = inst.empirical().expect("empirical checked by caller");
    let mut dist = Vec::with_capacity(scenarios.len());
    let mut nominal_ok = Vec::with_capacity(scenarios.len());
    for z in scenarios {
        let mut f = f64::INFINITY;
        let mut ok = true;
        for &i in g {
            let (m, scale) = ev.nominal(i, z);
            if m > tol * (1.0 + scale) {
                ok = false;
                f = 0.0;
                break;
            }
            let norm = ev.norm[i];
            let tiny = 1e-14 * (1.0 + ev.a[i].iter().map(|v| v.abs()).sum::<f64>());
            if norm > tiny {
                f = f.min((-m).max(0.0) / norm);
            }
        }
        dist.push(f);
        nominal_ok.push(ok);
    }
    (dist, nominal_ok)
}

/// Type-q chance check (finite q): with `T = θ^q/ε`, every group must
/// satisfy the CVaR condition (mean of the lower ε tail of `f^q` is at least
/// `T`) and the VaR condition (scenarios that hold nominally and have
/// `f^q ≥ T` carry mass at least `1 − ε`).
pub fn chance_check_q(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    let (_, probs) = require_empirical(inst)?;
    let q = inst.q.finite().ok_or_else(|| DrccpError::Unsupported("chance_check_q needs a finite order".into()))?;
    let dn = inst.dual_norm()?;
    let ev = evaluate(inst, &dn, x);
    let threshold = inst.theta.powf(q) / inst.epsilon;
    let slack = tol * (1.0 + threshold);
    for g in inst.chance_groups() {
        let (dist, nominal_ok) = unsafe_distances(inst, &ev, &g, tol);
        let fq: Vec<f64> = dist.iter().map(|f| f.powf(q)).collect();
        let sample = LossSample { values: fq.clone(), probabilities: probs.to_vec() };
        if lower_tail_mean(&sample, inst.epsilon) < threshold - slack {
            return Ok(false);
        }
        let good: Vec<bool> = fq.iter().zip(&nominal_ok).map(|(v, ok)| *ok && *v >= threshold - slack).collect();
        if !enough_mass(&good, probs, inst.epsilon) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn elliptical_parts(inst: &DrccpInstance, x: &[f64]) -> Result<(f64, f64, f64, GeneratorKind)> {
    let ReferenceDistribution::Elliptical { mu, sigma, generator } = &inst.distribution else {
        return Err(DrccpError::Unsupported("this check needs an elliptical distribution".into()));
    };
    if inst.constraints.len() != 1 {
        return Err(DrccpError::Unsupported("elliptical checks support a single constraint".into()));
    }
    if !matches!(inst.norm, NormSpec::Mahalanobis { .. }) {
        return Err(DrccpError::Unsupported("elliptical checks need the mahalanobis norm".into()));
    }
    let c = &inst.constraints[0];
    let a = c.a_of(x);
    let quad: f64 = sigma.iter().enumerate().map(|(r, row)| a[r] * dot(row, &a)).sum();
    Ok((dot(mu, &a), c.b_of(x), quad.max(0.0).sqrt(), *generator))
}

/// Elliptical chance check `b(x) − μ⊤a(x) ≥ η_q* √(a(x)⊤Σa(x))`.
pub fn chance_check_elliptical(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    let (mean, b, sd, gen) = elliptical_parts(inst, x)?;
    let eta = eta_star(inst.q, inst.epsilon, inst.theta, gen).value;
    Ok(b - mean >= eta * sd - tol * (1.0 + b.abs() + mean.abs() + eta.abs() * sd))
}

/// Dispatches to the chance check matching the instance.
pub fn chance_check(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    match (&inst.distribution, inst.q) {
        (ReferenceDistribution::Elliptical { .. }, _) => chance_check_elliptical(inst, x, tol),
        (_, Order::Infinity) => chance_check_inf(inst, x, tol),
        (_, Order::Finite(_)) => chance_check_q(inst, x, tol),
    }
}

/// Re-verifies feasibility along a route independent of [`chance_check`]:
///
/// * type-∞: the `(1−ε)`-VaR of the scaled worst robust margin is nonpositive;
/// * type-q: a greedy transport attack moves the cheapest scenarios (cost
///   `p_j f_j^q`) into the unsafe region within the budget `θ^q` and the
///   resulting violation mass must stay at most ε;
/// * elliptical: the tail integral at `η = (b − μ⊤a)/σ` is evaluated directly.
pub fn verify_independent(inst: &DrccpInstance, x: &[f64], tol: f64) -> Result<bool> {
    if let ReferenceDistribution::Elliptical { .. } = inst.distribution {
        let (mean, b, sd, gen) = elliptical_parts(inst, x)?;
        let z = gen.quantile(1.0 - inst.epsilon);
        let slack = tol * (1.0 + b.abs() + mean.abs() + sd);
        if sd <= 1e-14 * (1.0 + mean.abs()) {
            return Ok(b - mean >= -slack);
        }
        let eta = (b - mean + slack) / sd;
        return Ok(match inst.q {
            Order::Infinity => eta >= z + inst.theta,
            Order::Finite(q) => eta >= z && tail_moment(gen, z, eta, q) >= inst.theta.powf(q) * (1.0 - 1e-9),
        });
    }
    let (scenarios, probs) = require_empirical(inst)?;
    let dn = inst.dual_norm()?;
    let ev = evaluate(inst, &dn, x);
    for g in inst.chance_groups() {
        match inst.q {
            Order::Infinity => {
                let scaled: Vec<f64> = scenarios
                    .iter()
                    .map(|z| {
                        g.iter()
                            .map(|&i| {
                                let (m, s) = ev.nominal(i, z);
                                let r = inst.theta * ev.norm[i];
                                (m + r) / (1.0 + s + r)
                            })
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                let sample = LossSample { values: scaled, probabilities: probs.to_vec() };
                if var(&sample, inst.epsilon) > tol {
                    return Ok(false);
                }
            }
            Order::Finite(q) => {
                let (dist, nominal_ok) = unsafe_distances(inst, &ev, &g, tol);
                let mut violated: f64 = probs.iter().zip(&nominal_ok).filter(|(_, ok)| !**ok).map(|(p, _)| p).sum();
                let mut budget = inst.theta.powf(q);
                let mut movable: Vec<(f64, f64)> = dist
                    .iter()
                    .zip(probs)
                    .zip(&nominal_ok)
                    .filter(|(_, ok)| **ok)
                    .map(|((f, p), _)| (f.powf(q), *p))
                    .collect();
                movable.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (cost, p) in movable {
                    if budget <= 0.0 || !cost.is_finite() {
                        break;
                    }
                    if cost * p <= budget {
                        violated += p;
                        budget -= cost * p;
                    } else {
                        violated += budget / cost;
                        break;
                    }
                }
                let scale = 1.0 + inst.theta.powf(q) / inst.epsilon;
                if violated > inst.epsilon + tol * scale + CUM_TOL {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

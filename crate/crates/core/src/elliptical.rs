//! Elliptical reference distributions: the standard univariate density,
//! distribution function and quantile, the tail function `Ḡ`, the safety
//! factor `η_q*`, the coefficients of the elliptical exactness closed forms
//! and the rank-one empirical lower level.
//!
//! A generator `ĝ` with normalizer `k̄` defines the standard univariate
//! density `φ(z) = k̄ ĝ(z²/2)`. Only the Gaussian generator `ĝ(z) = e^{−z}`,
//! `k̄ = (2π)^{−1/2}` ships.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{DrccpError, Result};
use crate::model::{dot, DeterministicSet, DrccpInstance, DualKind, Order};
use crate::subsolver::{solve_auto, ConvexSubproblem, LinExpr, MixedBinaryOptions, SolveStatus};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density generator of an elliptical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// `ĝ(z) = e^{−z}`.
    Gaussian,
}

impl GeneratorKind {
    /// Normalizer `k̄` of the standard univariate density.
    pub fn kbar(self) -> f64 {
        match self {
            GeneratorKind::Gaussian => INV_SQRT_2PI,
        }
    }

    /// The generator `ĝ(z)`.
    pub fn generator(self, z: f64) -> f64 {
        match self {
            GeneratorKind::Gaussian => (-z).exp(),
        }
    }

    /// Standard univariate density `φ(t) = k̄ ĝ(t²/2)`.
    pub fn pdf(self, t: f64) -> f64 {
        self.kbar() * self.generator(0.5 * t * t)
    }

    /// Standard univariate distribution function `Φ(t)`.
    pub fn cdf(self, t: f64) -> f64 {
        match self {
            GeneratorKind::Gaussian => 0.5 * erfc(-t / SQRT_2),
        }
    }

    /// Upper tail `1 − Φ(t)`, accurate for large `t`.
    pub fn sf(self, t: f64) -> f64 {
        match self {
            GeneratorKind::Gaussian => 0.5 * erfc(t / SQRT_2),
        }
    }

    /// Quantile `Φ⁻¹(p)`.
    pub fn quantile(self, p: f64) -> f64 {
        match self {
            GeneratorKind::Gaussian => phi_inv(p),
        }
    }

    /// `|∫ φ − 1|` computed by quadrature, a sanity check on `k̄`.
    pub fn normalization_error(self) -> f64 {
        let half = integrate(|t| self.pdf(t), 0.0, 40.0, 1e-14);
        (2.0 * half - 1.0).abs()
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0,1)`.
///
/// Acklam's rational approximation followed by two Halley steps on the
/// erfc-based distribution function.
pub fn phi_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    for _ in 0..2 {
        // e = Φ(x) − p, evaluated on the smaller tail to avoid cancellation.
        let e = if x > 0.0 { (1.0 - p) - 0.5 * erfc(x / SQRT_2) } else { 0.5 * erfc(-x / SQRT_2) - p };
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]` to absolute
/// tolerance `tol`. The interval with the largest error estimate is bisected
/// until the summed estimate meets the tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut parts = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..4000 {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// Tail function `Ḡ(τ) = k̄ ∫_τ^∞ ĝ(z) dz` for `τ ≥ 0`.
pub fn g_bar(gen: GeneratorKind, tau: f64) -> f64 {
    match gen {
        GeneratorKind::Gaussian => gen.kbar() * (-tau).exp(),
    }
}

/// `Ḡ(τ)` by direct quadrature of the generator (works for any generator with
/// negligible mass beyond `τ + 60`).
pub fn g_bar_by_quadrature(gen: GeneratorKind, tau: f64) -> f64 {
    gen.kbar() * integrate(|z| gen.generator(z), tau, tau + 60.0, 1e-14)
}

/// `∫_{z}^{η} (η − t)^p φ(t) dt`.
pub fn tail_moment(gen: GeneratorKind, z: f64, eta: f64, p: f64) -> f64 {
    if eta <= z {
        return 0.0;
    }
    integrate(|t| (eta - t).max(0.0).powf(p) * gen.pdf(t), z, eta, 1e-13)
}

/// Root of the elliptical safety-factor equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaStar {
    pub q: Option<f64>,
    pub epsilon: f64,
    pub theta: f64,
    pub value: f64,
    /// `∫_{Φ⁻¹(1−ε)}^{η}(η−t)^q φ(t) dt − θ^q` at `value` (zero for q = ∞).
    pub residual: f64,
}

/// Smallest `η ≥ Φ⁻¹(1−ε)` with `∫_{Φ⁻¹(1−ε)}^{η}(η−t)^q φ(t) dt ≥ θ^q`;
/// for `q = ∞` the closed form `Φ⁻¹(1−ε) + θ`.
pub fn eta_star(q: Order, epsilon: f64, theta: f64, gen: GeneratorKind) -> EtaStar {
    let z = gen.quantile(1.0 - epsilon);
    let done = |value, residual| EtaStar { q: q.finite(), epsilon, theta, value, residual };
    let q = match q {
        Order::Infinity => return done(z + theta, 0.0),
        Order::Finite(q) => q,
    };
    if theta == 0.0 {
        return done(z, 0.0);
    }
    let target = theta.powf(q);
    let f = |eta: f64| tail_moment(gen, z, eta, q) - target;
    let mut lo = z;
    let mut width = theta.max(1.0);
    let mut hi = z + width;
    while f(hi) < 0.0 {
        lo = hi;
        width *= 2.0;
        hi = z + width;
    }
    while hi - lo > 1e-12 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut eta = hi;
    for _ in 0..2 {
        let deriv = q * tail_moment(gen, z, eta, q - 1.0);
        if deriv > 0.0 {
            let step = eta - f(eta) / deriv;
            if step >= lo - 1e-12 && step <= hi + 1e-12 {
                eta = step;
            }
        }
    }
    done(eta, f(eta))
}

/// Which elliptical exactness condition applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExactnessCondition {
    /// `Σ = μμ⊤` and `μ⊤x ≥ 0` on X.
    CondI,
    /// X binary, `μ ≥ 0` and `Σ = Diag(μ)`.
    CondII,
}

/// Coefficients of the two monotone functions of the statistic `s = μ⊤x`.
///
/// Condition I: `Ĝ(s) = g_coeff·s − b` and `F̄(s) = f_coeff·s − b`.
/// Condition II: `Ĝ(s) = s + g_coeff·√s − b` and `F̄(s) = s + f_coeff·√s − b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactnessCoefficients {
    pub condition: ExactnessCondition,
    pub g_coeff: f64,
    pub f_coeff: f64,
}

impl ExactnessCoefficients {
    /// `Ĝ_θ(s)` for right-hand side `b`.
    pub fn g_hat(&self, s: f64, b: f64) -> f64 {
        match self.condition {
            ExactnessCondition::CondI => self.g_coeff * s - b,
            ExactnessCondition::CondII => s + self.g_coeff * s.max(0.0).sqrt() - b,
        }
    }

    /// `F̄_θ(s)` for right-hand side `b`.
    pub fn f_bar(&self, s: f64, b: f64) -> f64 {
        match self.condition {
            ExactnessCondition::CondI => self.f_coeff * s - b,
            ExactnessCondition::CondII => s + self.f_coeff * s.max(0.0).sqrt() - b,
        }
    }
}

/// Radius term of the CVaR-type closed forms: `θ` for q = ∞, `θε^{−1/q}`
/// otherwise.
pub fn effective_radius(q: Order, epsilon: f64, theta: f64) -> f64 {
    match q {
        Order::Infinity => theta,
        Order::Finite(q) => theta * epsilon.powf(-1.0 / q),
    }
}

/// CVaR factor `Ḡ((Φ⁻¹(1−ε))²/2)/ε`.
pub fn cvar_factor(gen: GeneratorKind, epsilon: f64) -> f64 {
    let z = gen.quantile(1.0 - epsilon);
    g_bar(gen, 0.5 * z * z) / epsilon
}

/// Coefficients of the DRCCP and weak lower-level closed forms under the
/// given condition.
pub fn exactness_coefficients(
    condition: ExactnessCondition,
    epsilon: f64,
    theta: f64,
    q: Order,
    gen: GeneratorKind,
) -> ExactnessCoefficients {
    let eta = eta_star(q, epsilon, theta, gen).value;
    let kappa = cvar_factor(gen, epsilon) + effective_radius(q, epsilon, theta);
    let (g_coeff, f_coeff) = match condition {
        ExactnessCondition::CondI => (1.0 + eta, 1.0 + kappa),
        ExactnessCondition::CondII => (eta, kappa),
    };
    ExactnessCoefficients { condition, g_coeff, f_coeff }
}

/// Index K (1-based) with `Σ_{i<K} p_i < 1−ε ≤ Σ_{i≤K} p_i`.
pub fn rank_one_threshold(probabilities: &[f64], epsilon: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        acc += p;
        if acc >= 1.0 - epsilon - 1e-12 {
            return k + 1;
        }
    }
    probabilities.len()
}

/// Result of the rank-one empirical lower level.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneSolution {
    pub x: Vec<f64>,
    /// Weak lower-level objective `ε·F̄_θ(μ⊤x)`.
    pub value: f64,
    /// Coefficient κ with `F̄_θ(s) = κ s − b`.
    pub coefficient: f64,
    /// Threshold index K (1-based, in ascending scalar order).
    pub k: usize,
}

/// Closed-form weak lower level for empirical scenarios `ζ^j = s_j μ` with
/// `a(x) = x`, `b(x) = b`, Mahalanobis norm with `Σ = μμ⊤`, `μ ≥ 0` and
/// `X ⊆ ℝ₊ⁿ`.
///
/// With scalars sorted ascending the tail coefficient is
/// `κ = (1/ε)((Σ_{i≤K} p_i − (1−ε)) s_K + Σ_{j>K} p_j s_j) + θ`, because the
/// dual norm of `x` is `|μ⊤x|`. The one-dimensional program
/// `min κ μ⊤x − b` over `X ∩ {c⊤x ≤ t}` is then solved as an LP.
pub fn rank_one_empirical_lower(inst: &DrccpInstance, t: f64) -> Result<RankOneSolution> {
    let unsupported = |m: &str| DrccpError::Unsupported(format!("rank-one lower level: {m}"));
    if inst.constraints.len() != 1 {
        return Err(unsupported("needs a single constraint"));
    }
    let con = &inst.constraints[0];
    let n = inst.n();
    let identity = con.a_mat.len() == n
        && con.a_mat.iter().enumerate().all(|(r, row)| row.iter().enumerate().all(|(c, v)| *v == if r == c { 1.0 } else { 0.0 }));
    if !identity || con.a_vec.iter().any(|v| *v != 0.0) || con.b_vec.iter().any(|v| *v != 0.0) {
        return Err(unsupported("needs a(x) = x and a constant right-hand side"));
    }
    let (scenarios, probs) = inst.empirical().ok_or_else(|| unsupported("needs an empirical distribution"))?;
    let dn = inst.dual_norm()?;
    let mu = match &dn.kind {
        DualKind::Factor(f) if f.len() == 1 => f[0].clone(),
        _ => return Err(unsupported("needs a rank-one mahalanobis norm")),
    };
    let mu = if mu.iter().sum::<f64>() < 0.0 { mu.iter().map(|v| -v).collect() } else { mu };
    if mu.iter().any(|v| *v < -1e-12) {
        return Err(unsupported("needs a nonnegative direction"));
    }
    let (lower, _) = inst.set.bounds();
    if lower.iter().any(|l| *l < 0.0) {
        return Err(unsupported("needs X in the nonnegative orthant"));
    }
    let mu_sq = dot(&mu, &mu);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(scenarios.len());
    for (z, p) in scenarios.iter().zip(probs) {
        let s = dot(z, &mu) / mu_sq;
        let resid = z.iter().zip(&mu).map(|(a, m)| (a - s * m).abs()).fold(0.0, f64::max);
        if resid > 1e-10 * (1.0 + z.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) {
            return Err(unsupported("scenarios are not collinear with the direction"));
        }
        pairs.push((s, *p));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted_p: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let eps = inst.epsilon;
    let k = rank_one_threshold(&sorted_p, eps);
    let head: f64 = sorted_p[..k].iter().sum();
    let tail: f64 = pairs[k..].iter().map(|(s, p)| s * p).sum();
    let kappa = ((head - (1.0 - eps)) * pairs[k - 1].0 + tail) / eps + inst.theta;

    // One-dimensional LP in s = μ⊤x over X ∩ {c⊤x ≤ t}.
    let mut p = ConvexSubproblem::new();
    let (lo, hi) = inst.set.bounds();
    let xs: Vec<usize> = (0..n).map(|j| p.add_var(lo[j], hi[j], inst.set.is_binary())).collect();
    for (row, d) in inst.set.rows() {
        p.add_le(xs.iter().zip(&row).fold(LinExpr::constant(-d), |e, (&k, c)| e.with(k, *c)));
    }
    p.add_le(xs.iter().zip(&inst.objective).fold(LinExpr::constant(-t), |e, (&k, c)| e.with(k, *c)));
    let sign = if kappa >= 0.0 { 1.0 } else { -1.0 };
    p.objective = xs.iter().zip(&mu).fold(LinExpr::new(), |e, (&k, m)| e.with(k, sign * m));
    let sol = solve_auto(&p, &MixedBinaryOptions::default());
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(DrccpError::Subsolver { t, message: "objective cap leaves X empty".into() }),
        other => return Err(DrccpError::Subsolver { t, message: format!("{other:?}") }),
    }
    let s = dot(&mu, &sol.point);
    let value = eps * (kappa * s - con.b0);
    Ok(RankOneSolution { x: sol.point, value, coefficient: kappa, k })
}

/// Whether the instance matches an elliptical exactness condition
/// syntactically (single constraint `x⊤ζ ≤ b`, Mahalanobis norm).
pub fn exactness_condition_of(inst: &DrccpInstance) -> Option<ExactnessCondition> {
    let crate::model::ReferenceDistribution::Elliptical { mu, sigma, .. } = &inst.distribution else {
        return None;
    };
    if inst.constraints.len() != 1 || !matches!(inst.norm, crate::model::NormSpec::Mahalanobis { .. }) {
        return None;
    }
    let c = &inst.constraints[0];
    let n = inst.n();
    let identity = c.a_mat.len() == n
        && c.a_mat.iter().enumerate().all(|(r, row)| row.iter().enumerate().all(|(k, v)| *v == if r == k { 1.0 } else { 0.0 }));
    if !identity || c.a_vec.iter().any(|v| *v != 0.0) || c.b_vec.iter().any(|v| *v != 0.0) {
        return None;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()));
    let rank_one = (0..n).all(|r| (0..n).all(|k| close(sigma[r][k], mu[r] * mu[k])));
    let (lower, _) = inst.set.bounds();
    if rank_one && mu.iter().all(|v| *v >= 0.0) && lower.iter().all(|l| *l >= 0.0) {
        return Some(ExactnessCondition::CondI);
    }
    let diag = (0..n).all(|r| (0..n).all(|k| close(sigma[r][k], if r == k { mu[r] } else { 0.0 })));
    if diag && mu.iter().all(|v| *v >= 0.0) && matches!(inst.set, DeterministicSet::Binary { .. } | DeterministicSet::BinaryRestricted { .. }) {
        return Some(ExactnessCondition::CondII);
    }
    None
}

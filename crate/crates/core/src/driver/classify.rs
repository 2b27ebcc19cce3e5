//! Syntactic instance diagnostics: which exactness or uniqueness class an
//! instance matches. The record is informational only.

use serde::{Deserialize, Serialize};

use crate::elliptical::{exactness_condition_of, ExactnessCondition};
use crate::model::{dot, DrccpInstance, NormSpec, ReferenceDistribution};

/// Exactness class matched by the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactnessClass {
    /// Elliptical reference with `Σ = μμ⊤`, `μ ≥ 0` and `X ⊆ ℝ₊ⁿ`.
    CondI,
    /// Elliptical reference with `Σ = Diag(μ)` and binary X.
    CondII,
    /// `x⊤ζ ≤ b` with `b > 0`, binary X and nonnegative scenarios.
    Packing,
    /// `x⊤ζ ≥ b` with `b > 0`, binary X and nonnegative scenarios.
    Covering,
    /// Empirical scenarios on one ray `s_j μ` with the norm of `Σ = μμ⊤`.
    RankOne,
}

/// Uniqueness class of the lower-level optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    /// Continuous reference with a convex X and a single constraint.
    SingleConvexX,
    /// Discrete support or discrete X: ties between optima are possible.
    None,
}

/// Diagnostic record returned by [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub exactness: Option<ExactnessClass>,
    pub uniqueness: Uniqueness,
    /// Human-readable remarks on the matched structure.
    pub notes: Vec<String>,
}

fn is_identity(rows: &[Vec<f64>], n: usize) -> bool {
    rows.len() == n && rows.iter().enumerate().all(|(r, row)| row.iter().enumerate().all(|(k, v)| *v == if r == k { 1.0 } else { 0.0 }))
}

fn empirical_class(inst: &DrccpInstance) -> Option<ExactnessClass> {
    let (scenarios, _) = inst.empirical()?;
    if inst.constraints.len() != 1 {
        return None;
    }
    let c = &inst.constraints[0];
    let n = inst.n();
    if c.a_vec.iter().any(|v| *v != 0.0) || c.b_vec.iter().any(|v| *v != 0.0) {
        return None;
    }
    let nonneg = scenarios.iter().flatten().all(|v| *v >= 0.0);
    if let NormSpec::Mahalanobis { sigma: Some(sigma) } = &inst.norm {
        if is_identity(&c.a_mat, n) {
            let first = scenarios.iter().find(|z| z.iter().any(|v| *v != 0.0))?;
            let sq = dot(first, first);
            let ray = scenarios.iter().all(|z| {
                let s = dot(z, first) / sq;
                z.iter().zip(first).all(|(a, m)| (a - s * m).abs() <= 1e-10 * (1.0 + a.abs()))
            });
            let rank_one = (0..n).all(|r| (0..n).all(|k| {
                let scale = sigma[0][0].max(1e-300) / (first[0] * first[0]).max(1e-300);
                (sigma[r][k] - scale * first[r] * first[k]).abs() <= 1e-10 * (1.0 + sigma[r][k].abs())
            }));
            if ray && rank_one {
                return Some(ExactnessClass::RankOne);
            }
        }
    }
    if !inst.set.is_binary() || !nonneg {
        return None;
    }
    let neg_identity: Vec<Vec<f64>> = c.a_mat.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    if is_identity(&c.a_mat, n) && c.b0 > 0.0 {
        Some(ExactnessClass::Packing)
    } else if is_identity(&neg_identity, n) && c.b0 < 0.0 {
        Some(ExactnessClass::Covering)
    } else {
        None
    }
}

/// Reports the exactness and uniqueness classes the instance matches.
pub fn classify(inst: &DrccpInstance) -> Diagnostics {
    let mut notes = Vec::new();
    let exactness = match exactness_condition_of(inst) {
        Some(ExactnessCondition::CondI) => Some(ExactnessClass::CondI),
        Some(ExactnessCondition::CondII) => Some(ExactnessClass::CondII),
        None => empirical_class(inst),
    };
    let elliptical = matches!(inst.distribution, ReferenceDistribution::Elliptical { .. });
    let uniqueness = if elliptical && !inst.set.is_binary() && inst.constraints.len() == 1 {
        Uniqueness::SingleConvexX
    } else {
        if !elliptical {
            notes.push("discrete support: ties between lower-level optima are possible".into());
        }
        if inst.set.is_binary() {
            notes.push("discrete X".into());
        }
        Uniqueness::None
    };
    if let Some(class) = exactness {
        notes.push(format!("matches the {class:?} exactness structure"));
    }
    Diagnostics { exactness, uniqueness, notes }
}

//! Benchmark layer: synthetic instance generators for the single-constraint
//! test families and the resource-allocation application, out-of-sample
//! evaluation, Wasserstein radius tuning and improvement metrics.
//!
//! Every generator draws from a [`ChaCha8Rng`] seeded by the caller, and all
//! integer draws go through `Rng::gen_range`, whose rejection sampling makes
//! the instance files identical across platforms for a given seed.

mod evaluate;

pub use evaluate::{
    compare, improvement, integer_sampler, out_of_sample, satisfaction, tune_radius, EvaluationReport, MethodOutcome, RadiusChoice,
    RadiusRow, ResourceFamily, SatisfactionEstimate, ScenarioFamily, TuneOptions, TuneReport,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DrccpError, Result};
use crate::model::{AffineConstraint, DeterministicSet, DrccpInstance, NormSpec, Order, PNorm, ReferenceDistribution};

/// Test family a [`GeneratorPreset`] draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    /// Type-∞ ball, X = [0,1]ⁿ, dual 2-norm, ζ ∈ {1..80}, b ∈ {1..20},
    /// c ∈ {−30..−1}, θ = 0.05.
    Table1,
    /// Type-∞ ball, X = {0,1}ⁿ, dual 1-norm, ζ ∈ {−10..20}, b ∈ {1..200},
    /// c ∈ {−10..−1}, θ = 0.05.
    Table2,
    /// Type-2 ball, X = [0,1]ⁿ, dual 2-norm, ζ ∈ {1..80}, b = 10,
    /// c ∈ {−20..−1}, θ = 0.5.
    Table3,
    /// Type-2 ball, X = {0,1}ⁿ, dual 1-norm, ζ ∈ {−20..50}, b = 400,
    /// c ∈ {−20..−10}, θ = 0.2.
    Table4,
    /// Resource allocation over `n` users and `horizon` slots; see
    /// [`resource_allocation_instance`].
    ResourceAlloc,
}

impl std::str::FromStr for PresetKind {
    type Err = DrccpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(PresetKind::Table1),
            "table2" => Ok(PresetKind::Table2),
            "table3" => Ok(PresetKind::Table3),
            "table4" => Ok(PresetKind::Table4),
            "resource" | "resource_alloc" | "resourcealloc" => Ok(PresetKind::ResourceAlloc),
            _ => Err(DrccpError::Invalid(vec![format!("unknown preset \"{s}\"")])),
        }
    }
}

/// Parameters of one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPreset {
    pub preset: PresetKind,
    /// Number of scenarios N.
    #[serde(rename = "N")]
    pub n_scenarios: usize,
    /// Decision dimension, or the number of users for [`PresetKind::ResourceAlloc`].
    pub n: usize,
    pub epsilon: f64,
    pub theta: f64,
    pub q: Order,
    pub seed: u64,
    /// Demand slope D of the resource-allocation family.
    pub demand: f64,
    /// Number of time slots T of the resource-allocation family.
    pub horizon: usize,
}

impl GeneratorPreset {
    /// Preset with the radius and ball order of the family and, for the
    /// resource-allocation family, D = 1 and T = 12.
    pub fn new(preset: PresetKind, n_scenarios: usize, n: usize, epsilon: f64, seed: u64) -> Self {
        let (theta, q) = match preset {
            PresetKind::Table1 | PresetKind::Table2 => (0.05, Order::Infinity),
            PresetKind::Table3 => (0.5, Order::Finite(2.0)),
            PresetKind::Table4 => (0.2, Order::Finite(2.0)),
            PresetKind::ResourceAlloc => (0.5, Order::Infinity),
        };
        GeneratorPreset { preset, n_scenarios, n, epsilon, theta, q, seed, demand: 1.0, horizon: 12 }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect()
}

fn int_vector(rng: &mut ChaCha8Rng, len: usize, lo: i64, hi: i64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..=hi) as f64).collect()
}

/// Generates the instance described by `preset`; equal presets give equal
/// instances.
pub fn generate(preset: &GeneratorPreset) -> Result<DrccpInstance> {
    if preset.n == 0 || preset.n_scenarios == 0 {
        return Err(DrccpError::Invalid(vec!["generator needs n ≥ 1 and N ≥ 1".into()]));
    }
    if preset.preset == PresetKind::ResourceAlloc {
        let mut inst = resource_allocation_instance(
            preset.n,
            preset.horizon,
            preset.demand,
            preset.n_scenarios,
            preset.epsilon,
            preset.theta,
            preset.seed,
        )?;
        inst.q = preset.q;
        return Ok(inst);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
    let n = preset.n;
    let (zeta, b_range, c_range, binary, p) = match preset.preset {
        PresetKind::Table1 => ((1, 80), Some((1, 20)), (-30, -1), false, PNorm::Two),
        PresetKind::Table2 => ((-10, 20), Some((1, 200)), (-10, -1), true, PNorm::Inf),
        PresetKind::Table3 => ((1, 80), None, (-20, -1), false, PNorm::Two),
        PresetKind::Table4 => ((-20, 50), None, (-20, -10), true, PNorm::Inf),
        PresetKind::ResourceAlloc => unreachable!("handled above"),
    };
    let objective = int_vector(&mut rng, n, c_range.0, c_range.1);
    let set = if binary {
        DeterministicSet::Binary { n }
    } else {
        DeterministicSet::Box { lower: vec![0.0; n], upper: vec![1.0; n] }
    };
    let (constraint, norm, scenarios) = match b_range {
        // Random right-hand side: ζ carries b as a last coordinate that the
        // transport plan cannot move, and `a(x) = (x, −1)`.
        Some((lo, hi)) => {
            let scenarios: Vec<Vec<f64>> = (0..preset.n_scenarios)
                .map(|_| {
                    let mut z = int_vector(&mut rng, n, zeta.0, zeta.1);
                    z.push(rng.gen_range(lo..=hi) as f64);
                    z
                })
                .collect();
            let mut a_mat = identity(n);
            a_mat.push(vec![0.0; n]);
            let mut a_vec = vec![0.0; n];
            a_vec.push(-1.0);
            let c = AffineConstraint { a_mat, a_vec, b_vec: vec![0.0; n], b0: 0.0 };
            (c, NormSpec::P { p, fixed: vec![n] }, scenarios)
        }
        None => {
            let b = if preset.preset == PresetKind::Table3 { 10.0 } else { 400.0 };
            let scenarios = (0..preset.n_scenarios).map(|_| int_vector(&mut rng, n, zeta.0, zeta.1)).collect();
            let c = AffineConstraint { a_mat: identity(n), a_vec: vec![0.0; n], b_vec: vec![0.0; n], b0: b };
            (c, NormSpec::p(p), scenarios)
        }
    };
    Ok(DrccpInstance {
        objective,
        constraints: vec![constraint],
        set,
        epsilon: preset.epsilon,
        theta: preset.theta,
        q: preset.q,
        norm,
        distribution: ReferenceDistribution::uniform(scenarios),
        groups: None,
    })
}

/// Index of `x_{i,t}` (and of `ξ_{i,t}`) in the flattened vectors.
pub fn resource_index(horizon: usize, user: usize, slot: usize) -> usize {
    user * horizon + slot
}

/// Draws `count` rate vectors `ξ ∈ {lo..hi}^{n·T}`.
pub fn resource_scenarios(rng: &mut ChaCha8Rng, dim: usize, count: usize, lo: i64, hi: i64) -> Vec<Vec<f64>> {
    (0..count).map(|_| int_vector(rng, dim, lo, hi)).collect()
}

/// Resource-allocation instance with rates drawn from {20..40}.
///
/// Variables `x_{i,t} ∈ [0,1]` with `Σ_i x_{i,t} ≤ 1` per slot minimize the
/// total allocation `Σ x_{i,t}`. User i must satisfy
/// `Σ_{t′≤t} ξ_{i,t′} x_{i,t′} ≥ t·D` for every slot t jointly with
/// probability `1 − ε`; the `T` constraints of one user form one chance group.
/// The dual norm is the 1-norm over the rates.
pub fn resource_allocation_instance(
    n: usize,
    horizon: usize,
    demand: f64,
    n_scenarios: usize,
    epsilon: f64,
    theta: f64,
    seed: u64,
) -> Result<DrccpInstance> {
    if n == 0 || horizon == 0 || n_scenarios == 0 {
        return Err(DrccpError::Invalid(vec!["resource allocation needs n, T and N ≥ 1".into()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = n * horizon;
    let scenarios = resource_scenarios(&mut rng, dim, n_scenarios, 20, 40);
    Ok(resource_allocation_with(n, horizon, demand, scenarios, epsilon, theta))
}

/// Resource-allocation instance on the given rate scenarios.
pub fn resource_allocation_with(
    n: usize,
    horizon: usize,
    demand: f64,
    scenarios: Vec<Vec<f64>>,
    epsilon: f64,
    theta: f64,
) -> DrccpInstance {
    let dim = n * horizon;
    let mut constraints = Vec::with_capacity(dim);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let mut group = Vec::with_capacity(horizon);
        for t in 0..horizon {
            // −Σ_{t′≤t} ξ_{i,t′} x_{i,t′} ≤ −(t+1)·D
            let mut a_mat = vec![vec![0.0; dim]; dim];
            for s in 0..=t {
                let k = resource_index(horizon, i, s);
                a_mat[k][k] = -1.0;
            }
            group.push(constraints.len());
            constraints.push(AffineConstraint {
                a_mat,
                a_vec: vec![0.0; dim],
                b_vec: vec![0.0; dim],
                b0: -((t + 1) as f64) * demand,
            });
        }
        groups.push(group);
    }
    let coupling: Vec<Vec<f64>> = (0..horizon)
        .map(|t| (0..dim).map(|k| if k % horizon == t { 1.0 } else { 0.0 }).collect())
        .collect();
    DrccpInstance {
        objective: vec![1.0; dim],
        constraints,
        set: DeterministicSet::Polyhedron {
            c_mat: coupling,
            d: vec![1.0; horizon],
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        },
        epsilon,
        theta,
        q: Order::Infinity,
        norm: NormSpec::p(PNorm::Inf),
        distribution: ReferenceDistribution::uniform(scenarios),
        groups: Some(groups),
    }
}

#[cfg(test)]
mod tests;

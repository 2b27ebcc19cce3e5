//! Built-in instances: the worked examples and two Gaussian instances of the
//! elliptical exactness conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AffineConstraint, DeterministicSet, DrccpInstance, NormSpec, Order, PNorm, ReferenceDistribution};
use crate::elliptical::GeneratorKind;

/// Names of the built-in fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixtureName {
    E1,
    E2,
    E3,
    E4,
    E5,
    GaussCond1,
    GaussCond2,
}

impl FixtureName {
    /// Every fixture, in declaration order.
    pub const ALL: [FixtureName; 7] = [
        FixtureName::E1,
        FixtureName::E2,
        FixtureName::E3,
        FixtureName::E4,
        FixtureName::E5,
        FixtureName::GaussCond1,
        FixtureName::GaussCond2,
    ];
}

impl fmt::Display for FixtureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for FixtureName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FixtureName::ALL
            .into_iter()
            .find(|n| n.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown fixture `{s}`"))
    }
}

/// Scalar constraint `ζ_1 x − ζ_2 ≤ 0` written as `a(x) = (x, −1)`, `b(x) = 0`.
fn scalar_pair_constraint() -> AffineConstraint {
    AffineConstraint { a_mat: vec![vec![1.0], vec![0.0]], a_vec: vec![0.0, -1.0], b_vec: vec![0.0], b0: 0.0 }
}

/// Constraint `x⊤ζ ≤ b` in dimension n.
fn linear_constraint(n: usize, b: f64) -> AffineConstraint {
    let a_mat = (0..n).map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    AffineConstraint { a_mat, a_vec: vec![0.0; n], b_vec: vec![0.0; n], b0: b }
}

fn binary_pair(first: [f64; 2], rest: [f64; 2]) -> DrccpInstance {
    DrccpInstance {
        objective: vec![-1.0],
        constraints: vec![scalar_pair_constraint()],
        set: DeterministicSet::Binary { n: 1 },
        epsilon: 0.5,
        theta: 1.0,
        q: Order::Infinity,
        norm: NormSpec::p(PNorm::Inf),
        distribution: ReferenceDistribution::uniform(vec![first.to_vec(), rest.to_vec(), rest.to_vec(), rest.to_vec()]),
        groups: None,
    }
}

/// Returns the named fixture.
///
/// * `E1`: X = {0,1}, four scenarios of `ζ_1 x − ζ_2`, θ = 1, ε = 1/2.
/// * `E2`: same structure; the first scenario is `(−10, −21/2)` so that the
///   robust margins are exactly `−9x + 23/2` and `4x − 3/2`.
/// * `E3`: X = [0,10]², `1 − x⊤ζ` with three scenarios, θ = 1/2, dual 1-norm.
/// * `E4`: X = ℝ₊, margin `ζ + θ − x` with ζ ∈ {5/2, 3/2, 1/2}, θ = ε = 1/2.
/// * `E5`: type-1 ball, X = ℝ₊³, `x⊤ζ ≤ 3`, four scenarios, θ = 1, ε = 1/2.
/// * `GaussCond1`: Gaussian with Σ = μμ⊤ on X = [0,1]³.
/// * `GaussCond2`: Gaussian with Σ = Diag(μ) on X = {0,1}⁶.
pub fn fixture(name: FixtureName) -> DrccpInstance {
    match name {
        FixtureName::E1 => binary_pair([-48.0, -51.0], [100.0, 100.0]),
        FixtureName::E2 => binary_pair([-10.0, -10.5], [3.0, 2.5]),
        FixtureName::E3 => DrccpInstance {
            objective: vec![1.0, 1.0],
            constraints: vec![AffineConstraint {
                a_mat: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
                a_vec: vec![0.0, 0.0],
                b_vec: vec![0.0, 0.0],
                b0: -1.0,
            }],
            set: DeterministicSet::Box { lower: vec![0.0, 0.0], upper: vec![10.0, 10.0] },
            epsilon: 0.5,
            theta: 0.5,
            q: Order::Infinity,
            norm: NormSpec::p(PNorm::Inf),
            distribution: ReferenceDistribution::uniform(vec![vec![2.5, 3.5], vec![2.5, 1.5], vec![1.5, 2.5]]),
            groups: None,
        },
        FixtureName::E4 => DrccpInstance {
            objective: vec![1.0],
            constraints: vec![AffineConstraint { a_mat: vec![vec![0.0]], a_vec: vec![1.0], b_vec: vec![1.0], b0: 0.0 }],
            set: DeterministicSet::Box { lower: vec![0.0], upper: vec![f64::INFINITY] },
            epsilon: 0.5,
            theta: 0.5,
            q: Order::Infinity,
            norm: NormSpec::p(PNorm::Two),
            distribution: ReferenceDistribution::uniform(vec![vec![2.5], vec![1.5], vec![0.5]]),
            groups: None,
        },
        FixtureName::E5 => DrccpInstance {
            objective: vec![-4.0, -2.0, -3.0],
            constraints: vec![linear_constraint(3, 3.0)],
            set: DeterministicSet::Box { lower: vec![0.0; 3], upper: vec![f64::INFINITY; 3] },
            epsilon: 0.5,
            theta: 1.0,
            q: Order::Finite(1.0),
            norm: NormSpec::p(PNorm::Two),
            distribution: ReferenceDistribution::uniform(vec![
                vec![4.0, 6.0, 3.0],
                vec![5.0, 0.0, 3.0],
                vec![2.0, 1.0, 4.0],
                vec![0.0, 2.0, 5.0],
            ]),
            groups: None,
        },
        FixtureName::GaussCond1 => {
            let mu = vec![1.0, 2.0, 1.5];
            let sigma = mu.iter().map(|a| mu.iter().map(|b| a * b).collect()).collect();
            DrccpInstance {
                objective: vec![-3.0, -5.0, -4.0],
                constraints: vec![linear_constraint(3, 4.0)],
                set: DeterministicSet::Box { lower: vec![0.0; 3], upper: vec![1.0; 3] },
                epsilon: 0.1,
                theta: 0.05,
                q: Order::Infinity,
                norm: NormSpec::Mahalanobis { sigma: None },
                distribution: ReferenceDistribution::Elliptical { mu, sigma, generator: GeneratorKind::Gaussian },
                groups: None,
            }
        }
        FixtureName::GaussCond2 => {
            let mu = vec![1.0, 2.0, 0.5, 1.5, 3.0, 2.5];
            let sigma = (0..6).map(|r| (0..6).map(|c| if r == c { mu[r] } else { 0.0 }).collect()).collect();
            DrccpInstance {
                objective: vec![-2.0, -5.0, -1.0, -3.0, -6.0, -4.0],
                constraints: vec![linear_constraint(6, 8.0)],
                set: DeterministicSet::Binary { n: 6 },
                epsilon: 0.1,
                theta: 0.05,
                q: Order::Infinity,
                norm: NormSpec::Mahalanobis { sigma: None },
                distribution: ReferenceDistribution::Elliptical { mu, sigma, generator: GeneratorKind::Gaussian },
                groups: None,
            }
        }
    }
}

//! Problem representation for Wasserstein distributionally robust chance
//! constrained programs (DRCCPs).
//!
//! An instance is
//!
//! ```text
//! min  c⊤x
//! s.t. inf_{P ∈ 𝒫_q(θ)} P{ a_i(x)⊤ζ ≤ b_i(x), ∀ i } ≥ 1 − ε,   x ∈ X,
//! ```
//!
//! with affine maps `a_i(x) = A_i x + a_i` and `b_i(x) = B_i⊤x + b_i`, and a
//! type-q Wasserstein ball of radius θ around a reference distribution.
//!
//! Two optional extensions of the basic model are supported:
//!
//! * `groups` partitions the constraints into several joint chance
//!   constraints that must all hold (one per group).
//! * `norm.fixed` lists uncertainty coordinates that the transport plan may
//!   not move (infinite transport cost). This is how a deterministic
//!   right-hand side is encoded as a scenario coordinate `ζ_k` with
//!   `a_i(x)_k = −1`.

mod fixtures;
mod serde_ext;

pub use fixtures::{fixture, FixtureName};
pub use serde_ext::{ext_f64, ext_vec};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::elliptical::GeneratorKind;
use crate::error::{DrccpError, Result};

/// One affine constraint `a_i(x)⊤ζ ≤ b_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraint {
    /// `A_i`, an m×n matrix stored as rows.
    #[serde(rename = "A")]
    pub a_mat: Vec<Vec<f64>>,
    /// `a_i`, an m-vector.
    #[serde(rename = "a")]
    pub a_vec: Vec<f64>,
    /// `B_i`, an n-vector.
    #[serde(rename = "B")]
    pub b_vec: Vec<f64>,
    /// The scalar `b_i`.
    #[serde(rename = "b")]
    pub b0: f64,
}

impl AffineConstraint {
    /// Evaluates `a_i(x) = A_i x + a_i`.
    pub fn a_of(&self, x: &[f64]) -> Vec<f64> {
        self.a_mat
            .iter()
            .zip(&self.a_vec)
            .map(|(row, c)| dot(row, x) + c)
            .collect()
    }

    /// Evaluates `b_i(x) = B_i⊤x + b_i`.
    pub fn b_of(&self, x: &[f64]) -> f64 {
        dot(&self.b_vec, x) + self.b0
    }

    /// Nominal margin `a_i(x)⊤ζ − b_i(x)`.
    pub fn nominal_margin(&self, x: &[f64], zeta: &[f64]) -> f64 {
        dot(&self.a_of(x), zeta) - self.b_of(x)
    }

    /// Coefficients `(g, g0)` with `a_i(x)⊤ζ − b_i(x) = g⊤x + g0` for a fixed ζ.
    pub fn margin_affine(&self, zeta: &[f64]) -> (Vec<f64>, f64) {
        let n = self.b_vec.len();
        let mut g: Vec<f64> = self.b_vec.iter().map(|b| -b).collect();
        for (row, z) in self.a_mat.iter().zip(zeta) {
            for k in 0..n {
                g[k] += row[k] * z;
            }
        }
        (g, dot(&self.a_vec, zeta) - self.b0)
    }
}

/// The deterministic set X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeterministicSet {
    /// `lower ≤ x ≤ upper`, entries may be infinite.
    Box {
        #[serde(with = "ext_vec")]
        lower: Vec<f64>,
        #[serde(with = "ext_vec")]
        upper: Vec<f64>,
    },
    /// `C x ≤ d` together with `lower ≤ x ≤ upper`.
    Polyhedron {
        #[serde(rename = "C")]
        c_mat: Vec<Vec<f64>>,
        d: Vec<f64>,
        #[serde(with = "ext_vec")]
        lower: Vec<f64>,
        #[serde(with = "ext_vec")]
        upper: Vec<f64>,
    },
    /// `{0,1}^n`.
    Binary { n: usize },
    /// `{x ∈ {0,1}^n : C x ≤ d}`.
    BinaryRestricted {
        n: usize,
        #[serde(rename = "C")]
        c_mat: Vec<Vec<f64>>,
        d: Vec<f64>,
    },
}

impl DeterministicSet {
    /// Whether every coordinate is restricted to {0,1}.
    pub fn is_binary(&self) -> bool {
        matches!(self, Self::Binary { .. } | Self::BinaryRestricted { .. })
    }

    /// Dimension of the decision vector the set lives in.
    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } | Self::Polyhedron { lower, .. } => lower.len(),
            Self::Binary { n } | Self::BinaryRestricted { n, .. } => *n,
        }
    }

    /// Coordinate bounds; binary sets report `[0,1]`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Box { lower, upper } | Self::Polyhedron { lower, upper, .. } => (lower.clone(), upper.clone()),
            Self::Binary { n } | Self::BinaryRestricted { n, .. } => (vec![0.0; *n], vec![1.0; *n]),
        }
    }

    /// General linear rows `C x ≤ d` of the set.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        match self {
            Self::Polyhedron { c_mat, d, .. } | Self::BinaryRestricted { c_mat, d, .. } => {
                c_mat.iter().cloned().zip(d.iter().copied()).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Whether the box part of the set is bounded in every coordinate.
    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo.iter().chain(&hi).all(|v| v.is_finite())
    }

    /// Membership test with absolute tolerance `tol` (integrality is checked exactly
    /// up to `tol` as well).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let (lo, hi) = self.bounds();
        let in_box = x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol);
        let integral = !self.is_binary() || x.iter().all(|v| (v - v.round()).abs() <= tol);
        let rows_ok = self.rows().iter().all(|(c, d)| dot(c, x) <= d + tol * (1.0 + d.abs()));
        in_box && integral && rows_ok
    }
}

/// Wasserstein order q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// `q ∈ [1, ∞)`.
    Finite(f64),
    /// Type-∞ Wasserstein ball.
    Infinity,
}

impl Order {
    /// The finite order, or `None` for type-∞.
    pub fn finite(self) -> Option<f64> {
        match self {
            Order::Finite(q) => Some(q),
            Order::Infinity => None,
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(q) => s.serialize_f64(*q),
            Order::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_ext::deserialize_ext(d)?;
        if v == f64::INFINITY {
            Ok(Order::Infinity)
        } else {
            Ok(Order::Finite(v))
        }
    }
}

/// The base norm p of a p-norm transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    /// The dual exponent p* with 1/p + 1/p* = 1.
    pub fn dual(self) -> PNorm {
        match self {
            PNorm::One => PNorm::Inf,
            PNorm::Two => PNorm::Two,
            PNorm::Inf => PNorm::One,
        }
    }

    /// Evaluates the norm of `v` restricted to the coordinates where `keep` is true.
    pub fn eval_masked(self, v: &[f64], keep: &[bool]) -> f64 {
        let it = v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| x.abs());
        match self {
            PNorm::One => it.sum(),
            PNorm::Two => it.map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::Inf => it.fold(0.0, f64::max),
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PNorm::One => s.serialize_u32(1),
            PNorm::Two => s.serialize_u32(2),
            PNorm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_ext::deserialize_ext(d)?;
        if v == 1.0 {
            Ok(PNorm::One)
        } else if v == 2.0 {
            Ok(PNorm::Two)
        } else if v == f64::INFINITY {
            Ok(PNorm::Inf)
        } else {
            Err(<D::Error as serde::de::Error>::custom(format!("p must be 1, 2 or \"inf\", got {v}")))
        }
    }
}

/// Transport-cost norm on the uncertainty space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NormSpec {
    /// Base p-norm; the robust margins use its dual. Coordinates listed in
    /// `fixed` cannot be transported.
    P {
        p: PNorm,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        fixed: Vec<usize>,
    },
    /// Generalized Mahalanobis norm `sqrt(y⊤Σ†y)`, whose dual is `sqrt(a⊤Σa)`.
    /// `sigma` defaults to the elliptical reference scale matrix.
    Mahalanobis {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
    },
}

impl NormSpec {
    /// Base p-norm without fixed coordinates.
    pub fn p(p: PNorm) -> Self {
        NormSpec::P { p, fixed: Vec::new() }
    }
}

/// How the dual norm is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum DualKind {
    /// Dual p-norm with the given exponent.
    P(PNorm),
    /// `‖F v‖₂` with `Σ = F⊤F`; rows of F are stored.
    Factor(Vec<Vec<f64>>),
}

/// Dual norm `‖·‖_*` of an instance, restricted to its free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualNorm {
    pub kind: DualKind,
    /// `free[k]` is false for coordinates with infinite transport cost.
    pub free: Vec<bool>,
}

impl DualNorm {
    /// Evaluates `‖v‖_*`.
    pub fn eval(&self, v: &[f64]) -> f64 {
        match &self.kind {
            DualKind::P(p) => p.eval_masked(v, &self.free),
            DualKind::Factor(f) => f.iter().map(|row| dot(row, v).powi(2)).sum::<f64>().sqrt(),
        }
    }

    /// An upper bound `‖v‖_* ≤ Σ_k w_k |v_k|` with coordinate weights `w`.
    pub fn l1_weights(&self) -> Vec<f64> {
        match &self.kind {
            DualKind::P(_) => self.free.iter().map(|f| if *f { 1.0 } else { 0.0 }).collect(),
            DualKind::Factor(f) => {
                let m = self.free.len();
                (0..m).map(|k| f.iter().map(|row| row[k].abs()).sum()).collect()
            }
        }
    }
}

/// Reference distribution of the Wasserstein ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ReferenceDistribution {
    /// Discrete distribution on `scenarios` (rows) with the given probabilities.
    Empirical { scenarios: Vec<Vec<f64>>, probabilities: Vec<f64> },
    /// Elliptical distribution with location `mu`, scale `sigma` and generator.
    Elliptical { mu: Vec<f64>, sigma: Vec<Vec<f64>>, generator: GeneratorKind },
}

impl ReferenceDistribution {
    /// Empirical distribution with equal weights.
    pub fn uniform(scenarios: Vec<Vec<f64>>) -> Self {
        let n = scenarios.len();
        ReferenceDistribution::Empirical { scenarios, probabilities: vec![1.0 / n as f64; n] }
    }

    /// Dimension m of the uncertainty vector.
    pub fn dim(&self) -> usize {
        match self {
            Self::Empirical { scenarios, .. } => scenarios.first().map_or(0, Vec::len),
            Self::Elliptical { mu, .. } => mu.len(),
        }
    }
}

/// A complete DRCCP instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrccpInstance {
    /// Objective vector c.
    pub objective: Vec<f64>,
    /// Affine constraints `a_i(x)⊤ζ ≤ b_i(x)`.
    pub constraints: Vec<AffineConstraint>,
    /// Deterministic set X.
    pub set: DeterministicSet,
    /// Risk level ε ∈ (0,1).
    pub epsilon: f64,
    /// Wasserstein radius θ ≥ 0.
    pub theta: f64,
    /// Wasserstein order q.
    pub q: Order,
    /// Transport-cost norm.
    pub norm: NormSpec,
    /// Reference distribution.
    pub distribution: ReferenceDistribution,
    /// Optional partition of the constraint indices into separate joint chance
    /// constraints; absent means a single joint chance constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
}

impl DrccpInstance {
    /// Decision dimension n.
    pub fn n(&self) -> usize {
        self.objective.len()
    }

    /// Uncertainty dimension m.
    pub fn m(&self) -> usize {
        self.constraints.first().map_or(0, |c| c.a_vec.len())
    }

    /// The chance groups (a single group with every constraint by default).
    pub fn chance_groups(&self) -> Vec<Vec<usize>> {
        match &self.groups {
            Some(g) => g.clone(),
            None => vec![(0..self.constraints.len()).collect()],
        }
    }

    /// Scenarios and probabilities of an empirical reference distribution.
    pub fn empirical(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match &self.distribution {
            ReferenceDistribution::Empirical { scenarios, probabilities } => Some((scenarios, probabilities)),
            _ => None,
        }
    }

    /// Objective value `c⊤x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Builds the dual-norm evaluator for the instance.
    pub fn dual_norm(&self) -> Result<DualNorm> {
        let m = self.m();
        match &self.norm {
            NormSpec::P { p, fixed } => {
                let mut free = vec![true; m];
                for &k in fixed {
                    if k < m {
                        free[k] = false;
                    }
                }
                Ok(DualNorm { kind: DualKind::P(p.dual()), free })
            }
            NormSpec::Mahalanobis { sigma } => {
                let sigma = match (sigma, &self.distribution) {
                    (Some(s), _) => s.clone(),
                    (None, ReferenceDistribution::Elliptical { sigma, .. }) => sigma.clone(),
                    (None, _) => {
                        return Err(DrccpError::Unsupported(
                            "mahalanobis norm needs a scale matrix for an empirical distribution".into(),
                        ))
                    }
                };
                Ok(DualNorm { kind: DualKind::Factor(psd_factor(&sigma)?), free: vec![true; m] })
            }
        }
    }
}

/// Returns rows of F with `Σ = F⊤F` for a symmetric PSD matrix Σ.
pub fn psd_factor(sigma: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = sigma.len();
    let mat = DMatrix::from_fn(m, m, |r, c| 0.5 * (sigma[r][c] + sigma[c][r]));
    let eig = SymmetricEigen::new(mat);
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut rows = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-10 * scale {
            return Err(DrccpError::Numeric(format!("scale matrix has negative eigenvalue {lam}")));
        }
        if lam > 1e-14 * scale {
            let s = lam.sqrt();
            rows.push((0..m).map(|j| s * eig.eigenvectors[(j, k)]).collect());
        }
    }
    Ok(rows)
}

fn min_eigenvalue(sigma: &[Vec<f64>]) -> f64 {
    let m = sigma.len();
    let mat = DMatrix::from_fn(m, m, |r, c| sigma[r][c]);
    SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dot product of equally long slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_square_psd(name: &str, s: &[Vec<f64>], m: usize, out: &mut Vec<String>) {
    if s.len() != m || s.iter().any(|r| r.len() != m) {
        out.push(format!("{name} must be {m}x{m}"));
        return;
    }
    let asym = (0..m).flat_map(|r| (0..m).map(move |c| (r, c))).any(|(r, c)| (s[r][c] - s[c][r]).abs() > 1e-10);
    if asym {
        out.push(format!("{name} is not symmetric"));
    } else if m > 0 && min_eigenvalue(s) < -1e-10 {
        out.push(format!("{name} is not positive semidefinite"));
    }
}

/// Lists every violated invariant of `inst`; empty means the instance is valid.
pub fn validate(inst: &DrccpInstance) -> Vec<String> {
    let mut out = Vec::new();
    let n = inst.n();
    let m = inst.m();
    if n == 0 {
        out.push("objective must have at least one entry".into());
    }
    if inst.objective.iter().any(|v| !v.is_finite()) {
        out.push("objective entries must be finite".into());
    }
    if inst.constraints.is_empty() {
        out.push("at least one constraint is required".into());
    }
    for (i, c) in inst.constraints.iter().enumerate() {
        if c.a_vec.len() != m {
            out.push(format!("constraints[{i}].a has length {} but m = {m}", c.a_vec.len()));
        }
        if c.a_mat.len() != c.a_vec.len() || c.a_mat.iter().any(|r| r.len() != n) {
            out.push(format!("constraints[{i}].A must be {m}x{n}"));
        }
        if c.b_vec.len() != n {
            out.push(format!("constraints[{i}].B has length {} but n = {n}", c.b_vec.len()));
        }
        let finite = c.a_mat.iter().flatten().chain(&c.a_vec).chain(&c.b_vec).all(|v| v.is_finite()) && c.b0.is_finite();
        if !finite {
            out.push(format!("constraints[{i}] has non-finite entries"));
        }
    }
    if inst.set.dim() != n {
        out.push(format!("set dimension {} differs from n = {n}", inst.set.dim()));
    }
    match &inst.set {
        DeterministicSet::Box { lower, upper } | DeterministicSet::Polyhedron { lower, upper, .. } => {
            if lower.len() != upper.len() {
                out.push("set lower and upper bounds differ in length".into());
            }
            if lower.iter().zip(upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
                out.push("set has a coordinate with lower > upper".into());
            }
        }
        _ => {}
    }
    for (k, (c, _)) in inst.set.rows().iter().enumerate() {
        if c.len() != n {
            out.push(format!("set row {k} has length {} but n = {n}", c.len()));
        }
    }
    if let DeterministicSet::Polyhedron { c_mat, d, .. } | DeterministicSet::BinaryRestricted { c_mat, d, .. } = &inst.set {
        if c_mat.len() != d.len() {
            out.push("set C and d differ in row count".into());
        }
    }
    if !(inst.epsilon > 0.0 && inst.epsilon < 1.0) {
        out.push("epsilon out of (0,1)".into());
    }
    if !(inst.theta >= 0.0 && inst.theta.is_finite()) {
        out.push("theta must be finite and nonnegative".into());
    }
    if let Order::Finite(q) = inst.q {
        if !(q >= 1.0 && q.is_finite()) {
            out.push("q must be at least 1".into());
        }
    }
    match &inst.norm {
        NormSpec::P { fixed, .. } => {
            if fixed.iter().any(|&k| k >= m) {
                out.push("norm fixed coordinate out of range".into());
            }
        }
        NormSpec::Mahalanobis { sigma } => match (sigma, &inst.distribution) {
            (None, ReferenceDistribution::Empirical { .. }) => {
                out.push("mahalanobis norm without sigma requires an elliptical distribution".into())
            }
            (Some(s), _) => check_square_psd("norm sigma", s, m, &mut out),
            _ => {}
        },
    }
    match &inst.distribution {
        ReferenceDistribution::Empirical { scenarios, probabilities } => {
            if scenarios.is_empty() {
                out.push("empirical distribution needs at least one scenario".into());
            }
            if scenarios.iter().any(|s| s.len() != m) {
                out.push(format!("every scenario must have length m = {m}"));
            }
            if scenarios.iter().flatten().any(|v| !v.is_finite()) {
                out.push("scenarios must be finite".into());
            }
            if probabilities.len() != scenarios.len() {
                out.push("probabilities and scenarios differ in length".into());
            }
            if probabilities.iter().any(|p| !(*p >= 0.0)) {
                out.push("probabilities must be nonnegative".into());
            }
            let total: f64 = probabilities.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                out.push("probabilities do not sum to 1".into());
            }
        }
        ReferenceDistribution::Elliptical { mu, sigma, .. } => {
            if mu.len() != m {
                out.push(format!("elliptical mu must have length m = {m}"));
            }
            check_square_psd("elliptical sigma", sigma, m, &mut out);
            if inst.constraints.len() != 1 {
                out.push("elliptical instances support a single constraint".into());
            }
        }
    }
    if let Some(groups) = &inst.groups {
        let mut seen = vec![0usize; inst.constraints.len()];
        for g in groups {
            if g.is_empty() {
                out.push("groups must be nonempty".into());
            }
            for &i in g {
                match seen.get_mut(i) {
                    Some(s) => *s += 1,
                    None => out.push(format!("group index {i} out of range")),
                }
            }
        }
        if seen.iter().any(|&s| s != 1) {
            out.push("groups must partition the constraint indices".into());
        }
    }
    out
}

/// Parses an instance from JSON bytes and validates it.
pub fn load_instance(bytes: &[u8]) -> Result<DrccpInstance> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let inst: DrccpInstance = serde_path_to_error::deserialize(de).map_err(|e| DrccpError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let violations = validate(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(DrccpError::Invalid(violations))
    }
}

/// Serializes an instance to pretty-printed JSON bytes.
pub fn save_instance(inst: &DrccpInstance) -> Vec<u8> {
    serde_json::to_vec_pretty(inst).expect("instance serialization cannot fail")
}

/// Reads and validates an instance file.
pub fn load_instance_file(path: impl AsRef<std::path::Path>) -> Result<DrccpInstance> {
    load_instance(&std::fs::read(path)?)
}

/// Writes an instance file.
pub fn save_instance_file(inst: &DrccpInstance, path: impl AsRef<std::path::Path>) -> Result<()> {
    std::fs::write(path, save_instance(inst))?;
    Ok(())
}

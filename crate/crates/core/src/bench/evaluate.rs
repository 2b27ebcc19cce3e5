//! Out-of-sample satisfaction estimates, pipeline comparison and the
//! Wasserstein radius tuning procedure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{solve, Method, SolveOptions};
use crate::error::{DrccpError, Result};
use crate::model::{ext_f64, DrccpInstance};

use super::{resource_allocation_with, resource_scenarios};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Fraction of `scenarios` on which `x` satisfies every constraint of a chance
/// group, minimized over the groups (the least satisfied chance constraint).
/// A scenario satisfies a constraint when its nominal margin is `≤ 0`.
pub fn satisfaction(inst: &DrccpInstance, x: &[f64], scenarios: &[Vec<f64>]) -> f64 {
    if scenarios.is_empty() {
        return 1.0;
    }
    inst.chance_groups()
        .iter()
        .map(|g| {
            let held = scenarios
                .iter()
                .filter(|z| g.iter().all(|&i| inst.constraints[i].nominal_margin(x, z) <= 0.0))
                .count();
            held as f64 / scenarios.len() as f64
        })
        .fold(1.0, f64::min)
}

/// Mean satisfaction over repeated fresh scenario sets with a normal
/// approximation 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Satisfaction of each repetition.
    pub samples: Vec<f64>,
}

impl SatisfactionEstimate {
    /// Estimate from per-repetition satisfaction values.
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let r = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / r;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        let half = Z95 * (var / r).sqrt();
        SatisfactionEstimate { mean, ci_low: mean - half, ci_high: mean + half, samples }
    }

    /// Whether this interval lies entirely above `other`.
    pub fn dominates(&self, other: &SatisfactionEstimate) -> bool {
        self.ci_low > other.ci_high
    }
}

/// Draws `reps` independent sets of `n_eval` scenarios from `sampler`, seeded
/// by `seed`, and estimates the satisfaction of `x`.
pub fn out_of_sample(
    inst: &DrccpInstance,
    x: &[f64],
    sampler: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    seed: u64,
    n_eval: usize,
    reps: usize,
) -> Result<SatisfactionEstimate> {
    if x.len() != inst.n() {
        return Err(DrccpError::Invalid(vec![format!("x has {} entries, expected {}", x.len(), inst.n())]));
    }
    if reps == 0 || n_eval == 0 {
        return Err(DrccpError::Invalid(vec!["out-of-sample evaluation needs R ≥ 1 and N ≥ 1".into()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..reps)
        .map(|_| {
            let scenarios: Vec<Vec<f64>> = (0..n_eval).map(|_| sampler(&mut rng)).collect();
            satisfaction(inst, x, &scenarios)
        })
        .collect();
    Ok(SatisfactionEstimate::from_samples(samples))
}

/// `(reference − value)/|reference| × 100`, or `None` when either value is
/// not finite or the reference is zero.
pub fn improvement(reference: f64, value: f64) -> Option<f64> {
    (reference.is_finite() && value.is_finite() && reference != 0.0)
        .then(|| (reference - value) / reference.abs() * 100.0)
}

/// Result of one method inside a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    #[serde(with = "ext_f64")]
    pub value: f64,
    pub feasible: bool,
    pub wall_time: f64,
    /// Optimality gap reported by an exact method stopped by a limit.
    pub gap: Option<f64>,
    /// Improvement over the CVaR approximation, in percent.
    pub improvement_from_cvar: Option<f64>,
    /// Improvement over ALSO-X, in percent.
    pub improvement_from_alsox: Option<f64>,
    /// Improvement over the Big-M incumbent, in percent.
    pub improvement_from_big_m: Option<f64>,
    pub out_of_sample: Option<SatisfactionEstimate>,
}

/// Objectives and improvement percentages of several methods on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub outcomes: Vec<MethodOutcome>,
}

impl EvaluationReport {
    /// Outcome of `method`, if it was run.
    pub fn get(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Runs each method on `inst` with bisection width `delta1` and fills in the
/// improvement percentages relative to whichever of CVaR, ALSO-X and Big-M
/// are among `methods`.
pub fn compare(inst: &DrccpInstance, methods: &[Method], delta1: Option<f64>, opts: &SolveOptions) -> Result<EvaluationReport> {
    if methods.len() < 2 {
        return Err(DrccpError::Invalid(vec!["compare needs at least two methods".into()]));
    }
    let opts = SolveOptions { delta1: delta1.or(opts.delta1), ..opts.clone() };
    let reports = methods.iter().map(|&m| solve(inst, m, &opts)).collect::<Result<Vec<_>>>()?;
    let reference = |m: Method| reports.iter().find(|r| r.method == m).map(|r| r.value);
    let (cvar, alsox, big_m) = (reference(Method::CVaR), reference(Method::AlsoX), reference(Method::BigM));
    let outcomes = reports
        .iter()
        .map(|r| MethodOutcome {
            method: r.method,
            value: r.value,
            feasible: r.feasible,
            wall_time: r.wall_time,
            gap: r.gap,
            improvement_from_cvar: cvar.filter(|_| r.method != Method::CVaR).and_then(|c| improvement(c, r.value)),
            improvement_from_alsox: alsox.filter(|_| r.method != Method::AlsoX).and_then(|a| improvement(a, r.value)),
            improvement_from_big_m: big_m.filter(|_| r.method != Method::BigM).and_then(|b| improvement(b, r.value)),
            out_of_sample: None,
        })
        .collect();
    Ok(EvaluationReport { outcomes })
}

/// A parametric problem family whose reference scenarios can be redrawn.
pub trait ScenarioFamily {
    /// Number of scenarios N of one training or evaluation set.
    fn n_scenarios(&self) -> usize;
    /// Draws one training scenario.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Draws one evaluation scenario; defaults to the training distribution.
    fn sample_eval(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.sample(rng)
    }
    /// Instance with the given reference scenarios and radius.
    fn instance(&self, scenarios: Vec<Vec<f64>>, theta: f64) -> DrccpInstance;
}

/// Resource-allocation family with rates drawn from {20..40}; evaluation
/// scenarios are drawn from `{⌈20(1−1.8ρ)⌉ .. ⌊40(1+0.4ρ)⌋}` for noise level ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceFamily {
    pub users: usize,
    pub horizon: usize,
    pub demand: f64,
    #[serde(rename = "N")]
    pub n_scenarios: usize,
    pub epsilon: f64,
    /// Noise level ρ of the evaluation distribution.
    pub noise: f64,
}

impl ResourceFamily {
    fn draw(&self, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Vec<f64> {
        resource_scenarios(rng, self.users * self.horizon, 1, lo, hi).pop().unwrap_or_default()
    }
}

impl ScenarioFamily for ResourceFamily {
    fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.draw(rng, 20, 40)
    }

    fn sample_eval(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let lo = (20.0 * (1.0 - 1.8 * self.noise)).ceil() as i64;
        let hi = (40.0 * (1.0 + 0.4 * self.noise)).floor() as i64;
        self.draw(rng, lo, hi.max(lo))
    }

    fn instance(&self, scenarios: Vec<Vec<f64>>, theta: f64) -> DrccpInstance {
        resource_allocation_with(self.users, self.horizon, self.demand, scenarios, self.epsilon, theta)
    }
}

/// Options of [`tune_radius`].
#[derive(Debug, Clone)]
pub struct TuneOptions {
    /// Method solving both the DRCCP and its θ = 0 counterpart.
    pub method: Method,
    pub seed: u64,
    pub solve: SolveOptions,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { method: Method::AlsoXSharp, seed: 0, solve: SolveOptions::default() }
    }
}

/// Satisfaction intervals at one grid radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub theta: f64,
    pub drccp: SatisfactionEstimate,
    /// The regular chance-constrained counterpart (θ = 0).
    pub ccp: SatisfactionEstimate,
    /// Whether the DRCCP interval lies entirely above the counterpart's.
    pub dominates: bool,
}

/// Selected radius, or the marker that no grid radius qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusChoice {
    Theta(f64),
    NoneDominates,
}

/// Full output of [`tune_radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub rows: Vec<RadiusRow>,
    pub chosen: RadiusChoice,
}

/// Radius tuning. For each θ of the ascending grid, and `reps` times: draw N
/// training scenarios, solve the DRCCP at θ and at θ = 0, draw N fresh
/// evaluation scenarios and record the satisfaction of both solutions. The
/// chosen radius is the smallest θ whose DRCCP interval lies entirely above
/// the counterpart's. A solve that finds no feasible point counts as
/// satisfaction 0 for that repetition.
pub fn tune_radius(family: &dyn ScenarioFamily, theta_grid: &[f64], reps: usize, opts: &TuneOptions) -> Result<TuneReport> {
    if theta_grid.is_empty() || theta_grid.windows(2).any(|w| w[0] >= w[1]) || theta_grid.iter().any(|t| *t < 0.0) {
        return Err(DrccpError::Invalid(vec!["theta grid must be nonempty, nonnegative and strictly ascending".into()]));
    }
    if reps == 0 {
        return Err(DrccpError::Invalid(vec!["radius tuning needs R ≥ 1".into()]));
    }
    let n = family.n_scenarios();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        let mut drccp = Vec::with_capacity(reps);
        let mut ccp = Vec::with_capacity(reps);
        for _ in 0..reps {
            let training: Vec<Vec<f64>> = (0..n).map(|_| family.sample(&mut rng)).collect();
            let robust = solve(&family.instance(training.clone(), theta), opts.method, &opts.solve)?;
            let plain_inst = family.instance(training, 0.0);
            let plain = solve(&plain_inst, opts.method, &opts.solve)?;
            let fresh: Vec<Vec<f64>> = (0..n).map(|_| family.sample_eval(&mut rng)).collect();
            let score = |feasible: bool, x: &[f64]| if feasible { satisfaction(&plain_inst, x, &fresh) } else { 0.0 };
            drccp.push(score(robust.feasible, &robust.x));
            ccp.push(score(plain.feasible, &plain.x));
        }
        let (drccp, ccp) = (SatisfactionEstimate::from_samples(drccp), SatisfactionEstimate::from_samples(ccp));
        let dominates = drccp.dominates(&ccp);
        rows.push(RadiusRow { theta, drccp, ccp, dominates });
    }
    let chosen = rows.iter().find(|r| r.dominates).map_or(RadiusChoice::NoneDominates, |r| RadiusChoice::Theta(r.theta));
    Ok(TuneReport { rows, chosen })
}

/// Uniform integer sampler on `{lo..hi}^dim`.
pub fn integer_sampler(dim: usize, lo: i64, hi: i64) -> impl FnMut(&mut ChaCha8Rng) -> Vec<f64> {
    move |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(lo..=hi) as f64).collect()
}

//! Reproducible problem instances.
//!
//! A [`NonContextualEnv`] holds fixed reward distributions on `[0, 1]`. A
//! [`ContextualEnv`] shifts zero-mean noise distributions by a linear mean
//! `mu_{t,i} = theta_i^T x_{t,i}` that depends on per-round contexts.
//!
//! All randomness is drawn from [`crate::rng`] streams keyed by the run seed,
//! the box and the round.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, Purpose};
use crate::stepdist::{DistError, StepCdf, STRUCTURAL_TOL};
use crate::thresholds::{MEAN_RANGE, NOISE_RADIUS};

/// Rejection-sampling budget per context draw.
pub const CONTEXT_RETRIES: usize = 1000;
/// Number of grid cells on `[0, 1]` for the grid family.
pub const GRID_CELLS: usize = 20;
/// Mean-zero tolerance for noise distributions.
pub const NOISE_MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("box {index}: {reason}")]
    InvalidBox { index: usize, reason: String },
    #[error("context generator misconfigured: box {index} at round {round} found no admissible context after {CONTEXT_RETRIES} draws")]
    ContextGenerator { index: usize, round: usize },
    #[error("fixed context sequence: {0}")]
    FixedContexts(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Support family for generated marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Distinct atoms drawn from the grid `{0, 1/20, ..., 1}` with
    /// Dirichlet(1) masses.
    Grid,
    /// Two atoms, one below and one above 1/2, with mass `p` on the upper.
    TwoPoint,
    /// Bin midpoints of `[0, 1]` weighted by a Beta density.
    BetaDiscretized,
}

/// Opening costs: one value for every box, or a uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Fixed(f64),
    Range([f64; 2]),
}

fn default_dimension() -> usize {
    1
}

fn default_support() -> usize {
    4
}

fn default_jitter() -> f64 {
    0.25
}

/// Declarative instance description (the `instance` block of an experiment
/// spec file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    #[serde(default = "default_dimension")]
    pub d: usize,
    pub family: Family,
    #[serde(default = "default_support")]
    pub support_size: usize,
    pub cost: CostSpec,
    #[serde(default)]
    pub contextual: bool,
    /// JSON file with a fixed context sequence (see [`ContextSequence`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contexts_file: Option<PathBuf>,
    /// Seed of the instance itself; run seeds only drive realizations.
    #[serde(default)]
    pub seed: u64,
    /// Upper-atom mass for the two-point family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Beta shape parameters for the beta-discretized family; drawn per box
    /// from `[0.5, 5]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
    /// Perturbation scale of the anchored context generator.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

impl InstanceSpec {
    /// Plain spec with defaults for the optional fields.
    pub fn new(n: usize, family: Family, support_size: usize, cost: CostSpec) -> Self {
        Self {
            n,
            d: 1,
            family,
            support_size,
            cost,
            contextual: false,
            contexts_file: None,
            seed: 0,
            p: None,
            beta: None,
            jitter: default_jitter(),
        }
    }

    pub fn contextual(mut self, d: usize) -> Self {
        self.contextual = true;
        self.d = d;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidSpec(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.support_size == 0 {
            return bad("support_size must be at least 1".into());
        }
        match self.family {
            Family::Grid if self.support_size > GRID_CELLS + 1 => {
                return bad(format!("grid family supports at most {} atoms", GRID_CELLS + 1));
            }
            Family::TwoPoint if self.support_size != 2 => {
                return bad("two-point family requires support_size = 2".into());
            }
            _ => {}
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("p = {p} must lie in (0, 1)"));
            }
        }
        if let Some([a, b]) = self.beta {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return bad("beta parameters must be positive".into());
            }
        }
        let in_unit = |c: f64| (0.0..=1.0).contains(&c);
        match self.cost {
            CostSpec::Fixed(c) if !in_unit(c) => return bad(format!("cost {c} outside [0, 1]")),
            CostSpec::Range([lo, hi]) if !(in_unit(lo) && in_unit(hi) && lo <= hi) => {
                return bad(format!("cost range [{lo}, {hi}] invalid"));
            }
            _ => {}
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad("jitter must be nonnegative".into());
        }
        Ok(())
    }
}

/// Fixed reward distributions on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonContextualEnv {
    dists: Vec<StepCdf>,
    costs: Vec<f64>,
}

impl NonContextualEnv {
    pub fn new(dists: Vec<StepCdf>, costs: Vec<f64>) -> Result<Self, EnvError> {
        if dists.is_empty() {
            return Err(EnvError::InvalidSpec("no boxes".into()));
        }
        if dists.len() != costs.len() {
            return Err(EnvError::InvalidSpec(format!(
                "{} distributions but {} costs",
                dists.len(),
                costs.len()
            )));
        }
        for (index, (d, &c)) in dists.iter().zip(&costs).enumerate() {
            if d.min_atom() < 0.0 || d.max_atom() > 1.0 {
                return Err(EnvError::InvalidBox {
                    index,
                    reason: "support outside [0, 1]".into(),
                });
            }
            check_cost(index, c)?;
        }
        Ok(Self { dists, costs })
    }

    pub fn dists(&self) -> &[StepCdf] {
        &self.dists
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}

fn check_cost(index: usize, c: f64) -> Result<(), EnvError> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(EnvError::InvalidBox {
            index,
            reason: format!("cost {c} outside [0, 1]"),
        })
    }
}

/// Explicit contexts: `rounds[t][i]` is the context of box `i` at round `t`.
/// Rounds beyond the sequence wrap around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSequence {
    /// Optional parameter vectors replacing the generated ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<Vec<f64>>>,
    pub rounds: Vec<Vec<Vec<f64>>>,
}

/// How contexts are produced each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ContextPolicy {
    /// `x = r * normalize(anchor + jitter * g)` with `g` standard normal and
    /// `r` uniform on `radius`, redrawn until `theta_i^T x` lies in
    /// `[1/4, 3/4]`.
    Anchored {
        anchor: Vec<f64>,
        jitter: f64,
        radius: [f64; 2],
    },
    Fixed { rounds: Vec<Vec<Vec<f64>>> },
}

/// Linear-mean environment with zero-mean noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualEnv {
    thetas: Vec<Vec<f64>>,
    noise_dists: Vec<StepCdf>,
    costs: Vec<f64>,
    policy: ContextPolicy,
    dimension: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mean_in_range(mu: f64) -> bool {
    mu >= MEAN_RANGE.0 && mu <= MEAN_RANGE.1
}

impl ContextualEnv {
    pub fn new(
        thetas: Vec<Vec<f64>>,
        noise_dists: Vec<StepCdf>,
        costs: Vec<f64>,
        policy: ContextPolicy,
    ) -> Result<Self, EnvError> {
        let n = thetas.len();
        if n == 0 {
            return Err(EnvError::InvalidSpec("no boxes".into()));
        }
        if noise_dists.len() != n || costs.len() != n {
            return Err(EnvError::InvalidSpec(
                "thetas, noise distributions and costs differ in length".into(),
            ));
        }
        let dimension = thetas[0].len();
        if dimension == 0 {
            return Err(EnvError::InvalidSpec("dimension must be at least 1".into()));
        }
        for (index, ((theta, noise), &c)) in thetas.iter().zip(&noise_dists).zip(&costs).enumerate() {
            let fail = |reason: String| Err(EnvError::InvalidBox { index, reason });
            if theta.len() != dimension {
                return fail(format!("theta has dimension {}, expected {dimension}", theta.len()));
            }
            if norm(theta) > 1.0 + STRUCTURAL_TOL {
                return fail(format!("theta norm {} exceeds 1", norm(theta)));
            }
            if noise.atoms().iter().any(|a| a.abs() > NOISE_RADIUS + STRUCTURAL_TOL) {
                return fail("noise atoms outside [-1/4, 1/4]".into());
            }
            if noise.mean().abs() > NOISE_MEAN_TOL {
                return fail(format!("noise mean {} is not zero", noise.mean()));
            }
            check_cost(index, c)?;
        }
        let env = Self {
            thetas,
            noise_dists,
            costs,
            policy,
            dimension,
        };
        env.validate_policy()?;
        Ok(env)
    }

    fn validate_policy(&self) -> Result<(), EnvError> {
        match &self.policy {
            ContextPolicy::Anchored {
                anchor,
                jitter,
                radius,
            } => {
                if anchor.len() != self.dimension || (norm(anchor) - 1.0).abs() > 1e-9 {
                    return Err(EnvError::InvalidSpec("anchor must be a unit vector of dimension d".into()));
                }
                if !(jitter.is_finite() && *jitter >= 0.0) {
                    return Err(EnvError::InvalidSpec("jitter must be nonnegative".into()));
                }
                let [lo, hi] = *radius;
                if !(lo >= 0.0 && lo <= hi && hi <= 1.0) {
                    return Err(EnvError::InvalidSpec("radius range must satisfy 0 <= lo <= hi <= 1".into()));
                }
            }
            ContextPolicy::Fixed { rounds } => {
                if rounds.is_empty() {
                    return Err(EnvError::FixedContexts("empty sequence".into()));
                }
                for (t, round) in rounds.iter().enumerate() {
                    self.check_contexts(round)
                        .map_err(|m| EnvError::FixedContexts(format!("round {t}: {m}")))?;
                }
            }
        }
        Ok(())
    }

    fn check_contexts(&self, contexts: &[Vec<f64>]) -> Result<(), String> {
        if contexts.len() != self.thetas.len() {
            return Err(format!("{} contexts for {} boxes", contexts.len(), self.thetas.len()));
        }
        for (i, (x, theta)) in contexts.iter().zip(&self.thetas).enumerate() {
            if x.len() != self.dimension {
                return Err(format!("box {i}: context dimension {}", x.len()));
            }
            if norm(x) > 1.0 + STRUCTURAL_TOL {
                return Err(format!("box {i}: context norm {} exceeds 1", norm(x)));
            }
            let mu = dot(theta, x);
            if !mean_in_range(mu) {
                return Err(format!("box {i}: mean {mu} outside [1/4, 3/4]"));
            }
        }
        Ok(())
    }

    /// Replaces the context policy with an explicit sequence (and, if given,
    /// the parameter vectors), revalidating every invariant.
    pub fn with_fixed_contexts(self, sequence: ContextSequence) -> Result<Self, EnvError> {
        let thetas = sequence.thetas.unwrap_or(self.thetas);
        Self::new(
            thetas,
            self.noise_dists,
            self.costs,
            ContextPolicy::Fixed {
                rounds: sequence.rounds,
            },
        )
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn noise_dists(&self) -> &[StepCdf] {
        &self.noise_dists
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn policy(&self) -> &ContextPolicy {
        &self.policy
    }

    /// Contexts of every box at round `t`; a pure function of `(seed, t)`.
    pub fn contexts_at(&self, seed: u64, t: usize) -> Result<Vec<Vec<f64>>, EnvError> {
        match &self.policy {
            ContextPolicy::Fixed { rounds } => Ok(rounds[t % rounds.len()].clone()),
            ContextPolicy::Anchored {
                anchor,
                jitter,
                radius,
            } => (0..self.thetas.len())
                .map(|i| {
                    let mut rng = stream(seed, Purpose::Context, i as u64, t as u64);
                    for _ in 0..CONTEXT_RETRIES {
                        let x = anchored_draw(&mut rng, anchor, *jitter, *radius);
                        if mean_in_range(dot(&self.thetas[i], &x)) {
                            return Ok(x);
                        }
                    }
                    Err(EnvError::ContextGenerator { index: i, round: t })
                })
                .collect(),
        }
    }

    /// `mu_{t,i} = theta_i^T x_{t,i}`.
    pub fn means(&self, contexts: &[Vec<f64>]) -> Vec<f64> {
        self.thetas.iter().zip(contexts).map(|(th, x)| dot(th, x)).collect()
    }
}

fn anchored_draw(rng: &mut ChaCha8Rng, anchor: &[f64], jitter: f64, radius: [f64; 2]) -> Vec<f64> {
    let mut x: Vec<f64> = anchor
        .iter()
        .map(|&a| a + jitter * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let len = norm(&x);
    let r = if radius[0] < radius[1] {
        rng.random_range(radius[0]..=radius[1])
    } else {
        radius[0]
    };
    if len > 0.0 {
        x.iter_mut().for_each(|v| *v *= r / len);
    }
    x
}

/// Rewards of one round, with the noise draws exposed for introspection in
/// the contextual case.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub rewards: Vec<f64>,
    pub noise: Option<Vec<f64>>,
}

/// Either kind of environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Environment {
    NonContextual(NonContextualEnv),
    Contextual(ContextualEnv),
}

impl Environment {
    pub fn n(&self) -> usize {
        self.costs().len()
    }

    pub fn costs(&self) -> &[f64] {
        match self {
            Environment::NonContextual(e) => e.costs(),
            Environment::Contextual(e) => e.costs(),
        }
    }

    pub fn is_contextual(&self) -> bool {
        matches!(self, Environment::Contextual(_))
    }

    /// Contexts at round `t`, or `None` for a non-contextual environment.
    pub fn contexts_at(&self, seed: u64, t: usize) -> Result<Option<Vec<Vec<f64>>>, EnvError> {
        match self {
            Environment::NonContextual(_) => Ok(None),
            Environment::Contextual(e) => e.contexts_at(seed, t).map(Some),
        }
    }

    /// Draws every box's reward for round `t` from per-box streams.
    pub fn realize(&self, seed: u64, t: usize, contexts: Option<&[Vec<f64>]>) -> Realization {
        let draw = |i: usize, d: &StepCdf| {
            let mut rng = stream(seed, Purpose::Reward, i as u64, t as u64);
            d.sample(&mut rng)
        };
        match self {
            Environment::NonContextual(e) => Realization {
                rewards: e.dists.iter().enumerate().map(|(i, d)| draw(i, d)).collect(),
                noise: None,
            },
            Environment::Contextual(e) => {
                let contexts = contexts.expect("contextual realization needs contexts");
                let noise: Vec<f64> = e.noise_dists.iter().enumerate().map(|(i, d)| draw(i, d)).collect();
                let rewards = e
                    .means(contexts)
                    .iter()
                    .zip(&noise)
                    .map(|(mu, eta)| (mu + eta).clamp(0.0, 1.0))
                    .collect();
                Realization {
                    rewards,
                    noise: Some(noise),
                }
            }
        }
    }

    /// `D_t`: the fixed marginals, or the noise shifted by the round means.
    pub fn true_round_distribution(&self, contexts: Option<&[Vec<f64>]>) -> Vec<StepCdf> {
        match self {
            Environment::NonContextual(e) => e.dists.clone(),
            Environment::Contextual(e) => {
                let contexts = contexts.expect("contextual distribution needs contexts");
                e.noise_dists
                    .iter()
                    .zip(e.means(contexts))
                    .map(|(d, mu)| d.shift(mu))
                    .collect()
            }
        }
    }
}

/// Positive weights summing to one (Dirichlet(1) via exponential spacings).
fn dirichlet_masses(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    normalize_masses(w)
}

fn normalize_masses(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Atoms and masses on `[0, 1]` for one box.
fn unit_marginal(spec: &InstanceSpec, rng: &mut ChaCha8Rng) -> Result<StepCdf, EnvError> {
    let k = spec.support_size;
    let (atoms, masses) = match spec.family {
        Family::Grid => {
            let mut cells: Vec<usize> = (0..=GRID_CELLS).collect();
            cells.shuffle(rng);
            let mut chosen: Vec<usize> = cells[..k].to_vec();
            chosen.sort_unstable();
            let atoms = chosen.iter().map(|&c| c as f64 / GRID_CELLS as f64).collect();
            (atoms, dirichlet_masses(rng, k))
        }
        Family::TwoPoint => {
            let p = spec.p.unwrap_or(0.5);
            let lo = rng.random_range(0.0..0.5);
            let hi = rng.random_range(0.5..=1.0);
            (vec![lo, hi], vec![1.0 - p, p])
        }
        Family::BetaDiscretized => {
            let [a, b] = spec
                .beta
                .unwrap_or_else(|| [rng.random_range(0.5..5.0), rng.random_range(0.5..5.0)]);
            let atoms: Vec<f64> = (0..k).map(|j| (j as f64 + 0.5) / k as f64).collect();
            let w = atoms
                .iter()
                .map(|&x: &f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0))
                .collect();
            (atoms, normalize_masses(w))
        }
    };
    Ok(StepCdf::new(atoms, masses)?)
}

/// Mean-centers a `[0, 1]` marginal and rescales it into `[-1/4, 1/4]`.
fn center_noise(d: &StepCdf) -> Result<StepCdf, EnvError> {
    let mean = d.mean();
    let spread = d.atoms().iter().map(|a| (a - mean).abs()).fold(0.0, f64::max);
    if spread == 0.0 || d.len() == 1 {
        return Ok(StepCdf::point_mass(0.0)?);
    }
    let scale = NOISE_RADIUS / spread;
    let atoms: Vec<f64> = d
        .atoms()
        .iter()
        .map(|a| ((a - mean) * scale).clamp(-NOISE_RADIUS, NOISE_RADIUS))
        .collect();
    Ok(StepCdf::new(atoms, d.masses().to_vec())?)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-6 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Generates an instance from `spec`, seeded by `spec.seed`.
///
/// Contextual parameter vectors are `theta_i = alpha_i a + beta_i w_i` with
/// `a` the generator's unit anchor, `alpha_i` uniform on `[0.35, 0.65]`,
/// `w_i` a unit vector orthogonal to `a` and `beta_i` uniform on `[0, 0.3]`,
/// so `theta_i^T a` lies in `[0.35, 0.65]` and `||theta_i|| < 1`.
pub fn make_instance(spec: &InstanceSpec) -> Result<Environment, EnvError> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Purpose::Instance, 0, 0);
    let costs: Vec<f64> = (0..spec.n)
        .map(|_| match spec.cost {
            CostSpec::Fixed(c) => c,
            CostSpec::Range([lo, hi]) if lo < hi => rng.random_range(lo..=hi),
            CostSpec::Range([lo, _]) => lo,
        })
        .collect();
    let marginals = (0..spec.n)
        .map(|_| unit_marginal(spec, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    if !spec.contextual {
        return Ok(Environment::NonContextual(NonContextualEnv::new(marginals, costs)?));
    }
    let noise = marginals.iter().map(center_noise).collect::<Result<Vec<_>, _>>()?;
    let d = spec.d;
    let anchor = random_unit(&mut rng, d);
    let thetas = (0..spec.n)
        .map(|_| {
            let alpha = rng.random_range(0.35..=0.65);
            let mut theta: Vec<f64> = anchor.iter().map(|a| alpha * a).collect();
            if d > 1 {
                let raw = random_unit(&mut rng, d);
                let along = dot(&raw, &anchor);
                let orth: Vec<f64> = raw.iter().zip(&anchor).map(|(r, a)| r - along * a).collect();
                let len = norm(&orth);
                if len > 1e-9 {
                    let beta = rng.random_range(0.0..=0.3);
                    theta.iter_mut().zip(&orth).for_each(|(t, o)| *t += beta * o / len);
                }
            }
            theta
        })
        .collect();
    let policy = ContextPolicy::Anchored {
        anchor,
        jitter: spec.jitter,
        radius: [1.0, 1.0],
    };
    Ok(Environment::Contextual(ContextualEnv::new(thetas, noise, costs, policy)?))
}

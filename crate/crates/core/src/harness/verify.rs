//! Seeded property suites with a machine-readable report.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::environments::{make_instance, CostSpec, Environment, Family, InstanceSpec};
use crate::learners::{alpha_delta, Learner, LearnerConfig, OnlinePolicy, RidgeState};
use crate::policy_eval::{
    brute_force_expected_utility, conditional_utility, expected_utility, expected_utility_pandora,
    expected_utility_prophet, run_policy,
};
use crate::rng::{stream, Purpose};
use crate::stepdist::{
    bernstein_optimistic, bernstein_transform, dominates, flat_optimistic, flat_transform, ConfidenceBudget,
    StepCdf,
};
use crate::thresholds::{pandora_thresholds, prophet_backward, prophet_values, Mode, ThresholdVector};

/// Tolerance for comparisons between two exact evaluators.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for optimality, monotonicity and Lipschitz comparisons.
pub const ORDER_TOL: f64 = 1e-9;
/// Minimum frequency of the high-probability events.
pub const REQUIRED_RATE: f64 = 0.95;
/// Confidence level of the frequency suites.
pub const SUITE_DELTA: f64 = 0.05;
/// Horizon of the dominance and coverage trials.
pub const SUITE_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Cdf,
    Dominance,
    Optimality,
    Oracle,
    Lipschitz,
    Coverage,
    All,
}

impl Suite {
    pub const ATOMIC: [Suite; 6] = [
        Suite::Cdf,
        Suite::Dominance,
        Suite::Optimality,
        Suite::Oracle,
        Suite::Lipschitz,
        Suite::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Cdf => "cdf",
            Suite::Dominance => "dominance",
            Suite::Optimality => "optimality",
            Suite::Oracle => "oracle",
            Suite::Lipschitz => "lipschitz",
            Suite::Coverage => "coverage",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ATOMIC
            .iter()
            .chain([Suite::All].iter())
            .copied()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| HarnessError::UnknownSuite(s.to_string()))
    }
}

/// One checked property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub property: String,
    pub samples: usize,
    pub failures: usize,
    /// Largest observed violation of the tolerance-free comparison (for
    /// exact properties) or the observed success rate (for frequencies).
    pub observed: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_rate: Option<f64>,
    pub passed: bool,
}

impl PropertyResult {
    fn exact(property: &str, samples: usize, failures: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            property: property.to_string(),
            samples,
            failures,
            observed: worst,
            tolerance,
            required_rate: None,
            passed: failures == 0,
        }
    }

    fn rate(property: &str, samples: usize, failures: usize) -> Self {
        let rate = 1.0 - failures as f64 / samples as f64;
        Self {
            property: property.to_string(),
            samples,
            failures,
            observed: rate,
            tolerance: 0.0,
            required_rate: Some(REQUIRED_RATE),
            passed: rate >= REQUIRED_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.property == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn suite(&self, suite: Suite) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == suite)
    }
}

/// Runs one suite (or all of them) with fixed seeds.
pub fn verify(suite: Suite) -> Result<VerifyReport, HarnessError> {
    let suites: Vec<Suite> = match suite {
        Suite::All => Suite::ATOMIC.to_vec(),
        s => vec![s],
    };
    let mut reports = Vec::with_capacity(suites.len());
    for s in suites {
        let start = Instant::now();
        let properties = match s {
            Suite::Cdf => cdf_suite(),
            Suite::Dominance => dominance_suite()?,
            Suite::Optimality => optimality_suite()?,
            Suite::Oracle => oracle_suite()?,
            Suite::Lipschitz => lipschitz_suite()?,
            Suite::Coverage => coverage_suite()?,
            Suite::All => unreachable!("expanded above"),
        };
        reports.push(SuiteReport {
            suite: s,
            passed: properties.iter().all(|p| p.passed),
            elapsed_secs: start.elapsed().as_secs_f64(),
            properties,
        });
    }
    Ok(VerifyReport {
        passed: reports.iter().all(|r| r.passed),
        suites: reports,
    })
}

fn rng(suite: u64, index: u64) -> ChaCha8Rng {
    stream(suite, Purpose::Verify, index, 0)
}

/// Random marginal with `1..=max_atoms` atoms in `[0, 1]`. Atoms come from a
/// coarse grid half the time so ties with thresholds occur.
fn random_dist(rng: &mut ChaCha8Rng, max_atoms: usize) -> StepCdf {
    let k = rng.random_range(1..=max_atoms);
    let coarse = rng.random_bool(0.5);
    let mut atoms: Vec<f64> = (0..k)
        .map(|_| {
            if coarse {
                rng.random_range(0..=10) as f64 / 10.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    let w: Vec<f64> = atoms.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    StepCdf::new(atoms, w.into_iter().map(|x| x / total).collect()).expect("valid random marginal")
}

struct RandomInstance {
    dists: Vec<StepCdf>,
    costs: Vec<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_atoms: usize) -> RandomInstance {
    let n = rng.random_range(1..=max_n);
    RandomInstance {
        dists: (0..n).map(|_| random_dist(rng, max_atoms)).collect(),
        costs: (0..n).map(|_| rng.random_range(0.0..0.3)).collect(),
    }
}

fn random_thresholds(rng: &mut ChaCha8Rng, n: usize, mode: Mode) -> ThresholdVector {
    let values = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                rng.random_range(0..=10) as f64 / 10.0
            } else {
                rng.random_range(-0.2..1.2)
            }
        })
        .collect();
    ThresholdVector::for_mode(mode, values)
}

fn optimal(mode: Mode, inst: &RandomInstance) -> Result<ThresholdVector, HarnessError> {
    Ok(match mode {
        Mode::Pandora => pandora_thresholds(&inst.dists, &inst.costs)?,
        Mode::Prophet => prophet_backward(&inst.dists)?,
    })
}

struct Tally {
    samples: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            samples: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records `violation`, failing when it exceeds `tol`.
    fn check(&mut self, violation: f64, tol: f64) {
        self.samples += 1;
        self.worst = self.worst.max(violation);
        if violation > tol || violation.is_nan() {
            self.failures += 1;
        }
    }

    fn result(&self, property: &str, tol: f64) -> PropertyResult {
        PropertyResult::exact(property, self.samples, self.failures, self.worst, tol)
    }
}

fn cdf_suite() -> Vec<PropertyResult> {
    const BUDGETS: u64 = 100;
    const GRID: usize = 10_000;
    let mut monotone = Tally::new();
    let mut valid = Tally::new();
    let mut dominating = Tally::new();
    for b in 0..BUDGETS {
        let mut rng = rng(1, b);
        let l = rng.random_range(0.05..60.0);
        let m = rng.random_range(1..=2000u64);
        let budget = ConfidenceBudget::new(l, m).expect("positive budget");
        let k = budget.ratio();
        for transform in [bernstein_transform as fn(f64, f64) -> f64, flat_transform] {
            let mut prev = transform(0.0, k);
            let mut worst_drop: f64 = 0.0;
            for j in 1..=GRID {
                let h = transform(j as f64 / GRID as f64, k);
                worst_drop = worst_drop.max(prev - h);
                prev = h;
            }
            monotone.check(worst_drop, 0.0);
        }
        let samples: Vec<f64> = (0..rng.random_range(1..60))
            .map(|_| rng.random_range(0..=20) as f64 / 20.0)
            .collect();
        let emp = StepCdf::from_samples(&samples).expect("nonempty");
        for opt in [bernstein_optimistic(&emp, budget), flat_optimistic(&emp, budget)] {
            valid.check(if opt.check_invariants().is_ok() { 0.0 } else { 1.0 }, 0.0);
            dominating.check(if dominates(&opt, &emp) { 0.0 } else { 1.0 }, 0.0);
        }
    }
    vec![
        monotone.result("transform nondecreasing on grid", 0.0),
        valid.result("optimistic output valid", 0.0),
        dominating.result("optimistic dominates empirical", 0.0),
    ]
}

/// Runs a learner for `horizon` rounds and reports whether its optimistic
/// distributions dominated the true round distributions every round.
fn dominance_trial(env: &Environment, learner: &mut Learner, horizon: usize, seed: u64) -> Result<bool, HarnessError> {
    let contexts = env.contexts_at(seed, 0)?;
    learner.initialize(contexts.as_deref(), &env.realize(seed, 0, contexts.as_deref()).rewards)?;
    let mut held = true;
    for t in 1..=horizon {
        let contexts = env.contexts_at(seed, t)?;
        let contexts = contexts.as_deref();
        let truth = env.true_round_distribution(contexts);
        let optimistic = match contexts {
            Some(c) => learner.contextual_optimistic(c)?,
            None => learner.noncontextual_optimistic()?,
        };
        if !optimistic.iter().zip(&truth).all(|(e, d)| dominates(e, d)) {
            held = false;
            break;
        }
        let sigma = learner.thresholds(t, contexts)?;
        let realization = env.realize(seed, t, contexts);
        let outcome = run_policy(learner.config().mode, &sigma, env.costs(), &realization.rewards)?;
        learner.observe(t, contexts, &outcome, &realization.rewards)?;
    }
    Ok(held)
}

/// Dominance frequency for non-contextual (`contextual = false`) or
/// contextual trials.
pub fn dominance_rate(contextual: bool, trials: u64, horizon: usize) -> Result<PropertyResult, HarnessError> {
    let mut failures = 0;
    for trial in 0..trials {
        let mut spec = InstanceSpec::new(3, Family::Grid, if contextual { 3 } else { 4 }, CostSpec::Fixed(0.1))
            .with_seed(10_000 + trial);
        let mut config = LearnerConfig::new(Mode::Pandora, horizon).with_delta(SUITE_DELTA);
        if contextual {
            spec = spec.contextual(3);
            config = config.contextual();
        }
        let env = make_instance(&spec)?;
        let mut learner = Learner::new(config, env.costs().to_vec(), spec.d)?;
        if !dominance_trial(&env, &mut learner, horizon, trial)? {
            failures += 1;
        }
    }
    let name = if contextual {
        "contextual optimistic dominates truth over the horizon"
    } else {
        "optimistic dominates truth over the horizon"
    };
    Ok(PropertyResult::rate(name, trials as usize, failures))
}

fn dominance_suite() -> Result<Vec<PropertyResult>, HarnessError> {
    Ok(vec![
        dominance_rate(false, 2000, SUITE_HORIZON)?,
        dominance_rate(true, 500, SUITE_HORIZON)?,
    ])
}

/// Moves atoms of `d` upward, giving a distribution that dominates it.
fn push_up(rng: &mut ChaCha8Rng, d: &StepCdf) -> StepCdf {
    let mut pairs: Vec<(f64, f64)> = d
        .iter()
        .map(|(a, p)| {
            let bump = if rng.random_bool(0.6) { rng.random_range(0.0..0.3) } else { 0.0 };
            ((a + bump).min(1.0), p)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut atoms: Vec<f64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (a, p) in pairs {
        if atoms.last() == Some(&a) {
            *masses.last_mut().expect("nonempty") += p;
        } else {
            atoms.push(a);
            masses.push(p);
        }
    }
    StepCdf::new(atoms, masses).expect("pushed distribution is valid")
}

fn optimality_suite() -> Result<Vec<PropertyResult>, HarnessError> {
    let mut results = Vec::new();
    for mode in [Mode::Pandora, Mode::Prophet] {
        let mut beat = Tally::new();
        for k in 0..50 {
            let mut rng = rng(3, k);
            let inst = random_instance(&mut rng, 4, 4);
            let best = optimal(mode, &inst)?;
            let best_value = expected_utility(mode, &best, &inst.costs, &inst.dists)?.expected_utility;
            for _ in 0..100 {
                let scale = rng.random_range(0.01..0.5);
                let values = best
                    .values()
                    .iter()
                    .map(|v| v + scale * rng.random_range(-1.0..1.0))
                    .collect();
                let other = ThresholdVector::for_mode(mode, values);
                let value = expected_utility(mode, &other, &inst.costs, &inst.dists)?.expected_utility;
                beat.check(value - best_value, ORDER_TOL);
            }
        }
        results.push(beat.result(&format!("{} thresholds beat perturbations", mode_name(mode)), ORDER_TOL));

        let mut monotone = Tally::new();
        for k in 0..200 {
            let mut rng = rng(4, k);
            let inst = random_instance(&mut rng, 4, 4);
            let pushed = RandomInstance {
                dists: inst.dists.iter().map(|d| push_up(&mut rng, d)).collect(),
                costs: inst.costs.clone(),
            };
            debug_assert!(pushed.dists.iter().zip(&inst.dists).all(|(e, d)| dominates(e, d)));
            let low = expected_utility(mode, &optimal(mode, &inst)?, &inst.costs, &inst.dists)?.expected_utility;
            let high = expected_utility(mode, &optimal(mode, &pushed)?, &pushed.costs, &pushed.dists)?.expected_utility;
            monotone.check(low - high, ORDER_TOL);
        }
        results.push(monotone.result(&format!("{} optimum monotone under dominance", mode_name(mode)), ORDER_TOL));
    }
    Ok(results)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Pandora => "pandora",
        Mode::Prophet => "prophet",
    }
}

/// Prophet self-consistency: `V_i` equals the exact value of the suffix
/// policy started at box `i`.
pub fn prophet_self_consistency(instances: u64) -> Result<PropertyResult, HarnessError> {
    let mut tally = Tally::new();
    for k in 0..instances {
        let mut rng = rng(6, k);
        let n = rng.random_range(1..=6);
        let dists: Vec<StepCdf> = (0..n).map(|_| random_dist(&mut rng, 4)).collect();
        let values = prophet_values(&dists)?;
        let thresholds = prophet_backward(&dists)?;
        for i in 0..n {
            let suffix = ThresholdVector::fixed_order(thresholds.values()[i..].to_vec());
            let value = expected_utility_prophet(&suffix, &dists[i..])?.expected_utility;
            tally.check((value - values[i]).abs(), EXACT_TOL);
        }
    }
    Ok(tally.result("prophet values equal suffix policy values", EXACT_TOL))
}

fn oracle_suite() -> Result<Vec<PropertyResult>, HarnessError> {
    let mut results = Vec::new();
    for mode in [Mode::Pandora, Mode::Prophet] {
        let mut tally = Tally::new();
        for k in 0..500 {
            let mut rng = rng(5, k);
            let inst = random_instance(&mut rng, 4, 3);
            let sigma = if k % 2 == 0 {
                optimal(mode, &inst)?
            } else {
                random_thresholds(&mut rng, inst.dists.len(), mode)
            };
            let exact = expected_utility(mode, &sigma, &inst.costs, &inst.dists)?.expected_utility;
            let brute = brute_force_expected_utility(&sigma, &inst.costs, &inst.dists, mode)?;
            tally.check((exact - brute).abs(), EXACT_TOL);
        }
        results.push(tally.result(&format!("{} evaluator matches enumeration", mode_name(mode)), EXACT_TOL));
    }
    results.push(prophet_self_consistency(200)?);
    Ok(results)
}

fn lipschitz_suite() -> Result<Vec<PropertyResult>, HarnessError> {
    const GRID: usize = 100;
    let grid: Vec<f64> = (0..=GRID).map(|j| j as f64 / GRID as f64).collect();
    let mut monotone = Tally::new();
    let mut lipschitz = Tally::new();
    let mut derivative = Tally::new();
    let mut flat = Tally::new();
    for k in 0..50 {
        let mut rng = rng(7, k);
        let mut inst = random_instance(&mut rng, 4, 3);
        if inst.dists.len() == 1 {
            inst.dists.push(random_dist(&mut rng, 3));
            inst.costs.push(rng.random_range(0.0..0.3));
        }
        let n = inst.dists.len();

        let sigma = optimal(Mode::Pandora, &inst)?;
        let reach = expected_utility_pandora(&sigma, &inst.costs, &inst.dists)?.open_probabilities;
        for (pos, &b) in sigma.order().iter().enumerate() {
            if reach[b] <= 0.0 {
                continue;
            }
            let r: Vec<f64> = grid
                .iter()
                .map(|&z| conditional_utility(&sigma, &inst.costs, &inst.dists, b, z, Mode::Pandora))
                .collect::<Result<_, _>>()?;
            let next = (pos + 1 < n).then(|| sigma.at_position(pos + 1));
            for j in 0..GRID {
                let q = (r[j + 1] - r[j]) / (grid[j + 1] - grid[j]);
                monotone.check(-q, ORDER_TOL);
                lipschitz.check(q - 1.0, ORDER_TOL);
                if next.is_some_and(|s| grid[j + 1] < s) {
                    let z = grid[j + 1];
                    let prefix: f64 = sigma.order()[..pos].iter().map(|&p| inst.dists[p].cdf_at(z)).product();
                    derivative.check(q - prefix / reach[b], ORDER_TOL);
                }
            }
        }

        let tau = optimal(Mode::Prophet, &inst)?;
        let reach = expected_utility_prophet(&tau, &inst.dists)?.open_probabilities;
        // The last box is always accepted, so its threshold never rejects.
        for (b, &r) in reach.iter().enumerate().take(n - 1) {
            if r <= 0.0 {
                continue;
            }
            let below: Vec<f64> = grid.iter().copied().filter(|&z| z < tau.values()[b]).collect();
            if below.is_empty() {
                continue;
            }
            let base = conditional_utility(&tau, &inst.costs, &inst.dists, b, below[0], Mode::Prophet)?;
            for &z in &below[1..] {
                let v = conditional_utility(&tau, &inst.costs, &inst.dists, b, z, Mode::Prophet)?;
                flat.check((v - base).abs(), EXACT_TOL);
            }
        }
    }
    Ok(vec![
        monotone.result("conditional utility nondecreasing", ORDER_TOL),
        lipschitz.result("difference quotients at most one", ORDER_TOL),
        derivative.result("difference quotients below prefix-CDF bound", ORDER_TOL),
        flat.result("prophet conditional utility flat below threshold", EXACT_TOL),
    ])
}

/// Ridge confidence coverage: fraction of episodes in which
/// `|x^T (theta - theta_hat)| <= beta(x)` held at every checked context.
pub fn coverage_rate(episodes: u64, horizon: usize) -> Result<PropertyResult, HarnessError> {
    let (n, d) = (3, 3);
    let mut failures = 0;
    for e in 0..episodes {
        let spec = InstanceSpec::new(n, Family::Grid, 3, CostSpec::Fixed(0.1))
            .contextual(d)
            .with_seed(20_000 + e);
        let env = make_instance(&spec)?;
        let Environment::Contextual(ctx) = &env else {
            unreachable!("contextual spec");
        };
        let mut ridge = RidgeState::new(n, d, alpha_delta(n, SUITE_DELTA, d, horizon));
        let mut covered = true;
        'episode: for t in 0..horizon {
            let contexts = ctx.contexts_at(e, t)?;
            for (i, x) in contexts.iter().enumerate() {
                let truth: f64 = ctx.thetas()[i].iter().zip(x).map(|(a, b)| a * b).sum();
                if (truth - ridge.estimate(i, x)).abs() > ridge.beta(i, x) {
                    covered = false;
                    break 'episode;
                }
            }
            let rewards = env.realize(e, t, Some(&contexts)).rewards;
            for (i, x) in contexts.iter().enumerate() {
                ridge.update(i, x, rewards[i]);
            }
        }
        if !covered {
            failures += 1;
        }
    }
    Ok(PropertyResult::rate("ridge radius covers estimation error", episodes as usize, failures))
}

fn coverage_suite() -> Result<Vec<PropertyResult>, HarnessError> {
    Ok(vec![coverage_rate(2000, SUITE_HORIZON)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in Suite::ATOMIC {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!(matches!("nope".parse::<Suite>(), Err(HarnessError::UnknownSuite(_))));
    }

    #[test]
    fn cdf_suite_passes() {
        let report = verify(Suite::Cdf).unwrap();
        assert!(report.passed, "{report:#?}");
    }

    #[test]
    fn small_frequency_runs() {
        assert!(dominance_rate(false, 20, 30).unwrap().passed);
        assert!(dominance_rate(true, 10, 30).unwrap().passed);
        assert!(coverage_rate(20, 30).unwrap().passed);
    }

    #[test]
    fn pushed_distributions_dominate() {
        let mut r = rng(99, 0);
        for _ in 0..200 {
            let d = random_dist(&mut r, 4);
            let e = push_up(&mut r, &d);
            assert!(dominates(&e, &d));
        }
    }
}

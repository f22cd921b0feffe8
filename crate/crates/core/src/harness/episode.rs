//! One learner against one environment for `T` rounds, with exact regret.

use serde::{Deserialize, Serialize};

use super::slope::dyadic_checkpoints;
use super::HarnessError;
use crate::environments::Environment;
use crate::learners::{LearnerError, OnlinePolicy};
use crate::policy_eval::{expected_utility, run_policy};
use crate::rng::GENERATOR_ID;
use crate::stepdist::StepCdf;
use crate::thresholds::{pandora_thresholds, prophet_backward, Mode, ThresholdVector};

/// Per-round regret bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub optimal_value: f64,
    pub learner_value: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    /// Utility realized by the learner this round.
    pub realized_utility: f64,
    pub opened: usize,
}

/// Parameter-estimation error per box at a checkpoint round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCheckpoint {
    pub t: usize,
    pub errors: Vec<f64>,
    /// Samples per box at this checkpoint.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub rounds: Vec<RoundRecord>,
    pub seed: u64,
    pub config_hash: String,
    pub generator: String,
    /// Boxes opened over the whole run, including the initialization round.
    pub open_counts: Vec<usize>,
    pub theta_checkpoints: Vec<ThetaCheckpoint>,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.cum_regret).collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn theta_at(&self, t: usize) -> Option<&ThetaCheckpoint> {
        self.theta_checkpoints.iter().find(|c| c.t == t)
    }
}

/// The per-round optimal thresholds under `dists`.
pub fn optimal_thresholds(mode: Mode, dists: &[StepCdf], costs: &[f64]) -> Result<ThresholdVector, HarnessError> {
    Ok(match mode {
        Mode::Pandora => pandora_thresholds(dists, costs)?,
        Mode::Prophet => prophet_backward(dists)?,
    })
}

/// Plays the per-round optimum of a known environment.
#[derive(Debug, Clone)]
pub struct OraclePolicy<'a> {
    env: &'a Environment,
    mode: Mode,
}

impl<'a> OraclePolicy<'a> {
    pub fn new(env: &'a Environment, mode: Mode) -> Self {
        Self { env, mode }
    }
}

impl OnlinePolicy for OraclePolicy<'_> {
    fn mode(&self) -> Mode {
        self.mode
    }

    fn thresholds(&mut self, _t: usize, contexts: Option<&[Vec<f64>]>) -> Result<ThresholdVector, LearnerError> {
        let dists = self.env.true_round_distribution(contexts);
        Ok(match self.mode {
            Mode::Pandora => pandora_thresholds(&dists, self.env.costs())?,
            Mode::Prophet => prophet_backward(&dists)?,
        })
    }
}

fn theta_checkpoint(env: &Environment, policy: &dyn OnlinePolicy, t: usize, counts: &[usize]) -> Option<ThetaCheckpoint> {
    let Environment::Contextual(ctx) = env else {
        return None;
    };
    let estimates = policy.theta_estimates()?;
    let errors = estimates
        .iter()
        .zip(ctx.thetas())
        .map(|(est, truth)| est.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    Some(ThetaCheckpoint {
        t,
        errors,
        counts: counts.to_vec(),
    })
}

/// Runs the initialization round and `horizon` regret rounds.
///
/// Each round the optimal and the learner's thresholds are both evaluated
/// exactly under the round's true distribution; then a realization is drawn,
/// the learner's policy is executed and the opened boxes are revealed to it.
pub fn run_episode(
    env: &Environment,
    policy: &mut dyn OnlinePolicy,
    contextual_policy: bool,
    horizon: usize,
    seed: u64,
    config_hash: &str,
) -> Result<RegretTrace, HarnessError> {
    if contextual_policy != env.is_contextual() {
        return Err(HarnessError::ModeMismatch(format!(
            "{} policy on a {} environment",
            if contextual_policy { "contextual" } else { "non-contextual" },
            if env.is_contextual() { "contextual" } else { "non-contextual" },
        )));
    }
    let mode = policy.mode();
    let costs = env.costs();
    let n = env.n();
    let checkpoints = {
        let mut c = dyadic_checkpoints(1, horizon);
        if c.last() != Some(&horizon) {
            c.push(horizon);
        }
        c
    };

    let contexts = env.contexts_at(seed, 0)?;
    let init = env.realize(seed, 0, contexts.as_deref());
    policy.initialize(contexts.as_deref(), &init.rewards)?;
    let mut open_counts = vec![1usize; n];

    let mut rounds = Vec::with_capacity(horizon);
    let mut theta_checkpoints = Vec::new();
    let mut cum = 0.0;
    for t in 1..=horizon {
        let contexts = env.contexts_at(seed, t)?;
        let contexts = contexts.as_deref();
        let dists = env.true_round_distribution(contexts);
        let best = optimal_thresholds(mode, &dists, costs)?;
        let sigma = policy.thresholds(t, contexts)?;
        let optimal_value = expected_utility(mode, &best, costs, &dists)?.expected_utility;
        let learner_value = expected_utility(mode, &sigma, costs, &dists)?.expected_utility;
        let inst_regret = optimal_value - learner_value;
        cum += inst_regret;

        let realization = env.realize(seed, t, contexts);
        let outcome = run_policy(mode, &sigma, costs, &realization.rewards)?;
        policy.observe(t, contexts, &outcome, &realization.rewards)?;
        for &i in &outcome.opened {
            open_counts[i] += 1;
        }
        rounds.push(RoundRecord {
            t,
            optimal_value,
            learner_value,
            inst_regret,
            cum_regret: cum,
            realized_utility: outcome.utility,
            opened: outcome.opened.len(),
        });
        if checkpoints.contains(&t) {
            theta_checkpoints.extend(theta_checkpoint(env, policy, t, &open_counts));
        }
    }
    Ok(RegretTrace {
        rounds,
        seed,
        config_hash: config_hash.to_string(),
        generator: GENERATOR_ID.to_string(),
        open_counts,
        theta_checkpoints,
    })
}

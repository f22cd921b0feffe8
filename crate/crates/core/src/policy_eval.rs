//! Execution and exact evaluation of threshold policies.
//!
//! Two stopping rules share one threshold representation:
//!
//! - Pandora (descending order): always open the first box in the order,
//!   then stop as soon as the best value seen reaches the next box's
//!   threshold (`>=`), or when every box is open. Utility is the best value
//!   minus the costs paid.
//! - Prophet (fixed order): stop at the first box whose value reaches its
//!   own threshold (`>=`), or at the last box. Utility is that value.
//!
//! Expected utilities are computed exactly over product distributions of
//! finite-support marginals. [`brute_force_expected_utility`] enumerates
//! every realization and serves as the test oracle for the dynamic programs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stepdist::StepCdf;
use crate::thresholds::{Mode, ThresholdVector};

/// Largest product support [`brute_force_expected_utility`] will enumerate.
pub const BRUTE_FORCE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("box index {index} out of range for {n} boxes")]
    BoxIndex { index: usize, n: usize },
    #[error("conditioning on null event: box {0} is never opened")]
    NullConditioning(usize),
    #[error("state space of {size} outcomes exceeds the cap of {cap}")]
    StateSpace { size: usize, cap: usize },
}

/// Result of running a policy on one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// Opened boxes in the order they were opened.
    pub opened: Vec<usize>,
    /// Reward taken home (the best opened value for Pandora, the accepted
    /// value for Prophet).
    pub chosen_value: f64,
    /// Pandora: chosen value minus opening costs. Prophet: chosen value.
    pub utility: f64,
    /// Box at which the policy stopped.
    pub stop_index: Option<usize>,
}

/// Exact expected utility with per-box open (reach) probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub expected_utility: f64,
    /// Indexed by box, not by inspection position.
    pub open_probabilities: Vec<f64>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), EvalError> {
    if expected == got {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Runs the generic descending threshold algorithm on one realization.
pub fn run_weitzman(
    sigma: &ThresholdVector,
    costs: &[f64],
    realization: &[f64],
) -> Result<EpisodeOutcome, EvalError> {
    let n = sigma.len();
    check_len("costs", n, costs.len())?;
    check_len("realization", n, realization.len())?;
    let order = sigma.order();
    let mut opened = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut paid = 0.0;
    for (k, &b) in order.iter().enumerate() {
        opened.push(b);
        paid += costs[b];
        best = best.max(realization[b]);
        if k + 1 == n || best >= sigma.at_position(k + 1) {
            break;
        }
    }
    Ok(EpisodeOutcome {
        stop_index: opened.last().copied(),
        opened,
        chosen_value: best,
        utility: best - paid,
    })
}

/// Runs the fixed-order prophet stopping rule on one realization.
pub fn run_prophet(sigma: &ThresholdVector, realization: &[f64]) -> Result<EpisodeOutcome, EvalError> {
    let n = sigma.len();
    check_len("realization", n, realization.len())?;
    let mut opened = Vec::new();
    for (k, &b) in sigma.order().iter().enumerate() {
        opened.push(b);
        let v = realization[b];
        if v >= sigma.values()[b] || k + 1 == n {
            return Ok(EpisodeOutcome {
                opened,
                chosen_value: v,
                utility: v,
                stop_index: Some(b),
            });
        }
    }
    unreachable!("the last box always stops")
}

/// Runs the policy for `mode`.
pub fn run_policy(
    mode: Mode,
    sigma: &ThresholdVector,
    costs: &[f64],
    realization: &[f64],
) -> Result<EpisodeOutcome, EvalError> {
    match mode {
        Mode::Pandora => run_weitzman(sigma, costs, realization),
        Mode::Prophet => run_prophet(sigma, realization),
    }
}

/// Per-position quantities of a threshold policy under a product
/// distribution: reach probability and the value collected by trajectories
/// stopping right after that position.
struct PositionTrace {
    reach: Vec<f64>,
    stop_value: Vec<f64>,
}

/// Marginals with an optional single-box override.
struct Marginals<'a> {
    dists: &'a [StepCdf],
    replaced: Option<(usize, &'a StepCdf)>,
}

impl<'a> Marginals<'a> {
    fn get(&self, b: usize) -> &'a StepCdf {
        match self.replaced {
            Some((i, d)) if i == b => d,
            _ => &self.dists[b],
        }
    }
}

/// Merges equal values of a list of `(value, mass)` pairs, sorted ascending.
fn merge_sorted(mut entries: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    entries.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(entries.len());
    for (v, p) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    merged
}

/// Dynamic program over the running maximum of still-running trajectories.
///
/// The first box is always opened, so the "no value yet" state only exists
/// before position 0 and never needs a numeric stand-in.
fn pandora_trace(sigma: &ThresholdVector, marginals: &Marginals<'_>) -> PositionTrace {
    let n = sigma.len();
    let order = sigma.order();
    let mut reach = Vec::with_capacity(n);
    let mut stop_value = Vec::with_capacity(n);
    let mut running: Vec<(f64, f64)> = Vec::new();
    for (k, &b) in order.iter().enumerate() {
        let d = marginals.get(b);
        let mass: f64 = if k == 0 {
            1.0
        } else {
            running.iter().map(|e| e.1).sum()
        };
        reach.push(mass);
        running = if k == 0 {
            d.iter().collect()
        } else {
            let mut next = Vec::with_capacity(running.len() * d.len());
            for &(v, p) in &running {
                for (a, q) in d.iter() {
                    next.push((v.max(a), p * q));
                }
            }
            merge_sorted(next)
        };
        if k + 1 == n {
            stop_value.push(running.iter().map(|&(v, p)| v * p).sum());
            running.clear();
        } else {
            let next_threshold = sigma.at_position(k + 1);
            let split = running.partition_point(|e| e.0 < next_threshold);
            stop_value.push(running[split..].iter().map(|&(v, p)| v * p).sum());
            running.truncate(split);
        }
    }
    PositionTrace { reach, stop_value }
}

fn prophet_trace(sigma: &ThresholdVector, marginals: &Marginals<'_>) -> PositionTrace {
    let n = sigma.len();
    let mut reach = Vec::with_capacity(n);
    let mut stop_value = Vec::with_capacity(n);
    let mut r = 1.0;
    for (k, &b) in sigma.order().iter().enumerate() {
        let d = marginals.get(b);
        reach.push(r);
        if k + 1 == n {
            stop_value.push(r * d.mean());
        } else {
            let threshold = sigma.values()[b];
            stop_value.push(r * d.expect_at_least(threshold));
            r *= d.cdf_below(threshold);
        }
    }
    PositionTrace { reach, stop_value }
}

fn check_instance(
    mode: Mode,
    sigma: &ThresholdVector,
    costs: &[f64],
    dists: &[StepCdf],
) -> Result<(), EvalError> {
    check_len("distributions", sigma.len(), dists.len())?;
    if mode == Mode::Pandora {
        check_len("costs", sigma.len(), costs.len())?;
    }
    Ok(())
}

fn by_box(sigma: &ThresholdVector, per_position: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; sigma.len()];
    for (k, &b) in sigma.order().iter().enumerate() {
        out[b] = per_position[k];
    }
    out
}

/// Exact `R(sigma; D)` for the descending threshold algorithm.
pub fn expected_utility_pandora(
    sigma: &ThresholdVector,
    costs: &[f64],
    dists: &[StepCdf],
) -> Result<ExactValue, EvalError> {
    check_instance(Mode::Pandora, sigma, costs, dists)?;
    let trace = pandora_trace(sigma, &Marginals { dists, replaced: None });
    let paid: f64 = sigma
        .order()
        .iter()
        .zip(&trace.reach)
        .map(|(&b, q)| q * costs[b])
        .sum();
    Ok(ExactValue {
        expected_utility: trace.stop_value.iter().sum::<f64>() - paid,
        open_probabilities: by_box(sigma, &trace.reach),
    })
}

/// Exact `R(sigma; D)` for the fixed-order prophet rule. Open
/// probabilities are the reach probabilities.
pub fn expected_utility_prophet(
    sigma: &ThresholdVector,
    dists: &[StepCdf],
) -> Result<ExactValue, EvalError> {
    check_instance(Mode::Prophet, sigma, &[], dists)?;
    let trace = prophet_trace(sigma, &Marginals { dists, replaced: None });
    Ok(ExactValue {
        expected_utility: trace.stop_value.iter().sum(),
        open_probabilities: by_box(sigma, &trace.reach),
    })
}

/// Dispatches on `mode`; `costs` is ignored for Prophet.
pub fn expected_utility(
    mode: Mode,
    sigma: &ThresholdVector,
    costs: &[f64],
    dists: &[StepCdf],
) -> Result<ExactValue, EvalError> {
    match mode {
        Mode::Pandora => expected_utility_pandora(sigma, costs, dists),
        Mode::Prophet => expected_utility_prophet(sigma, dists),
    }
}

/// Expected utility by enumerating every realization of the product
/// distribution and running the policy on each.
pub fn brute_force_expected_utility(
    sigma: &ThresholdVector,
    costs: &[f64],
    dists: &[StepCdf],
    mode: Mode,
) -> Result<f64, EvalError> {
    check_instance(mode, sigma, costs, dists)?;
    let size = dists
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(d.len()))
        .unwrap_or(usize::MAX);
    if size > BRUTE_FORCE_CAP {
        return Err(EvalError::StateSpace {
            size,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let n = dists.len();
    let mut digits = vec![0usize; n];
    let mut realization = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..size {
        let mut prob = 1.0;
        for (i, d) in dists.iter().enumerate() {
            realization[i] = d.atoms()[digits[i]];
            prob *= d.masses()[digits[i]];
        }
        total += prob * run_policy(mode, sigma, costs, &realization)?.utility;
        // Odometer increment.
        for i in 0..n {
            digits[i] += 1;
            if digits[i] < dists[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
    Ok(total)
}

/// `E[R(sigma; v) | box is opened]` with the box's value pinned to `z` and
/// the other boxes drawn from `dists`.
///
/// Computed by the same dynamic program with the box's marginal replaced by
/// a point mass at `z`. The opening event does not depend on the box's own
/// value, so only trajectories that reach it are kept: their stop values
/// from that position on, minus every cost they pay, divided by the reach
/// probability.
pub fn conditional_utility(
    sigma: &ThresholdVector,
    costs: &[f64],
    dists: &[StepCdf],
    box_index: usize,
    z: f64,
    mode: Mode,
) -> Result<f64, EvalError> {
    check_instance(mode, sigma, costs, dists)?;
    let n = sigma.len();
    if box_index >= n {
        return Err(EvalError::BoxIndex {
            index: box_index,
            n,
        });
    }
    let pinned = StepCdf::new(vec![z], vec![1.0]).map_err(|_| EvalError::NullConditioning(box_index))?;
    let marginals = Marginals {
        dists,
        replaced: Some((box_index, &pinned)),
    };
    let trace = match mode {
        Mode::Pandora => pandora_trace(sigma, &marginals),
        Mode::Prophet => prophet_trace(sigma, &marginals),
    };
    let position = sigma
        .order()
        .iter()
        .position(|&b| b == box_index)
        .expect("order is a permutation");
    let reach = trace.reach[position];
    if reach <= 0.0 {
        return Err(EvalError::NullConditioning(box_index));
    }
    let collected: f64 = trace.stop_value[position..].iter().sum();
    let paid = match mode {
        Mode::Prophet => 0.0,
        Mode::Pandora => {
            let order = sigma.order();
            let earlier: f64 = order[..position].iter().map(|&b| costs[b]).sum();
            let later: f64 = order[position..]
                .iter()
                .zip(&trace.reach[position..])
                .map(|(&b, q)| q * costs[b])
                .sum();
            reach * earlier + later
        }
    };
    Ok((collected - paid) / reach)
}

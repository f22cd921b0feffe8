//! Reservation values (Weitzman indices) and prophet thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stepdist::StepCdf;

/// Contextual means must lie in this closed interval.
pub const MEAN_RANGE: (f64, f64) = (0.25, 0.75);
/// Noise atoms must lie in `[-NOISE_RADIUS, NOISE_RADIUS]`.
pub const NOISE_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("cost {0} must be finite and nonnegative")]
    InvalidCost(f64),
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no boxes")]
    Empty,
    #[error("box {index}: mean {mean} outside [1/4, 3/4]")]
    MeanOutOfRange { index: usize, mean: f64 },
    #[error("box {index}: noise atom {atom} outside [-1/4, 1/4]")]
    NoiseOutOfRange { index: usize, atom: f64 },
}

/// Inspection rule a threshold vector is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pandora,
    Prophet,
}

/// Per-box thresholds together with the inspection order.
///
/// For Pandora the order sorts values descending (ties by ascending index);
/// for Prophet it is the fixed index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector {
    values: Vec<f64>,
    order: Vec<usize>,
}

impl ThresholdVector {
    /// Pandora thresholds: boxes are inspected by descending value.
    pub fn descending(values: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        // Stable sort keeps ascending index among ties.
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        Self { values, order }
    }

    /// Prophet thresholds: boxes are inspected in index order.
    pub fn fixed_order(values: Vec<f64>) -> Self {
        let order = (0..values.len()).collect();
        Self { values, order }
    }

    pub fn for_mode(mode: Mode, values: Vec<f64>) -> Self {
        match mode {
            Mode::Pandora => Self::descending(values),
            Mode::Prophet => Self::fixed_order(values),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Box indices in inspection order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Threshold of the box inspected at position `k` of the order.
    pub fn at_position(&self, k: usize) -> f64 {
        self.values[self.order[k]]
    }
}

fn check_cost(cost: f64) -> Result<(), ThresholdError> {
    if cost.is_finite() && cost >= 0.0 {
        Ok(())
    } else {
        Err(ThresholdError::InvalidCost(cost))
    }
}

/// Smallest `s` with `E[(X - s)_+] = cost`.
///
/// `g(s) = E[(X - s)_+]` is continuous, piecewise linear and strictly
/// decreasing below the top atom, so the root is found by locating the
/// segment that brackets `cost` and solving its linear equation. For
/// `cost >= g(min atom)` the root is `mean - cost`, possibly negative.
pub fn reservation_value(d: &StepCdf, cost: f64) -> Result<f64, ThresholdError> {
    check_cost(cost)?;
    let atoms = d.atoms();
    let masses = d.masses();
    let top = atoms.len() - 1;
    // Walk segments from the top down. On (atoms[k-1], atoms[k]] the tail set
    // is {k, ..}: g(s) = tail_moment - s * tail_mass.
    let mut tail_mass = 0.0;
    let mut tail_moment = 0.0;
    for k in (0..=top).rev() {
        tail_mass += masses[k];
        tail_moment += masses[k] * atoms[k];
        let lower = if k == 0 {
            f64::NEG_INFINITY
        } else {
            atoms[k - 1]
        };
        let g_lower = tail_moment - lower * tail_mass;
        if k == 0 || g_lower > cost {
            let s = (tail_moment - cost) / tail_mass;
            // Rounding can push the solution a hair outside its segment.
            return Ok(s.min(atoms[k]).max(lower));
        }
    }
    unreachable!("segment loop always returns at k = 0")
}

fn check_lengths(what: &'static str, expected: usize, got: usize) -> Result<(), ThresholdError> {
    if expected == got {
        Ok(())
    } else {
        Err(ThresholdError::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Per-box reservation values, ordered descending.
pub fn pandora_thresholds(
    dists: &[StepCdf],
    costs: &[f64],
) -> Result<ThresholdVector, ThresholdError> {
    if dists.is_empty() {
        return Err(ThresholdError::Empty);
    }
    check_lengths("costs", dists.len(), costs.len())?;
    let values = dists
        .iter()
        .zip(costs)
        .map(|(d, &c)| reservation_value(d, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ThresholdVector::descending(values))
}

/// Backward-induction values `V_n = E[X_n]`,
/// `V_i = E[max(X_i, V_{i+1})]`. `V_i` is the optimal expected reward when
/// inspection starts at box `i`.
pub fn prophet_values(dists: &[StepCdf]) -> Result<Vec<f64>, ThresholdError> {
    let n = dists.len();
    if n == 0 {
        return Err(ThresholdError::Empty);
    }
    let mut values = vec![0.0; n];
    values[n - 1] = dists[n - 1].mean();
    for i in (0..n - 1).rev() {
        values[i] = dists[i].expect_max_with(values[i + 1]);
    }
    Ok(values)
}

/// Optimal acceptance thresholds for the fixed-order stopping rule "accept
/// box `i` iff `v_i >= threshold_i`".
///
/// Box `i < n` is accepted iff its reward reaches the continuation value
/// `V_{i+1}` from [`prophet_values`]; the last box is always taken and
/// carries `V_n`.
pub fn prophet_backward(dists: &[StepCdf]) -> Result<ThresholdVector, ThresholdError> {
    let values = prophet_values(dists)?;
    let n = values.len();
    let thresholds = (0..n)
        .map(|i| if i + 1 < n { values[i + 1] } else { values[i] })
        .collect();
    Ok(ThresholdVector::fixed_order(thresholds))
}

/// Per-round optimal Pandora thresholds in the contextual model,
/// `sigma_i = mu_i + reservation_value(noise_i, c_i)`.
pub fn contextual_optimal_pandora(
    noise_dists: &[StepCdf],
    means: &[f64],
    costs: &[f64],
) -> Result<ThresholdVector, ThresholdError> {
    if noise_dists.is_empty() {
        return Err(ThresholdError::Empty);
    }
    check_lengths("means", noise_dists.len(), means.len())?;
    check_lengths("costs", noise_dists.len(), costs.len())?;
    let tol = crate::stepdist::STRUCTURAL_TOL;
    let mut values = Vec::with_capacity(means.len());
    for (index, ((noise, &mean), &cost)) in noise_dists.iter().zip(means).zip(costs).enumerate() {
        if !(mean >= MEAN_RANGE.0 - tol && mean <= MEAN_RANGE.1 + tol) {
            return Err(ThresholdError::MeanOutOfRange { index, mean });
        }
        if let Some(&atom) = noise
            .atoms()
            .iter()
            .find(|a| a.abs() > NOISE_RADIUS + tol)
        {
            return Err(ThresholdError::NoiseOutOfRange { index, atom });
        }
        values.push(mean + reservation_value(noise, cost)?);
    }
    Ok(ThresholdVector::descending(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepdist::dominates;
    use proptest::prelude::*;

    /// Independent oracle: bisection on `g(s) - c` over a bracket where
    /// `g(lo) >= c >= g(hi)`. Returns the smallest root to within the
    /// bracket width after `iters` halvings.
    fn bisection_oracle(d: &StepCdf, c: f64, iters: usize) -> f64 {
        let mut lo = d.mean() - c - 1.0;
        let mut hi = d.max_atom();
        for _ in 0..iters {
            let mid = 0.5 * (lo + hi);
            if d.partial_expectation_above(mid) > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn two_point() -> StepCdf {
        StepCdf::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn reservation_value_examples() {
        let d = StepCdf::point_mass(0.9).unwrap();
        let s = reservation_value(&d, 0.1).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!((s - bisection_oracle(&d, 0.1, 200)).abs() < 1e-12);

        let s = reservation_value(&two_point(), 0.25).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert!((s - bisection_oracle(&two_point(), 0.25, 200)).abs() < 1e-12);

        let d = StepCdf::new(vec![0.1, 0.4, 0.7], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(reservation_value(&d, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn reservation_value_below_support() {
        // cost above the mean: sigma = mean - cost < min atom.
        let d = StepCdf::new(vec![0.2, 0.6], vec![0.5, 0.5]).unwrap();
        let s = reservation_value(&d, 0.9).unwrap();
        assert!((s - (0.4 - 0.9)).abs() < 1e-12);
    }

    #[test]
    fn negative_cost_is_rejected() {
        assert!(matches!(
            reservation_value(&two_point(), -0.1),
            Err(ThresholdError::InvalidCost(_))
        ));
    }

    #[test]
    fn prophet_values_examples() {
        let v = prophet_values(&[StepCdf::point_mass(0.4).unwrap()]).unwrap();
        assert_eq!(v, vec![0.4]);

        let d1 = StepCdf::new(vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let d2 = StepCdf::point_mass(0.5).unwrap();
        let v = prophet_values(&[d1.clone(), d2.clone()]).unwrap();
        assert!((v[0] - 0.65).abs() < 1e-15);
        assert_eq!(v[1], 0.5);
        // Acceptance thresholds are the continuation values.
        let tau = prophet_backward(&[d1, d2]).unwrap();
        assert_eq!(tau.values(), &[0.5, 0.5]);
        assert_eq!(tau.order(), &[0, 1]);

        let half = StepCdf::point_mass(0.5).unwrap();
        let tau = prophet_backward(&vec![half; 4]).unwrap();
        assert!(tau.values().iter().all(|&s| s == 0.5));
        let single = prophet_backward(&[StepCdf::point_mass(0.4).unwrap()]).unwrap();
        assert_eq!(single.values(), &[0.4]);
    }

    #[test]
    fn pandora_threshold_examples() {
        let sigma = pandora_thresholds(&[two_point(), two_point()], &[0.25, 0.25]).unwrap();
        assert_eq!(sigma.order(), &[0, 1]);
        assert!(sigma.values().iter().all(|&s| (s - 0.5).abs() < 1e-12));

        let dists: Vec<_> = [0.3, 0.9, 0.6]
            .iter()
            .map(|&v| StepCdf::point_mass(v).unwrap())
            .collect();
        let sigma = pandora_thresholds(&dists, &[0.0; 3]).unwrap();
        assert_eq!(sigma.values(), &[0.3, 0.9, 0.6]);
        assert_eq!(sigma.order(), &[1, 2, 0]);

        assert!(matches!(
            pandora_thresholds(&dists, &[0.0; 2]),
            Err(ThresholdError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn contextual_optimal_examples() {
        let zero = StepCdf::point_mass(0.0).unwrap();
        let sigma = contextual_optimal_pandora(&[zero], &[0.5], &[0.0]).unwrap();
        assert_eq!(sigma.values(), &[0.5]);

        let noise = StepCdf::new(vec![-0.25, 0.25], vec![0.5, 0.5]).unwrap();
        let sigma = contextual_optimal_pandora(std::slice::from_ref(&noise), &[0.5], &[0.125]).unwrap();
        assert!((sigma.values()[0] - 0.5).abs() < 1e-12);
        let via_bisection = bisection_oracle(&noise.shift(0.5), 0.125, 200);
        assert!((sigma.values()[0] - via_bisection).abs() < 1e-12);

        assert!(matches!(
            contextual_optimal_pandora(std::slice::from_ref(&noise), &[0.9], &[0.1]),
            Err(ThresholdError::MeanOutOfRange { .. })
        ));
        let wide = StepCdf::new(vec![-0.5, 0.5], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            contextual_optimal_pandora(&[wide], &[0.5], &[0.1]),
            Err(ThresholdError::NoiseOutOfRange { .. })
        ));
    }

    fn arb_dist(lo: f64, hi: f64) -> impl Strategy<Value = StepCdf> {
        prop::collection::vec((lo..hi, 0.05f64..1.0), 1..6).prop_map(|mut pairs| {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.dedup_by(|a, b| a.0 == b.0);
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let atoms = pairs.iter().map(|p| p.0).collect();
            let mut masses: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
            let sum: f64 = masses.iter().sum();
            masses[0] += 1.0 - sum;
            StepCdf::new(atoms, masses).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reservation_value_matches_bisection(d in arb_dist(0.0, 1.0), c in 0.0f64..1.0) {
            let s = reservation_value(&d, c).unwrap();
            let oracle = bisection_oracle(&d, c, 200);
            prop_assert!((s - oracle).abs() < 1e-10, "{s} vs {oracle}");
        }
    }

    proptest! {
        #[test]
        fn reservation_value_monotone_under_dominance(
            d in arb_dist(0.0, 1.0),
            lift in prop::collection::vec(0.0f64..0.3, 6),
            c in 0.0f64..0.5,
        ) {
            // Moving every atom up yields a dominating distribution.
            let atoms: Vec<f64> = d.atoms().iter().zip(&lift).map(|(a, l)| a + l).collect();
            let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(d.masses().iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (a, p) in pairs {
                match merged.last_mut() {
                    Some(last) if last.0 == a => last.1 += p,
                    _ => merged.push((a, p)),
                }
            }
            let (atoms, masses): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
            let e = StepCdf::new(atoms, masses).unwrap();
            prop_assume!(dominates(&e, &d));
            prop_assert!(reservation_value(&e, c).unwrap() >= reservation_value(&d, c).unwrap() - 1e-12);
        }

        #[test]
        fn contextual_decomposition_matches_shifted_solver(
            noise in arb_dist(-0.25, 0.25),
            mu in 0.25f64..0.75,
            c in 0.0f64..0.5,
        ) {
            let direct = reservation_value(&noise.shift(mu), c).unwrap();
            let sigma = contextual_optimal_pandora(&[noise], &[mu], &[c]).unwrap();
            prop_assert!((sigma.values()[0] - direct).abs() < 1e-12);
        }
    }
}

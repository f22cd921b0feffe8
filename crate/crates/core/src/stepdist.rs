//! Finite-support step-CDF distributions.
//!
//! [`StepCdf`] is the single distribution representation used everywhere:
//! true box distributions, empirical distributions built from observed
//! rewards, and the optimistic distributions derived from them. Besides the
//! expectation functionals the threshold solvers need, this module hosts the
//! two optimistic constructions:
//!
//! - [`bernstein_optimistic`]: lowers the empirical CDF by a level-adaptive
//!   width `sqrt(2y(1-y)L/m) + L/m`.
//! - [`flat_optimistic`]: lowers it by the fixed width `sqrt(L/m)`.
//!
//! In both cases the removed mass is placed at the top value `1`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for structural invariants (mass sums, dominance checks).
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Tolerance for comparisons between computed expectations.
pub const COMPARATIVE_TOL: f64 = 1e-9;
/// Largest value a reward can take; optimistic mass is moved here.
pub const TOP_VALUE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("no samples")]
    Empty,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("atoms and masses differ in length ({atoms} vs {masses})")]
    LengthMismatch { atoms: usize, masses: usize },
    #[error("atoms must be strictly increasing")]
    NotIncreasing,
    #[error("mass {0} is not positive")]
    NonPositiveMass(f64),
    #[error("masses sum to {0}, expected 1")]
    MassSum(f64),
    #[error("invalid confidence budget: L = {l}, m = {m}")]
    InvalidBudget { l: f64, m: u64 },
}

/// A probability distribution with finitely many atoms.
///
/// Atoms are strictly increasing, every mass is positive and the masses sum
/// to one within [`STRUCTURAL_TOL`]. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepCdfRepr", into = "StepCdfRepr")]
pub struct StepCdf {
    atoms: Vec<f64>,
    masses: Vec<f64>,
    /// `cumulative[j] = P(X <= atoms[j])`, with the last entry pinned to 1.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepCdfRepr {
    atoms: Vec<f64>,
    masses: Vec<f64>,
}

impl TryFrom<StepCdfRepr> for StepCdf {
    type Error = DistError;

    fn try_from(repr: StepCdfRepr) -> Result<Self, Self::Error> {
        StepCdf::new(repr.atoms, repr.masses)
    }
}

impl From<StepCdf> for StepCdfRepr {
    fn from(d: StepCdf) -> Self {
        StepCdfRepr {
            atoms: d.atoms,
            masses: d.masses,
        }
    }
}

impl StepCdf {
    /// Builds a distribution from explicit atoms and masses, validating every
    /// invariant.
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self, DistError> {
        if atoms.len() != masses.len() {
            return Err(DistError::LengthMismatch {
                atoms: atoms.len(),
                masses: masses.len(),
            });
        }
        if atoms.is_empty() {
            return Err(DistError::Empty);
        }
        for &a in &atoms {
            if !a.is_finite() {
                return Err(DistError::NonFinite(a));
            }
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistError::NotIncreasing);
        }
        for &p in &masses {
            if !p.is_finite() || p <= 0.0 {
                return Err(DistError::NonPositiveMass(p));
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(DistError::MassSum(total));
        }
        Ok(Self::from_parts_unchecked(atoms, masses))
    }

    fn from_parts_unchecked(atoms: Vec<f64>, masses: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for &p in &masses {
            acc += p;
            cumulative.push(acc.min(1.0));
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        StepCdf {
            atoms,
            masses,
            cumulative,
        }
    }

    /// A point mass at `x`.
    pub fn point_mass(x: f64) -> Result<Self, DistError> {
        Self::new(vec![x], vec![1.0])
    }

    /// Empirical distribution: each distinct value (exact float equality)
    /// receives mass `multiplicity / count`.
    pub fn from_samples(values: &[f64]) -> Result<Self, DistError> {
        if values.is_empty() {
            return Err(DistError::Empty);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DistError::NonFinite(bad));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self::from_sorted_unchecked(&sorted))
    }

    /// Empirical distribution from values already sorted ascending and known
    /// to be finite.
    pub(crate) fn from_sorted_unchecked(sorted: &[f64]) -> Self {
        debug_assert!(!sorted.is_empty());
        let inv = 1.0 / sorted.len() as f64;
        let mut atoms = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &v in sorted {
            // -0.0 and 0.0 compare equal and are merged.
            if atoms.last().is_some_and(|&a: &f64| a == v) {
                *counts.last_mut().expect("non-empty") += 1;
            } else {
                atoms.push(v);
                counts.push(1);
            }
        }
        let masses = counts.into_iter().map(|c| c as f64 * inv).collect();
        Self::from_parts_unchecked(atoms, masses)
    }

    /// Empirical distribution from `(value, multiplicity)` pairs sorted by
    /// strictly increasing value. Equivalent to [`StepCdf::from_samples`] on
    /// the expanded list.
    pub fn from_counts<I>(counts: I) -> Result<Self, DistError>
    where
        I: IntoIterator<Item = (f64, u64)>,
    {
        let (atoms, counts): (Vec<f64>, Vec<u64>) =
            counts.into_iter().filter(|&(_, c)| c > 0).unzip();
        if atoms.is_empty() {
            return Err(DistError::Empty);
        }
        if let Some(&bad) = atoms.iter().find(|v| !v.is_finite()) {
            return Err(DistError::NonFinite(bad));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistError::NotIncreasing);
        }
        let total: u64 = counts.iter().sum();
        let inv = 1.0 / total as f64;
        let masses = counts.into_iter().map(|c| c as f64 * inv).collect();
        Ok(Self::from_parts_unchecked(atoms, masses))
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().expect("non-empty distribution")
    }

    /// Iterates over `(atom, mass)` pairs in increasing atom order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.masses.iter().copied())
    }

    /// `P(X <= x)`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `P(X < x)`, the left limit of the CDF at `x`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `E[(X - s)_+]`.
    pub fn partial_expectation_above(&self, s: f64) -> f64 {
        self.iter()
            .filter(|&(a, _)| a > s)
            .map(|(a, p)| p * (a - s))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, p)| p * a).sum()
    }

    /// `E[max(X, a)]`.
    pub fn expect_max_with(&self, a: f64) -> f64 {
        self.iter().map(|(x, p)| p * x.max(a)).sum()
    }

    /// `E[X * 1{X >= s}]`.
    pub fn expect_at_least(&self, s: f64) -> f64 {
        self.iter().filter(|&(x, _)| x >= s).map(|(x, p)| p * x).sum()
    }

    /// Translates every atom by `mu`. Atoms that collide after rounding are
    /// merged.
    pub fn shift(&self, mu: f64) -> StepCdf {
        let mut atoms: Vec<f64> = Vec::with_capacity(self.len());
        let mut masses: Vec<f64> = Vec::with_capacity(self.len());
        for (a, p) in self.iter() {
            let moved = a + mu;
            match atoms.last() {
                Some(&last) if moved <= last => *masses.last_mut().expect("non-empty") += p,
                _ => {
                    atoms.push(moved);
                    masses.push(p);
                }
            }
        }
        Self::from_parts_unchecked(atoms, masses)
    }

    /// Inverse-CDF draw for a uniform variate `u` in `[0, 1)`: the smallest
    /// atom whose cumulative mass reaches `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.atoms[idx.min(self.atoms.len() - 1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Checks the structural invariants. Constructors already enforce them;
    /// this is for verification suites.
    pub fn check_invariants(&self) -> Result<(), DistError> {
        Self::new(self.atoms.clone(), self.masses.clone()).map(|_| ())
    }
}

/// Log-confidence scale `L` together with the sample count `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBudget {
    l: f64,
    m: u64,
}

impl ConfidenceBudget {
    pub fn new(l: f64, m: u64) -> Result<Self, DistError> {
        if !(l.is_finite() && l > 0.0) || m == 0 {
            return Err(DistError::InvalidBudget { l, m });
        }
        Ok(Self { l, m })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `L / m`.
    pub fn ratio(&self) -> f64 {
        self.l / self.m as f64
    }
}

/// `L = 4 log(2 n T^2 / delta)`, the scale for the Bernstein construction.
pub fn bernstein_scale(n: usize, horizon: usize, delta: f64) -> f64 {
    let t = horizon as f64;
    4.0 * (2.0 * n as f64 * t * t / delta).ln()
}

/// `L = 1/2 log(4 n T / delta)`, the scale for the flat (DKW-width)
/// construction.
pub fn flat_scale(n: usize, horizon: usize, delta: f64) -> f64 {
    0.5 * (4.0 * n as f64 * horizon as f64 / delta).ln()
}

/// Bernstein CDF transform `max{0, y - sqrt(2y(1-y)k) - k}` with `k = L/m`.
/// Nondecreasing on `[0, 1]` for every `k > 0`.
pub fn bernstein_transform(y: f64, k: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    (y - (2.0 * y * (1.0 - y) * k).sqrt() - k).max(0.0)
}

/// Flat CDF transform `max{0, y - sqrt(k)}` with `k = L/m`.
pub fn flat_transform(y: f64, k: f64) -> f64 {
    (y.clamp(0.0, 1.0) - k.sqrt()).max(0.0)
}

/// Applies a nondecreasing CDF transform to every atom below the top value
/// and places the residual mass at the top value.
fn optimistic_with(emp: &StepCdf, transform: impl Fn(f64) -> f64) -> StepCdf {
    // Rewards never exceed TOP_VALUE; should an atom lie above it anyway, the
    // residual goes to that atom so no mass moves downward.
    let top = TOP_VALUE.max(emp.max_atom());
    let mut atoms = Vec::with_capacity(emp.len() + 1);
    let mut masses = Vec::with_capacity(emp.len() + 1);
    let mut prev = 0.0_f64;
    for (&a, &y) in emp.atoms.iter().zip(&emp.cumulative) {
        if a >= top {
            break;
        }
        let level = transform(y).clamp(0.0, 1.0).max(prev);
        if level > prev {
            atoms.push(a);
            masses.push(level - prev);
            prev = level;
        }
    }
    let residual = 1.0 - prev;
    if residual > 0.0 {
        atoms.push(top);
        masses.push(residual);
    }
    StepCdf::from_parts_unchecked(atoms, masses)
}

/// Optimistic distribution with CDF
/// `F(x) = max{0, y - sqrt(2y(1-y)L/m) - L/m}` for `x < 1` (where
/// `y = F_emp(x)`) and `F(1) = 1`.
pub fn bernstein_optimistic(emp: &StepCdf, budget: ConfidenceBudget) -> StepCdf {
    let k = budget.ratio();
    optimistic_with(emp, |y| bernstein_transform(y, k))
}

/// Optimistic distribution with CDF `F(x) = max{0, y - sqrt(L/m)}` for
/// `x < 1` and `F(1) = 1`.
pub fn flat_optimistic(emp: &StepCdf, budget: ConfidenceBudget) -> StepCdf {
    let k = budget.ratio();
    optimistic_with(emp, |y| flat_transform(y, k))
}

/// First-order stochastic dominance of `e` over `d`: `F_e <= F_d` (within
/// [`STRUCTURAL_TOL`]) on the merged atom set.
pub fn dominates(e: &StepCdf, d: &StepCdf) -> bool {
    e.atoms
        .iter()
        .chain(d.atoms.iter())
        .all(|&x| e.cdf_at(x) <= d.cdf_at(x) + STRUCTURAL_TOL)
}

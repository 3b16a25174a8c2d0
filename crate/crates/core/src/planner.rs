//! Monte Carlo sample sizes from the sup-norm concentration bound.
//!
//! With `K` assignments drawn with replacement, the estimated p-value function
//! satisfies `P(sup_θ |p̂_K(θ) - p(θ)| > ε) ≤ min(1, 4 exp(-K ε² / 8))`.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::inversion::PValueStepFunction;
use crate::randomization::{Mode, DEFAULT_CAP};

/// ε column of the standard threshold table.
pub const TABLE_EPSILONS: [f64; 7] = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
pub const DEFAULT_DELTA: f64 = 0.01;

pub fn error_bound(k: u64, epsilon: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok((4.0 * (-(k as f64) * epsilon * epsilon / 8.0).exp()).min(1.0))
}

/// Smallest `K` with `4 exp(-K ε² / 8) ≤ δ`.
pub fn required_k(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    let x = 8.0 * (4.0 / delta).ln() / (epsilon * epsilon);
    let mut k = ((x * (1.0 - 1e-9)).ceil() as u64).max(1);
    while error_bound(k, epsilon)? > delta {
        k += 1;
    }
    while k > 1 && error_bound(k - 1, epsilon)? <= delta {
        k -= 1;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Enumerate,
    Sample { k: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPlan {
    #[serde(flatten)]
    pub strategy: Strategy,
    pub epsilon: f64,
    pub delta: f64,
    pub k_threshold: u64,
}

impl McPlan {
    /// Execution mode for the plan. Enumeration keeps the default cap unless
    /// the design needs more.
    pub fn mode(&self, seed: u64) -> Result<Mode> {
        Ok(match self.strategy {
            Strategy::Enumerate => Mode::Exact {
                cap: DEFAULT_CAP.max(self.k_threshold),
            },
            Strategy::Sample { k } => Mode::MonteCarlo {
                k: usize::try_from(k).map_err(|_| Error::InvalidArgument(format!("K = {k} is too large")))?,
                seed,
            },
        })
    }
}

/// Enumerate when the design has at most `required_k(ε, δ)` assignments,
/// otherwise sample that many.
pub fn plan(design: &Design, epsilon: f64, delta: f64) -> Result<McPlan> {
    let k_threshold = required_k(epsilon, delta)?;
    let strategy = if design.total_assignments() <= BigUint::from(k_threshold) {
        Strategy::Enumerate
    } else {
        Strategy::Sample { k: k_threshold }
    };
    Ok(McPlan {
        strategy,
        epsilon,
        delta,
        k_threshold,
    })
}

/// `(ε, K)` rows for a threshold table.
pub fn threshold_table(epsilons: &[f64], delta: f64) -> Result<Vec<(f64, u64)>> {
    epsilons.iter().map(|&e| Ok((e, required_k(e, delta)?))).collect()
}

/// `sup_θ |a(θ) - b(θ)|` for two step functions. Both are constant between
/// consecutive members of the union of their breakpoints, so the sup is
/// attained at a breakpoint, just below one, or at ±∞.
pub fn sup_norm_distance(a: &PValueStepFunction, b: &PValueStepFunction) -> f64 {
    let mut points: Vec<f64> = a
        .breakpoints()
        .iter()
        .chain(b.breakpoints())
        .copied()
        .filter(|t| t.is_finite())
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let gap = |t: f64| (a.eval(t) - b.eval(t)).abs();
    points
        .iter()
        .flat_map(|&t| [t, t.next_down()])
        .chain([f64::NEG_INFINITY, f64::INFINITY])
        .map(gap)
        .fold(0.0, f64::max)
}

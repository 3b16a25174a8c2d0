//! Test statistics and imputation of potential outcomes under sharp nulls.
//!
//! Under `H0(θ)` every unit has effect `θ`, so the observed data determine the
//! full potential-outcome table:
//!
//! ```text
//! y1_i = y_i          if unit i was treated, else y_i + θ
//! y0_i = y_i - θ      if unit i was treated, else y_i
//! ```
//!
//! A statistic is evaluated on the dataset that an assignment `w` would have
//! revealed from that table. All built-ins use `large_favor_plus = true`:
//! large values point toward a positive effect.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design::{Assignment, Design};
use crate::error::{Error, Result};
use crate::rng;

/// One experiment's observed assignment and outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    w: Assignment,
    y: Vec<f64>,
    block_labels: Option<Vec<String>>,
}

impl ObservedData {
    pub fn new(w: Assignment, y: Vec<f64>) -> Result<Self> {
        if w.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: w.len(),
                found: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("outcome {i} is not finite")));
        }
        Ok(Self {
            w,
            y,
            block_labels: None,
        })
    }

    /// Builds from plain slices; `w` entries must be 0 or 1.
    pub fn from_vecs(w: &[u8], y: &[f64]) -> Result<Self> {
        Self::new(Assignment::new(w.to_vec())?, y.to_vec())
    }

    pub fn with_block_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.y.len() {
            return Err(Error::LengthMismatch {
                expected: self.y.len(),
                found: labels.len(),
            });
        }
        self.block_labels = Some(labels);
        Ok(self)
    }

    pub fn w(&self) -> &Assignment {
        &self.w
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn block_labels(&self) -> Option<&[String]> {
        self.block_labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Largest absolute outcome (at least 1); the natural unit for tolerances.
    pub fn scale(&self) -> f64 {
        self.y.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }

    /// Errors unless the observed assignment is one the design can produce.
    pub fn check_design(&self, design: &Design) -> Result<()> {
        if design.n_units() != self.n() {
            return Err(Error::LengthMismatch {
                expected: design.n_units(),
                found: self.n(),
            });
        }
        if !design.admits(&self.w) {
            return Err(Error::InvalidData(format!(
                "observed assignment does not satisfy design {design}"
            )));
        }
        Ok(())
    }

    /// Outcomes that assignment `w` would reveal under `H0(θ)`.
    pub fn realize_into(&self, theta: f64, w: &Assignment, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.y.iter().enumerate().map(|(i, &y)| {
            match (w.is_treated(i), self.w.is_treated(i)) {
                (true, false) => y + theta,
                (false, true) => y - theta,
                _ => y,
            }
        }));
    }

    pub fn realize(&self, theta: f64, w: &Assignment) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n());
        self.realize_into(theta, w, &mut out);
        out
    }
}

/// Potential-outcome table imputed under a sharp null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedOutcomes {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    pub theta: f64,
}

impl ImputedOutcomes {
    /// Outcomes revealed by `w`.
    pub fn realize(&self, w: &Assignment) -> Vec<f64> {
        (0..self.y1.len())
            .map(|i| if w.is_treated(i) { self.y1[i] } else { self.y0[i] })
            .collect()
    }
}

/// A full potential-outcome table (a population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomes {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl PotentialOutcomes {
    pub fn new(y1: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        if y1.len() != y0.len() {
            return Err(Error::LengthMismatch {
                expected: y1.len(),
                found: y0.len(),
            });
        }
        if y1.iter().chain(&y0).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("potential outcomes must be finite".into()));
        }
        Ok(Self { y1, y0 })
    }

    /// `y1 = y0 + θ`.
    pub fn additive(y0: Vec<f64>, theta: f64) -> Result<Self> {
        Self::new(y0.iter().map(|v| v + theta).collect(), y0)
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }

    /// The data an experiment with assignment `w` would reveal.
    pub fn observe(&self, w: &Assignment) -> Result<ObservedData> {
        let y = (0..self.n())
            .map(|i| if w.is_treated(i) { self.y1[i] } else { self.y0[i] })
            .collect();
        ObservedData::new(w.clone(), y)
    }
}

pub fn impute(data: &ObservedData, theta: f64) -> Result<ImputedOutcomes> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be finite, got {theta}")));
    }
    let (mut y1, mut y0) = (Vec::with_capacity(data.n()), Vec::with_capacity(data.n()));
    for (i, &y) in data.y.iter().enumerate() {
        if data.w.is_treated(i) {
            y1.push(y);
            y0.push(y - theta);
        } else {
            y1.push(y + theta);
            y0.push(y);
        }
    }
    Ok(ImputedOutcomes { y1, y0, theta })
}

/// User-supplied statistic: realized outcomes and assignment to a value.
pub type StatisticFn = dyn Fn(&[f64], &Assignment) -> Result<f64> + Send + Sync;

#[derive(Clone)]
pub enum StatisticKind {
    DiffMeans,
    Studentized,
    WilcoxonRankSum,
    Custom(Arc<StatisticFn>),
}

impl fmt::Debug for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::DiffMeans => f.write_str("DiffMeans"),
            StatisticKind::Studentized => f.write_str("Studentized"),
            StatisticKind::WilcoxonRankSum => f.write_str("WilcoxonRankSum"),
            StatisticKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A named test statistic and what is known about its monotonicity.
#[derive(Debug, Clone)]
pub struct StatisticSpec {
    name: String,
    large_favor_plus: bool,
    ei_certified: bool,
    theta_monotone_rightcontinuous: bool,
    kind: StatisticKind,
}

pub const REGISTERED: [&str; 3] = ["diff_means", "studentized", "wilcoxon_rank_sum"];

impl StatisticSpec {
    /// Treated mean minus control mean, pooled over blocks.
    pub fn diff_means() -> Self {
        Self::builtin("diff_means", true, StatisticKind::DiffMeans)
    }

    /// Difference in means over `sqrt(s1²/n1 + s0²/n0)`. Not effect-increasing.
    pub fn studentized() -> Self {
        Self::builtin("studentized", false, StatisticKind::Studentized)
    }

    /// Sum of treated-arm midranks among all units.
    pub fn wilcoxon_rank_sum() -> Self {
        Self::builtin("wilcoxon_rank_sum", true, StatisticKind::WilcoxonRankSum)
    }

    fn builtin(name: &str, ei: bool, kind: StatisticKind) -> Self {
        Self {
            name: name.into(),
            large_favor_plus: true,
            ei_certified: ei,
            theta_monotone_rightcontinuous: ei,
            kind,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "diff_means" => Ok(Self::diff_means()),
            "studentized" => Ok(Self::studentized()),
            "wilcoxon_rank_sum" | "wilcoxon" => Ok(Self::wilcoxon_rank_sum()),
            other => Err(Error::InvalidArgument(format!(
                "unknown statistic `{other}`; expected one of {}",
                REGISTERED.join(", ")
            ))),
        }
    }

    /// Uncertified user statistic. Use [`StatisticSpec::certify`] before
    /// inverting it.
    pub fn custom<F>(name: &str, large_favor_plus: bool, f: F) -> Self
    where
        F: Fn(&[f64], &Assignment) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            large_favor_plus,
            ei_certified: false,
            theta_monotone_rightcontinuous: false,
            kind: StatisticKind::Custom(Arc::new(f)),
        }
    }

    /// Marks the statistic effect-increasing if the probe finds no
    /// counterexample; returns the counterexample otherwise.
    pub fn certify(
        mut self,
        data: &ObservedData,
        design: &Design,
        trials: usize,
        seed: u64,
    ) -> std::result::Result<Self, EiVerdict> {
        match ei_probe(&self, data, design, trials, seed) {
            verdict @ EiVerdict::Counterexample { .. } => Err(verdict),
            EiVerdict::ConsistentWithEi { .. } => {
                self.ei_certified = true;
                self.theta_monotone_rightcontinuous = true;
                Ok(self)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn large_favor_plus(&self) -> bool {
        self.large_favor_plus
    }

    pub fn ei_certified(&self) -> bool {
        self.ei_certified
    }

    pub fn theta_monotone_rightcontinuous(&self) -> bool {
        self.theta_monotone_rightcontinuous
    }

    pub fn kind(&self) -> &StatisticKind {
        &self.kind
    }

    pub fn is_diff_means(&self) -> bool {
        matches!(self.kind, StatisticKind::DiffMeans)
    }

    /// Value of the statistic on realized outcomes `y` under assignment `w`.
    pub fn compute(&self, y: &[f64], w: &Assignment) -> Result<f64> {
        match &self.kind {
            StatisticKind::DiffMeans => Ok(diff_means(y, w)),
            StatisticKind::Studentized => studentized(y, w),
            StatisticKind::WilcoxonRankSum => Ok(wilcoxon_rank_sum(y, w)),
            StatisticKind::Custom(f) => f(y, w),
        }
    }

    /// [`compute`](Self::compute) oriented so that large values favor a
    /// positive effect.
    pub fn directed(&self, y: &[f64], w: &Assignment) -> Result<f64> {
        let t = self.compute(y, w)?;
        if !t.is_finite() {
            return Err(Error::DegenerateStatistic(format!(
                "{} evaluated to {t}",
                self.name
            )));
        }
        Ok(if self.large_favor_plus { t } else { -t })
    }
}

pub fn evaluate(stat: &StatisticSpec, imputed: &ImputedOutcomes, w: &Assignment) -> Result<f64> {
    if w.len() != imputed.y1.len() {
        return Err(Error::LengthMismatch {
            expected: imputed.y1.len(),
            found: w.len(),
        });
    }
    stat.compute(&imputed.realize(w), w)
}

fn arm_sums(y: &[f64], w: &Assignment) -> (f64, usize, f64, usize) {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0, 0.0, 0);
    for (i, &v) in y.iter().enumerate() {
        if w.is_treated(i) {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    (s1, n1, s0, n0)
}

pub fn diff_means(y: &[f64], w: &Assignment) -> f64 {
    let (s1, n1, s0, n0) = arm_sums(y, w);
    s1 / n1 as f64 - s0 / n0 as f64
}

pub fn studentized(y: &[f64], w: &Assignment) -> Result<f64> {
    let (s1, n1, s0, n0) = arm_sums(y, w);
    if n1 < 2 || n0 < 2 {
        return Err(Error::DegenerateStatistic(format!(
            "studentized statistic needs at least 2 units per arm, got {n1} and {n0}"
        )));
    }
    let (m1, m0) = (s1 / n1 as f64, s0 / n0 as f64);
    let (mut ss1, mut ss0) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        if w.is_treated(i) {
            ss1 += (v - m1) * (v - m1);
        } else {
            ss0 += (v - m0) * (v - m0);
        }
    }
    let var1 = ss1 / (n1 - 1) as f64;
    let var0 = ss0 / (n0 - 1) as f64;
    let se2 = var1 / n1 as f64 + var0 / n0 as f64;
    if se2 <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "both arm variances are zero".into(),
        ));
    }
    Ok((m1 - m0) / se2.sqrt())
}

pub fn wilcoxon_rank_sum(y: &[f64], w: &Assignment) -> f64 {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && y[order[end]] == y[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let midrank = (start + 1 + end) as f64 / 2.0;
        sum += midrank * order[start..end].iter().filter(|&&i| w.is_treated(i)).count() as f64;
        start = end;
    }
    sum
}

/// Which potential outcome a probe perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treatment,
    Control,
}

/// Outcome of [`ei_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EiVerdict {
    ConsistentWithEi {
        trials: usize,
    },
    Counterexample {
        trial: usize,
        unit: usize,
        arm: Arm,
        theta: f64,
        delta: f64,
        assignment: String,
        before: f64,
        after: f64,
    },
}

impl EiVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, EiVerdict::ConsistentWithEi { .. })
    }
}

/// Randomized search for a violation of the effect-increasing property.
///
/// Each trial imputes the table at a random `θ`, draws an assignment, picks a
/// unit and either raises its treatment potential or lowers its control
/// potential. An EI statistic never decreases under either move. Trial `t`
/// uses random stream `t` of `seed`. Statistic evaluation failures count as
/// skipped trials.
pub fn ei_probe(
    stat: &StatisticSpec,
    data: &ObservedData,
    design: &Design,
    trials: usize,
    seed: u64,
) -> EiVerdict {
    let sampler = design.sampler();
    let scale = data.scale();
    let n = data.n();
    for trial in 0..trials {
        let mut rng = rng::stream(seed, trial as u64);
        let theta = (2.0 * rng::uniform01(&mut rng) - 1.0) * scale;
        let Ok(mut table) = impute(data, theta) else {
            continue;
        };
        let w = sampler.draw_with(&mut rng);
        let unit = rng::below_u64(&mut rng, n as u64) as usize;
        // magnitudes from 1e-3 to 1e3 times the data scale
        let delta = scale * 10f64.powf(6.0 * rng::uniform01(&mut rng) - 3.0);
        let arm = if w.is_treated(unit) {
            Arm::Treatment
        } else {
            Arm::Control
        };
        let Ok(before) = stat.directed(&table.realize(&w), &w) else {
            continue;
        };
        match arm {
            Arm::Treatment => table.y1[unit] += delta,
            Arm::Control => table.y0[unit] -= delta,
        }
        let Ok(after) = stat.directed(&table.realize(&w), &w) else {
            continue;
        };
        if after < before - 1e-12 * before.abs().max(1.0) {
            return EiVerdict::Counterexample {
                trial,
                unit,
                arm,
                theta,
                delta,
                assignment: w.to_string(),
                before,
                after,
            };
        }
    }
    EiVerdict::ConsistentWithEi { trials }
}

//! Randomization distributions and p-values for sharp nulls.
//!
//! A [`RandomizationTest`] fixes the data, design, statistic and reference
//! set of assignments (every assignment in exact mode, `K` seeded draws in
//! Monte Carlo mode). Every probability it reports is an integer count over
//! the reference set divided by its size, so results do not depend on thread
//! count or summation order.
//!
//! Ties between a replicated statistic and the observed one are decided on
//! quantized keys: values are rounded to a grid of spacing
//! `q = 10^(floor(log10 R) - 11)` where `R` is the larger of `|T_obs|` and the
//! largest absolute outcome. That is 12 significant digits at the data's own
//! scale, and the rounding is monotone, which the step-function
//! representation relies on.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Assignment, Design};
use crate::error::{Error, Result};
use crate::statistics::{ObservedData, PotentialOutcomes, StatisticSpec};

/// Default enumeration cap for exact mode.
pub const DEFAULT_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    /// Every assignment, provided there are at most `cap`.
    Exact { cap: u64 },
    /// `k` uniform draws with replacement; draw `j` depends on `(seed, j)` only.
    MonteCarlo { k: usize, seed: u64 },
}

impl Mode {
    pub fn exact() -> Self {
        Mode::Exact { cap: DEFAULT_CAP }
    }

    pub fn mc(k: usize, seed: u64) -> Self {
        Mode::MonteCarlo { k, seed }
    }

    /// Exact when the design has at most `k_cap` assignments, else `k_cap` draws.
    pub fn auto(design: &Design, k_cap: usize, seed: u64) -> Self {
        match design.total_assignments_u64() {
            Some(total) if total <= k_cap as u64 => Mode::Exact { cap: k_cap as u64 },
            _ => Mode::mc(k_cap, seed),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Mode::Exact { .. } => "exact",
            Mode::MonteCarlo { .. } => "mc",
        }
    }

    /// The reference set of assignments this mode ranges over.
    pub fn assignments(&self, design: &Design) -> Result<Vec<Assignment>> {
        match *self {
            Mode::Exact { cap } => Ok(design.enumerate(cap)?.collect()),
            Mode::MonteCarlo { k, seed } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("Monte Carlo size K must be positive".into()));
                }
                let sampler = design.sampler();
                Ok((0..k as u64)
                    .into_par_iter()
                    .map(|j| sampler.draw(seed, j))
                    .collect())
            }
        }
    }
}

/// Monotone rounding used for tie detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieQuantizer {
    q: f64,
}

impl TieQuantizer {
    /// Quantum for reference magnitude `r` (1 when `r` is zero).
    pub fn for_magnitude(r: f64) -> Self {
        let r = if r > 0.0 && r.is_finite() { r } else { 1.0 };
        Self {
            q: 10f64.powi(r.log10().floor() as i32 - 11),
        }
    }

    pub fn for_data(data: &ObservedData, t_obs: f64) -> Self {
        let r = data.y().iter().fold(t_obs.abs(), |m, v| m.max(v.abs()));
        Self::for_magnitude(r)
    }

    pub fn quantum(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn key(&self, x: f64) -> f64 {
        (x / self.q).round()
    }
}

/// Which p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PValueKind {
    /// `P(T_rep >= T_obs)`
    Lplus,
    /// `P(T_rep > T_obs)`
    Uplus,
    /// `P(T_rep <= T_obs)`
    Lminus,
    /// `P(T_rep < T_obs)`
    Uminus,
    /// `min(1, 2 min(Lplus, Lminus))`
    TwoSidedL,
}

impl PValueKind {
    pub const ONE_SIDED: [PValueKind; 4] = [
        PValueKind::Lplus,
        PValueKind::Uplus,
        PValueKind::Lminus,
        PValueKind::Uminus,
    ];

    pub fn is_lower(&self) -> bool {
        matches!(self, PValueKind::Lplus | PValueKind::Lminus | PValueKind::TwoSidedL)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PValueKind::Lplus => "Lplus",
            PValueKind::Uplus => "Uplus",
            PValueKind::Lminus => "Lminus",
            PValueKind::Uminus => "Uminus",
            PValueKind::TwoSidedL => "TwoSidedL",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lplus" | "l+" => Ok(PValueKind::Lplus),
            "uplus" | "u+" => Ok(PValueKind::Uplus),
            "lminus" | "l" => Ok(PValueKind::Lminus),
            "uminus" | "u" => Ok(PValueKind::Uminus),
            "twosided" | "twosidedl" => Ok(PValueKind::TwoSidedL),
            _ => Err(Error::InvalidArgument(format!("unknown p-value kind `{s}`"))),
        }
    }
}

/// Tail counts of the replicated statistic around `T_obs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailCounts {
    pub greater: u64,
    pub equal: u64,
    pub less: u64,
}

impl TailCounts {
    pub fn total(&self) -> u64 {
        self.greater + self.equal + self.less
    }

    pub fn count(&self, kind: PValueKind) -> u64 {
        match kind {
            PValueKind::Lplus => self.greater + self.equal,
            PValueKind::Uplus => self.greater,
            PValueKind::Lminus => self.less + self.equal,
            PValueKind::Uminus => self.less,
            PValueKind::TwoSidedL => self.count(PValueKind::Lplus).min(self.count(PValueKind::Lminus)),
        }
    }

    pub fn p(&self, kind: PValueKind) -> f64 {
        let p = ratio(self.count(kind), self.total());
        match kind {
            PValueKind::TwoSidedL => (2.0 * p).min(1.0),
            _ => p,
        }
    }
}

/// `count / total` as the crate computes every probability.
#[inline]
pub fn ratio(count: u64, total: u64) -> f64 {
    count as f64 / total as f64
}

/// All five p-values at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub theta: f64,
    pub t_obs: f64,
    pub lplus: f64,
    pub uplus: f64,
    pub lminus: f64,
    pub uminus: f64,
    pub two_sided: f64,
    pub counts: TailCounts,
}

impl PValues {
    fn from_counts(theta: f64, t_obs: f64, counts: TailCounts) -> Self {
        Self {
            theta,
            t_obs,
            lplus: counts.p(PValueKind::Lplus),
            uplus: counts.p(PValueKind::Uplus),
            lminus: counts.p(PValueKind::Lminus),
            uminus: counts.p(PValueKind::Uminus),
            two_sided: counts.p(PValueKind::TwoSidedL),
            counts,
        }
    }

    pub fn get(&self, kind: PValueKind) -> f64 {
        match kind {
            PValueKind::Lplus => self.lplus,
            PValueKind::Uplus => self.uplus,
            PValueKind::Lminus => self.lminus,
            PValueKind::Uminus => self.uminus,
            PValueKind::TwoSidedL => self.two_sided,
        }
    }
}

/// Law of the statistic over the reference set at one `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationDistribution {
    /// Sorted distinct levels (after tie quantization).
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub counts: Vec<u64>,
    pub gamma_star: f64,
    pub mode: Mode,
}

/// Prepared randomization test: data, design, statistic and reference set.
#[derive(Debug, Clone)]
pub struct RandomizationTest {
    data: ObservedData,
    design: Design,
    stat: StatisticSpec,
    mode: Mode,
    assignments: Arc<[Assignment]>,
    t_obs: f64,
    quantizer: TieQuantizer,
}

impl RandomizationTest {
    pub fn new(data: &ObservedData, design: &Design, stat: &StatisticSpec, mode: Mode) -> Result<Self> {
        data.check_design(design)?;
        let assignments = mode.assignments(design)?;
        Self::with_assignments(data, design, stat, mode, assignments.into())
    }

    /// Uses a caller-supplied reference set, each member weighted `1/K`.
    /// The set can be shared between tests of many datasets.
    pub fn with_assignments(
        data: &ObservedData,
        design: &Design,
        stat: &StatisticSpec,
        mode: Mode,
        assignments: Arc<[Assignment]>,
    ) -> Result<Self> {
        data.check_design(design)?;
        if assignments.is_empty() {
            return Err(Error::InvalidArgument("empty reference set".into()));
        }
        if let Some(bad) = assignments.iter().find(|w| w.len() != data.n()) {
            return Err(Error::LengthMismatch {
                expected: data.n(),
                found: bad.len(),
            });
        }
        let t_obs = stat.directed(data.y(), data.w())?;
        Ok(Self {
            quantizer: TieQuantizer::for_data(data, t_obs),
            data: data.clone(),
            design: design.clone(),
            stat: stat.clone(),
            mode,
            assignments,
            t_obs,
        })
    }

    pub fn data(&self) -> &ObservedData {
        &self.data
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn stat(&self) -> &StatisticSpec {
        &self.stat
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    /// Same design, statistic and reference set applied to other data.
    pub fn with_data(&self, data: &ObservedData) -> Result<Self> {
        Self::with_assignments(data, &self.design, &self.stat, self.mode, self.assignments.clone())
    }

    pub fn k(&self) -> u64 {
        self.assignments.len() as u64
    }

    /// Observed statistic, oriented so that large values favor `θ > 0`.
    pub fn t_obs(&self) -> f64 {
        self.t_obs
    }

    pub fn quantizer(&self) -> TieQuantizer {
        self.quantizer
    }

    pub fn key_obs(&self) -> f64 {
        self.quantizer.key(self.t_obs)
    }

    /// Statistic under `H0(θ)` for assignment `w`.
    pub fn statistic(&self, theta: f64, w: &Assignment, buf: &mut Vec<f64>) -> Result<f64> {
        self.data.realize_into(theta, w, buf);
        self.stat.directed(buf, w)
    }

    /// Statistic under `H0(θ)` for every reference assignment, in order.
    pub fn statistics(&self, theta: f64) -> Result<Vec<f64>> {
        self.assignments
            .par_iter()
            .map_init(Vec::new, |buf, w| self.statistic(theta, w, buf))
            .collect()
    }

    pub fn tail_counts(&self, theta: f64) -> Result<TailCounts> {
        check_theta(theta)?;
        let key_obs = self.key_obs();
        let (greater, equal, less) = self
            .assignments
            .par_iter()
            .map_init(Vec::new, |buf, w| {
                let k = self.quantizer.key(self.statistic(theta, w, buf)?);
                Ok::<_, Error>(if k > key_obs {
                    (1u64, 0u64, 0u64)
                } else if k == key_obs {
                    (0, 1, 0)
                } else {
                    (0, 0, 1)
                })
            })
            .try_reduce(|| (0u64, 0u64, 0u64), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
        Ok(TailCounts { greater, equal, less })
    }

    pub fn p_values(&self, theta: f64) -> Result<PValues> {
        Ok(PValues::from_counts(theta, self.t_obs, self.tail_counts(theta)?))
    }

    pub fn p_value(&self, theta: f64, kind: PValueKind) -> Result<f64> {
        Ok(self.tail_counts(theta)?.p(kind))
    }

    pub fn distribution(&self, theta: f64) -> Result<RandomizationDistribution> {
        check_theta(theta)?;
        let mut keys: Vec<f64> = self
            .statistics(theta)?
            .into_iter()
            .map(|t| self.quantizer.key(t))
            .collect();
        keys.sort_by(f64::total_cmp);
        let mut values = Vec::new();
        let mut counts = Vec::new();
        for k in keys {
            if values.last() == Some(&k) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(k);
                counts.push(1u64);
            }
        }
        let total = self.k();
        let probs: Vec<f64> = counts.iter().map(|&c| ratio(c, total)).collect();
        Ok(RandomizationDistribution {
            values: values.iter().map(|k| k * self.quantizer.q).collect(),
            gamma_star: ratio(*counts.iter().max().unwrap(), total),
            probs,
            counts,
            mode: self.mode,
        })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta must be finite, got {theta}")))
    }
}

pub fn randomization_distribution(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    theta: f64,
    mode: Mode,
) -> Result<RandomizationDistribution> {
    RandomizationTest::new(data, design, stat, mode)?.distribution(theta)
}

pub fn p_value(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    theta: f64,
    kind: PValueKind,
    mode: Mode,
) -> Result<f64> {
    RandomizationTest::new(data, design, stat, mode)?.p_value(theta, kind)
}

/// One point of a p-value's exact CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub cdf: f64,
    pub alpha_count: u64,
    pub cdf_count: u64,
}

/// Exact sampling law of one p-value kind at the true `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindProfile {
    pub kind: PValueKind,
    pub points: Vec<ProfilePoint>,
    /// Lower kinds: `P(p <= a) <= a` for all `a`. Upper kinds: `P(p <= a) >= a`.
    pub dominance_holds: bool,
    /// Lower kinds: `sup_a (a - P(p <= a))`. Upper kinds: `sup_a (P(p <= a) - a)`.
    pub max_discrepancy: f64,
}

/// Exact CDFs of the one-sided p-values, treating each assignment as observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceProfile {
    pub total: u64,
    pub gamma_star: f64,
    pub kinds: Vec<KindProfile>,
}

impl DominanceProfile {
    pub fn kind(&self, kind: PValueKind) -> Option<&KindProfile> {
        self.kinds.iter().find(|k| k.kind == kind)
    }

    pub fn all_hold(&self) -> bool {
        self.kinds.iter().all(|k| k.dominance_holds)
    }
}

/// Exact p-value laws at `θ0`; the table is imputed from `data` under `H0(θ0)`.
pub fn dominance_profile(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    theta0: f64,
) -> Result<DominanceProfile> {
    data.check_design(design)?;
    let imputed = crate::statistics::impute(data, theta0)?;
    let table = PotentialOutcomes::new(imputed.y1, imputed.y0)?;
    population_dominance_profile(&table, design, stat, DEFAULT_CAP)
}

/// Statistic values for every assignment applied to a fixed population,
/// with the quantizer used to key them.
pub(crate) fn population_statistics(
    population: &PotentialOutcomes,
    assignments: &[Assignment],
    stat: &StatisticSpec,
) -> Result<(Vec<f64>, TieQuantizer)> {
    let values: Vec<f64> = assignments
        .par_iter()
        .map(|w| {
            let y: Vec<f64> = (0..population.n())
                .map(|i| if w.is_treated(i) { population.y1[i] } else { population.y0[i] })
                .collect();
            stat.directed(&y, w)
        })
        .collect::<Result<_>>()?;
    let r = values
        .iter()
        .chain(&population.y1)
        .chain(&population.y0)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((values, TieQuantizer::for_magnitude(r)))
}

pub fn population_dominance_profile(
    population: &PotentialOutcomes,
    design: &Design,
    stat: &StatisticSpec,
    cap: u64,
) -> Result<DominanceProfile> {
    if population.n() != design.n_units() {
        return Err(Error::LengthMismatch {
            expected: design.n_units(),
            found: population.n(),
        });
    }
    let assignments: Vec<Assignment> = design.enumerate(cap)?.collect();
    let (values, quantizer) = population_statistics(population, &assignments, stat)?;
    let mut keys: Vec<f64> = values.iter().map(|&t| quantizer.key(t)).collect();
    let total = keys.len() as u64;
    let unsorted = keys.clone();
    keys.sort_by(f64::total_cmp);

    // every assignment sees the same reference law, so p-values are ranks
    let below = |k: f64| keys.partition_point(|&x| x < k) as u64;
    let at_most = |k: f64| keys.partition_point(|&x| x <= k) as u64;
    let mut per_kind: Vec<Vec<u64>> = vec![Vec::with_capacity(keys.len()); 4];
    for &k in &unsorted {
        let (lt, le) = (below(k), at_most(k));
        per_kind[0].push(total - lt);
        per_kind[1].push(total - le);
        per_kind[2].push(le);
        per_kind[3].push(lt);
    }

    let mut gamma_count = 0u64;
    let mut run = 0u64;
    for (i, k) in keys.iter().enumerate() {
        run = if i > 0 && keys[i - 1] == *k { run + 1 } else { 1 };
        gamma_count = gamma_count.max(run);
    }

    let kinds = PValueKind::ONE_SIDED
        .iter()
        .zip(per_kind)
        .map(|(&kind, counts)| kind_profile(kind, counts, total))
        .collect();
    Ok(DominanceProfile {
        total,
        gamma_star: ratio(gamma_count, total),
        kinds,
    })
}

fn kind_profile(kind: PValueKind, mut counts: Vec<u64>, total: u64) -> KindProfile {
    counts.sort_unstable();
    let mut points: Vec<ProfilePoint> = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        let cdf_count = i as u64 + 1;
        match points.last_mut() {
            Some(p) if p.alpha_count == c => {
                p.cdf_count = cdf_count;
                p.cdf = ratio(cdf_count, total);
            }
            _ => points.push(ProfilePoint {
                alpha: ratio(c, total),
                cdf: ratio(cdf_count, total),
                alpha_count: c,
                cdf_count,
            }),
        }
    }
    // F is a right-continuous step function; each sup is attained on
    // [a_i, a_{i+1}) with a_0 = 0 and a_{m+1} = 1.
    let next = |i: usize| points.get(i + 1).map_or(total, |p| p.alpha_count);
    let (holds, worst) = if kind.is_lower() {
        let holds = points.iter().all(|p| p.cdf_count <= p.alpha_count);
        let mut worst = points[0].alpha_count as i64;
        for (i, p) in points.iter().enumerate() {
            worst = worst.max(next(i) as i64 - p.cdf_count as i64);
        }
        (holds, worst)
    } else {
        let holds = points[0].alpha_count == 0
            && points.iter().enumerate().all(|(i, p)| p.cdf_count >= next(i));
        let worst = points
            .iter()
            .map(|p| p.cdf_count as i64 - p.alpha_count as i64)
            .max()
            .unwrap_or(0);
        (holds, worst)
    };
    KindProfile {
        kind,
        points,
        dominance_holds: holds,
        max_discrepancy: worst.max(0) as f64 / total as f64,
    }
}

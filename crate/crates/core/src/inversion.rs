//! Exact p-value functions of `θ` and their inversion into intervals.
//!
//! For each reference assignment the indicator `T(θ) ≥ T_obs` switches on at
//! one point `τ+` and `T(θ) ≤ T_obs` switches off after one point `τ−`
//! (statistics here are monotone in `θ`). With `K` assignments:
//!
//! ```text
//! L+(θ) = #{τ+ ≤ θ} / K        U+(θ) = #{τ− < θ} / K
//! L−(θ) = #{τ− ≥ θ} / K        U−(θ) = #{τ+ > θ} / K
//! ```
//!
//! so each function is a step function stored as sorted breakpoints with
//! integer counts. Evaluating it at any `θ` gives exactly what a direct
//! [`RandomizationTest::p_values`] call returns.
//!
//! For the difference in means the statistic is affine in `θ`, so the
//! breakpoints have a closed form, checked against bisection on every build.
//! Other statistics are bisected on the ordered bit patterns of `f64`, which
//! lands on the exact floating-point transition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Assignment, Design};
use crate::error::{Error, Result};
use crate::randomization::{ratio, Mode, PValueKind, RandomizationTest};
use crate::statistics::{ObservedData, StatisticSpec};

const MAX_DOUBLINGS: usize = 200;
const SELF_CHECK_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Number of assignments on which closed-form breakpoints are compared
    /// with bisection. Zero disables the check.
    pub self_check: usize,
    /// Move closed-form breakpoints onto the exact floating-point
    /// transitions of the statistic. Without it they may sit a few ulps off.
    pub polish: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            self_check: SELF_CHECK_SAMPLE,
            polish: true,
        }
    }
}

/// Switch points of every reference assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints {
    /// First `θ` with `T(θ) ≥ T_obs`.
    pub tau_plus: Vec<f64>,
    /// Last `θ` with `T(θ) ≤ T_obs`.
    pub tau_minus: Vec<f64>,
}

impl Breakpoints {
    pub fn compute(test: &RandomizationTest, opts: &BuildOptions) -> Result<Self> {
        let stat = test.stat();
        if !stat.theta_monotone_rightcontinuous() {
            return Err(Error::NotMonotone {
                statistic: stat.name().to_string(),
            });
        }
        let pairs: Vec<(f64, f64)> = if stat.is_diff_means() {
            let guesses: Vec<(f64, f64)> = test
                .assignments()
                .par_iter()
                .map(|w| affine_guess(test, w))
                .collect();
            self_check(test, &guesses, opts.self_check)?;
            if !opts.polish {
                return Ok(Self::from_pairs(guesses));
            }
            test.assignments()
                .par_iter()
                .zip(guesses)
                .enumerate()
                .map_init(Vec::new, |buf, (i, (w, g))| affine_breakpoints(test, i, w, g, buf))
                .collect::<Result<_>>()?
        } else {
            test.assignments()
                .par_iter()
                .enumerate()
                .map_init(Vec::new, |buf, (i, w)| bisect_breakpoints(test, i, w, buf))
                .collect::<Result<_>>()?
        };
        Ok(Self::from_pairs(pairs))
    }

    fn from_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let (tau_plus, tau_minus) = pairs.into_iter().unzip();
        Self { tau_plus, tau_minus }
    }
}

/// Intercept and slope of `θ ↦ T(θ, w)` for the difference in means.
fn affine(test: &RandomizationTest, w: &Assignment) -> (f64, f64) {
    let data = test.data();
    let wo = data.w();
    let n = data.n();
    let (mut s1, mut s0) = (0.0, 0.0);
    let (mut switched_in, mut switched_out) = (0usize, 0usize);
    for (i, &y) in data.y().iter().enumerate() {
        match (w.is_treated(i), wo.is_treated(i)) {
            (true, obs) => {
                s1 += y;
                switched_in += usize::from(!obs);
            }
            (false, obs) => {
                s0 += y;
                switched_out += usize::from(obs);
            }
        }
    }
    let n1 = w.n_treated() as f64;
    let n0 = (n - w.n_treated()) as f64;
    (s1 / n1 - s0 / n0, switched_in as f64 / n1 + switched_out as f64 / n0)
}

fn affine_guess(test: &RandomizationTest, w: &Assignment) -> (f64, f64) {
    let (a, b) = affine(test, w);
    let quant = test.quantizer();
    let k = test.key_obs();
    if b == 0.0 {
        let ka = quant.key(a);
        let plus = if ka >= k { f64::NEG_INFINITY } else { f64::INFINITY };
        let minus = if ka <= k { f64::INFINITY } else { f64::NEG_INFINITY };
        return (plus, minus);
    }
    let q = quant.quantum();
    (((k - 0.5) * q - a) / b, ((k + 0.5) * q - a) / b)
}

/// Closed-form breakpoints moved onto the exact transitions of the
/// floating-point statistic, so the step function agrees with direct
/// evaluation even at the breakpoints themselves.
fn affine_breakpoints(
    test: &RandomizationTest,
    index: usize,
    w: &Assignment,
    guess: (f64, f64),
    buf: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    let quant = test.quantizer();
    let k = test.key_obs();
    let mut key_at = |theta: f64| -> Result<f64> {
        test.statistic(theta, w, buf)
            .map(|t| quant.key(t))
            .map_err(|e| Error::BracketingFailed {
                index,
                reason: e.to_string(),
            })
    };
    let plus = if guess.0.is_finite() {
        gallop(guess.0, |t| Ok(key_at(t)? >= k))?
    } else {
        guess.0
    };
    let minus = if guess.1.is_finite() {
        before(gallop(guess.1, |t| Ok(key_at(t)? > k))?)
    } else {
        guess.1
    };
    Ok((plus, minus))
}

/// Largest double below `x` (identity on infinities).
fn before(x: f64) -> f64 {
    if x.is_finite() {
        from_ordinal(ordinal(x) - 1)
    } else {
        x
    }
}

/// First double where a non-decreasing predicate holds, searched outward
/// from `guess` with doubling steps.
fn gallop(guess: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let g = ordinal(guess) as i128;
    let lowest = ordinal(-f64::MAX) as i128;
    let highest = ordinal(f64::MAX) as i128;
    let mut step: i128 = 1;
    if pred(guess)? {
        let mut hi = guess;
        loop {
            let o = g - step;
            if o < lowest {
                if pred(-f64::MAX)? {
                    return Ok(f64::NEG_INFINITY);
                }
                return first_true(-f64::MAX, hi, pred);
            }
            let t = from_ordinal(o as i64);
            if !pred(t)? {
                return first_true(t, hi, pred);
            }
            hi = t;
            step *= 2;
        }
    } else {
        let mut lo = guess;
        loop {
            let o = g + step;
            if o > highest {
                if !pred(f64::MAX)? {
                    return Ok(f64::INFINITY);
                }
                return first_true(lo, f64::MAX, pred);
            }
            let t = from_ordinal(o as i64);
            if pred(t)? {
                return first_true(lo, t, pred);
            }
            lo = t;
            step *= 2;
        }
    }
}

fn self_check(test: &RandomizationTest, pairs: &[(f64, f64)], sample: usize) -> Result<()> {
    if sample == 0 {
        return Ok(());
    }
    let candidates: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].0.is_finite() && pairs[i].1.is_finite())
        .collect();
    if candidates.is_empty() {
        return Ok(());
    }
    let step = candidates.len().div_ceil(sample).max(1);
    let tol = 1e-9 * test.data().scale();
    candidates
        .par_iter()
        .step_by(step)
        .map_init(Vec::new, |buf, &i| {
            let (plus, minus) = bisect_breakpoints(test, i, &test.assignments()[i], buf)?;
            for (closed, bisected) in [(pairs[i].0, plus), (pairs[i].1, minus)] {
                if !((closed - bisected).abs() <= tol) {
                    return Err(Error::SelfCheckFailed {
                        index: i,
                        closed_form: closed,
                        bisection: bisected,
                    });
                }
            }
            Ok(())
        })
        .collect()
}

/// Position of `x` in the total order of finite doubles.
fn ordinal(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        i64::MIN - b
    } else {
        b
    }
}

fn from_ordinal(o: i64) -> f64 {
    if o < 0 {
        f64::from_bits((i64::MIN - o) as u64)
    } else {
        f64::from_bits(o as u64)
    }
}

/// Smallest double in `(lo, hi]` where a monotone predicate turns true,
/// given `pred(lo) = false` and `pred(hi) = true`.
fn first_true(mut lo: f64, mut hi: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    loop {
        let (a, b) = (ordinal(lo) as i128, ordinal(hi) as i128);
        if b - a <= 1 {
            return Ok(hi);
        }
        let mid = from_ordinal((a + (b - a) / 2) as i64);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Transition of a non-decreasing predicate: `-inf` if always true, `+inf` if
/// never true within the doubling range.
fn transition(start: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let mut lo = -start;
    let mut doublings = 0;
    while pred(lo)? {
        if doublings == MAX_DOUBLINGS {
            return Ok(f64::NEG_INFINITY);
        }
        lo *= 2.0;
        doublings += 1;
    }
    let mut hi = start;
    doublings = 0;
    while !pred(hi)? {
        if doublings == MAX_DOUBLINGS {
            return Ok(f64::INFINITY);
        }
        hi *= 2.0;
        doublings += 1;
    }
    first_true(lo, hi, pred)
}

fn bisect_breakpoints(
    test: &RandomizationTest,
    index: usize,
    w: &Assignment,
    buf: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    if w == test.data().w() {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let quant = test.quantizer();
    let k = test.key_obs();
    let y = test.data().y();
    let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let start = (2.0 * spread).max(1.0);
    let wrap = |e: Error| Error::BracketingFailed {
        index,
        reason: e.to_string(),
    };
    let mut key_at = |theta: f64| -> Result<f64> {
        Ok(quant.key(test.statistic(theta, w, buf).map_err(wrap)?))
    };
    let plus = transition(start, |t| Ok(key_at(t)? >= k))?;
    // last double where the statistic is still at or below the observed key
    let minus = before(transition(start, |t| Ok(key_at(t)? > k))?);
    Ok((plus, minus))
}

/// A one-sided p-value function of `θ` in exact step-function form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueStepFunction {
    kind: PValueKind,
    breakpoints: Vec<f64>,
    counts: Vec<u64>,
    /// Running totals of `counts`.
    cumulative: Vec<u64>,
    base: u64,
    total: u64,
}

impl PValueStepFunction {
    /// Builds the `kind` function from per-assignment switch points: `τ+` for
    /// `Lplus`/`Uminus`, `τ−` for `Uplus`/`Lminus`.
    pub fn from_switch_points(kind: PValueKind, taus: &[f64]) -> Result<Self> {
        if kind == PValueKind::TwoSidedL {
            return Err(Error::InvalidArgument(
                "two-sided p-values are not step functions of one side".into(),
            ));
        }
        let increasing = matches!(kind, PValueKind::Lplus | PValueKind::Uplus);
        let mut finite: Vec<f64> = taus.iter().copied().filter(|t| t.is_finite()).collect();
        let base = taus
            .iter()
            .filter(|t| {
                if increasing {
                    **t == f64::NEG_INFINITY
                } else {
                    **t == f64::INFINITY
                }
            })
            .count() as u64;
        finite.sort_by(f64::total_cmp);
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for t in finite {
            if breakpoints.last() == Some(&t) {
                *counts.last_mut().unwrap() += 1;
            } else {
                breakpoints.push(t);
                counts.push(1);
            }
        }
        let cumulative = counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            kind,
            breakpoints,
            counts,
            cumulative,
            base,
            total: taus.len() as u64,
        })
    }

    pub fn kind(&self) -> PValueKind {
        self.kind
    }

    pub fn is_increasing(&self) -> bool {
        matches!(self.kind, PValueKind::Lplus | PValueKind::Uplus)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of assignments switching at each breakpoint.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn weights(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| ratio(c, self.total)).collect()
    }

    /// Assignments whose indicator is on for every `θ`.
    pub fn base_count(&self) -> u64 {
        self.base
    }

    pub fn base(&self) -> f64 {
        ratio(self.base, self.total)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn finite_count(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    fn count_le(&self, theta: f64) -> u64 {
        let i = self.breakpoints.partition_point(|&t| t <= theta);
        if i == 0 {
            0
        } else {
            self.cumulative[i - 1]
        }
    }

    fn count_lt(&self, theta: f64) -> u64 {
        let i = self.breakpoints.partition_point(|&t| t < theta);
        if i == 0 {
            0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// Numerator of the p-value at `θ`.
    pub fn count_at(&self, theta: f64) -> u64 {
        self.base
            + match self.kind {
                PValueKind::Lplus => self.count_le(theta),
                PValueKind::Uplus => self.count_lt(theta),
                PValueKind::Lminus => self.finite_count() - self.count_lt(theta),
                PValueKind::Uminus => self.finite_count() - self.count_le(theta),
                PValueKind::TwoSidedL => unreachable!("rejected at construction"),
            }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        ratio(self.count_at(theta), self.total)
    }

    /// `(breakpoint, value at the breakpoint)` pairs; plot-ready.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        self.breakpoints.iter().map(|&t| (t, self.eval(t))).collect()
    }
}

/// The four one-sided step functions of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueFunctions {
    pub lplus: PValueStepFunction,
    pub uplus: PValueStepFunction,
    pub lminus: PValueStepFunction,
    pub uminus: PValueStepFunction,
    pub t_obs: f64,
    pub statistic: String,
    pub mode: Mode,
}

impl PValueFunctions {
    pub fn build(test: &RandomizationTest) -> Result<Self> {
        Self::build_with(test, &BuildOptions::default())
    }

    pub fn build_with(test: &RandomizationTest, opts: &BuildOptions) -> Result<Self> {
        let bp = Breakpoints::compute(test, opts)?;
        Ok(Self {
            lplus: PValueStepFunction::from_switch_points(PValueKind::Lplus, &bp.tau_plus)?,
            uplus: PValueStepFunction::from_switch_points(PValueKind::Uplus, &bp.tau_minus)?,
            lminus: PValueStepFunction::from_switch_points(PValueKind::Lminus, &bp.tau_minus)?,
            uminus: PValueStepFunction::from_switch_points(PValueKind::Uminus, &bp.tau_plus)?,
            t_obs: test.t_obs(),
            statistic: test.stat().name().to_string(),
            mode: test.mode(),
        })
    }

    pub fn get(&self, kind: PValueKind) -> Result<&PValueStepFunction> {
        match kind {
            PValueKind::Lplus => Ok(&self.lplus),
            PValueKind::Uplus => Ok(&self.uplus),
            PValueKind::Lminus => Ok(&self.lminus),
            PValueKind::Uminus => Ok(&self.uminus),
            PValueKind::TwoSidedL => Err(Error::InvalidArgument(
                "no step function for the two-sided p-value".into(),
            )),
        }
    }

    /// Proposed interval with tail levels `alpha1` (left) and `alpha2` (right).
    pub fn interval(&self, alpha1: f64, alpha2: f64) -> Result<ConfidenceInterval> {
        let lower = invert_lower(&self.lplus, alpha1)?;
        let upper = invert_upper(&self.lminus, alpha2)?;
        ConfidenceInterval::new(lower, upper, alpha1, alpha2, Method::Proposed, true, true)
            .map(|ci| ci.with_provenance(&self.statistic, Some(self.mode)))
    }

    /// Traditional interval at overall level `alpha`, from `Lplus` alone.
    pub fn traditional(&self, alpha: f64) -> Result<ConfidenceInterval> {
        check_level(alpha)?;
        let lower = invert_lower(&self.lplus, alpha / 2.0)?;
        let upper = first_reaching(&self.lplus, 1.0 - alpha / 2.0);
        ConfidenceInterval::new(lower, upper, alpha / 2.0, alpha / 2.0, Method::Traditional, true, false)
            .map(|ci| ci.with_provenance(&self.statistic, Some(self.mode)))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must be in (0, 1), got {alpha}")))
    }
}

fn expect_kind(f: &PValueStepFunction, kind: PValueKind) -> Result<()> {
    if f.kind == kind {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "expected a {} function, got {}",
            kind.name(),
            f.kind.name()
        )))
    }
}

/// `inf{θ : p(θ) ≥ level}` for a non-decreasing function.
fn first_reaching(f: &PValueStepFunction, level: f64) -> f64 {
    if ratio(f.base, f.total) >= level {
        return f64::NEG_INFINITY;
    }
    f.cumulative
        .iter()
        .position(|&c| ratio(f.base + c, f.total) >= level)
        .map_or(f64::INFINITY, |i| f.breakpoints[i])
}

/// `θ_ℓ(α1) = sup{θ : L+(θ) ≤ α1}`: the first breakpoint where `L+` exceeds
/// `α1`, `-inf` if it exceeds `α1` everywhere.
pub fn invert_lower(f: &PValueStepFunction, alpha1: f64) -> Result<f64> {
    expect_kind(f, PValueKind::Lplus)?;
    check_level(alpha1)?;
    if ratio(f.base, f.total) > alpha1 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(f
        .cumulative
        .iter()
        .position(|&c| ratio(f.base + c, f.total) > alpha1)
        .map_or(f64::INFINITY, |i| f.breakpoints[i]))
}

/// `θ_u(α2) = inf{θ : L−(θ) ≤ α2}`; `+inf` if `L−` exceeds `α2` everywhere.
pub fn invert_upper(f: &PValueStepFunction, alpha2: f64) -> Result<f64> {
    expect_kind(f, PValueKind::Lminus)?;
    check_level(alpha2)?;
    // L− equals base + (count of breakpoints ≥ θ); on (τ_{i-1}, τ_i] that is
    // base + finite - cumulative[i-1].
    let finite = f.finite_count();
    let value = |i: usize| f.base + finite - if i == 0 { 0 } else { f.cumulative[i - 1] };
    for i in 0..=f.breakpoints.len() {
        if ratio(value(i), f.total) <= alpha2 {
            return Ok(if i == 0 {
                f64::NEG_INFINITY
            } else {
                f.breakpoints[i - 1]
            });
        }
    }
    Ok(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Traditional,
    TraditionalGrid,
    Combined,
}

/// Interval estimate with its tail levels and provenance.
///
/// Proposed intervals are the acceptance region `{L+ > α1} ∩ {L− > α2}`,
/// which is closed at both ends because `L+` is right-continuous and `L−`
/// left-continuous in `θ`. Traditional intervals are `[θ_ℓ, θ_u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub method: Method,
    pub lower_closed: bool,
    pub upper_closed: bool,
    pub statistic: Option<String>,
    pub mode: Option<Mode>,
}

impl ConfidenceInterval {
    pub fn new(
        lower: f64,
        upper: f64,
        alpha1: f64,
        alpha2: f64,
        method: Method,
        lower_closed: bool,
        upper_closed: bool,
    ) -> Result<Self> {
        if lower > upper {
            return Err(Error::LevelTooHigh { lower, upper });
        }
        Ok(Self {
            lower,
            upper,
            alpha1,
            alpha2,
            method,
            lower_closed,
            upper_closed,
            statistic: None,
            mode: None,
        })
    }

    pub fn with_provenance(mut self, statistic: &str, mode: Option<Mode>) -> Self {
        self.statistic = Some(statistic.to_string());
        self.mode = mode;
        self
    }

    pub fn contains(&self, theta: f64) -> bool {
        let above = if self.lower_closed {
            theta >= self.lower
        } else {
            theta > self.lower
        };
        let below = if self.upper_closed {
            theta <= self.upper
        } else {
            theta < self.upper
        };
        above && below
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn alpha(&self) -> f64 {
        self.alpha1 + self.alpha2
    }
}

pub fn build_step_function(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    side: PValueKind,
    mode: Mode,
) -> Result<PValueStepFunction> {
    let test = RandomizationTest::new(data, design, stat, mode)?;
    let functions = PValueFunctions::build(&test)?;
    functions.get(side).cloned()
}

pub fn confidence_interval(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    alpha1: f64,
    alpha2: f64,
    mode: Mode,
) -> Result<ConfidenceInterval> {
    let test = RandomizationTest::new(data, design, stat, mode)?;
    PValueFunctions::build(&test)?.interval(alpha1, alpha2)
}

pub fn traditional_interval(
    data: &ObservedData,
    design: &Design,
    stat: &StatisticSpec,
    alpha: f64,
    mode: Mode,
) -> Result<ConfidenceInterval> {
    let test = RandomizationTest::new(data, design, stat, mode)?;
    PValueFunctions::build(&test)?.traditional(alpha)
}

/// Traditional inversion read off a coarse `θ` grid: the first grid point
/// whose `L+` exceeds `α/2` and the first whose `L+` reaches `1 − α/2`,
/// both reported as closed ends.
pub fn traditional_interval_on_grid(
    test: &RandomizationTest,
    alpha: f64,
    grid: &[f64],
) -> Result<ConfidenceInterval> {
    check_level(alpha)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    for &theta in &sorted {
        let p = test.p_value(theta, PValueKind::Lplus)?;
        if lower.is_infinite() && p > alpha / 2.0 {
            lower = theta;
        }
        if p >= 1.0 - alpha / 2.0 {
            upper = theta;
            break;
        }
    }
    ConfidenceInterval::new(lower, upper, alpha / 2.0, alpha / 2.0, Method::TraditionalGrid, true, true)
        .map(|ci| ci.with_provenance(test.stat().name(), Some(test.mode())))
}

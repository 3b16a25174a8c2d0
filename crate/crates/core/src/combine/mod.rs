//! Combining p-value functions of independent experiments.
//!
//! A combiner maps `M` p-values to `G_c(g_c(p))` with
//! `g_c(p) = Σ w_i F0^{-1}(p_i)`, where `F0^{-1}` is a quantile function and
//! `G_c` is the CDF of `g_c(U)` for independent uniforms `U`. Because `g_c`
//! is non-decreasing in each coordinate, combining lower p-value functions
//! coordinate-wise gives a lower p-value function.
//!
//! | method               | `F0^{-1}(u)`            | `G_c`                          |
//! |----------------------|-------------------------|--------------------------------|
//! | Stouffer             | `Φ^{-1}(u)`             | `Φ(x / ‖w‖)`                   |
//! | Fisher (unit)        | `2 ln u`                | `P(χ²_{2M} ≥ -x)`              |
//! | double exponential   | Laplace quantile        | CDF of a sum of `M` Laplaces   |
//! | custom / weighted    | any                     | supplied, or Monte Carlo       |
//!
//! Inputs are clipped to `[1e-12, 1 - 1e-12]` before the quantile transform so
//! that zero or one p-values stay finite.

pub mod laplace;
pub mod special;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::inversion::{ConfidenceInterval, Method, PValueFunctions, PValueStepFunction};
use crate::randomization::{Mode, RandomizationTest};
use crate::rng;
use crate::statistics::{ObservedData, StatisticSpec};

pub use laplace::{laplace_quantile, laplace_sum_cdf};
pub use special::{chisq_upper, normal_cdf, normal_quantile};

pub const CLIP: f64 = 1e-12;
/// Monte Carlo sample size for reference CDFs without a closed form.
pub const REFERENCE_DRAWS: usize = 1_000_000;
pub const DEFAULT_REFERENCE_SEED: u64 = 20_190_101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerMethod {
    Stouffer,
    Fisher,
    DoubleExponential,
    Custom,
}

pub type QuantileFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type ReferenceCdf = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Reference {
    Normal,
    ChiSquare,
    LaplaceSum,
    /// Sorted Monte Carlo sample of `g_c(U)`.
    Empirical(Arc<Vec<f64>>),
    Function(Arc<ReferenceCdf>),
    Missing,
}

/// A `(F0, weights, G_c)` recipe.
#[derive(Clone)]
pub struct CombinerSpec {
    method: CombinerMethod,
    name: String,
    weights: Option<Vec<f64>>,
    quantile: Arc<QuantileFn>,
    reference: Reference,
}

impl fmt::Debug for CombinerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CombinerSpec")
            .field("method", &self.method)
            .field("name", &self.name)
            .field("weights", &self.weights)
            .finish()
    }
}

fn normal_quantile_clipped(u: f64) -> f64 {
    normal_quantile(u).expect("clipped input lies in (0, 1)")
}

fn fisher_quantile(u: f64) -> f64 {
    2.0 * u.ln()
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("weights must not be empty".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidArgument("weights must not all be zero".into()));
    }
    Ok(())
}

impl CombinerSpec {
    pub fn stouffer() -> Self {
        Self {
            method: CombinerMethod::Stouffer,
            name: "stouffer".into(),
            weights: None,
            quantile: Arc::new(normal_quantile_clipped),
            reference: Reference::Normal,
        }
    }

    pub fn stouffer_weighted(weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self {
            weights: Some(weights),
            ..Self::stouffer()
        })
    }

    pub fn fisher() -> Self {
        Self {
            method: CombinerMethod::Fisher,
            name: "fisher".into(),
            weights: None,
            quantile: Arc::new(fisher_quantile),
            reference: Reference::ChiSquare,
        }
    }

    /// Weighted Fisher has no chi-square reference; `G_c` is estimated from
    /// [`REFERENCE_DRAWS`] seeded draws.
    pub fn fisher_weighted(weights: Vec<f64>, seed: u64) -> Result<Self> {
        Self::custom("fisher_weighted", Arc::new(fisher_quantile), None)
            .with_weights(weights)?
            .with_monte_carlo_reference(REFERENCE_DRAWS, seed)
    }

    pub fn double_exponential() -> Self {
        Self {
            method: CombinerMethod::DoubleExponential,
            name: "double_exponential".into(),
            weights: None,
            quantile: Arc::new(laplace_quantile),
            reference: Reference::LaplaceSum,
        }
    }

    pub fn double_exponential_weighted(weights: Vec<f64>, seed: u64) -> Result<Self> {
        Self::custom("double_exponential_weighted", Arc::new(laplace_quantile), None)
            .with_weights(weights)?
            .with_monte_carlo_reference(REFERENCE_DRAWS, seed)
    }

    /// User recipe. Without a reference CDF, combining fails until
    /// [`with_monte_carlo_reference`](Self::with_monte_carlo_reference) is called.
    pub fn custom(name: &str, quantile: Arc<QuantileFn>, reference: Option<Arc<ReferenceCdf>>) -> Self {
        Self {
            method: CombinerMethod::Custom,
            name: name.into(),
            weights: None,
            quantile,
            reference: reference.map_or(Reference::Missing, Reference::Function),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        self.weights = Some(weights);
        Ok(self)
    }

    /// Estimates `G_c` from `draws` seeded samples of `g_c(U)`. Needs weights,
    /// which fix `M`.
    pub fn with_monte_carlo_reference(mut self, draws: usize, seed: u64) -> Result<Self> {
        let weights = self.weights.clone().ok_or_else(|| {
            Error::InvalidArgument("a Monte Carlo reference needs explicit weights".into())
        })?;
        if draws == 0 {
            return Err(Error::InvalidArgument("draws must be positive".into()));
        }
        let q = self.quantile.clone();
        let mut sample: Vec<f64> = (0..draws as u64)
            .into_par_iter()
            .map(|j| {
                let mut r = rng::stream(seed, j);
                weights
                    .iter()
                    .map(|w| w * q(rng::uniform01(&mut r).clamp(CLIP, 1.0 - CLIP)))
                    .sum()
            })
            .collect();
        sample.par_sort_by(f64::total_cmp);
        self.method = CombinerMethod::Custom;
        self.reference = Reference::Empirical(Arc::new(sample));
        Ok(self)
    }

    /// `stouffer`, `fisher` or `double_exponential` (alias `de`), optionally
    /// weighted. Weighted Fisher and DE use a Monte Carlo reference with `seed`.
    pub fn by_name(name: &str, weights: Option<Vec<f64>>, seed: u64) -> Result<Self> {
        let unit = weights
            .as_ref()
            .is_none_or(|w| w.iter().all(|&x| x == 1.0));
        match (name.to_ascii_lowercase().as_str(), unit) {
            ("stouffer", true) => Ok(Self::stouffer()),
            ("stouffer", false) => Self::stouffer_weighted(weights.unwrap()),
            ("fisher", true) => Ok(Self::fisher()),
            ("fisher", false) => Self::fisher_weighted(weights.unwrap(), seed),
            ("double_exponential" | "de", true) => Ok(Self::double_exponential()),
            ("double_exponential" | "de", false) => Self::double_exponential_weighted(weights.unwrap(), seed),
            (other, _) => Err(Error::InvalidArgument(format!(
                "unknown combiner `{other}`; expected stouffer, fisher or double_exponential"
            ))),
        }
    }

    pub fn method(&self) -> CombinerMethod {
        self.method
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// `g_c(p)` on clipped inputs.
    pub fn g(&self, p: &[f64]) -> Result<f64> {
        if let Some(w) = &self.weights {
            if w.len() != p.len() {
                return Err(Error::LengthMismatch {
                    expected: w.len(),
                    found: p.len(),
                });
            }
        }
        let mut total = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                return Err(Error::Domain(format!("p-value {i} is {pi}, outside [0, 1]")));
            }
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
            total += w * (self.quantile)(pi.clamp(CLIP, 1.0 - CLIP));
        }
        Ok(total)
    }

    /// `G_c(x)` for `m` inputs.
    pub fn reference_cdf(&self, m: usize, x: f64) -> Result<f64> {
        match &self.reference {
            Reference::Normal => {
                let norm = self
                    .weights
                    .as_ref()
                    .map_or((m as f64).sqrt(), |w| w.iter().map(|v| v * v).sum::<f64>().sqrt());
                Ok(normal_cdf(x / norm))
            }
            Reference::ChiSquare => chisq_upper(2.0 * m as f64, -x),
            Reference::LaplaceSum => laplace_sum_cdf(m, x),
            Reference::Empirical(sample) => {
                Ok(sample.partition_point(|&s| s <= x) as f64 / sample.len() as f64)
            }
            Reference::Function(f) => Ok(f(x)),
            Reference::Missing => Err(Error::MissingReferenceCdf(self.name.clone())),
        }
    }
}

/// Combined p-value `G_c(g_c(p))`.
pub fn combine_values(p: &[f64], combiner: &CombinerSpec) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("nothing to combine".into()));
    }
    let g = combiner.g(p)?;
    Ok(combiner.reference_cdf(p.len(), g)?.clamp(0.0, 1.0))
}

/// Coordinate-wise combination of step functions of one side, optionally
/// complemented (`1 - combined`).
#[derive(Debug, Clone)]
pub struct CombinedPValueFunction {
    components: Vec<PValueStepFunction>,
    combiner: CombinerSpec,
    complement: bool,
}

impl CombinedPValueFunction {
    pub fn components(&self) -> &[PValueStepFunction] {
        &self.components
    }

    pub fn combiner(&self) -> &CombinerSpec {
        &self.combiner
    }

    pub fn is_increasing(&self) -> bool {
        self.components[0].is_increasing() != self.complement
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        let p: Vec<f64> = self.components.iter().map(|f| f.eval(theta)).collect();
        let c = combine_values(&p, &self.combiner)?;
        Ok(if self.complement { 1.0 - c } else { c })
    }

    /// Union of the components' breakpoints; the combined function is
    /// constant between consecutive members.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .components
            .iter()
            .flat_map(|f| f.breakpoints().iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    /// `sup{θ : p(θ) ≤ level}` for a non-decreasing, right-continuous function.
    fn sup_at_most(&self, level: f64) -> Result<f64> {
        if self.eval(f64::NEG_INFINITY)? > level {
            return Ok(f64::NEG_INFINITY);
        }
        let b = self.breakpoints();
        let (mut lo, mut hi) = (0usize, b.len());
        // first breakpoint where the value exceeds `level`
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.eval(b[mid])? > level {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(b.get(lo).copied().unwrap_or(f64::INFINITY))
    }

    /// `inf{θ : p(θ) ≤ level}` for a non-increasing, left-continuous function.
    fn inf_at_most(&self, level: f64) -> Result<f64> {
        let b = self.breakpoints();
        // region r is (b[r-1], b[r]]; the last one is (b[m-1], ∞)
        let value = |r: usize| self.eval(b.get(r).copied().unwrap_or(f64::INFINITY));
        let (mut lo, mut hi) = (0usize, b.len() + 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if value(mid)? <= level {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(match lo {
            0 => f64::NEG_INFINITY,
            r if r > b.len() => f64::INFINITY,
            r => b[r - 1],
        })
    }
}

/// Combines step functions that share a side.
pub fn combine_functions(fs: &[PValueStepFunction], combiner: &CombinerSpec) -> Result<CombinedPValueFunction> {
    let Some(first) = fs.first() else {
        return Err(Error::InvalidArgument("nothing to combine".into()));
    };
    if fs.iter().any(|f| f.kind() != first.kind()) {
        return Err(Error::SideMismatch);
    }
    Ok(CombinedPValueFunction {
        components: fs.to_vec(),
        combiner: combiner.clone(),
        complement: false,
    })
}

/// Combined lower and upper p-value functions of several experiments.
#[derive(Debug, Clone)]
pub struct CombinedFunctions {
    /// `G_c(g_c(L+_1, …, L+_M))`
    pub lplus: CombinedPValueFunction,
    /// `1 - G_c(g_c(U+_1, …, U+_M))`
    pub lminus: CombinedPValueFunction,
}

impl CombinedFunctions {
    pub fn new(functions: &[PValueFunctions], combiner: &CombinerSpec) -> Result<Self> {
        let lplus: Vec<PValueStepFunction> = functions.iter().map(|f| f.lplus.clone()).collect();
        let uplus: Vec<PValueStepFunction> = functions.iter().map(|f| f.uplus.clone()).collect();
        let mut lminus = combine_functions(&uplus, combiner)?;
        lminus.complement = true;
        Ok(Self {
            lplus: combine_functions(&lplus, combiner)?,
            lminus,
        })
    }

    pub fn two_sided(&self, theta: f64) -> Result<f64> {
        Ok((2.0 * self.lplus.eval(theta)?.min(self.lminus.eval(theta)?)).min(1.0))
    }

    /// `{θ : p_c^{L+}(θ) > α/2 and p_c^{L−}(θ) > α/2}`, closed at both ends.
    pub fn interval(&self, alpha: f64) -> Result<ConfidenceInterval> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
        }
        let lower = self.lplus.sup_at_most(alpha / 2.0)?;
        let upper = self.lminus.inf_at_most(alpha / 2.0)?;
        ConfidenceInterval::new(lower, upper, alpha / 2.0, alpha / 2.0, Method::Combined, true, true)
    }
}

/// Combined interval plus each experiment's own proposed interval.
#[derive(Debug, Clone, Serialize)]
pub struct CombinedReport {
    pub combiner: String,
    pub combined: ConfidenceInterval,
    pub individual: Vec<ConfidenceInterval>,
}

/// Per-experiment mode: Monte Carlo seeds are split so experiments draw
/// independent assignment sets.
pub fn experiment_mode(mode: Mode, index: usize) -> Mode {
    match mode {
        Mode::MonteCarlo { k, seed } => Mode::MonteCarlo {
            k,
            seed: rng::derive_seed(seed, index as u64),
        },
        exact => exact,
    }
}

pub fn combined_interval(
    experiments: &[(ObservedData, Design)],
    stat: &StatisticSpec,
    combiner: &CombinerSpec,
    alpha: f64,
    mode: Mode,
) -> Result<CombinedReport> {
    let functions: Vec<PValueFunctions> = experiments
        .iter()
        .enumerate()
        .map(|(i, (data, design))| {
            let test = RandomizationTest::new(data, design, stat, experiment_mode(mode, i))?;
            PValueFunctions::build(&test)
        })
        .collect::<Result<_>>()?;
    report_from_functions(&functions, combiner, alpha)
}

pub fn report_from_functions(
    functions: &[PValueFunctions],
    combiner: &CombinerSpec,
    alpha: f64,
) -> Result<CombinedReport> {
    let individual = functions
        .iter()
        .map(|f| f.interval(alpha / 2.0, alpha / 2.0))
        .collect::<Result<Vec<_>>>()?;
    let mut combined = CombinedFunctions::new(functions, combiner)?.interval(alpha)?;
    combined.statistic = functions.first().map(|f| f.statistic.clone());
    Ok(CombinedReport {
        combiner: combiner.name().to_string(),
        combined,
        individual,
    })
}

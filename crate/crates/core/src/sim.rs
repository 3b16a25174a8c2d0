//! Coverage simulations for individual and combined intervals, and exact
//! validity audits over all assignments of a fixed population.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{CombinedFunctions, CombinerSpec, DEFAULT_REFERENCE_SEED};
use crate::design::{Assignment, Design};
use crate::error::{Error, Result};
use crate::inversion::{BuildOptions, ConfidenceInterval, PValueFunctions};
use crate::randomization::{population_dominance_profile, DominanceProfile, Mode, RandomizationTest, DEFAULT_CAP};
use crate::rng;
use crate::statistics::{ObservedData, PotentialOutcomes, StatisticSpec};

/// `Y(0)` iid lognormal(0, 1) from Box-Muller normals, `Y(1) = Y(0) + θ`.
pub fn generate_population(n: usize, true_theta: f64, seed: u64) -> Result<PotentialOutcomes> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("population needs at least 2 units, got {n}")));
    }
    let mut z = vec![0.0; n];
    rng::fill_normal(&mut rng::stream(seed, 0), &mut z);
    let y0: Vec<f64> = z.into_iter().map(f64::exp).collect();
    PotentialOutcomes::additive(y0, true_theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationPolicy {
    /// One population per arm for the whole scenario; reps redraw assignments.
    #[default]
    Fixed,
    /// New populations every rep.
    Fresh,
}

fn default_reps() -> usize {
    500
}
fn default_k_cap() -> usize {
    5000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_combiners() -> Vec<String> {
    vec!["fisher".into(), "double_exponential".into()]
}
fn default_seed() -> u64 {
    2019
}

/// One scenario: experiment `i` has `b_i` blocks of `k_i` units, half treated
/// in each block (`b_i = 1` is a completely randomized design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub b1: usize,
    pub k1: usize,
    pub b2: usize,
    pub k2: usize,
    #[serde(default)]
    pub true_theta: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_k_cap")]
    pub k_cap: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_combiners")]
    pub combiners: Vec<String>,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub population: PopulationPolicy,
}

impl ScenarioConfig {
    pub fn new(b1: usize, k1: usize, b2: usize, k2: usize) -> Self {
        Self {
            b1,
            k1,
            b2,
            k2,
            true_theta: 0.0,
            reps: default_reps(),
            k_cap: default_k_cap(),
            alpha: default_alpha(),
            combiners: default_combiners(),
            master_seed: default_seed(),
            population: PopulationPolicy::Fixed,
        }
    }

    pub fn designs(&self) -> Result<(Design, Design)> {
        Ok((Design::balanced(self.b1, self.k1)?, Design::balanced(self.b2, self.k2)?))
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.k_cap == 0 {
            return Err(Error::InvalidArgument("k_cap must be positive".into()));
        }
        if !self.true_theta.is_finite() {
            return Err(Error::InvalidArgument("true_theta must be finite".into()));
        }
        Ok(())
    }
}

/// Coverage and width of one arm (an experiment or a combiner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub covered: usize,
    pub reps: usize,
    pub coverage: f64,
    pub width_mean: f64,
    pub width_sd: f64,
}

impl ArmSummary {
    fn from_intervals(name: &str, intervals: &[(f64, f64, bool)]) -> Self {
        let reps = intervals.len();
        let covered = intervals.iter().filter(|i| i.2).count();
        let widths: Vec<f64> = intervals.iter().map(|i| i.1 - i.0).collect();
        let mean = widths.iter().sum::<f64>() / reps as f64;
        let sd = if !mean.is_finite() {
            f64::INFINITY
        } else if reps > 1 {
            (widths.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            name: name.into(),
            covered,
            reps,
            coverage: covered as f64 / reps as f64,
            width_mean: mean,
            width_sd: sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub modes: [String; 2],
    pub arms: Vec<ArmSummary>,
}

impl ScenarioResult {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.name == name)
    }

    /// Aligned text table, one row per arm.
    pub fn table(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "scenario b1={} k1={} b2={} k2={}  reps={} k_cap={} alpha={} modes={}/{}\n",
            c.b1, c.k1, c.b2, c.k2, c.reps, c.k_cap, c.alpha, self.modes[0], self.modes[1]
        );
        let _ = writeln!(out, "{:<28} {:>9} {:>11} {:>9}", "arm", "coverage", "width_mean", "width_sd");
        for a in &self.arms {
            let _ = writeln!(
                out,
                "{:<28} {:>9.3} {:>11.3} {:>9.3}",
                a.name, a.coverage, a.width_mean, a.width_sd
            );
        }
        out
    }
}

struct Arm {
    design: Design,
    population: Option<PotentialOutcomes>,
}

fn rep_intervals(
    config: &ScenarioConfig,
    arms: &[Arm; 2],
    stat: &StatisticSpec,
    combiners: &[CombinerSpec],
    rep: u64,
) -> Result<Vec<(f64, f64, bool)>> {
    let rep_seed = rng::derive_seed(config.master_seed, rep);
    let alpha = config.alpha;
    let mut functions = Vec::with_capacity(2);
    let mut out = Vec::with_capacity(2 + combiners.len());
    for (a, arm) in arms.iter().enumerate() {
        let a = a as u64;
        let population = match &arm.population {
            Some(p) => p.clone(),
            None => generate_population(arm.design.n_units(), config.true_theta, rng::derive_seed(rep_seed, 10 + a))?,
        };
        let w = arm.design.sampler().draw(rep_seed, a);
        let data = population.observe(&w)?;
        let mode = Mode::auto(&arm.design, config.k_cap, rng::derive_seed(rep_seed, 2 + a));
        let test = RandomizationTest::new(&data, &arm.design, stat, mode)?;
        let f = PValueFunctions::build(&test)?;
        let ci = f.interval(alpha / 2.0, alpha / 2.0)?;
        out.push((ci.lower, ci.upper, ci.contains(config.true_theta)));
        functions.push(f);
    }
    for c in combiners {
        let ci = CombinedFunctions::new(&functions, c)?.interval(alpha)?;
        out.push((ci.lower, ci.upper, ci.contains(config.true_theta)));
    }
    Ok(out)
}

/// Runs `reps` replications in parallel. Rep `r` depends only on
/// `(master_seed, r)`, so the result does not depend on scheduling.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let (d1, d2) = config.designs()?;
    let stat = StatisticSpec::diff_means();
    let combiners = config
        .combiners
        .iter()
        .map(|name| CombinerSpec::by_name(name, None, DEFAULT_REFERENCE_SEED))
        .collect::<Result<Vec<_>>>()?;
    let population_root = rng::derive_seed(config.master_seed, u64::MAX);
    let fixed = |d: &Design, a: u64| -> Result<Option<PotentialOutcomes>> {
        match config.population {
            PopulationPolicy::Fixed => Ok(Some(generate_population(
                d.n_units(),
                config.true_theta,
                rng::derive_seed(population_root, a),
            )?)),
            PopulationPolicy::Fresh => Ok(None),
        }
    };
    let arms = [
        Arm {
            population: fixed(&d1, 0)?,
            design: d1,
        },
        Arm {
            population: fixed(&d2, 1)?,
            design: d2,
        },
    ];
    let rows: Vec<Vec<(f64, f64, bool)>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            rep_intervals(config, &arms, &stat, &combiners, r).map_err(|e| Error::Replication {
                rep: r as usize,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let names: Vec<String> = ["experiment1".to_string(), "experiment2".to_string()]
        .into_iter()
        .chain(combiners.iter().map(|c| format!("combined_{}", c.name())))
        .collect();
    let arms_summary = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<(f64, f64, bool)> = rows.iter().map(|r| r[j]).collect();
            ArmSummary::from_intervals(name, &col)
        })
        .collect();
    let mode_name = |d: &Design| Mode::auto(d, config.k_cap, 0).label().to_string();
    Ok(ScenarioResult {
        config: config.clone(),
        modes: [mode_name(&arms[0].design), mode_name(&arms[1].design)],
        arms: arms_summary,
    })
}

/// Exact coverage at one level over every assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub alpha: f64,
    pub proposed_covered: u64,
    pub traditional_covered: u64,
    pub proposed_coverage: f64,
    pub traditional_coverage: f64,
    pub proposed_mean_width: f64,
    pub traditional_mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub design: String,
    pub statistic: String,
    pub theta0: f64,
    pub total: u64,
    pub dominance: DominanceProfile,
    pub coverage: Vec<CoverageRow>,
}

impl AuditReport {
    pub fn row(&self, alpha: f64) -> Option<&CoverageRow> {
        self.coverage.iter().find(|r| r.alpha == alpha)
    }
}

/// The constant effect of an additive population.
pub fn constant_effect(population: &PotentialOutcomes) -> Result<f64> {
    let theta = population.y1[0] - population.y0[0];
    let scale = population
        .y1
        .iter()
        .chain(&population.y0)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let additive = population
        .y1
        .iter()
        .zip(&population.y0)
        .all(|(a, b)| ((a - b) - theta).abs() <= 1e-12 * scale);
    if !additive {
        return Err(Error::InvalidData("coverage audit needs a constant additive effect".into()));
    }
    Ok(theta)
}

fn interval_or_empty(ci: Result<ConfidenceInterval>, theta0: f64) -> Result<(bool, f64)> {
    match ci {
        Ok(ci) => Ok((ci.contains(theta0), ci.width())),
        Err(Error::LevelTooHigh { .. }) => Ok((false, 0.0)),
        Err(e) => Err(e),
    }
}

/// Treats every assignment as the observed one and reports the exact law of
/// the p-values at the true effect plus the exact coverage of the proposed and
/// traditional intervals at each level in `alphas`.
pub fn exact_validity_audit(
    population: &PotentialOutcomes,
    design: &Design,
    stat: &StatisticSpec,
    alphas: &[f64],
) -> Result<AuditReport> {
    let opts = BuildOptions {
        self_check: 0,
        polish: false,
    };
    audit_with(population, design, stat, alphas, &opts)
}

fn audit_with(
    population: &PotentialOutcomes,
    design: &Design,
    stat: &StatisticSpec,
    alphas: &[f64],
    opts: &BuildOptions,
) -> Result<AuditReport> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {a}")));
    }
    let theta0 = constant_effect(population)?;
    let dominance = population_dominance_profile(population, design, stat, DEFAULT_CAP)?;
    let assignments: Vec<Assignment> = design.enumerate(DEFAULT_CAP)?.collect();
    let total = assignments.len() as u64;
    let first = population.observe(&assignments[0])?;
    let base = RandomizationTest::with_assignments(&first, design, stat, Mode::exact(), assignments.clone().into())?;

    // per outer assignment: (proposed covered, width, traditional covered, width) per level
    let rows: Vec<Vec<(bool, f64, bool, f64)>> = assignments
        .par_iter()
        .map(|w| {
            let data: ObservedData = population.observe(w)?;
            let f = PValueFunctions::build_with(&base.with_data(&data)?, opts)?;
            alphas
                .iter()
                .map(|&a| {
                    let (pc, pw) = interval_or_empty(f.interval(a / 2.0, a / 2.0), theta0)?;
                    let (tc, tw) = interval_or_empty(f.traditional(a), theta0)?;
                    Ok((pc, pw, tc, tw))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let coverage = alphas
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let pc = rows.iter().filter(|r| r[j].0).count() as u64;
            let tc = rows.iter().filter(|r| r[j].2).count() as u64;
            CoverageRow {
                alpha,
                proposed_covered: pc,
                traditional_covered: tc,
                proposed_coverage: pc as f64 / total as f64,
                traditional_coverage: tc as f64 / total as f64,
                proposed_mean_width: rows.iter().map(|r| r[j].1).sum::<f64>() / total as f64,
                traditional_mean_width: rows.iter().map(|r| r[j].3).sum::<f64>() / total as f64,
            }
        })
        .collect();
    Ok(AuditReport {
        design: design.to_string(),
        statistic: stat.name().to_string(),
        theta0,
        total,
        dominance,
        coverage,
    })
}

//! Fisher randomization tests read as confidence distributions.
//!
//! A sharp null `H0(θ)` fixes every unit's effect at `θ`, so all potential
//! outcomes can be imputed and the randomization distribution of a test
//! statistic computed exactly (or by Monte Carlo). As a function of `θ`, each
//! one-sided p-value is a step function; inverting it gives intervals with
//! guaranteed coverage, and independent experiments combine coordinate-wise.
//!
//! ```
//! use frtcd::{fixtures, Mode, PValueFunctions, RandomizationTest, StatisticSpec};
//!
//! let test = RandomizationTest::new(
//!     &fixtures::toy(),
//!     &fixtures::toy_design(),
//!     &StatisticSpec::diff_means(),
//!     Mode::exact(),
//! )?;
//! let ci = PValueFunctions::build(&test)?.interval(0.025, 0.025)?;
//! assert!(ci.contains(1.0));
//! # Ok::<(), frtcd::Error>(())
//! ```

pub mod cli;
pub mod combine;
pub mod design;
pub mod error;
pub mod fixtures;
pub mod inversion;
pub mod planner;
pub mod randomization;
pub mod rng;
pub mod sim;
pub mod statistics;

pub use combine::{combine_values, combined_interval, CombinedFunctions, CombinerSpec};
pub use design::{Assignment, Block, Design};
pub use error::{Error, ErrorKind, Result};
pub use inversion::{ConfidenceInterval, PValueFunctions, PValueStepFunction};
pub use planner::{error_bound, plan, required_k, McPlan};
pub use randomization::{Mode, PValueKind, RandomizationTest};
pub use sim::{exact_validity_audit, run_scenario, ScenarioConfig};
pub use statistics::{impute, ObservedData, PotentialOutcomes, StatisticSpec};

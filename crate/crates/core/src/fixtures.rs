//! Small published datasets used in examples, tests and the `toy` command.

use crate::design::{Assignment, Design};
use crate::statistics::{ObservedData, PotentialOutcomes};

const TOY_Y0: [f64; 10] = [1.00, 1.88, 1.52, 4.00, 1.85, 2.27, 0.92, 3.37, 0.72, 1.15];
const TOY_Y1: [f64; 10] = [2.00, 2.88, 2.52, 5.00, 2.85, 3.27, 1.92, 4.37, 1.72, 2.15];
const TOY_W: [u8; 10] = [1, 1, 1, 1, 0, 0, 0, 0, 1, 0];

const EXAMPLE2_Y0: [f64; 8] = [0.14, 1.12, 0.80, 1.80, 0.90, 0.44, 1.13, 0.53];
const EXAMPLE2_Y1: [f64; 8] = [1.14, 2.12, 1.80, 2.80, 1.90, 1.44, 2.13, 1.53];
const EXAMPLE2_W: [u8; 8] = [1, 1, 0, 1, 0, 0, 1, 0];

/// Ten units, additive effect 1, CRD(10, 5).
pub fn toy_population() -> PotentialOutcomes {
    PotentialOutcomes::new(TOY_Y1.to_vec(), TOY_Y0.to_vec()).expect("finite fixture")
}

/// Observed half of [`toy_population`]; the difference in means is 0.912.
pub fn toy() -> ObservedData {
    toy_population()
        .observe(&Assignment::new(TOY_W.to_vec()).expect("binary fixture"))
        .expect("consistent fixture")
}

pub fn toy_design() -> Design {
    Design::crd(10, 5).expect("valid design")
}

/// Eight lognormal units, additive effect 1, CRD(8, 4). The studentized
/// statistic gives a non-monotone p-value curve on this dataset.
pub fn example2_population() -> PotentialOutcomes {
    PotentialOutcomes::new(EXAMPLE2_Y1.to_vec(), EXAMPLE2_Y0.to_vec()).expect("finite fixture")
}

pub fn example2() -> ObservedData {
    example2_population()
        .observe(&Assignment::new(EXAMPLE2_W.to_vec()).expect("binary fixture"))
        .expect("consistent fixture")
}

pub fn example2_design() -> Design {
    Design::crd(8, 4).expect("valid design")
}

/// Fifteen units with zero effect: six at 0, six at 1, three at 2. Heavy
/// ties make the traditional inversion undercover.
pub fn discrete_population() -> PotentialOutcomes {
    let y: Vec<f64> = [(0.0, 6), (1.0, 6), (2.0, 3)]
        .iter()
        .flat_map(|&(v, n)| std::iter::repeat_n(v, n))
        .collect();
    PotentialOutcomes::new(y.clone(), y).expect("finite fixture")
}

pub fn discrete_design() -> Design {
    Design::crd(15, 7).expect("valid design")
}

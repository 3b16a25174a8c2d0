//! The ten-unit example: p-values on a coarse grid and both intervals.

use frtcd::inversion::traditional_interval_on_grid;
use frtcd::{fixtures, Mode, PValueFunctions, PValueKind, RandomizationTest, StatisticSpec};

fn main() -> frtcd::Result<()> {
    let test = RandomizationTest::new(
        &fixtures::toy(),
        &fixtures::toy_design(),
        &StatisticSpec::diff_means(),
        Mode::exact(),
    )?;
    println!("K = {}, T_obs = {:.3}", test.k(), test.t_obs());
    let grid = [-3.0, -1.0, 0.0, 1.0, 3.0];
    for &theta in &grid {
        println!("theta {theta:>4}  p_L+ {:.3}", test.p_value(theta, PValueKind::Lplus)?);
    }
    let ci = PValueFunctions::build(&test)?.interval(0.025, 0.025)?;
    println!("proposed    [{:.3}, {:.3}]", ci.lower, ci.upper);
    let coarse = traditional_interval_on_grid(&test, 0.05, &grid)?;
    println!("traditional [{}, {}] on the grid", coarse.lower, coarse.upper);
    Ok(())
}

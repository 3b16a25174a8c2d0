//! Proposed and traditional intervals at several levels, exact and Monte Carlo.

use frtcd::{fixtures, Mode, PValueFunctions, RandomizationTest, StatisticSpec};

fn main() -> frtcd::Result<()> {
    let data = fixtures::toy();
    let design = fixtures::toy_design();
    let stat = StatisticSpec::diff_means();
    for mode in [Mode::exact(), Mode::mc(4794, 11)] {
        let f = PValueFunctions::build(&RandomizationTest::new(&data, &design, &stat, mode)?)?;
        for alpha in [0.2, 0.1, 0.05] {
            let p = f.interval(alpha / 2.0, alpha / 2.0)?;
            let t = f.traditional(alpha)?;
            println!(
                "{:<5} alpha {alpha:<4}  proposed [{:.3}, {:.3}]  traditional [{:.3}, {:.3})",
                mode.label(),
                p.lower,
                p.upper,
                t.lower,
                t.upper
            );
        }
    }
    // non effect-increasing statistics cannot be inverted
    let studentized = RandomizationTest::new(&data, &design, &StatisticSpec::studentized(), Mode::exact())?;
    if let Err(e) = PValueFunctions::build(&studentized) {
        println!("studentized: {e}");
    }
    Ok(())
}

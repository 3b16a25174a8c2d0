//! Exact step functions of the four one-sided p-values, printed as
//! `(breakpoint, value)` pairs.

use frtcd::{fixtures, Mode, PValueFunctions, PValueKind, RandomizationTest, StatisticSpec};

fn main() -> frtcd::Result<()> {
    let test = RandomizationTest::new(
        &fixtures::toy(),
        &fixtures::toy_design(),
        &StatisticSpec::diff_means(),
        Mode::exact(),
    )?;
    let f = PValueFunctions::build(&test)?;
    for kind in PValueKind::ONE_SIDED {
        let step = f.get(kind)?;
        println!(
            "{}: {} breakpoints, value {:.4} at -inf and {:.4} at +inf",
            kind.name(),
            step.breakpoints().len(),
            step.eval(f64::NEG_INFINITY),
            step.eval(f64::INFINITY)
        );
    }
    println!("\nLplus steps near the observed effect:");
    for (theta, p) in f.lplus.steps().into_iter().filter(|(t, _)| (0.5..=1.5).contains(t)) {
        println!("{theta:>10.4} {p:.4}");
    }
    Ok(())
}

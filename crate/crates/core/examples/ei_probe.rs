//! Certifying a user statistic as effect-increasing before inversion.

use frtcd::statistics::{ei_probe, EiVerdict};
use frtcd::{fixtures, Mode, PValueFunctions, RandomizationTest, StatisticSpec};

fn main() -> frtcd::Result<()> {
    let data = fixtures::example2();
    let design = fixtures::example2_design();

    // treated median minus control median
    let medians = StatisticSpec::custom("median_difference", true, |y, w| {
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
        };
        let (t, c): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
            y.iter().copied().enumerate().partition(|(i, _)| w.is_treated(*i));
        Ok(median(t.into_iter().map(|p| p.1).collect()) - median(c.into_iter().map(|p| p.1).collect()))
    });
    match medians.clone().certify(&data, &design, 2000, 1) {
        Ok(certified) => {
            let test = RandomizationTest::new(&data, &design, &certified, Mode::exact())?;
            let f = PValueFunctions::build(&test)?;
            // medians saturate as theta runs off, so the tails of L+ and L- stay above zero
            println!(
                "median_difference certified; L+ at -inf {:.3}, L- at +inf {:.3}",
                f.lplus.eval(f64::NEG_INFINITY),
                f.lminus.eval(f64::INFINITY)
            );
            for alpha in [0.05, 0.2, 0.5] {
                let ci = f.interval(alpha / 2.0, alpha / 2.0)?;
                println!("  alpha {alpha:<4} interval [{:.3}, {:.3}]", ci.lower, ci.upper);
            }
        }
        Err(verdict) => println!("median_difference rejected: {verdict:?}"),
    }

    let verdict = ei_probe(&StatisticSpec::studentized(), &data, &design, 2000, 1);
    match verdict {
        EiVerdict::Counterexample { unit, arm, theta, before, after, .. } => println!(
            "studentized: moving unit {unit} ({arm:?}) at theta {theta:.3} takes T from {before:.4} to {after:.4}"
        ),
        EiVerdict::ConsistentWithEi { trials } => println!("studentized: no counterexample in {trials} trials"),
    }
    Ok(())
}

//! Two independent experiments combined with each built-in combiner.

use frtcd::combine::combined_interval;
use frtcd::sim::generate_population;
use frtcd::{CombinerSpec, Design, Mode, StatisticSpec};

fn main() -> frtcd::Result<()> {
    let theta = 0.5;
    let designs = [Design::crd(12, 6)?, Design::balanced(2, 8)?];
    let experiments = designs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let pop = generate_population(d.n_units(), theta, 100 + i as u64)?;
            Ok((pop.observe(&d.sampler().draw(5, i as u64))?, d.clone()))
        })
        .collect::<frtcd::Result<Vec<_>>>()?;
    for combiner in [
        CombinerSpec::fisher(),
        CombinerSpec::stouffer(),
        CombinerSpec::double_exponential(),
        CombinerSpec::stouffer_weighted(vec![12.0, 16.0])?,
    ] {
        let report = combined_interval(&experiments, &StatisticSpec::diff_means(), &combiner, 0.05, Mode::exact())?;
        let label = match combiner.weights() {
            Some(w) => format!("{} {w:?}", report.combiner),
            None => report.combiner.clone(),
        };
        println!(
            "{label:<20} combined [{:.3}, {:.3}]",
            report.combined.lower, report.combined.upper
        );
        for (i, ci) in report.individual.iter().enumerate() {
            println!("{:<20} exp {}     [{:.3}, {:.3}]", "", i + 1, ci.lower, ci.upper);
        }
    }
    println!("true effect {theta}");
    Ok(())
}

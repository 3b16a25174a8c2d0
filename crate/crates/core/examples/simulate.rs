//! Coverage and width of individual and combined intervals for one scenario.
//!
//! `cargo run --release --example simulate -- 1 16 1 16 500`

use frtcd::sim::{run_scenario, ScenarioConfig};

fn main() -> frtcd::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("integer arguments"))
        .collect();
    let get = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let mut config = ScenarioConfig::new(get(0, 1), get(1, 16), get(2, 1), get(3, 16));
    config.reps = get(4, 200);
    let result = run_scenario(&config)?;
    print!("{}", result.table());
    Ok(())
}

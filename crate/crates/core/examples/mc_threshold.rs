//! Monte Carlo sample sizes and execution plans.

use frtcd::planner::{error_bound, plan, threshold_table, TABLE_EPSILONS};
use frtcd::Design;

fn main() -> frtcd::Result<()> {
    println!("{:>8} {:>10} {:>10}", "epsilon", "K", "bound");
    for (e, k) in threshold_table(&TABLE_EPSILONS, 0.01)? {
        println!("{e:>8} {k:>10} {:>10.5}", error_bound(k, e)?);
    }
    for design in [Design::crd(10, 5)?, Design::crd(30, 15)?, Design::balanced(4, 8)?] {
        let p = plan(&design, 0.1, 0.01)?;
        println!("{design}: {} assignments -> {:?}", design.total_assignments(), p.strategy);
    }
    Ok(())
}

//! Acceptance criteria. Each test writes one PASS/FAIL line to stdout
//! (uncaptured) with its runtime against the budget, then asserts.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use frtcd::combine::{combine_values, laplace_sum_cdf, CombinerSpec};
use frtcd::inversion::PValueFunctions;
use frtcd::planner::{required_k, sup_norm_distance};
use frtcd::randomization::population_dominance_profile;
use frtcd::rng;
use frtcd::sim::{exact_validity_audit, generate_population, run_scenario, ScenarioConfig};
use frtcd::{fixtures, Design, Mode, PValueKind, PotentialOutcomes, RandomizationTest, StatisticSpec};

fn report(id: u32, title: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed < budget;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    let line = format!(
        "acceptance {id:>2} {verdict}  {title}  ({:.3} s, budget {} s)  {detail}\n",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} over budget: {elapsed:?} > {budget:?}");
}

/// Criteria run one at a time so each runtime is measured alone.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[test]
fn c01_toy_golden_values() {
    let _serial = serial();
    let start = Instant::now();
    let test = RandomizationTest::new(
        &fixtures::toy(),
        &fixtures::toy_design(),
        &StatisticSpec::diff_means(),
        Mode::exact(),
    )
    .unwrap();
    let thetas = [-3.0, -1.0, 0.0, 1.0, 3.0];
    let direct: Vec<f64> = thetas
        .iter()
        .map(|&t| round3(test.p_value(t, PValueKind::Lplus).unwrap()))
        .collect();
    let f = PValueFunctions::build(&test).unwrap();
    let stepped: Vec<f64> = thetas.iter().map(|&t| round3(f.lplus.eval(t))).collect();
    let want = [0.004, 0.012, 0.131, 0.560, 0.988];
    let pass = test.k() == 252 && direct == want && stepped == want && round3(test.t_obs()) == 0.912;
    report(
        1,
        "toy golden test",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("K={} p={direct:?} T_obs={:.3}", test.k(), test.t_obs()),
    );
}

#[test]
fn c02_threshold_table() {
    let eps = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
    let _serial = serial();
    let start = Instant::now();
    let got: Vec<u64> = eps.iter().map(|&e| required_k(e, 0.01).unwrap()).collect();
    let elapsed = start.elapsed();
    let want = [4794, 19173, 119830, 479318, 1917269, 11982930, 47931717];
    report(
        2,
        "threshold table",
        got == want,
        elapsed,
        Duration::from_millis(1),
        &format!("{got:?}"),
    );
}

#[test]
fn c03_guaranteed_coverage() {
    let _serial = serial();
    let start = Instant::now();
    let design = Design::crd(12, 6).unwrap();
    let alphas = [0.10, 0.05];
    let mut worst = [f64::INFINITY; 2];
    let mut pass = true;
    for seed in 0..20u64 {
        let pop = generate_population(12, 1.0, 1000 + seed).unwrap();
        let audit = exact_validity_audit(&pop, &design, &StatisticSpec::diff_means(), &alphas).unwrap();
        for (j, row) in audit.coverage.iter().enumerate() {
            // integer comparison: covered / total >= 1 - alpha
            let needed = ((1.0 - row.alpha) * audit.total as f64).ceil() as u64;
            pass &= row.proposed_covered >= needed;
            worst[j] = worst[j].min(row.proposed_coverage);
        }
    }
    report(
        3,
        "guaranteed coverage, 20 populations",
        pass,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("min coverage at 0.10: {:.4}, at 0.05: {:.4}", worst[0], worst[1]),
    );
}

#[test]
fn c04_traditional_vs_proposed() {
    let _serial = serial();
    let start = Instant::now();
    let pop = fixtures::discrete_population();
    let mut detail = String::new();
    let mut pass = true;
    let mut reproduced = false;
    for treated in [7, 8] {
        let design = Design::crd(15, treated).unwrap();
        let audit = exact_validity_audit(&pop, &design, &StatisticSpec::diff_means(), &[0.05]).unwrap();
        let row = &audit.coverage[0];
        let (p, t) = (round3(row.proposed_coverage), round3(row.traditional_coverage));
        detail += &format!("CRD(15,{treated}): proposed {p:.3} traditional {t:.3}; ");
        if treated == 7 {
            pass &= row.proposed_coverage >= 0.95 && row.traditional_coverage < row.proposed_coverage;
        }
        if p == 0.961 && t == 0.897 {
            reproduced = true;
        }
    }
    pass &= reproduced;
    report(
        4,
        "traditional vs proposed gap",
        pass,
        start.elapsed(),
        Duration::from_secs(60),
        &detail,
    );
}

#[test]
fn c05_dominance_audit() {
    let _serial = serial();
    let start = Instant::now();
    let profile = population_dominance_profile(
        &fixtures::toy_population(),
        &fixtures::toy_design(),
        &StatisticSpec::diff_means(),
        1_000_000,
    )
    .unwrap();
    let gamma = profile.gamma_star;
    let lower_ok = [PValueKind::Lplus, PValueKind::Lminus]
        .iter()
        .all(|&k| profile.kind(k).unwrap().max_discrepancy <= gamma);
    let pass = profile.all_hold() && lower_ok && profile.total == 252 && gamma == 2.0 / 252.0;
    let disc: Vec<String> = profile
        .kinds
        .iter()
        .map(|k| format!("{}={:.5}", k.kind.name(), k.max_discrepancy))
        .collect();
    report(
        5,
        "stochastic dominance audit",
        pass,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("gamma*={gamma:.5} discrepancies {}", disc.join(" ")),
    );
}

#[test]
fn c06_monotonicity_and_counterexample() {
    let _serial = serial();
    let start = Instant::now();
    let design = Design::crd(10, 5).unwrap();
    let grid: Vec<f64> = (0..2001).map(|i| -10.0 + 0.01 * i as f64).collect();
    let mut violations = 0usize;
    for s in 0..50u64 {
        let pop = generate_population(10, 0.5, 500 + s).unwrap();
        let data = pop.observe(&design.sampler().draw(77, s)).unwrap();
        let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact()).unwrap();
        let p: Vec<f64> = grid.iter().map(|&t| test.p_value(t, PValueKind::Lplus).unwrap()).collect();
        violations += p.windows(2).filter(|w| w[1] < w[0]).count();
    }
    let studentized = RandomizationTest::new(
        &fixtures::example2(),
        &fixtures::example2_design(),
        &StatisticSpec::studentized(),
        Mode::exact(),
    )
    .unwrap();
    let p: Vec<f64> = grid
        .iter()
        .map(|&t| studentized.p_value(t, PValueKind::Lplus).unwrap())
        .collect();
    let decreases = p.windows(2).filter(|w| w[1] < w[0]).count();
    report(
        6,
        "monotonicity and counterexample",
        violations == 0 && decreases > 0,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("diff_means violations {violations}; studentized decreases {decreases}"),
    );
}

#[test]
fn c07_desk_scale_simulation() {
    let _serial = serial();
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for (b, k) in [(1, 16), (2, 8)] {
        let mut config = ScenarioConfig::new(b, k, b, k);
        config.reps = 500;
        config.k_cap = 5000;
        let r = run_scenario(&config).unwrap();
        let near = |name: &str| (r.arm(name).unwrap().coverage - 0.95).abs() <= 0.02;
        let width = |name: &str| r.arm(name).unwrap().width_mean;
        for arm in ["experiment1", "experiment2", "combined_fisher", "combined_double_exponential"] {
            pass &= near(arm);
        }
        for c in ["combined_fisher", "combined_double_exponential"] {
            pass &= width(c) < width("experiment1") && width(c) < width("experiment2");
        }
        detail += &format!("({b},{k}): ");
        for a in &r.arms {
            detail += &format!("{} {:.3}/{:.3} ", a.name, a.coverage, a.width_mean);
        }
    }
    report(
        7,
        "desk-scale coverage slice",
        pass,
        start.elapsed(),
        Duration::from_secs(900),
        &detail,
    );
}

#[test]
fn c08_concentration() {
    let _serial = serial();
    let start = Instant::now();
    let data = fixtures::toy();
    let design = fixtures::toy_design();
    let stat = StatisticSpec::diff_means();
    let exact = PValueFunctions::build(&RandomizationTest::new(&data, &design, &stat, Mode::exact()).unwrap()).unwrap();
    let mut exceed = 0;
    let mut largest: f64 = 0.0;
    for trial in 0..100u64 {
        let mode = Mode::mc(4794, rng::derive_seed(8, trial));
        let mc = PValueFunctions::build(&RandomizationTest::new(&data, &design, &stat, mode).unwrap()).unwrap();
        let d = sup_norm_distance(&mc.lplus, &exact.lplus);
        largest = largest.max(d);
        if d > 0.1 {
            exceed += 1;
        }
    }
    report(
        8,
        "Monte Carlo concentration",
        exceed <= 1,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("exceedances {exceed}/100, largest sup error {largest:.4}"),
    );
}

#[test]
fn c09_combiner_numerics() {
    let _serial = serial();
    let start = Instant::now();
    let fisher = combine_values(&[0.1, 0.2], &CombinerSpec::fisher()).unwrap();
    let stouffer = combine_values(&[0.5, 0.5], &CombinerSpec::stouffer()).unwrap();
    let mut worst: f64 = 0.0;
    let draws = 1_000_000;
    for m in [2usize, 3, 5] {
        let mut r = rng::stream(9_000 + m as u64, 0);
        let mut sums: Vec<f64> = (0..draws)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        let u = rng::uniform01(&mut r);
                        // inverse Laplace CDF
                        if u < 0.5 {
                            (2.0 * u).ln()
                        } else {
                            -(2.0 * (1.0 - u)).ln()
                        }
                    })
                    .sum()
            })
            .collect();
        sums.sort_by(f64::total_cmp);
        for i in 0..=80 {
            let x = -10.0 + 0.25 * i as f64;
            let empirical = sums.partition_point(|&s| s <= x) as f64 / draws as f64;
            worst = worst.max((laplace_sum_cdf(m, x).unwrap() - empirical).abs());
        }
    }
    let pass = (fisher - 0.098241).abs() <= 1e-5 && stouffer == 0.5 && worst < 3e-3;
    report(
        9,
        "combiner numerics",
        pass,
        start.elapsed(),
        Duration::from_secs(120),
        &format!("fisher {fisher:.6} stouffer {stouffer} laplace max gap {worst:.2e}"),
    );
}

#[test]
fn c10_exact_combination_validity() {
    let _serial = serial();
    let start = Instant::now();
    let design = Design::crd(6, 3).unwrap();
    let theta0 = 0.3;
    let stat = StatisticSpec::diff_means();
    let pops: Vec<PotentialOutcomes> = (0..2).map(|a| generate_population(6, theta0, 60 + a).unwrap()).collect();
    let assignments: Vec<_> = design.enumerate(1000).unwrap().collect();
    // L+ at θ0 for every possible observed assignment of each experiment
    let lplus: Vec<Vec<f64>> = pops
        .iter()
        .map(|pop| {
            assignments
                .iter()
                .map(|w| {
                    let data = pop.observe(w).unwrap();
                    RandomizationTest::new(&data, &design, &stat, Mode::exact())
                        .unwrap()
                        .p_value(theta0, PValueKind::Lplus)
                        .unwrap()
                })
                .collect()
        })
        .collect();
    let mut pass = true;
    let mut detail = String::new();
    for combiner in [CombinerSpec::fisher(), CombinerSpec::stouffer()] {
        let mut pc: Vec<f64> = Vec::with_capacity(400);
        for &a in &lplus[0] {
            for &b in &lplus[1] {
                pc.push(combine_values(&[a, b], &combiner).unwrap());
            }
        }
        pc.sort_by(f64::total_cmp);
        let total = pc.len() as f64;
        let mut worst = f64::NEG_INFINITY;
        for (i, &a) in pc.iter().enumerate() {
            let count = pc[i..].partition_point(|&x| x <= a) + i;
            worst = worst.max(count as f64 / total - a);
        }
        pass &= pc.len() == 400 && worst <= 0.0;
        detail += &format!("{}: max P(p<=a)-a = {worst:.4}; ", combiner.name());
    }
    report(
        10,
        "exact combined validity",
        pass,
        start.elapsed(),
        Duration::from_secs(30),
        &detail,
    );
}

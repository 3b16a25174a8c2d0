//! The `frtcd` command line.
//!
//! Every subcommand renders to a string so output can be checked without a
//! process. Exit codes: 0 success, 2 input error, 3 computation error,
//! 4 method precondition (for example inverting a non effect-increasing
//! statistic).

pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::combine::{experiment_mode, report_from_functions, CombinerSpec, DEFAULT_REFERENCE_SEED};
use crate::design::Design;
use crate::error::{Error, ErrorKind, Result};
use crate::fixtures;
use crate::inversion::{traditional_interval_on_grid, ConfidenceInterval, Method, PValueFunctions};
use crate::planner::{plan, required_k, threshold_table, McPlan, DEFAULT_DELTA, TABLE_EPSILONS};
use crate::randomization::{Mode, PValueKind, RandomizationTest};
use crate::sim::{run_scenario, PopulationPolicy, ScenarioConfig};
use crate::statistics::StatisticSpec;
use io::{num, text};

pub const DEFAULT_EPSILON: f64 = 0.01;
const TOY_GRID: [f64; 5] = [-3.0, -1.0, 0.0, 1.0, 3.0];

#[derive(Debug, Parser)]
#[command(name = "frtcd", version, about = "Fisher randomization tests as confidence distributions")]
pub struct Cli {
    /// Seed for Monte Carlo draws
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// Sup-norm error target used to size Monte Carlo runs
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Probability budget used to size Monte Carlo runs
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Explicit Monte Carlo size
    #[arg(long = "k", global = true)]
    pub k: Option<usize>,
    /// Machine-readable output
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
    /// Enumerate when the design is within the planned Monte Carlo size
    Auto,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Experiment CSV (unit_id, w, y[, block])
    #[arg(long)]
    pub data: PathBuf,
    /// `crd:N:N1` or `rbd:n/t,n/t,...`
    #[arg(long)]
    pub design: String,
    #[arg(long, default_value = "diff_means")]
    pub stat: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// All p-values at one θ
    Test {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
    },
    /// p-value function on a grid, or its exact steps
    Pcurve {
        #[command(flatten)]
        input: DataArgs,
        /// lplus, uplus, lminus, uminus or two_sided
        #[arg(long, default_value = "lplus")]
        side: String,
        /// Comma separated θ values
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// `lo,hi,n` evenly spaced points
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        /// Dump every breakpoint with the values at and just after it
        #[arg(long)]
        exact: bool,
    },
    /// Confidence interval by inverting the p-value functions
    Invert {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long, default_value_t = 0.025)]
        alpha1: f64,
        #[arg(long, default_value_t = 0.025)]
        alpha2: f64,
        /// Overall level; sets both tails to alpha/2
        #[arg(long)]
        alpha: Option<f64>,
        /// Also report the traditional interval
        #[arg(long)]
        traditional: bool,
        /// Read the traditional interval off this θ grid
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Combined interval of independent experiments
    Combine {
        /// One per experiment
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        /// One per experiment, or one for all
        #[arg(long = "design", required = true)]
        design: Vec<String>,
        #[arg(long, default_value = "diff_means")]
        stat: String,
        /// stouffer, fisher or double_exponential
        #[arg(long, default_value = "fisher")]
        combiner: String,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Monte Carlo sizes needed for a sup-norm error target
    McThreshold {
        /// Comma separated ε values
        #[arg(long)]
        eps: Option<String>,
        /// Also plan this design
        #[arg(long)]
        design: Option<String>,
    },
    /// Coverage simulation for two experiments and their combination
    Simulate {
        /// Scenario JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// `b1,k1,b2,k2` when no config file is given
        #[arg(long, default_value = "1,16,1,16")]
        scenario: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        k_cap: Option<usize>,
        /// Draw new populations every rep
        #[arg(long)]
        fresh: bool,
        /// 1500 reps with up to 10000 assignments
        #[arg(long)]
        full: bool,
    },
    /// The bundled ten-unit example end to end
    Toy,
}

/// Parses `args` (including the program name), runs, and prints. Returns
/// the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Computation => 3,
        ErrorKind::Precondition => 4,
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Test { input, theta } => cmd_test(cli, input, *theta),
        Command::Pcurve {
            input,
            side,
            grid,
            range,
            exact,
        } => cmd_pcurve(cli, input, side, grid.as_deref(), range.as_deref(), *exact),
        Command::Invert {
            input,
            alpha1,
            alpha2,
            alpha,
            traditional,
            grid,
        } => {
            let (a1, a2) = alpha.map_or((*alpha1, *alpha2), |a| (a / 2.0, a / 2.0));
            cmd_invert(cli, input, a1, a2, *traditional || grid.is_some(), grid.as_deref())
        }
        Command::Combine {
            data,
            design,
            stat,
            combiner,
            weights,
            alpha,
        } => cmd_combine(cli, data, design, stat, combiner, weights.as_deref(), *alpha),
        Command::McThreshold { eps, design } => cmd_mc_threshold(cli, eps.as_deref(), design.as_deref()),
        Command::Simulate {
            config,
            scenario,
            reps,
            k_cap,
            fresh,
            full,
        } => cmd_simulate(cli, config.as_deref(), scenario, *reps, *k_cap, *fresh, *full),
        Command::Toy => cmd_toy(cli),
    }
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

/// Mode for `design` from the global flags.
pub fn resolve_mode(cli: &Cli, design: &Design) -> Result<Mode> {
    let epsilon = cli.epsilon.unwrap_or(DEFAULT_EPSILON);
    let delta = cli.delta.unwrap_or(DEFAULT_DELTA);
    match cli.mode {
        ModeArg::Exact => Ok(Mode::exact()),
        ModeArg::Mc => {
            let k = match cli.k {
                Some(k) => k,
                None => required_k(epsilon, delta)? as usize,
            };
            Ok(Mode::mc(k, seed(cli)))
        }
        ModeArg::Auto => match cli.k {
            Some(k) => Ok(Mode::auto(design, k, seed(cli))),
            None => plan(design, epsilon, delta)?.mode(seed(cli)),
        },
    }
}

fn parse_design(s: &str) -> Result<Design> {
    s.parse()
}

struct Loaded {
    design: Design,
    stat: StatisticSpec,
    test: RandomizationTest,
}

fn load(cli: &Cli, input: &DataArgs) -> Result<Loaded> {
    let design = parse_design(&input.design)?;
    let data = io::load_experiment(&input.data, &design)?.data;
    let stat = StatisticSpec::by_name(&input.stat)?;
    let mode = resolve_mode(cli, &design)?;
    let test = RandomizationTest::new(&data, &design, &stat, mode)?;
    Ok(Loaded {
        design,
        stat,
        test,
    })
}

fn mode_json(mode: Mode, k: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("mode".into(), Value::from(mode.label()));
    m.insert("K".into(), Value::from(k));
    m.insert(
        "seed".into(),
        match mode {
            Mode::MonteCarlo { seed, .. } => Value::from(seed),
            Mode::Exact { .. } => Value::Null,
        },
    );
    m
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Proposed => "proposed",
        Method::Traditional => "traditional",
        Method::TraditionalGrid => "traditional_grid",
        Method::Combined => "combined",
    }
}

pub fn interval_json(ci: &ConfidenceInterval) -> Value {
    json!({
        "lower": num(ci.lower),
        "upper": num(ci.upper),
        "lower_closed": ci.lower_closed,
        "upper_closed": ci.upper_closed,
        "alpha1": num(ci.alpha1),
        "alpha2": num(ci.alpha2),
        "method": method_name(ci.method),
    })
}

pub fn interval_text(ci: &ConfidenceInterval) -> String {
    interval_with(ci, text)
}

fn interval_with(ci: &ConfidenceInterval, show: impl Fn(f64) -> String) -> String {
    format!(
        "{}{}, {}{}",
        if ci.lower_closed { '[' } else { '(' },
        show(ci.lower),
        show(ci.upper),
        if ci.upper_closed { ']' } else { ')' }
    )
}

fn three_decimals(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        text(x)
    }
}

fn render(cli: &Cli, value: &Value, plain: impl FnOnce() -> String) -> Result<String> {
    if cli.json {
        Ok(serde_json::to_string_pretty(value)? + "\n")
    } else {
        Ok(plain())
    }
}

fn rows_text(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn cmd_test(cli: &Cli, input: &DataArgs, theta: f64) -> Result<String> {
    let l = load(cli, input)?;
    let p = l.test.p_values(theta)?;
    let mut obj = Map::new();
    obj.insert("theta".into(), num(theta));
    obj.insert("T_obs".into(), num(p.t_obs));
    obj.insert("p_Lplus".into(), num(p.lplus));
    obj.insert("p_Uplus".into(), num(p.uplus));
    obj.insert("p_Lminus".into(), num(p.lminus));
    obj.insert("p_Uminus".into(), num(p.uminus));
    obj.insert("p_two_sided".into(), num(p.two_sided));
    obj.insert("statistic".into(), Value::from(l.stat.name()));
    obj.insert("design".into(), Value::from(l.design.to_string()));
    obj.extend(mode_json(l.test.mode(), l.test.k()));
    let value = Value::Object(obj);
    render(cli, &value, || {
        rows_text(&[
            ("theta", text(theta)),
            ("T_obs", text(p.t_obs)),
            ("p_Lplus", text(p.lplus)),
            ("p_Uplus", text(p.uplus)),
            ("p_Lminus", text(p.lminus)),
            ("p_Uminus", text(p.uminus)),
            ("p_two_sided", text(p.two_sided)),
            ("mode", format!("{} (K = {})", l.test.mode().label(), l.test.k())),
        ])
    })
}

fn grid_from(grid: Option<&str>, range: Option<&str>) -> Result<Vec<f64>> {
    match (grid, range) {
        (Some(g), None) => io::parse_list(g),
        (None, Some(r)) => {
            let v = io::parse_list(r)?;
            if v.len() != 3 || v[2] < 2.0 || v[2].fract() != 0.0 || !(v[0] < v[1]) {
                return Err(Error::InvalidArgument("range must be lo,hi,n with lo < hi and n >= 2".into()));
            }
            let n = v[2] as usize;
            Ok((0..n).map(|i| v[0] + (v[1] - v[0]) * i as f64 / (n - 1) as f64).collect())
        }
        (None, None) => Err(Error::InvalidArgument("give --grid, --range or --exact".into())),
        (Some(_), Some(_)) => Err(Error::InvalidArgument("--grid and --range are exclusive".into())),
    }
}

fn csv_text(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(r.iter().map(|&x| text(x)))?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_pcurve(
    cli: &Cli,
    input: &DataArgs,
    side: &str,
    grid: Option<&str>,
    range: Option<&str>,
    exact: bool,
) -> Result<String> {
    let kind = PValueKind::parse(side)?;
    let l = load(cli, input)?;
    let mut meta = mode_json(l.test.mode(), l.test.k());
    meta.insert("side".into(), Value::from(kind.name()));
    meta.insert("statistic".into(), Value::from(l.stat.name()));
    meta.insert("T_obs".into(), num(l.test.t_obs()));
    if exact {
        if grid.is_some() || range.is_some() {
            return Err(Error::InvalidArgument("--exact takes no grid".into()));
        }
        let functions = PValueFunctions::build(&l.test)?;
        let f = functions.get(kind)?;
        let mut rows = vec![vec![f64::NEG_INFINITY, f.eval(f64::NEG_INFINITY), f.eval(f64::NEG_INFINITY)]];
        rows.extend(f.breakpoints().iter().map(|&t| vec![t, f.eval(t), f.eval(t.next_up())]));
        meta.insert(
            "steps".into(),
            rows.iter()
                .map(|r| json!({"theta": num(r[0]), "p": num(r[1]), "p_right": num(r[2])}))
                .collect(),
        );
        let value = Value::Object(meta);
        if cli.json {
            return render(cli, &value, String::new);
        }
        return csv_text(&["theta", "p", "p_right"], &rows);
    }
    let thetas = grid_from(grid, range)?;
    let rows = thetas
        .iter()
        .map(|&t| Ok(vec![t, l.test.p_value(t, kind)?]))
        .collect::<Result<Vec<_>>>()?;
    meta.insert(
        "points".into(),
        rows.iter().map(|r| json!({"theta": num(r[0]), "p": num(r[1])})).collect(),
    );
    let value = Value::Object(meta);
    if cli.json {
        return render(cli, &value, String::new);
    }
    csv_text(&["theta", "p"], &rows)
}

fn cmd_invert(
    cli: &Cli,
    input: &DataArgs,
    alpha1: f64,
    alpha2: f64,
    traditional: bool,
    grid: Option<&str>,
) -> Result<String> {
    let l = load(cli, input)?;
    let functions = PValueFunctions::build(&l.test)?;
    let proposed = functions.interval(alpha1, alpha2)?;
    let trad = if traditional {
        let alpha = alpha1 + alpha2;
        Some(match grid {
            Some(g) => traditional_interval_on_grid(&l.test, alpha, &io::parse_list(g)?)?,
            None => functions.traditional(alpha)?,
        })
    } else {
        None
    };
    let mut obj = Map::new();
    obj.insert("statistic".into(), Value::from(l.stat.name()));
    obj.insert("design".into(), Value::from(l.design.to_string()));
    obj.insert("T_obs".into(), num(functions.t_obs));
    obj.extend(mode_json(l.test.mode(), l.test.k()));
    obj.insert("proposed".into(), interval_json(&proposed));
    if let Some(t) = &trad {
        obj.insert("traditional".into(), interval_json(t));
    }
    let value = Value::Object(obj);
    render(cli, &value, || {
        let mut rows = vec![("proposed", interval_text(&proposed))];
        if let Some(t) = &trad {
            rows.push(("traditional", interval_text(t)));
        }
        rows.push(("mode", format!("{} (K = {})", l.test.mode().label(), l.test.k())));
        rows_text(&rows)
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_combine(
    cli: &Cli,
    files: &[PathBuf],
    designs: &[String],
    stat: &str,
    combiner: &str,
    weights: Option<&str>,
    alpha: f64,
) -> Result<String> {
    if designs.len() != files.len() && designs.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{} files but {} designs; give one design per file or a single design",
            files.len(),
            designs.len()
        )));
    }
    let weights = weights.map(io::parse_list).transpose()?;
    let spec = CombinerSpec::by_name(combiner, weights, cli.seed.unwrap_or(DEFAULT_REFERENCE_SEED))?;
    let stat = StatisticSpec::by_name(stat)?;
    let mut functions = Vec::with_capacity(files.len());
    let mut modes = Vec::with_capacity(files.len());
    for (i, path) in files.iter().enumerate() {
        let design = parse_design(&designs[if designs.len() == 1 { 0 } else { i }])?;
        let data = io::load_experiment(path, &design)?.data;
        let mode = experiment_mode(resolve_mode(cli, &design)?, i);
        let test = RandomizationTest::new(&data, &design, &stat, mode)?;
        modes.push((mode, test.k()));
        functions.push(PValueFunctions::build(&test)?);
    }
    let report = report_from_functions(&functions, &spec, alpha)?;
    let individual: Vec<Value> = report
        .individual
        .iter()
        .zip(files)
        .zip(&modes)
        .map(|((ci, path), (mode, k))| {
            let mut obj = Map::new();
            obj.insert("file".into(), Value::from(path.display().to_string()));
            obj.insert("interval".into(), interval_json(ci));
            obj.extend(mode_json(*mode, *k));
            Value::Object(obj)
        })
        .collect();
    let value = json!({
        "combiner": report.combiner,
        "statistic": stat.name(),
        "alpha": num(alpha),
        "combined": interval_json(&report.combined),
        "individual": individual,
    });
    render(cli, &value, || {
        let mut out = format!("{:<24} {}\n", format!("combined ({})", report.combiner), interval_text(&report.combined));
        for (ci, path) in report.individual.iter().zip(files) {
            out += &format!("{:<24} {}\n", path.display(), interval_text(ci));
        }
        out
    })
}

fn cmd_mc_threshold(cli: &Cli, eps: Option<&str>, design: Option<&str>) -> Result<String> {
    let delta = cli.delta.unwrap_or(DEFAULT_DELTA);
    let epsilons = match (eps, cli.epsilon) {
        (Some(list), _) => io::parse_list(list)?,
        (None, Some(e)) => vec![e],
        (None, None) => TABLE_EPSILONS.to_vec(),
    };
    let table = threshold_table(&epsilons, delta)?;
    let plans: Vec<(Design, McPlan)> = match design {
        Some(d) => {
            let d = parse_design(d)?;
            epsilons
                .iter()
                .map(|&e| Ok((d.clone(), plan(&d, e, delta)?)))
                .collect::<Result<_>>()?
        }
        None => Vec::new(),
    };
    let rows: Vec<Value> = table
        .iter()
        .zip(plans.iter().map(Some).chain(std::iter::repeat(None)))
        .map(|(&(e, k), p)| {
            let mut obj = Map::new();
            obj.insert("epsilon".into(), num(e));
            obj.insert("k".into(), Value::from(k));
            if let Some((_, plan)) = p {
                obj.insert("plan".into(), serde_json::to_value(plan.strategy)?);
            }
            Ok(Value::Object(obj))
        })
        .collect::<Result<_>>()?;
    let mut value = json!({"delta": num(delta), "rows": rows});
    if let Some((d, _)) = plans.first() {
        value["design"] = Value::from(d.to_string());
        value["total_assignments"] = Value::from(d.total_assignments().to_string());
    }
    render(cli, &value, || {
        let mut out = format!("delta = {}\n{:>10} {:>12}", text(delta), "epsilon", "K");
        if !plans.is_empty() {
            out += &format!("  plan for {}", plans[0].0);
        }
        out.push('\n');
        for (i, (e, k)) in table.iter().enumerate() {
            out += &format!("{:>10} {:>12}", text(*e), k);
            if let Some((_, p)) = plans.get(i) {
                out += &match p.strategy {
                    crate::planner::Strategy::Enumerate => "  enumerate".to_string(),
                    crate::planner::Strategy::Sample { k } => format!("  sample({k})"),
                };
            }
            out.push('\n');
        }
        out
    })
}

fn cmd_simulate(
    cli: &Cli,
    config: Option<&Path>,
    scenario: &str,
    reps: Option<usize>,
    k_cap: Option<usize>,
    fresh: bool,
    full: bool,
) -> Result<String> {
    let mut cfg = match config {
        Some(path) => serde_json::from_str::<ScenarioConfig>(&std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidData(format!("cannot read {}: {e}", path.display()))
        })?)?,
        None => {
            let v = io::parse_list(scenario)?;
            if v.len() != 4 || v.iter().any(|x| *x < 1.0 || x.fract() != 0.0) {
                return Err(Error::InvalidArgument("scenario must be b1,k1,b2,k2".into()));
            }
            ScenarioConfig::new(v[0] as usize, v[1] as usize, v[2] as usize, v[3] as usize)
        }
    };
    if full {
        cfg.reps = 1500;
        cfg.k_cap = 10_000;
    }
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(k) = k_cap.or(cli.k) {
        cfg.k_cap = k;
    }
    if fresh {
        cfg.population = PopulationPolicy::Fresh;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    let result = run_scenario(&cfg)?;
    let arms: Vec<Value> = result
        .arms
        .iter()
        .map(|a| {
            json!({
                "name": a.name,
                "covered": a.covered,
                "reps": a.reps,
                "coverage": num(a.coverage),
                "width_mean": num(a.width_mean),
                "width_sd": num(a.width_sd),
            })
        })
        .collect();
    let value = json!({
        "config": serde_json::to_value(&cfg)?,
        "modes": result.modes,
        "arms": arms,
    });
    render(cli, &value, || result.table())
}

fn cmd_toy(cli: &Cli) -> Result<String> {
    let population = fixtures::toy_population();
    let data = fixtures::toy();
    let design = fixtures::toy_design();
    let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact())?;
    let functions = PValueFunctions::build(&test)?;
    let proposed = functions.interval(0.025, 0.025)?;
    let grid = traditional_interval_on_grid(&test, 0.05, &TOY_GRID)?;
    let pvals = TOY_GRID
        .iter()
        .map(|&t| test.p_value(t, PValueKind::Lplus))
        .collect::<Result<Vec<_>>>()?;
    let w = data.w().as_slice();
    let units: Vec<Value> = (0..data.n())
        .map(|i| {
            json!({
                "unit": i + 1,
                "y1": num(population.y1[i]),
                "y0": num(population.y0[i]),
                "w": w[i],
                "y_obs": num(data.y()[i]),
            })
        })
        .collect();
    let value = json!({
        "design": design.to_string(),
        "K": test.k(),
        "T_obs": num(test.t_obs()),
        "units": units,
        "p_Lplus": TOY_GRID.iter().zip(&pvals).map(|(t, p)| json!({"theta": num(*t), "p": num(*p)})).collect::<Vec<_>>(),
        "proposed": interval_json(&proposed),
        "traditional_grid": interval_json(&grid),
    });
    render(cli, &value, || {
        let mut out = format!("toy example: {design}, K = {}\n\n", test.k());
        out += &format!("{:>4} {:>8} {:>8} {:>3} {:>8}\n", "unit", "Y(1)", "Y(0)", "W", "Y_obs");
        for i in 0..data.n() {
            out += &format!(
                "{:>4} {:>8.3} {:>8.3} {:>3} {:>8.3}\n",
                i + 1,
                population.y1[i],
                population.y0[i],
                w[i],
                data.y()[i]
            );
        }
        out += &format!("\nT_obs = {:.3}\n\n{:>6} {:>7}\n", test.t_obs(), "theta", "p_L+");
        for (t, p) in TOY_GRID.iter().zip(&pvals) {
            out += &format!("{t:>6} {p:>7.3}\n");
        }
        out += &format!("\nproposed 95% interval     {}\n", interval_with(&proposed, three_decimals));
        out += &format!("traditional on the grid   {}\n", interval_text(&grid));
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("frtcd").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn toy_output_has_the_reference_numbers() {
        let out = run(&cli(&["toy"])).unwrap();
        for needle in ["0.004", "0.012", "0.131", "0.560", "0.988", "T_obs = 0.912", "[0, 3]"] {
            assert!(out.contains(needle), "{needle} missing from\n{out}");
        }
        let seeded = run(&cli(&["toy", "--seed", "99"])).unwrap();
        assert_eq!(out, seeded);
        let v: Value = serde_json::from_str(&run(&cli(&["toy", "--json"])).unwrap()).unwrap();
        assert_eq!(v["K"], 252);
        assert_eq!(v["traditional_grid"]["lower"], 0.0);
    }

    #[test]
    fn thresholds() {
        let v: Value = serde_json::from_str(&run(&cli(&["mc-threshold", "--json"])).unwrap()).unwrap();
        let ks: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["k"].as_u64().unwrap()).collect();
        assert_eq!(ks, [4794, 19173, 119830, 479318, 1917269, 11982930, 47931717]);
        let out = run(&cli(&["mc-threshold", "--eps", "1", "--delta", "0.5", "--json"])).unwrap();
        assert!(out.contains("\"k\": 17"));
        let out = run(&cli(&["mc-threshold", "--epsilon", "0.1", "--design", "crd:30:15"])).unwrap();
        assert!(out.contains("sample(4794)"), "{out}");
    }

    #[test]
    fn modes() {
        let d = Design::crd(30, 15).unwrap();
        assert_eq!(resolve_mode(&cli(&["toy", "--epsilon", "0.1"]), &d).unwrap(), Mode::mc(4794, 0));
        assert_eq!(resolve_mode(&cli(&["toy", "--mode", "exact"]), &d).unwrap(), Mode::exact());
        assert_eq!(
            resolve_mode(&cli(&["toy", "--mode", "mc", "--k", "50", "--seed", "4"]), &d).unwrap(),
            Mode::mc(50, 4)
        );
        let small = Design::crd(10, 5).unwrap();
        assert!(matches!(resolve_mode(&cli(&["toy"]), &small).unwrap(), Mode::Exact { .. }));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidData("x".into())), 2);
        assert_eq!(exit_code(&Error::DegenerateStatistic("x".into())), 3);
        assert_eq!(exit_code(&Error::NotMonotone { statistic: "s".into() }), 4);
    }
}

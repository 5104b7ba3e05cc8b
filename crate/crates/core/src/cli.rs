//! The `motlab` command line.
//!
//! Exit codes: 0 ok, 2 parse or usage error, 3 infeasible or not in convex
//! order, 4 internal invariant breach. JSON output is canonical (see
//! [`crate::canonical`]).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical;
use crate::error::Error;
use crate::lab::{self, continuity_sweep, projection_stability, random_convex_pair};
use crate::lp::{solve_lp, solve_lp_logged, LinearProgram};
use crate::measures::{
    barycentre_report, check_dispersion, convex_order, DiscreteCoupling, DiscreteMeasure, DEFAULT_TOL_MART,
};
use crate::mot::{
    kappa_inner_plans, kappa_solve_bruteforce, monotonicity_check, mot_solve, penalized_ot, CostMatrix, CostSpec,
    KappaCost, KappaSpec, DEFAULT_IMPROVE_TOL,
};
use crate::nested::{nested_w_p, project_to_martingale};
use crate::rearrange::{rearrange, trace_to_bicausal_plan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_ORDER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Slack allowed in the sandwich `epsilon <= projection <= cost_bound`.
pub const SANDWICH_TOL: f64 = 1e-7;

#[derive(Debug, Parser)]
#[command(name = "motlab", version, about = "Discrete martingale optimal transport lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convex order, means and second moments of two measures.
    Check { mu: PathBuf, nu: PathBuf },
    /// Martingale optimal transport: values, monotonicity samples, kernel lifts.
    #[command(subcommand)]
    Mot(MotCommand),
    /// Nested-distance projection of a coupling onto the martingale couplings.
    Project {
        pi: PathBuf,
    },
    /// Martingale rearrangement; the trace is written as JSON lines.
    Rearrange {
        pi: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL_MART)]
        tol_mart: f64,
    },
    /// Nested Wasserstein distance between two couplings.
    NdDist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Experiment tables and random instances.
    #[command(subcommand)]
    Lab(LabCommand),
    /// Solves a linear program given as JSON.
    Lp {
        file: PathBuf,
        #[arg(long)]
        dump_tableau: bool,
    },
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// abs | square | call:K | poly:i,j,c;...
    #[arg(long, default_value = "abs", conflicts_with = "cost_matrix")]
    pub cost: String,
    /// JSON file {"values": [[..]], "x1": [..], "x2": [..]}; the labels
    /// default to the atoms of mu and nu.
    #[arg(long)]
    pub cost_matrix: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MotCommand {
    /// Optimal martingale coupling and value.
    Solve {
        mu: PathBuf,
        nu: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        /// Also report the dispersion-penalized value with this Lipschitz
        /// constant.
        #[arg(long = "L")]
        lipschitz: Option<f64>,
    },
    /// Samples sub-supports of a coupling and searches each for an improving
    /// competitor.
    CheckMonotone {
        pi: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        subset_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_IMPROVE_TOL)]
        tol: f64,
    },
    /// Kernel-lifted objective of a coupling, or with `--solve` its minimum
    /// over the martingale couplings of the marginals.
    Kappa {
        pi: PathBuf,
        /// JSON file {"kernel": [{"x1": .., "atoms": [..], "weights": [..]}]};
        /// defaults to the disintegration of `pi`.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long, default_value = "abs")]
        cost: String,
        /// Use |x2 - y2|^p between kernel and coupling instead of the lifted
        /// cost.
        #[arg(long)]
        kernel_distance: Option<f64>,
        #[arg(long)]
        solve: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum LabCommand {
    /// Expected and computed values for the chain counterexamples.
    Example1 {
        #[arg(long, default_value_t = 1)]
        family: u8,
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
    /// MOT values under outward perturbations of nu.
    Sweep {
        mu: PathBuf,
        nu: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.01, 0.001])]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Epsilon and projection value under perturbed marginals.
    Stability {
        pi: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.01, 0.001])]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A random pair in convex order.
    RandomPair {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Atoms of nu.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::InvalidInput(_) | Error::SizeGuard(_) => EXIT_PARSE,
            Error::ConvexOrder(_) | Error::Lp(_) => EXIT_ORDER,
            Error::Invariant(_) | Error::Degenerate(_) | Error::NoChain(_) => EXIT_INVARIANT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

/// What a command produced: the text to emit and the exit code to return
/// after emitting it.
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, code: EXIT_OK }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let result = execute(&cli).and_then(|out| {
        emit(cli.out.as_deref(), &out.text)?;
        Ok(out.code)
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("motlab: {}", f.message);
            f.code
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| fail(EXIT_PARSE, e.to_string())),
    }
}

/// Runs a parsed command without writing anything.
pub fn execute(cli: &Cli) -> CliResult<Output> {
    let fmt = cli.format;
    match &cli.command {
        Command::Check { mu, nu } => cmd_check(&read_measure(mu)?, &read_measure(nu)?),
        Command::Mot(m) => cmd_mot(m),
        Command::Project { pi } => cmd_project(&read_coupling(pi)?),
        Command::Rearrange { pi, tol_mart } => cmd_rearrange(&read_coupling(pi)?, *tol_mart),
        Command::NdDist { a, b, p } => {
            let (value, plan) = nested_w_p(&read_coupling(a)?, &read_coupling(b)?, *p)?;
            Ok(Output::ok(line(&json!({ "distance": value, "p": p, "plan": plan }))?))
        }
        Command::Lab(l) => cmd_lab(l, fmt),
        Command::Lp { file, dump_tableau } => {
            let lp: LinearProgram = parse_json(file)?;
            if *dump_tableau {
                let (sol, log) = solve_lp_logged(&lp)?;
                Ok(Output::ok(format!("{}{}", line(&sol)?, log)))
            } else {
                Ok(Output::ok(line(&solve_lp(&lp)?)?))
            }
        }
    }
}

fn line<T: Serialize + ?Sized>(v: &T) -> CliResult<String> {
    Ok(canonical::to_string(v)? + "\n")
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))
}

pub fn read_measure(path: &Path) -> CliResult<DiscreteMeasure> {
    DiscreteMeasure::from_json_str(&read(path)?).map_err(|e| parse_failure(path, e))
}

pub fn read_coupling(path: &Path) -> CliResult<DiscreteCoupling> {
    DiscreteCoupling::from_json_str(&read(path)?).map_err(|e| parse_failure(path, e))
}

fn parse_failure(path: &Path, e: Error) -> Failure {
    fail(EXIT_PARSE, format!("{}: {e}", path.display()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CostMatrixFile {
    values: Vec<Vec<f64>>,
    x1: Option<Vec<f64>>,
    x2: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelEntry {
    x1: f64,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    kernel: Vec<KernelEntry>,
}

/// The cost from `--cost` or `--cost-matrix`; matrix labels default to the
/// atoms of `mu` and `nu`.
pub fn resolve_cost(args: &CostArgs, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CliResult<CostSpec> {
    let Some(path) = &args.cost_matrix else {
        return Ok(CostSpec::parse(&args.cost)?);
    };
    let f: CostMatrixFile = parse_json(path)?;
    let x1 = f.x1.unwrap_or_else(|| mu.atoms().to_vec());
    let x2 = f.x2.unwrap_or_else(|| nu.atoms().to_vec());
    let shape_ok = f.values.len() == x1.len() && f.values.iter().all(|r| r.len() == x2.len());
    if !shape_ok {
        return Err(fail(
            EXIT_PARSE,
            format!("{}: cost matrix must be {} x {}", path.display(), x1.len(), x2.len()),
        ));
    }
    if f.values.iter().flatten().chain(&x1).chain(&x2).any(|v| !v.is_finite()) {
        return Err(fail(EXIT_PARSE, format!("{}: non-finite entry", path.display())));
    }
    Ok(CostSpec::Matrix(CostMatrix {
        x1,
        x2,
        values: f.values,
    }))
}

fn measure_summary(m: &DiscreteMeasure) -> Value {
    json!({
        "atoms": m.len(),
        "mean": m.mean(),
        "second_moment": m.moment(2),
        "min": m.min_atom(),
        "max": m.max_atom(),
    })
}

fn cmd_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CliResult<Output> {
    let ordered = convex_order(mu, nu);
    let text = line(&json!({
        "convex_order": ordered,
        "mu": measure_summary(mu),
        "nu": measure_summary(nu),
    }))?;
    Ok(Output {
        text,
        code: if ordered { EXIT_OK } else { EXIT_ORDER },
    })
}

fn cmd_mot(cmd: &MotCommand) -> CliResult<Output> {
    match cmd {
        MotCommand::Solve {
            mu,
            nu,
            cost,
            lipschitz,
        } => {
            let (mu, nu) = (read_measure(mu)?, read_measure(nu)?);
            let c = resolve_cost(cost, &mu, &nu)?;
            let (value, plan) = mot_solve(&mu, &nu, &c)?;
            let mut out = json!({ "cost": c.name(), "value": value, "plan": plan.to_json() });
            if let Some(l) = lipschitz {
                out["penalized"] = json!({ "L": l, "value": penalized_ot(&mu, &nu, &c, *l)? });
            }
            Ok(Output::ok(line(&out)?))
        }
        MotCommand::CheckMonotone {
            pi,
            cost,
            samples,
            subset_size,
            seed,
            tol,
        } => {
            let pi = read_coupling(pi)?;
            let c = resolve_cost(cost, pi.first_marginal(), pi.second_marginal())?;
            let report = monotonicity_check(&pi, &c, *samples, *subset_size, *seed, *tol)?;
            Ok(Output::ok(line(&json!({
                "cost": c.name(),
                "improvable": !report.violations.is_empty(),
                "report": report,
            }))?))
        }
        MotCommand::Kappa {
            pi,
            kernel,
            cost,
            kernel_distance,
            solve,
        } => {
            let pi = read_coupling(pi)?;
            let kc = match kernel_distance {
                Some(p) => KappaCost::KernelDistance(*p),
                None => KappaCost::Lifted(CostSpec::parse(cost)?),
            };
            let spec = match kernel {
                None => KappaSpec::from_coupling(&pi, kc),
                Some(path) => {
                    let f: KernelFile = parse_json(path)?;
                    let mut x1 = Vec::with_capacity(f.kernel.len());
                    let mut laws = Vec::with_capacity(f.kernel.len());
                    for e in f.kernel {
                        x1.push(e.x1);
                        laws.push(
                            crate::measures::MeasureJson {
                                atoms: e.atoms,
                                weights: e.weights,
                            }
                            .into_measure()
                            .map_err(|err| parse_failure(path, err))?,
                        );
                    }
                    KappaSpec::new(x1, laws, kc).map_err(|err| parse_failure(path, err))?
                }
            };
            let (objective, plans) = kappa_inner_plans(&pi, &spec)?;
            let mut out = json!({ "objective": objective, "inner": plans });
            if *solve {
                let (value, best) = kappa_solve_bruteforce(&spec, pi.first_marginal(), pi.second_marginal())?;
                out["minimum"] = json!({ "value": value, "plan": best.to_json() });
            }
            Ok(Output::ok(line(&out)?))
        }
    }
}

fn sandwich(epsilon: f64, projection: f64, cost_bound: Option<f64>) -> CliResult<()> {
    if epsilon > projection + SANDWICH_TOL || cost_bound.is_some_and(|b| projection > b + SANDWICH_TOL) {
        return Err(fail(
            EXIT_INVARIANT,
            format!("sandwich violated: epsilon {epsilon}, projection {projection}, bound {cost_bound:?}"),
        ));
    }
    Ok(())
}

fn cmd_project(pi: &DiscreteCoupling) -> CliResult<Output> {
    let r = project_to_martingale(pi)?;
    sandwich(r.lower_bound, r.value, None)?;
    Ok(Output::ok(line(&json!({
        "value": r.value,
        "epsilon": r.lower_bound,
        "projected": r.projected.to_json(),
        "plan": r.plan,
    }))?))
}

fn cmd_rearrange(pi: &DiscreteCoupling, tol_mart: f64) -> CliResult<Output> {
    let r = rearrange(pi, tol_mart)?;
    let mut text = String::new();
    for (index, step) in r.trace.iter().enumerate() {
        let mut v = serde_json::to_value(step).map_err(|e| fail(EXIT_INVARIANT, e.to_string()))?;
        v["index"] = json!(index);
        text += &line(&v)?;
    }
    let plan = trace_to_bicausal_plan(pi, &r)?;
    plan.verify(pi, &r.output, 1e-9)?;
    if r.epsilon_initial > r.cost_bound + SANDWICH_TOL || plan.cost > r.cost_bound + SANDWICH_TOL {
        return Err(fail(
            EXIT_INVARIANT,
            format!(
                "certificate violated: epsilon {}, plan cost {}, bound {}",
                r.epsilon_initial, plan.cost, r.cost_bound
            ),
        ));
    }
    text += &line(&json!({
        "type": "summary",
        "epsilon": r.epsilon_initial,
        "cost_bound": r.cost_bound,
        "plan_cost": plan.cost,
        "steps": r.steps(),
        "snap": r.snap.as_ref().map(|(v, _)| *v),
        "case1_after_case2": r.case1_after_case2,
        "output": r.output.to_json(),
    }))?;
    Ok(Output::ok(text))
}

#[derive(Debug, Serialize)]
struct Comparison {
    quantity: &'static str,
    expected: f64,
    computed: f64,
}

fn csv_text<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| fail(EXIT_INVARIANT, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| fail(EXIT_INVARIANT, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
}

fn cmd_lab(cmd: &LabCommand, fmt: Format) -> CliResult<Output> {
    match cmd {
        LabCommand::Example1 { family, n } => {
            let ex = match family {
                1 => lab::example1_family1(*n)?,
                2 => lab::example1_family2(*n)?,
                f => return Err(fail(EXIT_PARSE, format!("unknown family {f}, expected 1 or 2"))),
            };
            let epsilon = barycentre_report(&ex.coupling, DEFAULT_TOL_MART).epsilon;
            let projection = project_to_martingale(&ex.coupling)?.value;
            let r = rearrange(&ex.coupling, DEFAULT_TOL_MART)?;
            sandwich(epsilon, projection, Some(r.cost_bound))?;
            let rows = [
                Comparison {
                    quantity: "epsilon",
                    expected: ex.expected_epsilon,
                    computed: epsilon,
                },
                Comparison {
                    quantity: "projection",
                    expected: ex.expected_projection,
                    computed: projection,
                },
                Comparison {
                    quantity: "cost_bound",
                    expected: ex.expected_projection,
                    computed: r.cost_bound,
                },
            ];
            let text = match fmt {
                Format::Csv => csv_text(&rows)?,
                Format::Json => line(&json!({
                    "family": family,
                    "n": n,
                    "dispersion": check_dispersion(&ex.coupling, 1e-12),
                    "rows": rows,
                }))?,
            };
            Ok(Output::ok(text))
        }
        LabCommand::Sweep {
            mu,
            nu,
            cost,
            p,
            scales,
            seed,
        } => {
            let (mu, nu) = (read_measure(mu)?, read_measure(nu)?);
            let c = resolve_cost(cost, &mu, &nu)?;
            let r = continuity_sweep(&mu, &nu, &c, *p, scales, *seed)?;
            let text = match fmt {
                Format::Csv => csv_text(&r.rows)?,
                Format::Json => line(&r)?,
            };
            Ok(Output::ok(text))
        }
        LabCommand::Stability { pi, scales, seed } => {
            let r = projection_stability(&read_coupling(pi)?, scales, *seed)?;
            if let Some(bad) = r.rows.iter().find(|row| row.error.is_none() && !row.sandwich) {
                return Err(fail(
                    EXIT_INVARIANT,
                    format!("sandwich violated at h = {}: {} > {}", bad.h, bad.epsilon, bad.projection),
                ));
            }
            let text = match fmt {
                Format::Csv => csv_text(&r.rows)?,
                Format::Json => line(&r)?,
            };
            Ok(Output::ok(text))
        }
        LabCommand::RandomPair { seed, m, n, radius } => {
            let (mu, nu) = random_convex_pair(*seed, *m, *n, *radius)?;
            Ok(Output::ok(line(&json!({ "mu": mu.to_json(), "nu": nu.to_json() }))?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_flags() {
        let cli = Cli::try_parse_from(["motlab", "mot", "solve", "a", "b", "--cost", "call:1", "--L", "2"]).unwrap();
        match cli.command {
            Command::Mot(MotCommand::Solve { lipschitz, cost, .. }) => {
                assert_eq!(lipschitz, Some(2.0));
                assert_eq!(cost.cost, "call:1");
            }
            _ => panic!("wrong command"),
        }
        let cli = Cli::try_parse_from(["motlab", "lab", "sweep", "a", "b", "--scales", "0.5,0.1", "--format", "csv"]).unwrap();
        assert_eq!(cli.format, Format::Csv);
        assert!(Cli::try_parse_from(["motlab", "check", "a", "b", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["motlab", "mot", "solve", "a", "b", "--cost", "abs", "--cost-matrix", "m"]).is_err());
    }

    #[test]
    fn example1_table() {
        let cli = Cli::try_parse_from(["motlab", "lab", "example1", "--family", "1", "--n", "5", "--format", "csv"]).unwrap();
        let out = execute(&cli).unwrap();
        assert_eq!(out.code, EXIT_OK);
        let mut lines = out.text.lines();
        assert_eq!(lines.next(), Some("quantity,expected,computed"));
        let proj: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(proj[0], "projection");
        let (e, c): (f64, f64) = (proj[1].parse().unwrap(), proj[2].parse().unwrap());
        assert!((e - 0.8).abs() < 1e-15 && (c - 0.8).abs() < 1e-7);
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Parse("x".into())).code, EXIT_PARSE);
        assert_eq!(Failure::from(Error::ConvexOrder("x".into())).code, EXIT_ORDER);
        assert_eq!(Failure::from(Error::Invariant("x".into())).code, EXIT_INVARIANT);
    }
}

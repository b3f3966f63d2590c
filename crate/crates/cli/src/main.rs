//! `aucteq`: verify, construct, bound, optimize and simulate equilibria of
//! full-information first-price auctions.
//!
//! Exit codes: 0 pass, 1 verification or acceptance failure, 2 input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use aucteq::auction::{summarize, AuctionInstance, FiniteEquilibrium};
use aucteq::construct::{self, ContinuousEquilibrium};
use aucteq::io::{self, CdfJson, EquilibriumJson};
use aucteq::lp::{self, BidGrid, LpQuery, Objective, Sense, TieResolution};
use aucteq::report::{self, Comparison, CriterionResult, ReportBundle};
use aucteq::sim::{self, Algorithm, LearnerConfig};
use aucteq::verify::{self, DeviationPolicy, EquilibriumClass};
use aucteq::{bounds, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "aucteq", version, about = "Equilibria of full-information first-price auctions")]
struct Cli {
    /// Also write the result bundle and artifacts (JSON, CSV) into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an equilibrium JSON file as a CCE or CE.
    Verify(VerifyArgs),
    /// Build one of the explicit equilibria.
    Construct {
        #[command(subcommand)]
        which: ConstructCmd,
    },
    /// Evaluate a closed-form bound.
    Bound {
        #[command(subcommand)]
        which: BoundCmd,
    },
    /// Extremal welfare or revenue over grid-supported equilibria.
    Lp(LpArgs),
    /// Run no-regret dynamics on a bid grid.
    Simulate(SimulateArgs),
    /// Collapse a 3+ bidder equilibrium onto the two highest values.
    Reduce {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Report {
        /// Run a single criterion (1-11).
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cce,
    Ce,
}

impl From<Mode> for EquilibriumClass {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Cce => EquilibriumClass::Cce,
            Mode::Ce => EquilibriumClass::Ce,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    DeviatorLoses,
    DeviatorWins,
}

impl From<Tie> for DeviationPolicy {
    fn from(t: Tie) -> Self {
        match t {
            Tie::DeviatorLoses => DeviationPolicy::DeviatorLoses,
            Tie::DeviatorWins => DeviationPolicy::DeviatorWins,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "cce")]
    mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Who wins a tie created by a deviation.
    #[arg(long, value_enum, default_value = "deviator-loses")]
    tie: Tie,
}

#[derive(Subcommand)]
enum ConstructCmd {
    /// The six-row coarse equilibrium.
    Table1 {
        #[arg(long, default_value_t = construct::TABLE1_EPSILON)]
        eps: f64,
    },
    /// The welfare-minimizing coarse equilibrium.
    WorstWelfare {
        #[arg(long, conflicts_with = "optimal")]
        alpha: Option<f64>,
        /// Use the welfare-minimizing alpha (the default).
        #[arg(long)]
        optimal: bool,
        #[command(flatten)]
        out: ContinuousOut,
    },
    /// Alice wins only at price 0.
    Case1 {
        /// Defaults to the root of 2x - ln x - 2 = 0.
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        out: ContinuousOut,
    },
    /// Symmetric bidders with the lowest revenue.
    WorstRevenue {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[command(flatten)]
        out: ContinuousOut,
    },
    /// Both bidders bid each price, the high bidder wins.
    NashMixture {
        /// Two values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        /// Defaults to equal masses.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct ContinuousOut {
    /// Also round prices down to a k-step grid and emit the finite equilibrium.
    #[arg(long, value_name = "K")]
    grid: Option<usize>,
    /// Emit this many (x, F(x)) samples as CSV.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum BoundCmd {
    /// Minimum welfare over coarse equilibria without overbidding.
    WelfareMin,
    /// Minimum along the boundary case.
    Case1,
    /// 1 - 2/e.
    RevenueFloor,
    /// Revenue floor with n symmetric bidders of value V.
    Symmetric {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        value: f64,
    },
    /// Value gap beyond which revenue is within eps of the second value.
    Gap {
        #[arg(long)]
        eps: f64,
    },
    /// Alice's achievable utility range in the worst-welfare construction.
    UBounds {
        #[arg(long)]
        alpha: f64,
    },
    /// Welfare lower bound for utilities (alpha, beta) and values (1, v).
    WelfareLb {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        v: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Obj {
    Welfare,
    Revenue,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Min,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    Free,
    Priority,
}

#[derive(Args)]
struct GridArgs {
    /// Bidder values, highest first.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Grid steps on [0, highest value]; every value is added as a point.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Restrict each bidder to grid points at most its value.
    #[arg(long)]
    no_overbid: bool,
}

impl GridArgs {
    fn build(&self) -> aucteq::Result<(AuctionInstance, BidGrid)> {
        let inst = AuctionInstance::new(self.values.clone())?;
        let grid = BidGrid::uniform(&inst, self.grid, self.no_overbid)?;
        Ok((inst, grid))
    }
}

#[derive(Args)]
struct LpArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value = "cce")]
    class: Mode,
    #[arg(long, value_enum, default_value = "welfare")]
    objective: Obj,
    #[arg(long, value_enum, default_value = "min")]
    direction: Direction,
    /// Who wins on-path ties: chosen by the LP, or fixed by value order.
    #[arg(long, value_enum, default_value = "free")]
    ties: Ties,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    RegretMatching,
    Mw,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value = "regret-matching")]
    algo: Algo,
    #[arg(long, default_value_t = 100_000)]
    rounds: usize,
    #[arg(long, env = "AUCTEQ_SEED", default_value_t = sim::DEFAULT_SEED)]
    seed: u64,
    /// Multiplicative-weights rate; sqrt(ln k / T) by default.
    #[arg(long)]
    learning_rate: Option<f64>,
}

/// A finished command: the bundle, extra files, and whether it passed.
struct Outcome {
    bundle: ReportBundle,
    artifacts: Vec<(String, String)>,
    pass: bool,
    /// Human-readable text printed instead of the bundle.
    table: Option<String>,
}

fn sha256(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn read_input(path: &Path) -> anyhow::Result<(String, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = sha256(text.as_bytes());
    Ok((text, digest))
}

fn equilibrium_value(inst: &AuctionInstance, eq: &FiniteEquilibrium) -> Value {
    to_value(&EquilibriumJson::from_model(inst, eq))
}

fn bundle(argv: &[String], digest: String, results: Value, comparisons: Vec<Comparison>) -> ReportBundle {
    ReportBundle { command: argv.to_vec(), input_digest: digest, results, comparisons }
}

fn verify_both(inst: &AuctionInstance, eq: &FiniteEquilibrium, class: EquilibriumClass, tol: f64) -> aucteq::Result<Value> {
    let mut out = serde_json::Map::new();
    for policy in DeviationPolicy::BOTH {
        let r = verify::verify(inst, eq, class, tol, policy)?;
        out.insert(to_value(&policy).as_str().unwrap_or_default().to_string(), to_value(&r));
    }
    Ok(Value::Object(out))
}

fn run_verify(args: &VerifyArgs, argv: &[String]) -> anyhow::Result<Outcome> {
    let (text, digest) = read_input(&args.input)?;
    let (inst, eq) = io::parse_equilibrium(&text)?;
    let class = EquilibriumClass::from(args.mode);
    let policy = DeviationPolicy::from(args.tie);
    let report = verify::verify(&inst, &eq, class, args.tol, policy)?;
    let results = json!({
        "pass": report.pass,
        "report": report,
        "by_policy": verify_both(&inst, &eq, class, args.tol)?,
        "summary": summarize(&inst, &eq)?,
    });
    Ok(Outcome {
        pass: report.pass,
        bundle: bundle(argv, digest, results, vec![]),
        artifacts: vec![],
        table: None,
    })
}

fn continuous_outcome(ce: &ContinuousEquilibrium, out: &ContinuousOut, mut results: serde_json::Map<String, Value>) -> anyhow::Result<(Value, Vec<(String, String)>)> {
    let mut artifacts = vec![("cdf.json".to_string(), io::cdf_to_json(ce.price_cdf()))];
    results.insert("values".into(), to_value(&ce.instance().values()));
    results.insert("price_cdf".into(), to_value(&CdfJson::from_model(ce.price_cdf())));
    results.insert("winner_share".into(), to_value(ce.winner_share()));
    results.insert("summary".into(), to_value(&ce.summary()));
    results.insert("deviation_gains".into(), to_value(&ce.deviation_gains()));
    results.insert("no_overbidding".into(), json!(ce.no_overbidding()));
    if let Some(k) = out.grid {
        let eq = construct::discretize(ce, k)?;
        results.insert(
            "discretized".into(),
            json!({
                "k": k,
                "equilibrium": equilibrium_value(ce.instance(), &eq),
                "summary": summarize(ce.instance(), &eq)?,
            }),
        );
        artifacts.push(("equilibrium.json".into(), io::equilibrium_to_json(ce.instance(), &eq)));
    }
    if let Some(n) = out.samples {
        artifacts.push(("cdf_samples.csv".into(), io::cdf_samples_csv(ce.price_cdf(), n)?));
    }
    Ok((Value::Object(results), artifacts))
}

fn run_construct(which: &ConstructCmd, argv: &[String]) -> anyhow::Result<Outcome> {
    let digest = sha256(argv.join(" ").as_bytes());
    let finite = |inst: AuctionInstance, eq: FiniteEquilibrium| -> anyhow::Result<(Value, Vec<(String, String)>)> {
        let results = json!({
            "equilibrium": equilibrium_value(&inst, &eq),
            "summary": summarize(&inst, &eq)?,
        });
        Ok((results, vec![("equilibrium.json".into(), io::equilibrium_to_json(&inst, &eq))]))
    };
    let (results, artifacts) = match which {
        ConstructCmd::Table1 { eps } => {
            let (inst, eq) = construct::construct_table1(*eps)?;
            finite(inst, eq)?
        }
        ConstructCmd::WorstWelfare { alpha, out, .. } => {
            let ce = match alpha {
                Some(a) => construct::construct_worst_welfare(*a)?,
                None => construct::construct_worst_welfare_optimal()?,
            };
            let u = ce.summary().utility;
            let mut extra = serde_json::Map::new();
            extra.insert("alpha".into(), json!(u[0]));
            extra.insert("beta".into(), json!(u[1]));
            continuous_outcome(&ce, out, extra)?
        }
        ConstructCmd::Case1 { alpha, out } => {
            let a = match alpha {
                Some(a) => *a,
                None => bounds::case1_minimum()?.args["alpha"],
            };
            let ce = construct::construct_case1(a)?;
            let mut extra = serde_json::Map::new();
            extra.insert("alpha".into(), json!(a));
            continuous_outcome(&ce, out, extra)?
        }
        ConstructCmd::WorstRevenue { n, value, out } => {
            let ce = construct::construct_symmetric_worst_revenue(*n, *value)?;
            let mut extra = serde_json::Map::new();
            extra.insert("bound".into(), json!(bounds::symmetric_revenue_bound(*n, *value)));
            continuous_outcome(&ce, out, extra)?
        }
        ConstructCmd::NashMixture { values, prices, masses } => {
            if values.len() != 2 {
                return Err(Error::InvalidInput(format!("need exactly two values, got {}", values.len())).into());
            }
            let masses = masses.clone().unwrap_or_else(|| vec![1.0 / prices.len() as f64; prices.len()]);
            if masses.len() != prices.len() {
                return Err(Error::InvalidInput(format!("{} prices but {} masses", prices.len(), masses.len())).into());
            }
            let atoms: Vec<(f64, f64)> = prices.iter().copied().zip(masses).collect();
            let (inst, eq) = construct::construct_pure_nash_mixture(values[0], values[1], &atoms)?;
            finite(inst, eq)?
        }
    };
    Ok(Outcome { bundle: bundle(argv, digest, results, vec![]), artifacts, pass: true, table: None })
}

fn run_bound(which: &BoundCmd, argv: &[String]) -> anyhow::Result<Outcome> {
    let digest = sha256(argv.join(" ").as_bytes());
    let (results, comparisons) = match which {
        BoundCmd::WelfareMin => (to_value(&bounds::minimize_welfare()?), report::welfare_floor()?),
        BoundCmd::Case1 => (to_value(&bounds::case1_minimum()?), report::case1_candidate()?),
        BoundCmd::RevenueFloor => (to_value(&bounds::revenue_floor_result()), vec![]),
        BoundCmd::Symmetric { n, value } => (to_value(&bounds::symmetric_result(*n, *value)?), vec![]),
        BoundCmd::Gap { eps } => (to_value(&bounds::gap_result(*eps)?), vec![]),
        BoundCmd::UBounds { alpha } => {
            let u = bounds::u_bounds(*alpha);
            let mut v = to_value(&u);
            v["alpha"] = json!(alpha);
            v["q"] = json!(bounds::q_of_alpha(*alpha));
            (v, vec![])
        }
        BoundCmd::WelfareLb { alpha, beta, v } => {
            let value = bounds::welfare_lb(*alpha, *beta, *v)?;
            (json!({"value": value, "alpha": alpha, "beta": beta, "v": v}), vec![])
        }
    };
    let pass = comparisons.iter().all(|c| c.pass);
    Ok(Outcome { bundle: bundle(argv, digest, results, comparisons), artifacts: vec![], pass, table: None })
}

fn run_lp(args: &LpArgs, argv: &[String]) -> anyhow::Result<Outcome> {
    let digest = sha256(argv.join(" ").as_bytes());
    let (inst, grid) = args.grid.build()?;
    let objective = match args.objective {
        Obj::Welfare => Objective::Welfare,
        Obj::Revenue => Objective::Revenue,
    };
    let sense = match args.direction {
        Direction::Min => Sense::Minimize,
        Direction::Max => Sense::Maximize,
    };
    let ties = match args.ties {
        Ties::Free => TieResolution::Free,
        Ties::Priority => TieResolution::Priority,
    };
    let query = LpQuery::new(args.class.into(), objective, sense).with_ties(ties);
    let ex = lp::extremal_equilibrium(&inst, &grid, query)?;
    let results = json!({
        "value": ex.value,
        "status": ex.solution.status,
        "pivots": ex.solution.pivots,
        "variables": ex.solution.x.len(),
        "certificate": ex.solution.certificate,
        "equilibrium": equilibrium_value(&inst, &ex.equilibrium),
        "summary": summarize(&inst, &ex.equilibrium)?,
        "verification": ex.report,
    });
    let artifacts = vec![("equilibrium.json".into(), io::equilibrium_to_json(&inst, &ex.equilibrium))];
    Ok(Outcome { bundle: bundle(argv, digest, results, vec![]), artifacts, pass: true, table: None })
}

fn run_simulate(args: &SimulateArgs, argv: &[String]) -> anyhow::Result<Outcome> {
    let digest = sha256(argv.join(" ").as_bytes());
    let (inst, grid) = args.grid.build()?;
    let algorithm = match args.algo {
        Algo::RegretMatching => Algorithm::RegretMatching,
        Algo::Mw => Algorithm::MultiplicativeWeights,
    };
    let mut config = LearnerConfig::new(algorithm, args.rounds, args.seed);
    config.learning_rate = args.learning_rate;
    let r = sim::run(&inst, &grid, config)?;
    let check = verify::verify_cce(&inst, &r.empirical, r.max_regret(), DeviationPolicy::DeviatorWins)?;
    let results = json!({
        "config": r.config,
        "regrets": r.regrets,
        "grid_regrets": r.grid_regrets,
        "max_regret": r.max_regret(),
        "max_grid_regret": r.max_grid_regret(),
        "summary": summarize(&inst, &r.empirical)?,
        "empirical": equilibrium_value(&inst, &r.empirical),
        "verification": check,
        "trajectory": r.trajectory,
    });
    let artifacts = vec![
        ("trajectory.csv".into(), io::trajectory_csv(&r.trajectory)?),
        ("equilibrium.json".into(), io::equilibrium_to_json(&inst, &r.empirical)),
    ];
    Ok(Outcome { bundle: bundle(argv, digest, results, vec![]), artifacts, pass: true, table: None })
}

fn run_reduce(input: &Path, argv: &[String]) -> anyhow::Result<Outcome> {
    let (text, digest) = read_input(input)?;
    let (inst, eq) = io::parse_equilibrium(&text)?;
    let (two, reduced) = construct::reduce_to_two(&inst, &eq)?;
    let results = json!({
        "equilibrium": equilibrium_value(&two, &reduced),
        "summary_before": summarize(&inst, &eq)?,
        "summary_after": summarize(&two, &reduced)?,
        "cce_regret_before": verify_both(&inst, &eq, EquilibriumClass::Cce, 0.0)?,
        "cce_regret_after": verify_both(&two, &reduced, EquilibriumClass::Cce, 0.0)?,
    });
    let artifacts = vec![("equilibrium.json".into(), io::equilibrium_to_json(&two, &reduced))];
    Ok(Outcome { bundle: bundle(argv, digest, results, vec![]), artifacts, pass: true, table: None })
}

fn run_report(criterion: Option<u8>, argv: &[String]) -> anyhow::Result<Outcome> {
    let results: Vec<CriterionResult> = match criterion {
        Some(id) => vec![report::run_criterion(id).ok_or_else(|| Error::InvalidInput(format!("no criterion {id}; pick 1-11")))?],
        None => report::run_suite(),
    };
    let pass = results.iter().all(|c| c.pass);
    let mut table = String::new();
    for c in &results {
        table.push_str(&c.line());
        table.push('\n');
        for row in &c.rows {
            table.push_str(&format!(
                "       {} {:<52} computed {:<24} expected {:<24} {:?} tol {:e} ({:?})\n",
                if row.pass { "ok  " } else { "FAIL" },
                row.name,
                format!("{:.10}", row.computed),
                format!("{:.10}", row.expected),
                row.check,
                row.tolerance,
                row.provenance,
            ));
        }
    }
    let passed = results.iter().filter(|c| c.pass).count();
    table.push_str(&format!("{passed}/{} criteria passed\n", results.len()));
    let comparisons = results.iter().flat_map(|c| c.rows.clone()).collect();
    let b = bundle(argv, sha256(argv.join(" ").as_bytes()), to_value(&results), comparisons);
    Ok(Outcome { bundle: b, artifacts: vec![], pass, table: Some(table) })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify(_) => "verify",
        Command::Construct { .. } => "construct",
        Command::Bound { .. } => "bound",
        Command::Lp(_) => "lp",
        Command::Simulate(_) => "simulate",
        Command::Reduce { .. } => "reduce",
        Command::Report { .. } => "report",
    }
}

fn write_outputs(dir: &Path, name: &str, outcome: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let main = serde_json::to_string_pretty(&outcome.bundle)?;
    fs::write(dir.join(format!("{name}.json")), main + "\n")?;
    for (file, body) in &outcome.artifacts {
        fs::write(dir.join(file), body)?;
    }
    Ok(())
}

/// 1 when the computation itself fails (an LP optimum that does not
/// re-verify, a construction that misses its target), 2 for anything the
/// caller supplied wrongly.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Lp(_) | Error::Construction(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let args = &argv[1..];
    let name = command_name(&cli.command);
    let result = match &cli.command {
        Command::Verify(a) => run_verify(a, args),
        Command::Construct { which } => run_construct(which, args),
        Command::Bound { which } => run_bound(which, args),
        Command::Lp(a) => run_lp(a, args),
        Command::Simulate(a) => run_simulate(a, args),
        Command::Reduce { input } => run_reduce(input, args),
        Command::Report { criterion } => run_report(*criterion, args),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match &outcome.table {
        Some(t) => print!("{t}"),
        None => println!("{}", serde_json::to_string_pretty(&outcome.bundle).expect("bundle serializes")),
    }
    if let Some(dir) = &cli.output {
        if let Err(e) = write_outputs(dir, name, &outcome) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Lp("infeasible".into()).into()), 1);
        assert_eq!(exit_code(&Error::Parse("line 1".into()).into()), 2);
        assert_eq!(exit_code(&Error::Invariant("mass".into()).into()), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("missing file")), 2);
    }
}

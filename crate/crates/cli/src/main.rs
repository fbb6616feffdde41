use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use cachecraft::delivery::{sample_demands, simulate, simulate_all, DEFAULT_UNIT_BITS};
use cachecraft::evaluator::{add_percent_increase, curve_csv, expected_rate, sweep_curve};
use cachecraft::probability::order_stat_pmf;
use cachecraft::{load_config, validate_placement, Backend, CurveMethod, Method, Placement};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Decimal places used in reports unless `--raw` is given.
const REPORT_DIGITS: usize = 6;

#[derive(Parser)]
#[command(name = "cachecraft", version, about = "Placement optimization and evaluation for coded caching")]
struct Cli {
    /// Print numbers at full precision instead of 6 decimal places.
    /// Placements written by `solve` are always at full precision.
    #[arg(long, global = true)]
    raw: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one placement problem and write the solution as JSON.
    Solve(SolveArgs),
    /// Sweep the cache size and write a rate-memory CSV.
    Curve(CurveArgs),
    /// Check a placement against a config and report its expected rate.
    Eval(EvalArgs),
    /// Deliver real bits for a placement and decode them at every user.
    Simulate(SimulateArgs),
    /// Print the order-statistic probabilities of the demand as CSV.
    Pmf(PmfArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Dense,
    Sparse,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Dense => Backend::Dense,
            BackendArg::Sparse => Backend::Sparse,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    config: PathBuf,
    /// general, homogeneous, simplex, pop-first, length-first, two-tier or full-het.
    #[arg(long)]
    method: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    /// Also write the LP in CPLEX LP format.
    #[arg(long)]
    lp_text: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// Config whose cache sizes are replaced at each grid point.
    template: PathBuf,
    /// `start:stop:step` or a comma-separated list of cache sizes.
    #[arg(long)]
    grid: String,
    /// Comma-separated method ids, formulations plus centralized, decentralized,
    /// random-pop and random-len.
    #[arg(long)]
    methods: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add the percent increase of every method over this one.
    #[arg(long, num_args = 0..=1, default_missing_value = "general")]
    percent: Option<String>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
}

#[derive(Args)]
struct EvalArgs {
    config: PathBuf,
    placement: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    placement: PathBuf,
    #[arg(long, default_value_t = DEFAULT_UNIT_BITS)]
    unit_bits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw this many demands from the popularity profile instead of
    /// enumerating all of them.
    #[arg(long)]
    samples: Option<usize>,
    /// Write the per-demand outcomes as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PmfArgs {
    config: PathBuf,
}

/// Exit status for a placement that fails its feasibility check.
const INFEASIBLE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let digits = (!cli.raw).then_some(REPORT_DIGITS);
    match run(cli.command, digits) {
        Ok(code) => code,
        Err(err) => {
            let kind = err
                .downcast_ref::<cachecraft::Error>()
                .map_or("error", cachecraft::Error::kind);
            let doc = json!({ "error": { "kind": kind, "message": error_message(&err) } });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, digits: Option<usize>) -> anyhow::Result<ExitCode> {
    match command {
        Command::Solve(args) => solve(args, digits),
        Command::Curve(args) => curve(args, digits),
        Command::Eval(args) => eval(args, digits),
        Command::Simulate(args) => simulate_cmd(args, digits),
        Command::Pmf(args) => {
            let cfg = load_config(&args.config)?;
            let table = order_stat_pmf(cfg.popularities(), cfg.num_users())?;
            emit(None, &table.to_csv(digits))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn solve(args: SolveArgs, digits: Option<usize>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let method: Method = args.method.parse()?;
    let bp = method.build(&cfg)?;
    if let Some(path) = &args.lp_text {
        write_file(path, &bp.to_lp_text())?;
    }
    let sol = bp.solve(args.backend.into())?;
    let variables: serde_json::Map<String, Value> = bp
        .named_values(&sol.lp.x)
        .into_iter()
        .map(|(name, v)| (name, json!(v)))
        .collect();
    let feasibility = validate_placement(&cfg, &sol.placement, 1e-6)?;
    let doc = json!({
        "method": sol.method.id(),
        "built_as": bp.method().id(),
        "objective": sol.objective,
        "variables": variables,
        "scheme": sol.scheme,
        "diagnostics": {
            "status": sol.lp.status,
            "solver": sol.lp.solver,
            "iterations": sol.lp.iterations,
            "lp_variables": bp.lp().num_vars(),
            "lp_constraints": bp.lp().num_constraints(),
            "certificate": sol.lp.certificate,
            "feasible": feasibility.is_feasible(),
        },
    });
    // The placement is an input to `eval` and `simulate`, so it is never
    // rounded.
    let mut doc = match digits {
        Some(d) => round_json(doc, d),
        None => doc,
    };
    doc["placement"] = sol.placement.to_json_value();
    emit(args.out.as_deref(), &pretty(doc, None))?;
    Ok(ExitCode::SUCCESS)
}

fn curve(args: CurveArgs, digits: Option<usize>) -> anyhow::Result<ExitCode> {
    let template = load_config(&args.template)?;
    let grid = parse_grid(&args.grid)?;
    let methods = args
        .methods
        .split(',')
        .map(|m| m.trim().parse::<CurveMethod>())
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        bail!("no methods given");
    }
    let mut points = sweep_curve(&template, &grid, &methods, args.backend.into())?;
    if let Some(reference) = &args.percent {
        add_percent_increase(&mut points, reference)?;
    }
    emit(args.out.as_deref(), &curve_csv(&points, digits))?;
    Ok(ExitCode::SUCCESS)
}

fn eval(args: EvalArgs, digits: Option<usize>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let pl = read_placement(&args.placement)?;
    let report = validate_placement(&cfg, &pl, args.tol)?;
    let rate = expected_rate(&cfg, &pl)?.expected_rate;
    let usage = pl.cache_usage();
    let doc = json!({
        "feasible": report.is_feasible(),
        "tolerance": report.tolerance,
        "violations": report.violations,
        "expected_rate": rate,
        "cache_used": usage.iter().map(|row| row.iter().sum::<f64>()).collect::<Vec<_>>(),
        "cache_capacity": cfg.cache_sizes(),
    });
    emit(None, &pretty(doc, digits))?;
    Ok(if report.is_feasible() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(INFEASIBLE)
    })
}

fn simulate_cmd(args: SimulateArgs, digits: Option<usize>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let pl = read_placement(&args.placement)?;
    let report = validate_placement(&cfg, &pl, 1e-6)?;
    if !report.is_feasible() {
        bail!("placement is infeasible: {} violations", report.violations.len());
    }
    let summary = match args.samples {
        Some(n) => simulate(&cfg, &pl, &sample_demands(&cfg, n, args.seed)?, args.unit_bits, args.seed)?,
        None => simulate_all(&cfg, &pl, args.unit_bits, args.seed)?,
    };
    let num = |x: f64| match digits {
        Some(d) => format!("{x:.d$}"),
        None => format!("{x}"),
    };
    let mut out = String::new();
    for o in &summary.outcomes {
        let files: Vec<String> = o.demand.files().iter().map(|f| (f + 1).to_string()).collect();
        out.push_str(&format!(
            "demand ({}): decoded {}/{} users, {} bits sent, {} expected\n",
            files.join(","),
            o.decoded,
            o.users,
            o.transmitted_bits,
            num(o.expected_bits),
        ));
    }
    out.push_str(&format!(
        "success rate {} ({}/{} users over {} demands)\ntransmitted {} bits, mean {} per demand, max gap {} bits\n",
        num(summary.success_rate()),
        summary.decoded_users,
        summary.total_users,
        summary.demands,
        summary.transmitted_bits,
        num(summary.transmitted_bits as f64 / summary.demands.max(1) as f64),
        num(summary.max_bit_gap),
    ));
    emit(None, &out)?;
    if let Some(path) = &args.log {
        write_file(path, &pretty(serde_json::to_value(&summary)?, digits))?;
    }
    Ok(if summary.decoded_users == summary.total_users {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or `a,b,c`.
fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!("empty cache grid");
    }
    if let Some((start, rest)) = spec.split_once(':') {
        let (stop, step) = rest.split_once(':').context("grid range needs start:stop:step")?;
        let (start, stop, step): (f64, f64, f64) = (start.trim().parse()?, stop.trim().parse()?, step.trim().parse()?);
        if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
            bail!("invalid grid range {spec:?}");
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            bail!("empty cache grid");
        }
        return Ok((0..=count as usize).map(|i| start + i as f64 * step).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
        .collect()
}

fn read_placement(path: &Path) -> anyhow::Result<Placement> {
    let text = fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    // Accept a full `solve` output as well as a bare placement.
    let inner = match value.get("placement") {
        Some(p) => p.to_string(),
        None => text,
    };
    Ok(Placement::from_json_str(&inner)?)
}

/// The error chain joined by `: `, skipping causes a message already quotes.
fn error_message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

/// Rounds every float in `value` to `digits` decimals.
fn round_json(value: Value, digits: usize) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            let scale = 10f64.powi(digits as i32);
            let r = (x * scale).round() / scale;
            json!(if r == 0.0 { 0.0 } else { r })
        }
        Value::Array(a) => Value::Array(a.into_iter().map(|v| round_json(v, digits)).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v, digits))).collect()),
        other => other,
    }
}

fn pretty(value: Value, digits: Option<usize>) -> String {
    let value = match digits {
        Some(d) => round_json(value, d),
        None => value,
    };
    let mut s = serde_json::to_string_pretty(&value).expect("JSON value serializes");
    s.push('\n');
    s
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("failed to write {}", path.display()))
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use impulsive_core::certificates::{
    check_eps_delta_conditions, falsify, replay, sampled_check, CertificateSpec, CheckOptions,
    CheckReport, EpsDeltaConfig, FalsifyRanges, Verdict,
};
use impulsive_core::comparison::ComparisonSpec;
use impulsive_core::error::parse_json;
use impulsive_core::examples::{builtin_examples, example};
use impulsive_core::gronwall::{gronwall_bound, verify_gronwall, GronwallData};
use impulsive_core::impulses::{FamilySpec, ImpulseFamily, ImpulseSequence};
use impulsive_core::inputs::{HybridInput, InputPreset};
use impulsive_core::scenario::{exit_code, run_scenario, write_atomic};
use impulsive_core::simulate::{simulate, Trajectory};
use impulsive_core::system::{ImpulsiveSystem, SystemConfig};

/// Simulate impulsive systems and check stability certificates against them.
#[derive(Parser)]
#[command(name = "impulsive", version)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Default directory for output files.
    #[arg(long, global = true, env = "IMPULSIVE_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV (or JSON).
    Simulate(SimulateArgs),
    /// Check a certificate on every sampled trajectory of the budget.
    Check(SearchArgs),
    /// Search for a trajectory violating a certificate; stops at the first.
    Falsify(SearchArgs),
    /// Evaluate the jump-aware Gronwall bound, optionally verifying a trajectory.
    Gronwall(GronwallArgs),
    /// Empirical checks of the boundedness, smallness and convergence conditions.
    EpsDelta(EpsDeltaArgs),
    /// Built-in example systems.
    #[command(subcommand)]
    Examples(ExamplesCommand),
    /// Run a scenario file; exit 0 = pass, 2 = violation, 3 = inconclusive.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides the scenario and --out-dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SystemArg {
    /// Example name (see `examples list`) or system JSON file.
    #[arg(long)]
    system: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Impulse-sequence JSON (file or inline).
    #[arg(long, conflicts_with = "family")]
    sigma: Option<String>,
    /// Impulse family JSON (file or inline), sampled with --seed.
    #[arg(long)]
    family: Option<String>,
    /// Input preset JSON (file or inline); zero input if omitted.
    #[arg(long)]
    input: Option<String>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SearchArgs {
    /// Certificate JSON (file or inline).
    #[arg(long)]
    cert: String,
    #[command(flatten)]
    system: SystemArg,
    /// Impulse family JSON (file or inline).
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    /// Sampling ranges JSON (file or inline).
    #[arg(long)]
    ranges: Option<String>,
    /// Report file; stdout if omitted. A witness trajectory goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GronwallArgs {
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    #[arg(long)]
    q1: f64,
    #[arg(long)]
    q2: f64,
    /// Impulse-sequence JSON (file or inline); no jumps if omitted.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Time at which to evaluate the bound.
    #[arg(long)]
    t: f64,
    /// Scalar trajectory CSV to verify against the bound up to --t.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct EpsDeltaArgs {
    #[command(flatten)]
    system: SystemArg,
    #[arg(long)]
    family: String,
    /// Gain ρ1 as comparison-function JSON.
    #[arg(long, default_value = r#"{"kind": "identity"}"#)]
    rho1: String,
    /// Gain ρ2 as comparison-function JSON.
    #[arg(long, default_value = r#"{"kind": "identity"}"#)]
    rho2: String,
    /// Grid and range configuration JSON (file or inline).
    #[arg(long)]
    config: Option<String>,
    /// Trials per grid cell.
    #[arg(long, default_value_t = 20)]
    budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExamplesCommand {
    List,
    /// Write an example's system JSON.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses inline JSON when the argument starts with `{` or `[`, otherwise
/// reads it as a file.
fn load_json<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        Ok(parse_json(arg, "<inline>")?)
    } else {
        let text = fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
        Ok(parse_json(&text, arg)?)
    }
}

fn load_system(arg: &SystemArg) -> Result<ImpulsiveSystem> {
    if Path::new(&arg.system).is_file() || arg.system.trim_start().starts_with('{') {
        let cfg: SystemConfig = load_json(&arg.system)?;
        Ok(cfg.build()?)
    } else {
        Ok(example(&arg.system)?.system()?)
    }
}

fn load_family(arg: &str) -> Result<ImpulseFamily> {
    Ok(load_json::<FamilySpec>(arg)?.build()?)
}

fn load_sigma(arg: &str) -> Result<ImpulseSequence> {
    let text = if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    Ok(ImpulseSequence::from_json(&text)?)
}

/// `explicit`, else `name` inside the default output directory.
fn output_path(cli: &Cli, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| cli.out_dir.as_ref().map(|d| d.join(name)))
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            write_atomic(&p, bytes)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<ExitCode> {
    let system = load_system(&a.system)?;
    let sigma = match (&a.sigma, &a.family) {
        (Some(s), _) => load_sigma(s)?,
        (None, Some(f)) => load_family(f)?.sample(cli.seed, a.horizon)?,
        (None, None) => ImpulseSequence::empty(),
    };
    let preset: InputPreset = match &a.input {
        Some(s) => load_json(s)?,
        None => InputPreset::Zero,
    };
    let w = HybridInput::new(preset.build(system.dim_u())?, sigma);
    let traj = simulate(&system, a.t0, &a.x0, &w, a.horizon, a.step)?;
    let bytes = if a.json {
        traj.to_json()?.into_bytes()
    } else {
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        buf
    };
    let name = if a.json { "trajectory.json" } else { "trajectory.csv" };
    emit(output_path(cli, &a.out, name), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_search(cli: &Cli, a: &SearchArgs, stop_early: bool) -> Result<ExitCode> {
    let system = load_system(&a.system)?;
    let cert = load_json::<CertificateSpec>(&a.cert)?.build()?;
    let family = load_family(&a.family)?;
    let ranges: FalsifyRanges = match &a.ranges {
        Some(r) => load_json(r)?,
        None => FalsifyRanges::default(),
    };
    let opts = CheckOptions::default();
    let run = if stop_early { falsify } else { sampled_check };
    let report: CheckReport = run(&cert, &system, &family, a.budget, &ranges, cli.seed, &opts)?;
    let out = output_path(cli, &a.out, "report.json");
    if let (Some(w), Some(path)) = (&report.witness, &out) {
        let again = replay(w, &cert, &system, &opts)?;
        if again.verdict != Verdict::Violated {
            bail!("witness did not reproduce on replay");
        }
        let sigma = if w.sigma.is_empty() {
            ImpulseSequence::empty()
        } else {
            ImpulseSequence::finite(w.sigma.clone())?
        };
        let input = HybridInput::new(w.input.clone(), sigma);
        let traj = simulate(&system, w.t0, &w.x0, &input, w.horizon, w.step.unwrap_or(ranges.step))?;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        emit(Some(path.with_extension("witness.csv")), &buf)?;
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(out, text.as_bytes())?;
    eprintln!("verdict: {:?} after {} trial(s)", report.verdict, report.trials);
    Ok(code(exit_code([report.verdict])))
}

fn cmd_gronwall(a: &GronwallArgs) -> Result<ExitCode> {
    let sigma = match &a.sigma {
        Some(s) => load_sigma(s)?,
        None => ImpulseSequence::empty(),
    };
    let data = GronwallData::new(a.p, a.q1, a.q2, sigma, a.t0)?;
    let bound = gronwall_bound(&data, a.t)?;
    let mut out = serde_json::json!({ "t": a.t, "bound": bound });
    let mut status = ExitCode::SUCCESS;
    if let Some(path) = &a.trajectory {
        let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        let y = Trajectory::read_csv(file)?;
        match verify_gronwall(&y, &data, a.t) {
            Ok(r) => {
                if !r.pass {
                    status = code(2);
                }
                out["verification"] = serde_json::to_value(&r)?;
            }
            Err(impulsive_core::Error::HypothesisFailed { t, lhs, rhs }) => {
                out["hypothesis_failed"] = serde_json::json!({ "t": t, "y": lhs, "rhs": rhs });
                status = code(3);
            }
            Err(e) => return Err(e.into()),
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(status)
}

fn cmd_eps_delta(cli: &Cli, a: &EpsDeltaArgs) -> Result<ExitCode> {
    let system = load_system(&a.system)?;
    let family = load_family(&a.family)?;
    let rho1 = load_json::<ComparisonSpec>(&a.rho1)?.build_kinf()?;
    let rho2 = load_json::<ComparisonSpec>(&a.rho2)?.build_kinf()?;
    let cfg: EpsDeltaConfig = match &a.config {
        Some(c) => load_json(c)?,
        None => EpsDeltaConfig::default(),
    };
    let report = check_eps_delta_conditions(&system, (&rho1, &rho2), &family, &cfg, a.budget, cli.seed)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(output_path(cli, &a.out, "eps_delta.json"), text.as_bytes())?;
    Ok(code(exit_code([
        report.bounded.verdict,
        report.small.verdict,
        report.convergence.verdict,
    ])))
}

fn cmd_examples(cli: &Cli, c: &ExamplesCommand) -> Result<ExitCode> {
    match c {
        ExamplesCommand::List => {
            for ex in builtin_examples() {
                let oracle = if ex.oracle.is_some() { "  [closed form]" } else { "" };
                println!("{:<14}{}{}", ex.name, ex.summary, oracle);
            }
        }
        ExamplesCommand::Export { name, out } => {
            let ex = example(name)?;
            let mut text = serde_json::to_string_pretty(&ex.config)?;
            text.push('\n');
            let file = format!("{}.json", ex.name.to_lowercase());
            emit(output_path(cli, out, &file), text.as_bytes())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Check(a) => cmd_search(cli, a, false),
        Command::Falsify(a) => cmd_search(cli, a, true),
        Command::Gronwall(a) => cmd_gronwall(a),
        Command::EpsDelta(a) => cmd_eps_delta(cli, a),
        Command::Examples(c) => cmd_examples(cli, c),
        Command::Run { scenario, out } => {
            let out = out.clone().or_else(|| {
                let stem = scenario.file_stem()?.to_str()?.to_string();
                cli.out_dir.as_ref().map(|d| d.join(stem))
            });
            let report = run_scenario(scenario, out.as_deref())?;
            for c in &report.checks {
                eprintln!("{:<28}{:?}", c.name, c.verdict);
            }
            eprintln!("scenario {}: {:?}", report.scenario, report.verdict);
            Ok(code(report.exit_code))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

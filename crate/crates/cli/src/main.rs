//! `teleoptic` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 circuit diagnostics, 3 runtime
//! guard violation. Results go to `--out` (stdout by default); a human
//! summary goes to stderr.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teleoptic::bell::{efficiency_report, grid_search, Binning, BobSetting, ChshConfig};
use teleoptic::dsl::{compile_and_run, parse_str, DslExact, RunError};
use teleoptic::jones::JonesVector;
use teleoptic::measurement::{run_trials, DetectorModel, EventRecord, McError, PsiSource, Station};
use teleoptic::output::{self, standard_labels, write_efficiency_csv, write_events};
use teleoptic::protocol::{OutcomeId, TeleportRun};
use teleoptic::verification::{direct_overlap_table, overlap_table, SubensembleReport};
use teleoptic::JonesVectorF64;

#[derive(Parser)]
#[command(
    name = "teleoptic",
    version,
    about = "Linear-optics teleportation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in protocol: correction, then a polarizer parallel to psi.
    Teleport(TeleportArgs),
    /// Verification with Bob's station.
    Verify(VerifyArgs),
    /// Verification on Bob's beams a'/b' directly, without his station.
    VerifyDirect(TeleportArgs),
    /// CHSH value over a grid of detector efficiencies (CSV).
    BellSweep(BellArgs),
    /// Run a circuit file.
    DslRun(DslArgs),
}

#[derive(Args)]
struct PsiArgs {
    /// Polar Bloch angle of psi = cos(theta/2)|H> + e^{i phi} sin(theta/2)|V>, in [0, pi].
    #[arg(long, value_parser = parse_theta, conflicts_with = "psi", default_value_t = 0.0)]
    theta: f64,
    /// Azimuthal Bloch angle of psi, in [0, 2pi).
    #[arg(long, value_parser = parse_phi, conflicts_with = "psi", default_value_t = 0.0)]
    phi: f64,
    /// psi as four reals: Re alpha, Im alpha, Re beta, Im beta (unit norm).
    #[arg(long, num_args = 4, value_names = ["AR", "AI", "BR", "BI"], allow_negative_numbers = true)]
    psi: Option<Vec<f64>>,
}

impl PsiArgs {
    fn vector(&self) -> Result<JonesVectorF64, CliError> {
        match &self.psi {
            Some(v) => JonesVector::from_parts(v[0], v[1], v[2], v[3])
                .map_err(|e| CliError::Usage(format!("invalid value for '--psi': {e}"))),
            None => Ok(JonesVector::from_bloch(self.theta, self.phi)),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for output::Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => output::Format::Jsonl,
            FormatArg::Csv => output::Format::Csv,
        }
    }
}

#[derive(Args)]
struct SimArgs {
    /// Number of trials (at least 1).
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Detector efficiency in [0, 1].
    #[arg(long, default_value_t = 1.0, value_parser = parse_eta)]
    eta: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event lines or per-outcome summary.
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    format: FormatArg,
}

#[derive(Args)]
struct TeleportArgs {
    #[command(flatten)]
    psi: PsiArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StationArg {
    /// Correction, then a polarizer parallel to psi.
    Full,
    /// No correction; polarizer set at random to one of the four decoded states.
    Nonlocal,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    psi: PsiArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Verifier placed behind Bob's station.
    #[arg(long, value_enum, default_value_t = StationArg::Full)]
    station: StationArg,
}

#[derive(Args)]
struct BellArgs {
    /// Alice's encoding as Bloch angles; give twice. Omit both --alice and --bob to grid-search.
    #[arg(long, num_args = 2, value_names = ["THETA", "PHI"], action = clap::ArgAction::Append)]
    alice: Vec<f64>,
    /// Bob's measurement basis as Bloch angles; give twice.
    #[arg(long, num_args = 2, value_names = ["THETA", "PHI"], action = clap::ArgAction::Append)]
    bob: Vec<f64>,
    /// Outcome binning per encoding, e.g. ++-- for {D1,D2} -> +1; one (shared) or two.
    #[arg(long)]
    binning: Vec<String>,
    /// Comma-separated detector efficiencies.
    #[arg(long, value_delimiter = ',', value_parser = parse_eta, default_value = "1,0.9,0.8,0.7,0.6,0.5,0.4,0.3")]
    etas: Vec<f64>,
    /// Grid resolution for the configuration search.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..=40))]
    grid_steps: u64,
    /// Trials per efficiency (at least 1).
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Random seed, shared by every efficiency.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DslArgs {
    /// Circuit file (.opt).
    file: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
}

fn parse_range(s: &str, lo: f64, hi: f64, hi_open: bool, range: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    let ok = x >= lo && if hi_open { x < hi } else { x <= hi };
    if ok {
        Ok(x)
    } else {
        Err(format!("{x} is outside {range}"))
    }
}

fn parse_eta(s: &str) -> Result<f64, String> {
    parse_range(s, 0.0, 1.0, false, "[0, 1]")
}

fn parse_theta(s: &str) -> Result<f64, String> {
    parse_range(s, 0.0, std::f64::consts::PI, false, "[0, pi]")
}

fn parse_phi(s: &str) -> Result<f64, String> {
    parse_range(s, 0.0, std::f64::consts::TAU, true, "[0, 2pi)")
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Diagnostics,
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Diagnostics => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::InvalidEfficiency(_) | McError::NoTrials => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(p) => File::create(p)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| CliError::Usage(format!("cannot write '--out' {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_failed(out: &Option<PathBuf>, e: io::Error) -> CliError {
    let target = out
        .as_deref()
        .map_or("stdout".into(), |p: &Path| p.display().to_string());
    CliError::Usage(format!("cannot write {target}: {e}"))
}

fn emit<O: std::fmt::Display>(
    records: &[EventRecord<O>],
    labels: &[String],
    sim: &SimArgs,
) -> Result<(), CliError> {
    let w = sink(&sim.out)?;
    write_events(records, labels, w, sim.format.into()).map_err(|e| write_failed(&sim.out, e))
}

fn print_outcome_summary<O: std::fmt::Display>(records: &[EventRecord<O>], labels: &[String]) {
    let s = output::summarize(records, labels);
    eprintln!(
        "{:<8} {:>9} {:>10} {:>10}",
        "outcome", "count", "frequency", "pass_rate"
    );
    for r in &s.rows {
        let f = s
            .frequency(&r.outcome)
            .map_or("-".into(), |x| format!("{x:.5}"));
        let p = r.pass_rate().map_or("-".into(), |x| format!("{x:.5}"));
        eprintln!("{:<8} {:>9} {:>10} {:>10}", r.outcome, r.count, f, p);
    }
}

fn teleport(args: &TeleportArgs) -> Result<(), CliError> {
    let psi = args.psi.vector()?;
    let run = TeleportRun::new(&psi).map_err(|e| CliError::Runtime(e.to_string()))?;
    let det = DetectorModel::new(args.sim.eta)?;
    let records = run_trials(
        &PsiSource::Fixed(psi),
        args.sim.trials,
        &det,
        args.sim.seed,
        &Station::Full { axis: None },
    )?;
    emit(&records, &standard_labels(), &args.sim)?;
    eprintln!("psi = {psi}");
    eprintln!(
        "{:<8} {:>12} {:>8} {:>18}",
        "outcome", "probability", "cells", "fidelity"
    );
    for o in &run.outcomes {
        eprintln!(
            "{:<8} {:>12.9} {:>8} {:>18.15}",
            o.outcome.to_string(),
            o.probability,
            o.plan.to_string(),
            o.fidelity
        );
    }
    print_outcome_summary(&records, &standard_labels());
    Ok(())
}

fn print_report(report: &SubensembleReport, expected: Option<[[f64; 4]; 4]>) {
    eprintln!(
        "trials {}  detected {}  lost {}",
        report.total,
        report.detected(),
        report.lost
    );
    let rate = report.matched_rate().map_or("-".into(), |r| format!("{r}"));
    eprintln!(
        "matched pass rate {rate} over {} trials",
        report.matched.trials
    );
    if let (Some(table), Some(expected)) = (report.table, expected) {
        eprintln!("pass rate [setting k][outcome j]: empirical (expected)");
        for k in OutcomeId::ALL {
            let row: Vec<String> = OutcomeId::ALL
                .iter()
                .map(|j| {
                    let c = table[k.index()][j.index()];
                    let r = c.rate().map_or("    -  ".into(), |r| format!("{r:.4}"));
                    format!("{r} ({:.4})", expected[k.index()][j.index()])
                })
                .collect();
            eprintln!("  k={k}  {}", row.join("  "));
        }
    }
}

fn verify(psi: &PsiArgs, sim: &SimArgs, station: Station<f64>) -> Result<(), CliError> {
    let psi = psi.vector()?;
    let runtime = |e: teleoptic::protocol::ProtocolError| CliError::Runtime(e.to_string());
    let expected = match station {
        Station::Nonlocal => Some(overlap_table(&psi).map_err(runtime)?),
        Station::Direct => Some(direct_overlap_table(&psi).map_err(runtime)?),
        _ => None,
    };
    let det = DetectorModel::new(sim.eta)?;
    let records = run_trials(&PsiSource::Fixed(psi), sim.trials, &det, sim.seed, &station)?;
    emit(&records, &standard_labels(), sim)?;
    eprintln!("psi = {psi}");
    print_report(&SubensembleReport::from_records(&records), expected);
    Ok(())
}

fn angles(values: &[f64], flag: &str) -> Result<[(f64, f64); 2], CliError> {
    if values.len() != 4 {
        return Err(CliError::Usage(format!(
            "'--{flag}' must be given exactly twice"
        )));
    }
    for &(t, p) in &[(values[0], values[1]), (values[2], values[3])] {
        BobSetting::new(t, p)
            .map_err(|e| CliError::Usage(format!("invalid value for '--{flag}': {e}")))?;
    }
    Ok([(values[0], values[1]), (values[2], values[3])])
}

fn bell_sweep(args: &BellArgs) -> Result<(), CliError> {
    let binnings = args
        .binning
        .iter()
        .map(|b| b.parse::<Binning>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("invalid value for '--binning': {e}")))?;
    let config = if args.alice.is_empty() && args.bob.is_empty() {
        if !binnings.is_empty() {
            return Err(CliError::Usage(
                "'--binning' needs '--alice' and '--bob'".into(),
            ));
        }
        let g = grid_search::<f64>(args.grid_steps as usize, false)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        eprintln!(
            "grid search ({} steps): exact S = {:.12}",
            args.grid_steps, g.exact_s
        );
        g.config
    } else {
        let alice = angles(&args.alice, "alice")?;
        let bob = angles(&args.bob, "bob")?;
        let binnings = match binnings.as_slice() {
            [] => [Binning::default(); 2],
            [b] => [*b; 2],
            [b1, b2] => [*b1, *b2],
            _ => {
                return Err(CliError::Usage(
                    "'--binning' takes at most two values".into(),
                ))
            }
        };
        ChshConfig {
            encodings: alice.map(|(t, p)| JonesVector::from_bloch(t, p)),
            settings: bob.map(|(t, p)| BobSetting::new(t, p).expect("checked above")),
            binnings,
        }
    };
    for (i, e) in config.encodings.iter().enumerate() {
        eprintln!("encoding {}: {e}  binning {}", i + 1, config.binnings[i]);
    }
    for (i, s) in config.settings.iter().enumerate() {
        eprintln!(
            "bob setting {}: theta {:.12} phi {:.12}",
            i + 1,
            s.theta(),
            s.phi()
        );
    }
    let rows =
        efficiency_report(&config, &args.etas, args.trials, args.seed).map_err(|e| match e {
            teleoptic::bell::BellError::Mc(m) => CliError::from(m),
            teleoptic::bell::BellError::EmptyGrid => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        })?;
    write_efficiency_csv(&rows, sink(&args.out)?).map_err(|e| write_failed(&args.out, e))?;
    eprintln!(
        "{:>6} {:>10} {:>12} {:>10} {:>12}",
        "eta", "exact S", "empirical S", "sigma", "coincidence"
    );
    for r in &rows {
        let s = r.empirical_s.map_or("-".into(), |x| format!("{x:.5}"));
        let sg = r.sigma.map_or("-".into(), |x| format!("{x:.5}"));
        eprintln!(
            "{:>6.3} {:>10.6} {:>12} {:>10} {:>12.5}",
            r.eta, r.exact_s, s, sg, r.coincidence_rate
        );
    }
    Ok(())
}

fn dsl_run(args: &DslArgs) -> Result<(), CliError> {
    let path = args.file.display();
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    let program = match parse_str(&text) {
        Ok(p) => p,
        Err(diags) => {
            for d in diags {
                eprintln!("{path}:{d}");
            }
            return Err(CliError::Diagnostics);
        }
    };
    for w in program.warnings() {
        eprintln!("{path}:{w}");
    }
    let run = compile_and_run(&program, args.sim.trials, args.sim.seed, args.sim.eta).map_err(
        |e| match e {
            RunError::Mc(m) => CliError::from(m),
            g @ RunError::Guard { .. } => CliError::Runtime(format!("{path}:{g}")),
        },
    )?;
    let labels: Vec<String> = run.branches().iter().map(|b| b.label.clone()).collect();
    emit(&run.events, &labels, &args.sim)?;
    match &run.exact {
        DslExact::Final {
            state,
            pass_probability,
        } => {
            eprintln!(
                "final state (norm^2 {:.15}):\n{state}",
                state.squared_norm()
            );
            if let Some(p) = pass_probability {
                eprintln!("polarizer pass probability {p:.15}");
            }
        }
        DslExact::Branched { branches, .. } => {
            for b in branches {
                let pass = b
                    .pass_probability
                    .map_or("-".into(), |p| format!("{p:.15}"));
                let cells = b.correction.map_or("-".into(), |c| c.to_string());
                eprintln!(
                    "{:<6} p = {:.15}  cells {cells}  pass {pass}",
                    b.label, b.probability
                );
            }
            print_outcome_summary(&run.events, &labels);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Teleport(a) => teleport(a),
        Command::Verify(a) => verify(
            &a.psi,
            &a.sim,
            match a.station {
                StationArg::Full => Station::Full { axis: None },
                StationArg::Nonlocal => Station::Nonlocal,
            },
        ),
        Command::VerifyDirect(a) => verify(&a.psi, &a.sim, Station::Direct),
        Command::BellSweep(a) => bell_sweep(a),
        Command::DslRun(a) => dsl_run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Runtime(m) => eprintln!("error: {m}"),
                CliError::Diagnostics => {}
            }
            ExitCode::from(e.code())
        }
    }
}

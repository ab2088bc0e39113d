//! Command line front end. Five subcommands cover the shipped workflows:
//! `simulate` executes a schedule file, `synthesize` compiles a transfer
//! request into schedule and report files, `saturate` dumps the certificate
//! tree of a trig target, `verify-limits` tabulates the small-parameter
//! convergence of the two kick limits, and `moment` solves the free-glide
//! velocity problem.
//!
//! Exit status: 0 on success, 2 when a synthesis finished but missed its
//! tolerance (the report is still written), 1 on malformed input.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use lowmode::field::{state_error, WaveState};
use lowmode::io::{parse_field, parse_schedule, parse_state, write_field, write_schedule, write_state};
use lowmode::propagate::energy;
use lowmode::saturate::decompose;
use lowmode::sim::{limit_study, parse_config, run_schedule, LimitKind};
use lowmode::synth::{moment_velocity, plan_transfer};
use lowmode::{Config, Field, Schedule};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lowmode", version, about = "wave equation simulator and control synthesizer on the d-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat key=value); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the config seed for randomized scans.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a schedule file from an initial state and write trace + final state.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Schedule file; KICK field names resolve relative to it.
        #[arg(long)]
        schedule: PathBuf,
        /// Initial state file.
        #[arg(long)]
        initial: PathBuf,
        /// Optional target state; adds the error column to the trace.
        #[arg(long = "final")]
        final_state: Option<PathBuf>,
    },
    /// Compile a state transfer into schedule, kick field, and report files.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Initial state file.
        #[arg(long)]
        initial: PathBuf,
        /// Goal state file.
        #[arg(long = "final")]
        final_state: PathBuf,
        /// Error tolerance in the H1 x L2 metric.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Time horizon.
        #[arg(long = "T", default_value_t = 0.5)]
        horizon: f64,
        /// Pad at the equilibrium so the schedule lasts exactly T.
        #[arg(long)]
        exact_time: bool,
        /// Emit exact KICK segments instead of their realizations.
        #[arg(long)]
        ideal_kicks: bool,
    },
    /// Print and store the certificate decomposition of a target field.
    Saturate {
        #[command(flatten)]
        common: Common,
        /// Field file holding the trig target.
        #[arg(long)]
        field: PathBuf,
    },
    /// Tabulate kick or square-kick convergence over a list of times.
    VerifyLimits {
        #[command(flatten)]
        common: Common,
        /// Which limit to study.
        #[arg(long, value_parser = ["kick", "square"])]
        kind: String,
        /// Field file with the control profile (xi or psi).
        #[arg(long)]
        field: PathBuf,
        /// Initial state file.
        #[arg(long)]
        initial: PathBuf,
        /// Comma-separated decreasing times.
        #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
        taus: String,
    },
    /// Solve for the velocity whose free glide maps one profile to another.
    Moment {
        #[command(flatten)]
        common: Common,
        /// Field file with the starting profile w0.
        #[arg(long)]
        initial: PathBuf,
        /// Field file with the target profile w1.
        #[arg(long = "final")]
        final_profile: PathBuf,
        /// Glide horizon; the glide time is chosen in [T/2, T).
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &Common) -> anyhow::Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            parse_config(&text, &path.display().to_string())?
        }
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn load_state(path: &Path, dim: usize) -> anyhow::Result<WaveState<f64>> {
    Ok(parse_state(&read(path)?, dim, &path.display().to_string())?)
}

fn load_field(path: &Path, dim: usize) -> anyhow::Result<Field> {
    Ok(parse_field(&read(path)?, dim, &path.display().to_string())?)
}

fn write_out(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(path)
}

/// Serializes a schedule into out_dir, storing idealized kick fields as
/// kick_0.field, kick_1.field, ... next to it.
fn store_schedule(dir: &Path, sched: &Schedule) -> anyhow::Result<PathBuf> {
    let mut fields: Vec<(String, String)> = Vec::new();
    let text = write_schedule(sched, |i, phi| {
        let name = format!("kick_{i}.field");
        fields.push((name.clone(), write_field(phi)));
        Ok(name)
    })?;
    for (name, body) in &fields {
        write_out(dir, name, body)?;
    }
    write_out(dir, "schedule.txt", &text)
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Simulate { common, schedule, initial, final_state } => {
            let cfg = load_config(&common)?;
            let initial = load_state(&initial, cfg.dim)?;
            let target = match &final_state {
                Some(p) => Some(load_state(p, cfg.dim)?),
                None => None,
            };
            let base = schedule.parent().map(Path::to_path_buf).unwrap_or_default();
            let text = read(&schedule)?;
            let sched = parse_schedule(&text, &schedule.display().to_string(), |name| {
                let path = base.join(name);
                let body = fs::read_to_string(&path).map_err(|e| lowmode::Error::Config(
                    format!("{}: {e}", path.display()),
                ))?;
                parse_field(&body, cfg.dim, &path.display().to_string())
            })?;

            let (fin, trace) = run_schedule(&initial, &sched, target.as_ref(), &cfg)?;
            write_out(&common.out_dir, "trace.csv", &trace.to_csv())?;
            write_out(&common.out_dir, "final.state", &write_state(&fin))?;
            match &target {
                Some(t) => println!(
                    "final error {:.6e}, energy {:.6e}",
                    state_error(&fin, t)?,
                    energy(&fin)
                ),
                None => println!("energy {:.6e}", energy(&fin)),
            }
            Ok(0)
        }

        Command::Synthesize { common, initial, final_state, eps, horizon, exact_time, ideal_kicks } => {
            let cfg = load_config(&common)?;
            let initial = load_state(&initial, cfg.dim)?;
            let goal = load_state(&final_state, cfg.dim)?;
            let plan = plan_transfer(&initial, &goal, eps, horizon, exact_time, &cfg)?;
            let sched = if ideal_kicks {
                plan.idealized_schedule()?
            } else {
                plan.schedule()?
            };
            store_schedule(&common.out_dir, &sched)?;

            let mut report = String::new();
            let _ = writeln!(report, "met: {}", plan.met);
            let _ = writeln!(report, "predicted_error: {}", plan.predicted_error);
            let _ = writeln!(report, "eps: {eps}");
            let _ = writeln!(report, "horizon: {horizon}");
            let _ = writeln!(report, "total_time: {}", sched.total_time());
            let _ = writeln!(report, "exact_time: {exact_time}");
            let _ = writeln!(report, "ideal_kicks: {ideal_kicks}");
            for phase in &plan.phases {
                let _ = writeln!(
                    report,
                    "phase: {} {}",
                    phase.label.as_str(),
                    phase.schedule.total_time()
                );
            }
            let _ = writeln!(report, "parameters:");
            for (name, value) in &plan.parameters.entries {
                let _ = writeln!(report, "  {name} = {value}");
            }
            write_out(&common.out_dir, "report.txt", &report)?;

            println!(
                "{}: predicted error {:.6e} (eps {eps}), schedule time {:.6}",
                if plan.met { "met" } else { "unmet" },
                plan.predicted_error,
                sched.total_time()
            );
            Ok(if plan.met { 0 } else { 2 })
        }

        Command::Saturate { common, field } => {
            let cfg = load_config(&common)?;
            let target = load_field(&field, cfg.dim)?;
            let dec = decompose(&target, 1e-9)?;
            let mut dump = String::new();
            for term in &dec.terms {
                let _ = writeln!(dump, "weight {} level {}", term.weight, term.expr.level());
                for line in term.expr.dump().lines() {
                    let _ = writeln!(dump, "  {line}");
                }
            }
            let _ = writeln!(dump, "residual {}", dec.residual_norm);
            print!("{dump}");
            write_out(&common.out_dir, "decomposition.txt", &dump)?;
            Ok(0)
        }

        Command::VerifyLimits { common, kind, field, initial, taus } => {
            let cfg = load_config(&common)?;
            let field = load_field(&field, cfg.dim)?;
            let initial = load_state(&initial, cfg.dim)?;
            let mut parsed = Vec::new();
            for tok in taus.split(',') {
                let tau: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| anyhow::anyhow!("bad tau '{tok}' in --taus"))?;
                parsed.push(tau);
            }
            let kind = match kind.as_str() {
                "kick" => LimitKind::Kick,
                _ => LimitKind::Square,
            };
            let study = limit_study(kind, &field, &initial, &parsed)?;
            print!("{}", study.to_csv());
            println!("fitted order {:.3}", study.fitted_order);
            write_out(&common.out_dir, "limits.csv", &study.to_csv())?;
            Ok(0)
        }

        Command::Moment { common, initial, final_profile, horizon } => {
            let cfg = load_config(&common)?;
            let w0 = load_field(&initial, cfg.dim)?;
            let w1 = load_field(&final_profile, cfg.dim)?;
            let (tau, f) = moment_velocity(&w0, &w1, horizon, cfg.seed)?;
            println!("tau {tau:.12}");
            write_out(&common.out_dir, "moment.field", &write_field(&f))?;
            Ok(0)
        }
    }
}

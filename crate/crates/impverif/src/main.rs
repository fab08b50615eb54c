//! `impverif` — verify or run `.imp` programs.

use clap::{Args, Parser, Subcommand};
use impverif::interp::{InitPolicy, Outcome};
use impverif::own_infer::SolveParams;
use impverif::pipeline::{run_source, verify_source, Verdict, VerifyOptions};
use impverif::solver_io::SolverConfig;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "impverif", version, about = "Ownership/refinement verifier and interpreter for .imp programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Statically verify the absence of assertion failures.
    Verify(VerifyArgs),
    /// Execute a program on the reference interpreter.
    Run(RunArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Input program (.imp).
    file: PathBuf,
    /// Universal samples added per round of ownership solving.
    #[arg(long, default_value_t = 8)]
    samples: usize,
    /// Round budget of the ownership solving loop.
    #[arg(long, default_value_t = 40)]
    max_rounds: usize,
    /// Seed for the ownership sampling heuristic.
    #[arg(long, default_value_t = 0)]
    own_seed: u64,
    /// Plain SMT solver command (reads an SMT-LIB2 file argument).
    #[arg(long, default_value = "z3")]
    smt_cmd: String,
    /// CHC solver command (reads an SMT-LIB2 HORN file argument and prints
    /// sat/unsat/unknown on the first line).
    #[arg(long, default_value = "hoice")]
    chc_cmd: String,
    /// Per-query timeout for the plain SMT solver, in seconds.
    #[arg(long, default_value_t = 60)]
    smt_timeout: u64,
    /// Timeout for the CHC solver, in seconds.
    #[arg(long, default_value_t = 600)]
    chc_timeout: u64,
    /// Write the ownership constraints as SMT-LIB2 to this path.
    #[arg(long)]
    emit_own_constraints: Option<PathBuf>,
    /// Write the CHC system as SMT-LIB2 HORN to this path.
    #[arg(long)]
    emit_chc: Option<PathBuf>,
    /// Keep solver scratch files (printed in the report).
    #[arg(long)]
    keep_scratch: bool,
    /// Frontend + constraint generation + emission only; no solver runs.
    #[arg(long)]
    no_solvers: bool,
    /// Print the inferred simple types and exit.
    #[arg(long)]
    dump_simple_types: bool,
    /// Machine-readable JSON report on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Input program (.imp).
    file: PathBuf,
    /// Random seed for nondeterministic draws and cell contents.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step budget.
    #[arg(long, default_value_t = 10_000_000)]
    fuel: u64,
    /// Initial contents of allocated cells: `random` or `constant:K`.
    #[arg(long, default_value = "random")]
    init: InitPolicy,
    /// Print each reduction rule as it fires.
    #[arg(long)]
    trace: bool,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Verify(args) => cmd_verify(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn read_file(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let src = match read_file(&args.file) {
        Ok(s) => s,
        Err(code) => return code,
    };

    if args.dump_simple_types {
        return match impverif::frontend(&src) {
            Ok(fe) => {
                for (f, sig) in &fe.table.funs {
                    let params: Vec<String> = sig.params.iter().map(|t| t.to_string()).collect();
                    println!("{f}: ({}) -> {}", params.join(", "), sig.ret);
                }
                for (x, t) in &fe.table.vars {
                    println!("{x}: {t}");
                }
                ExitCode::from(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    let solver = SolverConfig {
        smt_cmd: SolverConfig::parse_cmd(&args.smt_cmd),
        chc_cmd: SolverConfig::parse_cmd(&args.chc_cmd),
        smt_timeout: Duration::from_secs(args.smt_timeout),
        chc_timeout: Duration::from_secs(args.chc_timeout),
        scratch_dir: None,
        keep_scratch: args.keep_scratch,
    }
    .with_env_overrides();

    let opts = VerifyOptions {
        solve: SolveParams {
            samples_per_round: args.samples,
            max_rounds: args.max_rounds,
            seed: args.own_seed,
        },
        solver,
        emit_own_constraints: args.emit_own_constraints,
        emit_chc: args.emit_chc,
        no_solvers: args.no_solvers,
    };

    let report = verify_source(&src, &opts);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        match &report.verdict {
            Verdict::Safe => println!("Safe"),
            Verdict::Unknown { phase, reason } => println!("Unknown ({phase:?}): {reason}"),
            Verdict::Unsupported { reason } => println!("Unsupported: {reason}"),
            Verdict::FrontendError { message } => println!("Frontend error: {message}"),
            Verdict::SolverError { message } => println!("Solver error: {message}"),
        }
        println!(
            "phases (ms): frontend {} | own gen {} | own solve {} | chc gen {} | chc solve {}",
            report.timings.frontend_ms,
            report.timings.own_gen_ms,
            report.timings.own_solve_ms,
            report.timings.chc_gen_ms,
            report.timings.chc_solve_ms,
        );
        println!(
            "sizes: {} templates, {} ownership constraints, {} predicates, {} clauses",
            report.counts.templates,
            report.counts.own_constraints,
            report.counts.predicates,
            report.counts.clauses,
        );
        if let Some(p) = &report.artifacts.own_constraints {
            println!("ownership constraints written to {}", p.display());
        }
        if let Some(p) = &report.artifacts.chc_script {
            println!("CHC script written to {}", p.display());
        }
    }
    ExitCode::from(report.verdict.exit_code() as u8)
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let src = match read_file(&args.file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match run_source(&src, args.fuel, args.seed, args.init, args.trace) {
        Ok(result) => {
            println!("{}", result.outcome);
            println!("steps: {}", result.steps);
            let code = match result.outcome {
                Outcome::Halt(_) => 0,
                Outcome::FuelExhausted => 2,
                Outcome::AssertFail => 3,
                Outcome::AliasFail { .. } => 4,
                Outcome::Stuck(_) => 5,
            };
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

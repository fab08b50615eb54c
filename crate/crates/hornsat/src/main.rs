//! `hornsat FILE` — answer sat/unknown for an SMT-LIB2 HORN script.

use std::process::ExitCode;
use std::time::Duration;

fn main() -> ExitCode {
    let mut file = None;
    let mut smt_cmd = std::env::var("HORNSAT_SMT_CMD").unwrap_or_else(|_| "z3".to_string());
    let mut timeout = 590u64;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--smt-cmd" => match args.next() {
                Some(v) => smt_cmd = v,
                None => return usage(),
            },
            "--timeout" => match args.next().and_then(|v| v.parse().ok()) {
                Some(v) => timeout = v,
                None => return usage(),
            },
            "--help" | "-h" => return usage(),
            other if !other.starts_with('-') => file = Some(other.to_string()),
            _ => return usage(),
        }
    }
    let Some(file) = file else { return usage() };
    let script = match std::fs::read_to_string(&file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {file}: {e}");
            return ExitCode::from(1);
        }
    };
    match hornsat::solve_script(&script, &smt_cmd, Duration::from_secs(timeout)) {
        hornsat::Answer::Sat(model) => {
            // Ignore broken pipes from consumers that only read the verdict.
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let _ = writeln!(out, "sat");
            let _ = write!(out, "{model}");
            ExitCode::from(0)
        }
        hornsat::Answer::Unknown(reason) => {
            println!("unknown");
            eprintln!("; {reason}");
            ExitCode::from(0)
        }
    }
}

fn usage() -> ExitCode {
    eprintln!("usage: hornsat [--smt-cmd CMD] [--timeout SECS] FILE.smt2");
    ExitCode::from(2)
}

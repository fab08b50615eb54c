//! A small CHC satisfiability front end for linear-integer HORN scripts.
//!
//! The search is a Houdini-style weakening loop over a mined pool of
//! candidate facts per predicate: start from the conjunction of all
//! candidates, find a clause an SMT solver can violate, drop the candidates
//! the violating model falsifies at the head, and repeat until the
//! assignment is inductive. Goal clauses are then checked once; if they hold
//! under the inductive assignment the system is satisfiable and the
//! assignment is printed as a model. Anything else is `unknown` — the tool
//! never claims `unsat`.
//!
//! The candidate pool contains equalities and inequalities between argument
//! pairs and against mined constants, plus interval-guarded variants shaped
//! after the out-of-bounds clauses that ownership-style encodings carry.

pub mod mine;
pub mod parse;
pub mod session;
pub mod solve;

pub use parse::{parse_script, HornSystem, ParsedClause, ParsedPred};
pub use solve::{solve_system, Answer};

use impverif::solver_io::{SolverConfig, SolverIo};
use std::time::Duration;

/// Runs the full pipeline on a script: parse, mine, solve.
pub fn solve_script(script: &str, smt_cmd: &str, timeout: Duration) -> Answer {
    let system = match parse_script(script) {
        Ok(s) => s,
        Err(reason) => return Answer::Unknown(format!("cannot parse script: {reason}")),
    };
    let cfg = SolverConfig {
        smt_cmd: SolverConfig::parse_cmd(smt_cmd),
        chc_cmd: None,
        smt_timeout: timeout,
        chc_timeout: timeout,
        scratch_dir: None,
        keep_scratch: false,
    };
    let solver = match SolverIo::new(cfg) {
        Ok(s) => s,
        Err(e) => return Answer::Unknown(format!("cannot set up scratch space: {e}")),
    };
    solve_system(&system, &solver)
}

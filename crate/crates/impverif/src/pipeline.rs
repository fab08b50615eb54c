//! The verification pipeline: frontend passes, ownership inference,
//! refinement inference, and the report type the driver prints.

use crate::interp::{self, InitPolicy, RunResult};
use crate::own_infer::{
    gen_templates_and_constraints, solve_exists_forall, OwnError, OwnOutcome, OwnProblem,
    OwnSolution, SolveParams,
};
use crate::refine_infer::{emit_smtlib_horn, gen_chc, solve_chc, ChcVerdict};
use crate::simple_types::{infer_simple, SimpleTypeTable, TypeError};
use crate::solver_io::{SolverConfig, SolverIo};
use crate::syntax::{
    desugar, insert_aliases, parse, uniquify, DesugarError, FreshGen, ParseError, Program,
};
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

/// Output of the frontend passes: parse, uniquify, simple types, desugar,
/// alias insertion.
pub struct Frontend {
    /// The program as parsed, before any rewriting.
    pub surface: Program,
    /// Core program with unique binders and auto-inserted aliases.
    pub core: Program,
    pub table: SimpleTypeTable,
    pub fresh: FreshGen,
}

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Type(#[from] TypeError),
    #[error("{0}")]
    Desugar(#[from] DesugarError),
}

pub fn frontend(src: &str) -> Result<Frontend, FrontendError> {
    let surface = parse(src)?;
    let mut fresh = FreshGen::for_program(&surface);
    let unique = uniquify(&surface, &mut fresh);
    let mut table = infer_simple(&unique)?;
    let core = desugar(&unique, &mut table, &mut fresh)?;
    let core = insert_aliases(&core, &mut table, &mut fresh);
    Ok(Frontend {
        surface,
        core,
        table,
        fresh,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    SimpleTypes,
    Ownership,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    /// Ownership solution verified and the CHC system satisfiable: no
    /// assertion failure can occur.
    Safe,
    /// Some phase could not establish safety; says nothing about the
    /// program.
    Unknown { phase: Phase, reason: String },
    /// The program is outside the inference fragment.
    Unsupported { reason: String },
    FrontendError { message: String },
    SolverError { message: String },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Safe => 0,
            Verdict::Unknown { .. } | Verdict::Unsupported { .. } => 2,
            Verdict::FrontendError { .. } | Verdict::SolverError { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PhaseTimings {
    pub frontend_ms: u128,
    pub own_gen_ms: u128,
    pub own_solve_ms: u128,
    pub chc_gen_ms: u128,
    pub chc_solve_ms: u128,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Counts {
    pub templates: usize,
    pub own_constraints: usize,
    pub predicates: usize,
    pub clauses: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Artifacts {
    pub own_constraints: Option<PathBuf>,
    pub chc_script: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub timings: PhaseTimings,
    pub counts: Counts,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub solve: SolveParams,
    pub solver: SolverConfig,
    pub emit_own_constraints: Option<PathBuf>,
    pub emit_chc: Option<PathBuf>,
    /// Frontend + constraint generation + emission only.
    pub no_solvers: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            solve: SolveParams::default(),
            solver: SolverConfig::default(),
            emit_own_constraints: None,
            emit_chc: None,
            no_solvers: false,
        }
    }
}

/// Runs the whole pipeline on a source string.
pub fn verify_source(src: &str, opts: &VerifyOptions) -> VerifyReport {
    let mut timings = PhaseTimings::default();
    let mut counts = Counts::default();
    let mut artifacts = Artifacts::default();

    let t0 = Instant::now();
    let fe = match frontend(src) {
        Ok(fe) => fe,
        Err(e) => {
            return VerifyReport {
                verdict: Verdict::FrontendError {
                    message: e.to_string(),
                },
                timings,
                counts,
                artifacts,
            }
        }
    };
    timings.frontend_ms = t0.elapsed().as_millis();

    let t1 = Instant::now();
    let prob = match gen_templates_and_constraints(&fe.core, &fe.table) {
        Ok(p) => p,
        Err(OwnError::Unsupported(reason)) => {
            return VerifyReport {
                verdict: Verdict::Unsupported { reason },
                timings,
                counts,
                artifacts,
            }
        }
    };
    timings.own_gen_ms = t1.elapsed().as_millis();
    counts.templates = prob.templates.len();
    counts.own_constraints = prob.constraints.len();

    if let Some(path) = &opts.emit_own_constraints {
        if let Err(e) = std::fs::write(path, prob.emit_smtlib()) {
            return VerifyReport {
                verdict: Verdict::SolverError {
                    message: format!("cannot write {}: {e}", path.display()),
                },
                timings,
                counts,
                artifacts,
            };
        }
        artifacts.own_constraints = Some(path.clone());
    }

    if opts.no_solvers {
        return VerifyReport {
            verdict: Verdict::Unknown {
                phase: Phase::Ownership,
                reason: "solvers disabled (--no-solvers)".into(),
            },
            timings,
            counts,
            artifacts,
        };
    }

    let solver = match SolverIo::new(opts.solver.clone()) {
        Ok(s) => s,
        Err(e) => {
            return VerifyReport {
                verdict: Verdict::SolverError {
                    message: format!("cannot set up solver scratch space: {e}"),
                },
                timings,
                counts,
                artifacts,
            }
        }
    };

    let t2 = Instant::now();
    let own_sol = match solve_exists_forall(&prob.constraints, &prob.unknowns, &opts.solve, &solver)
    {
        OwnOutcome::Solved(sol) => sol,
        OwnOutcome::Unknown { reason } => {
            timings.own_solve_ms = t2.elapsed().as_millis();
            return VerifyReport {
                verdict: Verdict::Unknown {
                    phase: Phase::Ownership,
                    reason,
                },
                timings,
                counts,
                artifacts,
            };
        }
        OwnOutcome::SolverError(message) => {
            timings.own_solve_ms = t2.elapsed().as_millis();
            return VerifyReport {
                verdict: Verdict::SolverError { message },
                timings,
                counts,
                artifacts,
            };
        }
    };
    timings.own_solve_ms = t2.elapsed().as_millis();

    let t3 = Instant::now();
    let sys = gen_chc(&fe.core, &fe.table, &prob, &own_sol);
    timings.chc_gen_ms = t3.elapsed().as_millis();
    counts.predicates = sys.preds.len();
    counts.clauses = sys.clauses.len();

    let script = emit_smtlib_horn(&sys, false);
    if let Some(path) = &opts.emit_chc {
        if let Err(e) = std::fs::write(path, &script) {
            return VerifyReport {
                verdict: Verdict::SolverError {
                    message: format!("cannot write {}: {e}", path.display()),
                },
                timings,
                counts,
                artifacts,
            };
        }
        artifacts.chc_script = Some(path.clone());
    }

    let t4 = Instant::now();
    let verdict = match solve_chc(&script, &solver) {
        ChcVerdict::Sat => Verdict::Safe,
        ChcVerdict::Unsat => Verdict::Unknown {
            phase: Phase::Refinement,
            reason: "refinement constraints unsatisfiable".into(),
        },
        ChcVerdict::Unknown(reason) => Verdict::Unknown {
            phase: Phase::Refinement,
            reason,
        },
    };
    timings.chc_solve_ms = t4.elapsed().as_millis();

    VerifyReport {
        verdict,
        timings,
        counts,
        artifacts,
    }
}

/// Pipeline state needed by tests that poke at intermediate results.
pub struct Analysis {
    pub frontend: Frontend,
    pub problem: OwnProblem,
    pub solution: Option<OwnSolution>,
}

/// Frontend + ownership generation, without solving.
pub fn analyze(src: &str) -> Result<Analysis, Verdict> {
    let fe = frontend(src).map_err(|e| Verdict::FrontendError {
        message: e.to_string(),
    })?;
    let prob = gen_templates_and_constraints(&fe.core, &fe.table)
        .map_err(|OwnError::Unsupported(reason)| Verdict::Unsupported { reason })?;
    Ok(Analysis {
        frontend: fe,
        problem: prob,
        solution: None,
    })
}

/// Runs a program file through the interpreter.
pub fn run_source(
    src: &str,
    fuel: u64,
    seed: u64,
    init: InitPolicy,
    trace: bool,
) -> Result<RunResult, FrontendError> {
    let fe = frontend(src)?;
    Ok(interp::run(&fe.core, fuel, seed, init, trace))
}

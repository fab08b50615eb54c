//! Automated assertion-safety verification for a small imperative language
//! with mutable memory and pointer arithmetic.
//!
//! The pipeline infers fractional-ownership types in two phases: interval
//! ownership templates solved by exists-forall constraint solving, then
//! refinement predicates solved as Constrained Horn Clauses by an external
//! HORN solver. A verified ownership solution plus a satisfiable CHC system
//! yields the one-sided verdict `Safe`; everything else is `Unknown`. A
//! reference interpreter of the operational semantics doubles as a
//! differential-testing oracle for the `Safe` verdicts.
//!
//! Entry points:
//! - [`pipeline::verify_source`] runs the whole pipeline on a source string;
//! - [`pipeline::run_source`] executes a program on the interpreter;
//! - the `impverif` binary exposes both as `verify` and `run` subcommands.

pub mod canon;
pub mod formula;
pub mod interp;
pub mod own_infer;
pub mod pipeline;
pub mod refine_infer;
pub mod scope;
pub mod simple_types;
pub mod solver_io;
pub mod syntax;
pub mod types;

pub use pipeline::{frontend, run_source, verify_source, Verdict, VerifyOptions, VerifyReport};

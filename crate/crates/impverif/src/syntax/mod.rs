//! Frontend: surface syntax, desugaring to the core form, automatic alias
//! insertion and pretty-printing.

pub mod alias;
pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod uniquify;

pub use alias::insert_aliases;
pub use ast::{Atom, Def, Expr, FreshGen, Op, Pos, Program, Rhs};
pub use desugar::{desugar, DesugarError};
pub use parser::{parse, ParseError};
pub use pretty::pretty;
pub use uniquify::uniquify;

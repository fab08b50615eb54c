//! Abstract syntax of the input language.
//!
//! One expression type serves both the surface programs (as written in `.imp`
//! files) and the core form produced by [`crate::syntax::desugar`]. The core
//! form is the subset accepted by [`Expr::core_violation`]: conditionals are
//! `ifnp` on a variable, operator and assignment operands are variables, and
//! no surface comparison conditions remain.

use crate::formula::Formula;
use num_bigint::BigInt;
use std::collections::BTreeMap;
use std::fmt;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Integer operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }
}

/// Comparison operators usable in surface `if` conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// An atomic operand: an integer literal or a variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Int(BigInt),
    Var(String),
}

impl Atom {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Atom::Var(x) => Some(x),
            Atom::Int(_) => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Int(n) => write!(f, "{n}"),
            Atom::Var(x) => write!(f, "{x}"),
        }
    }
}

/// Right-hand sides of `let`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Atom(Atom),
    /// The nondeterministic integer token `_`.
    Nondet,
    /// Unary minus, surface only; desugars to `0 - a`.
    Neg(Atom),
    BinOp(Op, Atom, Atom),
    /// Pointer addition, core only; produced by desugaring `+` on a pointer.
    AddPtr(String, Atom),
    Deref(String),
    /// `alloc n` / `mkarray n`.
    MkArray(BigInt),
    Call(String, Vec<Atom>),
    /// A block expression `{ e }` in right-hand-side position. Produced by
    /// the alias-insertion pass and by call inlining during evaluation.
    Expr(Box<Expr>),
}

/// Surface `if` condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub op: CmpOp,
    pub lhs: Atom,
    pub rhs: Atom,
}

/// Expressions. `pos` fields are retained for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// A final value in tail position.
    Value(Atom, Pos),
    Let {
        var: String,
        rhs: Rhs,
        body: Box<Expr>,
        pos: Pos,
    },
    /// Surface conditional with a comparison; removed by desugaring.
    If {
        cond: Cond,
        then_branch: Box<Expr>,
        else_branch: Box<Expr>,
        pos: Pos,
    },
    /// Core conditional: takes the then branch when the variable is <= 0.
    IfNp {
        var: String,
        then_branch: Box<Expr>,
        else_branch: Box<Expr>,
        pos: Pos,
    },
    /// `x := rhs; body`. Core form requires `rhs` to be a variable.
    Assign {
        var: String,
        rhs: Atom,
        body: Box<Expr>,
        pos: Pos,
    },
    Assert {
        cond: Formula,
        body: Box<Expr>,
        pos: Pos,
    },
    /// `alias(x = y + z); body`
    AliasAddPtr {
        var: String,
        base: String,
        offset: Atom,
        /// True when inserted by the automatic alias pass.
        auto: bool,
        body: Box<Expr>,
        pos: Pos,
    },
    /// `alias(x = *y); body`
    AliasDeref {
        var: String,
        base: String,
        auto: bool,
        body: Box<Expr>,
        pos: Pos,
    },
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Value(_, pos)
            | Expr::Let { pos, .. }
            | Expr::If { pos, .. }
            | Expr::IfNp { pos, .. }
            | Expr::Assign { pos, .. }
            | Expr::Assert { pos, .. }
            | Expr::AliasAddPtr { pos, .. }
            | Expr::AliasDeref { pos, .. } => *pos,
        }
    }

    /// Returns a description of the first sugar node found, or `None` when
    /// the expression is in core form.
    pub fn core_violation(&self) -> Option<String> {
        match self {
            Expr::Value(_, _) => None,
            Expr::Let { rhs, body, .. } => {
                match rhs {
                    Rhs::Neg(_) => return Some("unary minus".into()),
                    Rhs::BinOp(_, a, b) => {
                        if a.as_var().is_none() || b.as_var().is_none() {
                            return Some("literal operand under operator".into());
                        }
                    }
                    Rhs::AddPtr(_, off) => {
                        if off.as_var().is_none() {
                            return Some("literal pointer offset".into());
                        }
                    }
                    Rhs::Call(_, args) => {
                        if args.iter().any(|a| a.as_var().is_none()) {
                            return Some("literal call argument".into());
                        }
                    }
                    Rhs::Expr(inner) => {
                        if let Some(v) = inner.core_violation() {
                            return Some(v);
                        }
                    }
                    _ => {}
                }
                body.core_violation()
            }
            Expr::If { .. } => Some("surface if condition".into()),
            Expr::IfNp {
                then_branch,
                else_branch,
                ..
            } => then_branch
                .core_violation()
                .or_else(|| else_branch.core_violation()),
            Expr::Assign { rhs, body, .. } => {
                if rhs.as_var().is_none() {
                    return Some("literal assignment source".into());
                }
                body.core_violation()
            }
            Expr::Assert { body, .. } => body.core_violation(),
            Expr::AliasAddPtr { offset, body, .. } => {
                if offset.as_var().is_none() {
                    return Some("literal alias offset".into());
                }
                body.core_violation()
            }
            Expr::AliasDeref { body, .. } => body.core_violation(),
        }
    }

    pub fn is_core(&self) -> bool {
        self.core_violation().is_none()
    }
}

/// A simple type as written in bracket annotations: `int`, `int ref`, ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotType {
    Int,
    Ref(Box<AnnotType>),
}

impl fmt::Display for AnnotType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotType::Int => write!(f, "int"),
            AnnotType::Ref(t) => write!(f, "{t} ref"),
        }
    }
}

/// Optional bracket annotation on a definition:
/// `[ <x1: T1, ...> -> <x1: T1', ... | Tret> ]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleAnnot {
    pub pre: Vec<(String, AnnotType)>,
    pub post: Vec<(String, AnnotType)>,
    pub ret: AnnotType,
}

/// A function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Def {
    pub name: String,
    pub params: Vec<String>,
    pub simple_annot: Option<SimpleAnnot>,
    pub body: Expr,
    pub pos: Pos,
}

/// A whole program: definitions plus a main expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    /// Keyed by function name; iteration order is the sorted name order.
    pub defs: BTreeMap<String, Def>,
    /// Original textual order of the definitions, for pretty-printing.
    pub def_order: Vec<String>,
    pub main: Expr,
}

impl Program {
    pub fn is_core(&self) -> bool {
        self.main.is_core() && self.defs.values().all(|d| d.body.is_core())
    }

    /// Structural equality ignoring positions and definition order.
    pub fn structurally_eq(&self, other: &Program) -> bool {
        fn atom_eq(a: &Atom, b: &Atom) -> bool {
            a == b
        }
        fn rhs_eq(a: &Rhs, b: &Rhs) -> bool {
            match (a, b) {
                (Rhs::Expr(x), Rhs::Expr(y)) => expr_eq(x, y),
                _ => a == b,
            }
        }
        fn expr_eq(a: &Expr, b: &Expr) -> bool {
            match (a, b) {
                (Expr::Value(x, _), Expr::Value(y, _)) => atom_eq(x, y),
                (
                    Expr::Let {
                        var: v1,
                        rhs: r1,
                        body: b1,
                        ..
                    },
                    Expr::Let {
                        var: v2,
                        rhs: r2,
                        body: b2,
                        ..
                    },
                ) => v1 == v2 && rhs_eq(r1, r2) && expr_eq(b1, b2),
                (
                    Expr::If {
                        cond: c1,
                        then_branch: t1,
                        else_branch: e1,
                        ..
                    },
                    Expr::If {
                        cond: c2,
                        then_branch: t2,
                        else_branch: e2,
                        ..
                    },
                ) => c1 == c2 && expr_eq(t1, t2) && expr_eq(e1, e2),
                (
                    Expr::IfNp {
                        var: v1,
                        then_branch: t1,
                        else_branch: e1,
                        ..
                    },
                    Expr::IfNp {
                        var: v2,
                        then_branch: t2,
                        else_branch: e2,
                        ..
                    },
                ) => v1 == v2 && expr_eq(t1, t2) && expr_eq(e1, e2),
                (
                    Expr::Assign {
                        var: v1,
                        rhs: r1,
                        body: b1,
                        ..
                    },
                    Expr::Assign {
                        var: v2,
                        rhs: r2,
                        body: b2,
                        ..
                    },
                ) => v1 == v2 && r1 == r2 && expr_eq(b1, b2),
                (
                    Expr::Assert {
                        cond: c1, body: b1, ..
                    },
                    Expr::Assert {
                        cond: c2, body: b2, ..
                    },
                ) => c1 == c2 && expr_eq(b1, b2),
                (
                    Expr::AliasAddPtr {
                        var: v1,
                        base: y1,
                        offset: z1,
                        body: b1,
                        ..
                    },
                    Expr::AliasAddPtr {
                        var: v2,
                        base: y2,
                        offset: z2,
                        body: b2,
                        ..
                    },
                ) => v1 == v2 && y1 == y2 && z1 == z2 && expr_eq(b1, b2),
                (
                    Expr::AliasDeref {
                        var: v1,
                        base: y1,
                        body: b1,
                        ..
                    },
                    Expr::AliasDeref {
                        var: v2,
                        base: y2,
                        body: b2,
                        ..
                    },
                ) => v1 == v2 && y1 == y2 && expr_eq(b1, b2),
                _ => false,
            }
        }
        if self.defs.len() != other.defs.len() {
            return false;
        }
        for (name, d1) in &self.defs {
            let Some(d2) = other.defs.get(name) else {
                return false;
            };
            if d1.params != d2.params
                || d1.simple_annot != d2.simple_annot
                || !expr_eq(&d1.body, &d2.body)
            {
                return false;
            }
        }
        expr_eq(&self.main, &other.main)
    }
}

/// Variables read anywhere in an expression (free occurrences only).
pub fn free_vars(e: &Expr) -> std::collections::BTreeSet<String> {
    fn atom(a: &Atom, bound: &mut Vec<String>, out: &mut std::collections::BTreeSet<String>) {
        if let Atom::Var(x) = a {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
    }
    fn var(x: &str, bound: &mut Vec<String>, out: &mut std::collections::BTreeSet<String>) {
        if !bound.iter().any(|b| b == x) {
            out.insert(x.to_string());
        }
    }
    fn rhs(r: &Rhs, bound: &mut Vec<String>, out: &mut std::collections::BTreeSet<String>) {
        match r {
            Rhs::Atom(a) | Rhs::Neg(a) => atom(a, bound, out),
            Rhs::Nondet | Rhs::MkArray(_) => {}
            Rhs::BinOp(_, a, b) => {
                atom(a, bound, out);
                atom(b, bound, out);
            }
            Rhs::AddPtr(y, z) => {
                var(y, bound, out);
                atom(z, bound, out);
            }
            Rhs::Deref(y) => var(y, bound, out),
            Rhs::Call(_, args) => {
                for a in args {
                    atom(a, bound, out);
                }
            }
            Rhs::Expr(inner) => walk(inner, bound, out),
        }
    }
    fn walk(e: &Expr, bound: &mut Vec<String>, out: &mut std::collections::BTreeSet<String>) {
        match e {
            Expr::Value(a, _) => atom(a, bound, out),
            Expr::Let {
                var: x,
                rhs: r,
                body,
                ..
            } => {
                rhs(r, bound, out);
                bound.push(x.clone());
                walk(body, bound, out);
                bound.pop();
            }
            Expr::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                atom(&cond.lhs, bound, out);
                atom(&cond.rhs, bound, out);
                walk(then_branch, bound, out);
                walk(else_branch, bound, out);
            }
            Expr::IfNp {
                var: x,
                then_branch,
                else_branch,
                ..
            } => {
                var(x, bound, out);
                walk(then_branch, bound, out);
                walk(else_branch, bound, out);
            }
            Expr::Assign {
                var: x,
                rhs: a,
                body,
                ..
            } => {
                var(x, bound, out);
                atom(a, bound, out);
                walk(body, bound, out);
            }
            Expr::Assert { cond, body, .. } => {
                for x in cond.free_vars() {
                    var(&x, bound, out);
                }
                walk(body, bound, out);
            }
            Expr::AliasAddPtr {
                var: x,
                base,
                offset,
                body,
                ..
            } => {
                var(x, bound, out);
                var(base, bound, out);
                atom(offset, bound, out);
                walk(body, bound, out);
            }
            Expr::AliasDeref {
                var: x,
                base,
                body,
                ..
            } => {
                var(x, bound, out);
                var(base, bound, out);
                walk(body, bound, out);
            }
        }
    }
    let mut out = std::collections::BTreeSet::new();
    walk(e, &mut Vec::new(), &mut out);
    out
}

/// Fresh-name source. Source identifiers never contain `$`; generated names
/// are `$0`, `$1`, ... so they cannot collide.
#[derive(Debug, Default)]
pub struct FreshGen {
    next: u64,
}

impl FreshGen {
    pub fn new() -> Self {
        FreshGen { next: 0 }
    }

    /// Seeds the counter past any `$k` name already present, so that a
    /// re-parsed pretty-printed core program keeps generating fresh names.
    pub fn for_program(p: &Program) -> Self {
        let mut max = 0u64;
        let mut scan_name = |s: &str| {
            if let Some(rest) = s.strip_prefix('$') {
                if let Ok(k) = rest.parse::<u64>() {
                    max = max.max(k + 1);
                }
            }
        };
        fn walk(e: &Expr, f: &mut dyn FnMut(&str)) {
            match e {
                Expr::Value(a, _) => {
                    if let Atom::Var(x) = a {
                        f(x);
                    }
                }
                Expr::Let { var, rhs, body, .. } => {
                    f(var);
                    if let Rhs::Expr(inner) = rhs {
                        walk(inner, f);
                    }
                    walk(body, f);
                }
                Expr::If {
                    then_branch,
                    else_branch,
                    ..
                }
                | Expr::IfNp {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, f);
                    walk(else_branch, f);
                }
                Expr::Assign { body, .. }
                | Expr::Assert { body, .. }
                | Expr::AliasAddPtr { body, .. }
                | Expr::AliasDeref { body, .. } => walk(body, f),
            }
        }
        for def in p.defs.values() {
            walk(&def.body, &mut scan_name);
        }
        walk(&p.main, &mut scan_name);
        FreshGen { next: max }
    }

    pub fn fresh(&mut self) -> String {
        let name = format!("${}", self.next);
        self.next += 1;
        name
    }
}

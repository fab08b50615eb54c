//! Shared scope bookkeeping for the two inference phases.
//!
//! Both phases walk the core program tracking the same three things: the
//! path condition (branch guards with let-bound arithmetic inlined), the
//! linear definitions of let-bound integers, and the list of "root" integer
//! variables (those without a linear definition: parameters, nondet draws,
//! dereference results, call results, divisions and nonlinear products).
//! Templates and predicate variables range over the roots.

use crate::formula::{Cmp, Formula, LinTerm};
use crate::syntax::ast::{Atom, Op, Rhs};
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct ScopeEnv {
    /// Path condition over root variables.
    pub guard: Formula,
    /// Fully-inlined linear definitions (values over roots).
    pub lin_defs: BTreeMap<String, LinTerm>,
    /// Root integer variables, in binding order.
    pub roots: Vec<String>,
}

impl ScopeEnv {
    pub fn new() -> Self {
        ScopeEnv {
            guard: Formula::True,
            lin_defs: BTreeMap::new(),
            roots: Vec::new(),
        }
    }

    /// The linear term a variable stands for: its inlined definition if it
    /// has one, the variable itself otherwise.
    pub fn term_for(&self, x: &str) -> LinTerm {
        self.lin_defs
            .get(x)
            .cloned()
            .unwrap_or_else(|| LinTerm::var(x))
    }

    pub fn atom_term(&self, a: &Atom) -> LinTerm {
        match a {
            Atom::Int(n) => LinTerm::constant(n.clone()),
            Atom::Var(x) => self.term_for(x),
        }
    }

    /// Inlines linear definitions into a formula.
    pub fn inline(&self, phi: &Formula) -> Formula {
        phi.subst_all(&self.lin_defs)
    }

    /// Records an integer binding. Lets with a linear right-hand side become
    /// definitions; everything else becomes a root.
    pub fn bind_int(&mut self, var: &str, rhs: &Rhs) -> IntBinding {
        match self.linear_rhs(rhs) {
            Some(term) => {
                self.lin_defs.insert(var.to_string(), term.clone());
                IntBinding::Defined(term)
            }
            None => {
                self.roots.push(var.to_string());
                IntBinding::Root(self.describe_root(rhs))
            }
        }
    }

    /// Declares a root directly (parameters, join results).
    pub fn bind_root(&mut self, var: &str) {
        self.roots.push(var.to_string());
    }

    /// The roots in scope before `var` was bound (for the scope of the
    /// predicate describing `var` itself).
    pub fn roots_before(&self, var: &str) -> Vec<String> {
        self.roots
            .iter()
            .take_while(|x| x.as_str() != var)
            .cloned()
            .collect()
    }

    fn describe_root(&self, rhs: &Rhs) -> RootKind {
        match rhs {
            Rhs::Nondet => RootKind::Nondet,
            Rhs::Deref(y) => RootKind::Deref(y.clone()),
            Rhs::Call(f, args) => RootKind::Call(f.clone(), args.clone()),
            Rhs::BinOp(Op::Div, a, b) => {
                let divisor = self.atom_term(b);
                RootKind::Div(self.atom_term(a), divisor)
            }
            Rhs::BinOp(Op::Mul, a, b) => RootKind::NonlinearMul(self.atom_term(a), self.atom_term(b)),
            _ => RootKind::Other,
        }
    }

    /// The linear term of a right-hand side, when it has one.
    pub fn linear_rhs(&self, rhs: &Rhs) -> Option<LinTerm> {
        match rhs {
            Rhs::Atom(a) => Some(self.atom_term(a)),
            Rhs::BinOp(op, a, b) => {
                let (ta, tb) = (self.atom_term(a), self.atom_term(b));
                match op {
                    Op::Add => Some(ta.add(&tb)),
                    Op::Sub => Some(ta.sub(&tb)),
                    Op::Mul => {
                        // Linear only when one side is a constant.
                        if let Some(k) = ta.as_constant() {
                            Some(tb.scale(k))
                        } else {
                            tb.as_constant().map(|k| ta.scale(k))
                        }
                    }
                    Op::Div => {
                        // Exact only for literal operands.
                        match (ta.as_constant(), tb.as_constant()) {
                            (Some(n), Some(d)) if !d.is_zero() => {
                                Some(LinTerm::constant(n / d))
                            }
                            _ => None,
                        }
                    }
                }
            }
            _ => None,
        }
    }

    /// Extends the path condition for the branch of `ifnp x`.
    pub fn enter_branch(&mut self, scrutinee: &str, then_branch: bool) {
        let t = self.term_for(scrutinee);
        let cond = if then_branch {
            Formula::atom(Cmp::Le, t, LinTerm::constant(0))
        } else {
            Formula::atom(Cmp::Gt, t, LinTerm::constant(0))
        };
        self.guard = Formula::and([self.guard.clone(), cond]);
    }
}

/// How an integer let was classified.
#[derive(Debug, Clone)]
pub enum IntBinding {
    Defined(LinTerm),
    Root(RootKind),
}

/// What kind of opaque value a root holds; the refinement phase turns this
/// into the defining clause of the root's predicate.
#[derive(Debug, Clone)]
pub enum RootKind {
    Nondet,
    Deref(String),
    Call(String, Vec<Atom>),
    /// dividend term, divisor term
    Div(LinTerm, LinTerm),
    NonlinearMul(LinTerm, LinTerm),
    Other,
}

/// Truncating-toward-zero division relation `q = a / k` for a literal
/// divisor, as a formula over the quotient binder.
///
/// Truncation means `a = k*q + r` with `sign(r) = sign(a)` and `|r| < |k|`,
/// so `a >= 0` gives `kq <= a <= kq + |k|-1` and `a < 0` gives
/// `kq - (|k|-1) <= a <= kq`, whatever the sign of `k`.
pub fn div_relation(quotient: &LinTerm, dividend: &LinTerm, divisor: &BigInt) -> Option<Formula> {
    use num_traits::Signed;
    if divisor.is_zero() {
        return None;
    }
    let slack = divisor.abs() - 1u8;
    let kq = quotient.scale(divisor);
    let nonneg = Formula::and([
        Formula::atom(Cmp::Ge, dividend.clone(), LinTerm::constant(0)),
        Formula::atom(Cmp::Le, kq.clone(), dividend.clone()),
        Formula::atom(Cmp::Le, dividend.clone(), kq.add_const(slack.clone())),
    ]);
    let neg = Formula::and([
        Formula::atom(Cmp::Lt, dividend.clone(), LinTerm::constant(0)),
        Formula::atom(Cmp::Le, kq.add_const(-slack), dividend.clone()),
        Formula::atom(Cmp::Le, dividend.clone(), kq),
    ]);
    Some(Formula::or([nonneg, neg]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definitions_inline_transitively() {
        let mut env = ScopeEnv::new();
        env.bind_root("n");
        env.bind_int("m", &Rhs::BinOp(Op::Sub, Atom::Var("n".into()), Atom::Int(1.into())));
        env.bind_int("k", &Rhs::BinOp(Op::Add, Atom::Var("m".into()), Atom::Int(1.into())));
        assert_eq!(env.term_for("k"), LinTerm::var("n"));
        assert_eq!(env.roots, vec!["n".to_string()]);
    }

    #[test]
    fn branch_guard_inlines_scrutinee() {
        let mut env = ScopeEnv::new();
        env.bind_root("n");
        env.bind_int("t", &Rhs::BinOp(Op::Sub, Atom::Var("n".into()), Atom::Int(1.into())));
        env.enter_branch("t", true);
        let expect = Formula::atom(
            Cmp::Le,
            LinTerm::var("n").add_const(-1),
            LinTerm::constant(0),
        );
        assert_eq!(env.guard, expect);
    }

    #[test]
    fn nonlinear_ops_become_roots() {
        let mut env = ScopeEnv::new();
        env.bind_root("a");
        env.bind_root("b");
        let kind = env.bind_int("m", &Rhs::BinOp(Op::Mul, Atom::Var("a".into()), Atom::Var("b".into())));
        assert!(matches!(kind, IntBinding::Root(RootKind::NonlinearMul(_, _))));
        let kind = env.bind_int("d", &Rhs::BinOp(Op::Div, Atom::Var("a".into()), Atom::Int(2.into())));
        assert!(matches!(kind, IntBinding::Root(RootKind::Div(_, _))));
        // Constant multiple stays linear.
        let kind = env.bind_int("e", &Rhs::BinOp(Op::Mul, Atom::Int(3.into()), Atom::Var("a".into())));
        assert!(matches!(kind, IntBinding::Defined(_)));
    }

    #[test]
    fn div_relation_matches_truncation() {
        // q = a / 2 over a in [-5, 5]
        let q = LinTerm::var("q");
        let a = LinTerm::var("a");
        let rel = div_relation(&q, &a, &BigInt::from(2)).unwrap();
        for av in -5i64..=5 {
            let qv = if av >= 0 { av / 2 } else { -((-av) / 2) };
            let env = move |x: &str| match x {
                "q" => Some(BigInt::from(qv)),
                "a" => Some(BigInt::from(av)),
                _ => None,
            };
            assert_eq!(rel.eval(&env), Some(true), "a={av} q={qv}");
            // The wrong quotient must not satisfy the relation.
            let envw = move |x: &str| match x {
                "q" => Some(BigInt::from(qv + 1)),
                "a" => Some(BigInt::from(av)),
                _ => None,
            };
            assert_eq!(rel.eval(&envw), Some(false), "a={av} wrong q");
        }
    }
}

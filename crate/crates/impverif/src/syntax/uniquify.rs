//! Binder uniquification.
//!
//! The inference phases key tables by binder name, so before running them we
//! rename any shadowing binder to a fresh `$k` name. Programs without
//! shadowing come out unchanged.

use super::ast::*;
use std::collections::{BTreeMap, BTreeSet};

pub fn uniquify(p: &Program, fresh: &mut FreshGen) -> Program {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = p.clone();
    for name in p.def_order.clone() {
        let def = out.defs.get_mut(&name).unwrap();
        let mut scope = BTreeMap::new();
        let mut params = Vec::new();
        for param in &def.params {
            let unique = claim(param, &mut seen, fresh);
            scope.insert(param.clone(), unique.clone());
            params.push(unique);
        }
        def.params = params;
        if let Some(annot) = &mut def.simple_annot {
            for (x, _) in annot.pre.iter_mut().chain(annot.post.iter_mut()) {
                if let Some(u) = scope.get(x) {
                    *x = u.clone();
                }
            }
        }
        def.body = rename_expr(&def.body, &scope, &mut seen, fresh);
    }
    out.main = rename_expr(&p.main, &BTreeMap::new(), &mut seen, fresh);
    out
}

fn claim(name: &str, seen: &mut BTreeSet<String>, fresh: &mut FreshGen) -> String {
    if seen.insert(name.to_string()) {
        name.to_string()
    } else {
        let unique = fresh.fresh();
        seen.insert(unique.clone());
        unique
    }
}

fn rename_atom(a: &Atom, scope: &BTreeMap<String, String>) -> Atom {
    match a {
        Atom::Int(n) => Atom::Int(n.clone()),
        Atom::Var(x) => Atom::Var(scope.get(x).cloned().unwrap_or_else(|| x.clone())),
    }
}

fn rename_rhs(
    rhs: &Rhs,
    scope: &BTreeMap<String, String>,
    seen: &mut BTreeSet<String>,
    fresh: &mut FreshGen,
) -> Rhs {
    let var = |x: &String| scope.get(x).cloned().unwrap_or_else(|| x.clone());
    match rhs {
        Rhs::Atom(a) => Rhs::Atom(rename_atom(a, scope)),
        Rhs::Nondet => Rhs::Nondet,
        Rhs::Neg(a) => Rhs::Neg(rename_atom(a, scope)),
        Rhs::BinOp(op, a, b) => Rhs::BinOp(*op, rename_atom(a, scope), rename_atom(b, scope)),
        Rhs::AddPtr(y, z) => Rhs::AddPtr(var(y), rename_atom(z, scope)),
        Rhs::Deref(y) => Rhs::Deref(var(y)),
        Rhs::MkArray(n) => Rhs::MkArray(n.clone()),
        Rhs::Call(f, args) => {
            Rhs::Call(f.clone(), args.iter().map(|a| rename_atom(a, scope)).collect())
        }
        Rhs::Expr(inner) => Rhs::Expr(Box::new(rename_expr(inner, scope, seen, fresh))),
    }
}

fn rename_expr(
    e: &Expr,
    scope: &BTreeMap<String, String>,
    seen: &mut BTreeSet<String>,
    fresh: &mut FreshGen,
) -> Expr {
    let var = |x: &String| scope.get(x).cloned().unwrap_or_else(|| x.clone());
    match e {
        Expr::Value(a, pos) => Expr::Value(rename_atom(a, scope), *pos),
        Expr::Let {
            var: x,
            rhs,
            body,
            pos,
        } => {
            let rhs = rename_rhs(rhs, scope, seen, fresh);
            let unique = claim(x, seen, fresh);
            let mut inner = scope.clone();
            inner.insert(x.clone(), unique.clone());
            Expr::Let {
                var: unique,
                rhs,
                body: Box::new(rename_expr(body, &inner, seen, fresh)),
                pos: *pos,
            }
        }
        Expr::If {
            cond,
            then_branch,
            else_branch,
            pos,
        } => Expr::If {
            cond: Cond {
                op: cond.op,
                lhs: rename_atom(&cond.lhs, scope),
                rhs: rename_atom(&cond.rhs, scope),
            },
            then_branch: Box::new(rename_expr(then_branch, scope, seen, fresh)),
            else_branch: Box::new(rename_expr(else_branch, scope, seen, fresh)),
            pos: *pos,
        },
        Expr::IfNp {
            var: x,
            then_branch,
            else_branch,
            pos,
        } => Expr::IfNp {
            var: var(x),
            then_branch: Box::new(rename_expr(then_branch, scope, seen, fresh)),
            else_branch: Box::new(rename_expr(else_branch, scope, seen, fresh)),
            pos: *pos,
        },
        Expr::Assign {
            var: x,
            rhs,
            body,
            pos,
        } => Expr::Assign {
            var: var(x),
            rhs: rename_atom(rhs, scope),
            body: Box::new(rename_expr(body, scope, seen, fresh)),
            pos: *pos,
        },
        Expr::Assert { cond, body, pos } => {
            let renames: BTreeMap<String, crate::formula::LinTerm> = scope
                .iter()
                .map(|(from, to)| (from.clone(), crate::formula::LinTerm::var(to.clone())))
                .collect();
            Expr::Assert {
                cond: cond.subst_all(&renames),
                body: Box::new(rename_expr(body, scope, seen, fresh)),
                pos: *pos,
            }
        }
        Expr::AliasAddPtr {
            var: x,
            base,
            offset,
            auto,
            body,
            pos,
        } => Expr::AliasAddPtr {
            var: var(x),
            base: var(base),
            offset: rename_atom(offset, scope),
            auto: *auto,
            body: Box::new(rename_expr(body, scope, seen, fresh)),
            pos: *pos,
        },
        Expr::AliasDeref {
            var: x,
            base,
            auto,
            body,
            pos,
        } => Expr::AliasDeref {
            var: var(x),
            base: var(base),
            auto: *auto,
            body: Box::new(rename_expr(body, scope, seen, fresh)),
            pos: *pos,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    #[test]
    fn shadowing_binder_is_renamed() {
        let p = parse("{ let x = 1 in let x = 2 in x }").unwrap();
        let mut fresh = FreshGen::for_program(&p);
        let q = uniquify(&p, &mut fresh);
        match &q.main {
            Expr::Let { var, body, .. } => {
                assert_eq!(var, "x");
                match body.as_ref() {
                    Expr::Let { var: inner, body, .. } => {
                        assert_eq!(inner, "$0");
                        match body.as_ref() {
                            Expr::Value(Atom::Var(v), _) => assert_eq!(v, "$0"),
                            other => panic!("{other:?}"),
                        }
                    }
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unshadowed_program_is_unchanged() {
        let p = parse("{ let x = 1 in let y = x in y }").unwrap();
        let mut fresh = FreshGen::for_program(&p);
        let q = uniquify(&p, &mut fresh);
        assert!(p.structurally_eq(&q));
    }
}

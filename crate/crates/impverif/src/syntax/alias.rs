//! Automatic alias insertion.
//!
//! Every `let x = y + z in e` becomes
//! `let x = y + z in let w = { e } in alias(x = y + z); w`
//! so that the ownership given to `x` can be merged back into `y` once the
//! continuation is done. The inserted alias carries an `auto` marker; running
//! the pass again leaves marked wrappers alone, so it is idempotent.

use super::ast::*;
use crate::simple_types::{SimpleType, SimpleTypeTable};

pub fn insert_aliases(
    p: &Program,
    table: &mut SimpleTypeTable,
    fresh: &mut FreshGen,
) -> Program {
    let mut out = p.clone();
    for def in out.defs.values_mut() {
        def.body = rewrite(&def.body, table, fresh);
    }
    out.main = rewrite(&p.main, table, fresh);
    out
}

fn value_type(e: &Expr, table: &SimpleTypeTable) -> SimpleType {
    // The simple type of the value an expression evaluates to. All leaves
    // agree after unification, so the first one decides.
    match e {
        Expr::Value(Atom::Int(_), _) => SimpleType::Int,
        Expr::Value(Atom::Var(x), _) => {
            table.var(x).cloned().unwrap_or(SimpleType::Int)
        }
        Expr::Let { body, .. }
        | Expr::Assign { body, .. }
        | Expr::Assert { body, .. }
        | Expr::AliasAddPtr { body, .. }
        | Expr::AliasDeref { body, .. } => value_type(body, table),
        Expr::If { then_branch, .. } | Expr::IfNp { then_branch, .. } => {
            value_type(then_branch, table)
        }
    }
}

fn rewrite(e: &Expr, table: &mut SimpleTypeTable, fresh: &mut FreshGen) -> Expr {
    match e {
        Expr::Value(_, _) => e.clone(),
        Expr::Let { var, rhs, body, pos } => {
            let rhs = match rhs {
                Rhs::Expr(inner) => Rhs::Expr(Box::new(rewrite(inner, table, fresh))),
                other => other.clone(),
            };
            if let Rhs::AddPtr(base, offset) = &rhs {
                if already_wrapped(body, var) {
                    // Re-run: keep the existing wrapper, rewrite inside it.
                    return Expr::Let {
                        var: var.clone(),
                        rhs: rhs.clone(),
                        body: Box::new(rewrite(body, table, fresh)),
                        pos: *pos,
                    };
                }
                let inner = rewrite(body, table, fresh);
                let w = fresh.fresh();
                table.vars.insert(w.clone(), value_type(&inner, table));
                let alias = Expr::AliasAddPtr {
                    var: var.clone(),
                    base: base.clone(),
                    offset: offset.clone(),
                    auto: true,
                    body: Box::new(Expr::Value(Atom::Var(w.clone()), *pos)),
                    pos: *pos,
                };
                let wrapper = Expr::Let {
                    var: w,
                    rhs: Rhs::Expr(Box::new(inner)),
                    body: Box::new(alias),
                    pos: *pos,
                };
                return Expr::Let {
                    var: var.clone(),
                    rhs,
                    body: Box::new(wrapper),
                    pos: *pos,
                };
            }
            Expr::Let {
                var: var.clone(),
                rhs,
                body: Box::new(rewrite(body, table, fresh)),
                pos: *pos,
            }
        }
        Expr::If {
            cond,
            then_branch,
            else_branch,
            pos,
        } => Expr::If {
            cond: cond.clone(),
            then_branch: Box::new(rewrite(then_branch, table, fresh)),
            else_branch: Box::new(rewrite(else_branch, table, fresh)),
            pos: *pos,
        },
        Expr::IfNp {
            var,
            then_branch,
            else_branch,
            pos,
        } => Expr::IfNp {
            var: var.clone(),
            then_branch: Box::new(rewrite(then_branch, table, fresh)),
            else_branch: Box::new(rewrite(else_branch, table, fresh)),
            pos: *pos,
        },
        Expr::Assign { var, rhs, body, pos } => Expr::Assign {
            var: var.clone(),
            rhs: rhs.clone(),
            body: Box::new(rewrite(body, table, fresh)),
            pos: *pos,
        },
        Expr::Assert { cond, body, pos } => Expr::Assert {
            cond: cond.clone(),
            body: Box::new(rewrite(body, table, fresh)),
            pos: *pos,
        },
        Expr::AliasAddPtr {
            var,
            base,
            offset,
            auto,
            body,
            pos,
        } => Expr::AliasAddPtr {
            var: var.clone(),
            base: base.clone(),
            offset: offset.clone(),
            auto: *auto,
            body: Box::new(rewrite(body, table, fresh)),
            pos: *pos,
        },
        Expr::AliasDeref {
            var,
            base,
            auto,
            body,
            pos,
        } => Expr::AliasDeref {
            var: var.clone(),
            base: base.clone(),
            auto: *auto,
            body: Box::new(rewrite(body, table, fresh)),
            pos: *pos,
        },
    }
}

/// Recognizes the wrapper this pass inserts for the binder `x`.
fn already_wrapped(body: &Expr, x: &str) -> bool {
    match body {
        Expr::Let {
            rhs: Rhs::Expr(_),
            body: after,
            ..
        } => matches!(
            after.as_ref(),
            Expr::AliasAddPtr { var, auto: true, .. } if var == x
        ),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse;
    use crate::syntax::uniquify::uniquify;

    fn to_core(src: &str) -> (Program, SimpleTypeTable, FreshGen) {
        let p = parse(src).unwrap();
        let mut fresh = FreshGen::for_program(&p);
        let p = uniquify(&p, &mut fresh);
        let mut table = crate::simple_types::infer_simple(&p).unwrap();
        let core = crate::syntax::desugar::desugar(&p, &mut table, &mut fresh).unwrap();
        (core, table, fresh)
    }

    fn count_auto_aliases(e: &Expr) -> usize {
        match e {
            Expr::Value(_, _) => 0,
            Expr::Let { rhs, body, .. } => {
                let inner = match rhs {
                    Rhs::Expr(i) => count_auto_aliases(i),
                    _ => 0,
                };
                inner + count_auto_aliases(body)
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
            } => count_auto_aliases(then_branch) + count_auto_aliases(else_branch),
            Expr::Assign { body, .. } | Expr::Assert { body, .. } => count_auto_aliases(body),
            Expr::AliasAddPtr { auto, body, .. } => {
                usize::from(*auto) + count_auto_aliases(body)
            }
            Expr::AliasDeref { body, .. } => count_auto_aliases(body),
        }
    }

    #[test]
    fn addptr_let_gets_wrapped() {
        let (core, mut table, mut fresh) = to_core("{ let p = alloc 4 in let q = p + 1 in 0 }");
        let out = insert_aliases(&core, &mut table, &mut fresh);
        assert_eq!(count_auto_aliases(&out.main), 1);
        assert!(out.is_core());
    }

    #[test]
    fn program_without_addptr_is_unchanged() {
        let (core, mut table, mut fresh) = to_core("{ let x = 1 in let y = x + 2 in y }");
        let out = insert_aliases(&core, &mut table, &mut fresh);
        assert!(core.structurally_eq(&out));
    }

    #[test]
    fn second_run_is_a_no_op() {
        let (core, mut table, mut fresh) =
            to_core("{ let p = alloc 4 in let q = p + 1 in let r = q + 1 in 0 }");
        let once = insert_aliases(&core, &mut table, &mut fresh);
        let twice = insert_aliases(&once, &mut table, &mut fresh);
        assert!(once.structurally_eq(&twice));
        assert_eq!(count_auto_aliases(&twice.main), 2);
    }
}

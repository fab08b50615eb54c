//! Pretty-printer. `parse(pretty(p))` is structurally identical to `p`
//! (positions aside) for any program this module prints.

use super::ast::*;
use std::fmt::Write;

pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    for name in &p.def_order {
        let def = &p.defs[name];
        pretty_def(def, &mut out);
        out.push('\n');
    }
    out.push_str("{\n");
    pretty_expr(&p.main, 1, &mut out);
    out.push_str("\n}\n");
    out
}

fn pretty_def(def: &Def, out: &mut String) {
    write!(out, "{}({})", def.name, def.params.join(", ")).unwrap();
    if let Some(annot) = &def.simple_annot {
        out.push_str("\n[ <");
        let bind = |bs: &[(String, AnnotType)]| {
            bs.iter()
                .map(|(x, t)| format!("{x}: {t}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.push_str(&bind(&annot.pre));
        out.push_str("> ->\n  <");
        out.push_str(&bind(&annot.post));
        write!(out, " | {}> ]", annot.ret).unwrap();
    }
    out.push_str("\n{\n");
    pretty_expr(&def.body, 1, out);
    out.push_str("\n}\n");
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn pretty_rhs(rhs: &Rhs, depth: usize, out: &mut String) {
    match rhs {
        Rhs::Atom(a) => write!(out, "{a}").unwrap(),
        Rhs::Nondet => out.push('_'),
        Rhs::Neg(a) => write!(out, "-{a}").unwrap(),
        Rhs::BinOp(op, a, b) => write!(out, "{a} {} {b}", op.symbol()).unwrap(),
        Rhs::AddPtr(y, z) => write!(out, "{y} + {z}").unwrap(),
        Rhs::Deref(y) => write!(out, "*{y}").unwrap(),
        Rhs::MkArray(n) => write!(out, "alloc {n}").unwrap(),
        Rhs::Call(f, args) => {
            let args = args
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            write!(out, "{f}({args})").unwrap();
        }
        Rhs::Expr(inner) => {
            out.push_str("{\n");
            pretty_expr(inner, depth + 1, out);
            out.push('\n');
            indent(depth, out);
            out.push('}');
        }
    }
}

fn cmp_symbol(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "=",
        CmpOp::Ne => "!=",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

fn pretty_expr(e: &Expr, depth: usize, out: &mut String) {
    match e {
        Expr::Value(a, _) => {
            indent(depth, out);
            write!(out, "{a}").unwrap();
        }
        Expr::Let { var, rhs, body, .. } => {
            indent(depth, out);
            write!(out, "let {var} = ").unwrap();
            pretty_rhs(rhs, depth, out);
            out.push_str(" in\n");
            pretty_expr(body, depth, out);
        }
        Expr::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            indent(depth, out);
            write!(
                out,
                "if {} {} {} then {{\n",
                cond.lhs,
                cmp_symbol(cond.op),
                cond.rhs
            )
            .unwrap();
            pretty_expr(then_branch, depth + 1, out);
            out.push('\n');
            indent(depth, out);
            out.push_str("} else {\n");
            pretty_expr(else_branch, depth + 1, out);
            out.push('\n');
            indent(depth, out);
            out.push('}');
        }
        Expr::IfNp {
            var,
            then_branch,
            else_branch,
            ..
        } => {
            indent(depth, out);
            writeln!(out, "ifnp {var} then {{").unwrap();
            pretty_expr(then_branch, depth + 1, out);
            out.push('\n');
            indent(depth, out);
            out.push_str("} else {\n");
            pretty_expr(else_branch, depth + 1, out);
            out.push('\n');
            indent(depth, out);
            out.push('}');
        }
        Expr::Assign { var, rhs, body, .. } => {
            indent(depth, out);
            writeln!(out, "{var} := {rhs};").unwrap();
            pretty_expr(body, depth, out);
        }
        Expr::Assert { cond, body, .. } => {
            indent(depth, out);
            writeln!(out, "assert({cond});").unwrap();
            pretty_expr(body, depth, out);
        }
        Expr::AliasAddPtr {
            var,
            base,
            offset,
            body,
            ..
        } => {
            indent(depth, out);
            writeln!(out, "alias({var} = {base} + {offset});").unwrap();
            pretty_expr(body, depth, out);
        }
        Expr::AliasDeref {
            var, base, body, ..
        } => {
            indent(depth, out);
            writeln!(out, "alias({var} = *{base});").unwrap();
            pretty_expr(body, depth, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn minimal_roundtrip() {
        let p = parse("{ 0 }").unwrap();
        assert_eq!(pretty(&p), "{\n  0\n}\n");
        let again = parse(&pretty(&p)).unwrap();
        assert!(p.structurally_eq(&again));
    }

    #[test]
    fn core_ifnp_prints_keyword_form() {
        let e = Expr::IfNp {
            var: "t".into(),
            then_branch: Box::new(Expr::Value(Atom::Int(BigInt::from(1)), Pos::default())),
            else_branch: Box::new(Expr::Value(Atom::Int(BigInt::from(2)), Pos::default())),
            pos: Pos::default(),
        };
        let mut s = String::new();
        pretty_expr(&e, 0, &mut s);
        assert!(s.starts_with("ifnp t then {"), "{s}");
    }

    #[test]
    fn roundtrip_with_defs_and_sugar() {
        let src = r#"
init(n, p)
[ <n: int, p: int ref> -> <n: int, p: int ref | int> ]
{
  if n <= 0 then {
    1
  } else {
    p := 0; let q = p + 1 in let m = n - 1 in
    let d = init(m, q) in 0
  }
}

{
  let p = alloc 10 in let m = 10 in
  let d1 = init(m, p) in 0
}
"#;
        let p = parse(src).unwrap();
        let again = parse(&pretty(&p)).unwrap();
        assert!(p.structurally_eq(&again));
    }
}

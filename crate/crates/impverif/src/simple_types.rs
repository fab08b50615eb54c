//! Unification-based simple type inference.
//!
//! Every binder gets `int` or a `ref`-nesting of `int`; `+`/`-` on a
//! pointer-typed left operand is recognized here so that desugaring can
//! rewrite it to pointer addition. Bracket annotations on definitions are
//! unified against the inferred signature and any disagreement is an error.

use crate::syntax::ast::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// A ground simple type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleType {
    Int,
    Ref(Box<SimpleType>),
}

impl SimpleType {
    pub fn is_ref(&self) -> bool {
        matches!(self, SimpleType::Ref(_))
    }

    /// Pointer nesting depth: `int` is 0, `int ref` is 1, ...
    pub fn ref_depth(&self) -> usize {
        match self {
            SimpleType::Int => 0,
            SimpleType::Ref(t) => 1 + t.ref_depth(),
        }
    }
}

impl std::fmt::Display for SimpleType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimpleType::Int => write!(f, "int"),
            SimpleType::Ref(t) => write!(f, "{t} ref"),
        }
    }
}

/// Ground function signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunSig {
    pub params: Vec<SimpleType>,
    pub ret: SimpleType,
}

/// Result of inference: per-binder and per-function ground types.
///
/// Binders must be unique (see [`crate::syntax::uniquify`]); the table is
/// extended by desugaring for the fresh temporaries it introduces.
#[derive(Debug, Clone, Default)]
pub struct SimpleTypeTable {
    pub vars: BTreeMap<String, SimpleType>,
    pub funs: BTreeMap<String, FunSig>,
}

impl SimpleTypeTable {
    pub fn var(&self, name: &str) -> Option<&SimpleType> {
        self.vars.get(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeErrorKind {
    OccursCheck,
    Clash,
    AnnotationMismatch,
    UnboundVariable,
    UndefinedFunction,
    ArityMismatch,
}

#[derive(Debug, Error)]
#[error("type error at {pos}: {msg}")]
pub struct TypeError {
    pub pos: Pos,
    pub kind: TypeErrorKind,
    pub msg: String,
}

/// Infers simple types for a surface program with unique binders.
pub fn infer_simple(p: &Program) -> Result<SimpleTypeTable, TypeError> {
    let mut inf = Inferencer::default();
    inf.run(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Unknown,
    Link(u32),
    Int,
    Ref(u32),
}

#[derive(Default)]
struct Inferencer {
    nodes: Vec<Node>,
    vars: BTreeMap<String, u32>,
    funs: BTreeMap<String, (Vec<u32>, u32)>,
    /// Deferred `a (+|-) b = res` constraints whose reading depends on
    /// whether the left operand turns out to be a pointer.
    addsubs: Vec<(u32, u32, u32, Pos)>,
}

impl Inferencer {
    fn fresh(&mut self) -> u32 {
        self.nodes.push(Node::Unknown);
        (self.nodes.len() - 1) as u32
    }

    fn find(&mut self, mut id: u32) -> u32 {
        while let Node::Link(next) = self.nodes[id as usize] {
            id = next;
        }
        id
    }

    fn occurs(&mut self, var: u32, ty: u32) -> bool {
        let mut cur = self.find(ty);
        loop {
            if cur == var {
                return true;
            }
            match self.nodes[cur as usize] {
                Node::Ref(inner) => cur = self.find(inner),
                _ => return false,
            }
        }
    }

    fn unify(&mut self, a: u32, b: u32, pos: Pos, annot: bool) -> Result<(), TypeError> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return Ok(());
        }
        match (self.nodes[ra as usize], self.nodes[rb as usize]) {
            (Node::Unknown, _) => {
                if self.occurs(ra, rb) {
                    return Err(TypeError {
                        pos,
                        kind: TypeErrorKind::OccursCheck,
                        msg: "occurs check failed (infinite type)".into(),
                    });
                }
                self.nodes[ra as usize] = Node::Link(rb);
                Ok(())
            }
            (_, Node::Unknown) => self.unify(rb, ra, pos, annot),
            (Node::Int, Node::Int) => Ok(()),
            (Node::Ref(ea), Node::Ref(eb)) => {
                // Union first so recursive unification terminates.
                self.nodes[ra as usize] = Node::Link(rb);
                self.unify(ea, eb, pos, annot)
            }
            (na, nb) => {
                let (kind, what) = if annot {
                    (TypeErrorKind::AnnotationMismatch, "annotation mismatch")
                } else {
                    (TypeErrorKind::Clash, "type mismatch")
                };
                let show = |me: &mut Self, n: Node, root: u32| match n {
                    Node::Int => "int".to_string(),
                    Node::Ref(_) => me.zonk(root).to_string(),
                    _ => "_".to_string(),
                };
                let sa = show(self, na, ra);
                let sb = show(self, nb, rb);
                Err(TypeError {
                    pos,
                    kind,
                    msg: format!("{what}: {sa} vs {sb}"),
                })
            }
        }
    }

    fn mk_int(&mut self) -> u32 {
        self.nodes.push(Node::Int);
        (self.nodes.len() - 1) as u32
    }

    fn mk_ref(&mut self, elem: u32) -> u32 {
        self.nodes.push(Node::Ref(elem));
        (self.nodes.len() - 1) as u32
    }

    fn from_annot(&mut self, t: &AnnotType) -> u32 {
        match t {
            AnnotType::Int => self.mk_int(),
            AnnotType::Ref(inner) => {
                let e = self.from_annot(inner);
                self.mk_ref(e)
            }
        }
    }

    /// Unbound type variables default to int.
    fn zonk(&mut self, id: u32) -> SimpleType {
        let root = self.find(id);
        match self.nodes[root as usize] {
            Node::Int | Node::Unknown => SimpleType::Int,
            Node::Ref(e) => SimpleType::Ref(Box::new(self.zonk(e))),
            Node::Link(_) => unreachable!(),
        }
    }

    fn lookup(&self, x: &str, pos: Pos) -> Result<u32, TypeError> {
        self.vars.get(x).copied().ok_or_else(|| TypeError {
            pos,
            kind: TypeErrorKind::UnboundVariable,
            msg: format!("unbound variable `{x}`"),
        })
    }

    fn atom(&mut self, a: &Atom, pos: Pos) -> Result<u32, TypeError> {
        match a {
            Atom::Int(_) => Ok(self.mk_int()),
            Atom::Var(x) => self.lookup(x, pos),
        }
    }

    fn run(&mut self, p: &Program) -> Result<SimpleTypeTable, TypeError> {
        check_calls_defined(p)?;

        // Declare all functions first so recursion and mutual calls unify
        // against the same signature nodes.
        for (name, def) in &p.defs {
            let params: Vec<u32> = def.params.iter().map(|_| self.fresh()).collect();
            let ret = self.fresh();
            self.funs.insert(name.clone(), (params, ret));
        }

        for def in p.defs.values() {
            let (params, ret) = self.funs[&def.name].clone();
            for (x, tv) in def.params.iter().zip(&params) {
                self.vars.insert(x.clone(), *tv);
            }
            let body_ty = self.expr(&def.body)?;
            self.unify(body_ty, ret, def.pos, false)?;
        }

        let main_ty = self.expr(&p.main)?;
        let _ = main_ty;

        // Annotations come after the body constraints so that a conflict is
        // attributed to the annotation, and before add/sub resolution so that
        // an annotated pointer parameter turns `p + 1` into pointer addition.
        for def in p.defs.values() {
            if let Some(annot) = &def.simple_annot {
                let (params, ret) = self.funs[&def.name].clone();
                self.check_annot(def, annot, &params, ret)?;
            }
        }

        self.resolve_addsubs()?;

        let mut table = SimpleTypeTable::default();
        for (x, tv) in self.vars.clone() {
            let ty = self.zonk(tv);
            table.vars.insert(x, ty);
        }
        for (f, (params, ret)) in self.funs.clone() {
            let sig = FunSig {
                params: params.iter().map(|tv| self.zonk(*tv)).collect(),
                ret: self.zonk(ret),
            };
            table.funs.insert(f, sig);
        }
        Ok(table)
    }

    fn check_annot(
        &mut self,
        def: &Def,
        annot: &SimpleAnnot,
        params: &[u32],
        ret: u32,
    ) -> Result<(), TypeError> {
        let err = |msg: String| TypeError {
            pos: def.pos,
            kind: TypeErrorKind::AnnotationMismatch,
            msg,
        };
        if annot.pre.len() != def.params.len() || annot.post.len() != def.params.len() {
            return Err(err(format!(
                "annotation on `{}` lists {} parameters, definition has {}",
                def.name,
                annot.pre.len(),
                def.params.len()
            )));
        }
        for (k, (x, _)) in annot.pre.iter().enumerate() {
            if *x != def.params[k] {
                return Err(err(format!(
                    "annotation on `{}` names parameter `{x}`, definition has `{}`",
                    def.name, def.params[k]
                )));
            }
        }
        for ((x, pre), (y, post)) in annot.pre.iter().zip(&annot.post) {
            if x != y || pre != post {
                return Err(err(format!(
                    "annotation on `{}`: simple types cannot change across a call \
                     (parameter `{x}`)",
                    def.name
                )));
            }
        }
        for ((_, ty), tv) in annot.pre.iter().zip(params) {
            let annot_tv = self.from_annot(ty);
            self.unify(*tv, annot_tv, def.pos, true)?;
        }
        let ret_tv = self.from_annot(&annot.ret);
        self.unify(ret, ret_tv, def.pos, true)?;
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<u32, TypeError> {
        match e {
            Expr::Value(a, pos) => self.atom(a, *pos),
            Expr::Let { var, rhs, body, pos } => {
                let rhs_ty = self.rhs(rhs, *pos)?;
                self.vars.insert(var.clone(), rhs_ty);
                self.expr(body)
            }
            Expr::If {
                cond,
                then_branch,
                else_branch,
                pos,
            } => {
                let lt = self.atom(&cond.lhs, *pos)?;
                let rt = self.atom(&cond.rhs, *pos)?;
                let int1 = self.mk_int();
                let int2 = self.mk_int();
                self.unify(lt, int1, *pos, false)?;
                self.unify(rt, int2, *pos, false)?;
                let t1 = self.expr(then_branch)?;
                let t2 = self.expr(else_branch)?;
                self.unify(t1, t2, *pos, false)?;
                Ok(t1)
            }
            Expr::IfNp {
                var,
                then_branch,
                else_branch,
                pos,
            } => {
                let vt = self.lookup(var, *pos)?;
                let int = self.mk_int();
                self.unify(vt, int, *pos, false)?;
                let t1 = self.expr(then_branch)?;
                let t2 = self.expr(else_branch)?;
                self.unify(t1, t2, *pos, false)?;
                Ok(t1)
            }
            Expr::Assign { var, rhs, body, pos } => {
                let vt = self.lookup(var, *pos)?;
                let elem = self.fresh();
                let rf = self.mk_ref(elem);
                self.unify(vt, rf, *pos, false)?;
                let rt = self.atom(rhs, *pos)?;
                self.unify(rt, elem, *pos, false)?;
                self.expr(body)
            }
            Expr::Assert { cond, body, pos } => {
                for x in cond.free_vars() {
                    let vt = self.lookup(&x, *pos)?;
                    let int = self.mk_int();
                    self.unify(vt, int, *pos, false)?;
                }
                self.expr(body)
            }
            Expr::AliasAddPtr {
                var,
                base,
                offset,
                body,
                pos,
                ..
            } => {
                let vt = self.lookup(var, *pos)?;
                let bt = self.lookup(base, *pos)?;
                let elem = self.fresh();
                let rf = self.mk_ref(elem);
                self.unify(vt, bt, *pos, false)?;
                self.unify(vt, rf, *pos, false)?;
                let ot = self.atom(offset, *pos)?;
                let int = self.mk_int();
                self.unify(ot, int, *pos, false)?;
                self.expr(body)
            }
            Expr::AliasDeref {
                var,
                base,
                body,
                pos,
                ..
            } => {
                let vt = self.lookup(var, *pos)?;
                let bt = self.lookup(base, *pos)?;
                let rf = self.mk_ref(vt);
                self.unify(bt, rf, *pos, false)?;
                self.expr(body)
            }
        }
    }

    fn rhs(&mut self, rhs: &Rhs, pos: Pos) -> Result<u32, TypeError> {
        match rhs {
            Rhs::Atom(a) => self.atom(a, pos),
            Rhs::Nondet => Ok(self.mk_int()),
            Rhs::Neg(a) => {
                let at = self.atom(a, pos)?;
                let int = self.mk_int();
                self.unify(at, int, pos, false)?;
                Ok(int)
            }
            Rhs::BinOp(op, a, b) => {
                let at = self.atom(a, pos)?;
                let bt = self.atom(b, pos)?;
                match op {
                    Op::Mul | Op::Div => {
                        let int1 = self.mk_int();
                        let int2 = self.mk_int();
                        self.unify(at, int1, pos, false)?;
                        self.unify(bt, int2, pos, false)?;
                        Ok(self.mk_int())
                    }
                    Op::Add | Op::Sub => {
                        // Could be integer arithmetic or pointer arithmetic;
                        // decided after the base pass.
                        let res = self.fresh();
                        self.addsubs.push((at, bt, res, pos));
                        Ok(res)
                    }
                }
            }
            Rhs::AddPtr(y, z) => {
                let yt = self.lookup(y, pos)?;
                let elem = self.fresh();
                let rf = self.mk_ref(elem);
                self.unify(yt, rf, pos, false)?;
                let zt = self.atom(z, pos)?;
                let int = self.mk_int();
                self.unify(zt, int, pos, false)?;
                Ok(yt)
            }
            Rhs::Deref(y) => {
                let yt = self.lookup(y, pos)?;
                let elem = self.fresh();
                let rf = self.mk_ref(elem);
                self.unify(yt, rf, pos, false)?;
                Ok(elem)
            }
            Rhs::MkArray(_) => {
                let elem = self.fresh();
                Ok(self.mk_ref(elem))
            }
            Rhs::Expr(inner) => self.expr(inner),
            Rhs::Call(f, args) => {
                let (params, ret) = self.funs.get(f).cloned().ok_or_else(|| TypeError {
                    pos,
                    kind: TypeErrorKind::UndefinedFunction,
                    msg: format!("call to undefined function `{f}`"),
                })?;
                if params.len() != args.len() {
                    return Err(TypeError {
                        pos,
                        kind: TypeErrorKind::ArityMismatch,
                        msg: format!(
                            "`{f}` takes {} arguments, {} given",
                            params.len(),
                            args.len()
                        ),
                    });
                }
                for (arg, param) in args.iter().zip(&params) {
                    let at = self.atom(arg, pos)?;
                    self.unify(at, *param, pos, false)?;
                }
                Ok(ret)
            }
        }
    }

    /// Iterates the deferred `+`/`-` constraints: a pointer-typed left
    /// operand makes the node pointer arithmetic, anything else is integer
    /// arithmetic. Resolving one constraint can ground another, so loop to
    /// a fixpoint and default the rest to int.
    fn resolve_addsubs(&mut self) -> Result<(), TypeError> {
        let mut pending = std::mem::take(&mut self.addsubs);
        loop {
            let mut progressed = false;
            let mut next = Vec::new();
            for (at, bt, res, pos) in pending {
                let ra = self.find(at);
                let rb = self.find(bt);
                match (self.nodes[ra as usize], self.nodes[rb as usize]) {
                    (Node::Ref(_), _) => {
                        // pointer + int -> pointer of the same type
                        let int = self.mk_int();
                        self.unify(bt, int, pos, false)?;
                        self.unify(res, at, pos, false)?;
                        progressed = true;
                    }
                    (Node::Int, _) | (_, Node::Int) => {
                        let int1 = self.mk_int();
                        let int2 = self.mk_int();
                        let int3 = self.mk_int();
                        self.unify(at, int1, pos, false)?;
                        self.unify(bt, int2, pos, false)?;
                        self.unify(res, int3, pos, false)?;
                        progressed = true;
                    }
                    (_, Node::Ref(_)) => {
                        return Err(TypeError {
                            pos,
                            kind: TypeErrorKind::Clash,
                            msg: "pointer may not appear as the right operand of `+`/`-`"
                                .into(),
                        });
                    }
                    _ => next.push((at, bt, res, pos)),
                }
            }
            if next.is_empty() {
                return Ok(());
            }
            if !progressed {
                // Nothing else can decide these: default to integers.
                for (at, bt, res, pos) in next {
                    let int1 = self.mk_int();
                    let int2 = self.mk_int();
                    let int3 = self.mk_int();
                    self.unify(at, int1, pos, false)?;
                    self.unify(bt, int2, pos, false)?;
                    self.unify(res, int3, pos, false)?;
                }
                return Ok(());
            }
            pending = next;
        }
    }
}

fn check_calls_defined(p: &Program) -> Result<(), TypeError> {
    fn walk(e: &Expr, p: &Program) -> Result<(), TypeError> {
        match e {
            Expr::Value(_, _) => Ok(()),
            Expr::Let { rhs, body, pos, .. } => {
                match rhs {
                    Rhs::Call(f, _) => {
                        if !p.defs.contains_key(f) {
                            return Err(TypeError {
                                pos: *pos,
                                kind: TypeErrorKind::UndefinedFunction,
                                msg: format!("call to undefined function `{f}`"),
                            });
                        }
                    }
                    Rhs::Expr(inner) => walk(inner, p)?,
                    _ => {}
                }
                walk(body, p)
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
                walk(then_branch, p)?;
                walk(else_branch, p)
            }
            Expr::Assign { body, .. }
            | Expr::Assert { body, .. }
            | Expr::AliasAddPtr { body, .. }
            | Expr::AliasDeref { body, .. } => walk(body, p),
        }
    }
    for def in p.defs.values() {
        walk(&def.body, p)?;
    }
    walk(&p.main, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse;

    fn infer(src: &str) -> Result<SimpleTypeTable, TypeError> {
        let p = parse(src).unwrap();
        let mut fresh = FreshGen::for_program(&p);
        let p = crate::syntax::uniquify::uniquify(&p, &mut fresh);
        infer_simple(&p)
    }

    #[test]
    fn init_signature_matches_annotation() {
        let src = r#"
init(n, p) [ <n: int, p: int ref> -> <n: int, p: int ref | int> ]
{
  if n <= 0 then { 1 } else {
    p := 0; let q = p + 1 in let m = n - 1 in let d = init(m, q) in 0
  }
}
{ let p = alloc 10 in let m = 10 in let d = init(m, p) in 0 }
"#;
        let table = infer(src).unwrap();
        let sig = &table.funs["init"];
        assert_eq!(sig.params[0], SimpleType::Int);
        assert_eq!(sig.params[1], SimpleType::Ref(Box::new(SimpleType::Int)));
        assert_eq!(sig.ret, SimpleType::Int);
        assert_eq!(table.vars["q"], SimpleType::Ref(Box::new(SimpleType::Int)));
    }

    #[test]
    fn deref_of_int_is_a_clash() {
        let err = infer("{ let x = 1 in let y = *x in 0 }").unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::Clash);
    }

    #[test]
    fn matrix_pattern_infers_nested_ref() {
        let src = "{ let p = alloc 4 in let q = *p in q := 1; 0 }";
        let table = infer(src).unwrap();
        assert_eq!(
            table.vars["p"],
            SimpleType::Ref(Box::new(SimpleType::Ref(Box::new(SimpleType::Int))))
        );
    }

    #[test]
    fn annotation_contradiction_is_reported() {
        let src =
            "f(x) [ <x: int> -> <x: int | int> ] { let y = *x in 0 } { let a = alloc 1 in let d = f(a) in 0 }";
        let err = infer(src).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::AnnotationMismatch);
    }

    #[test]
    fn annotation_alone_makes_plus_a_pointer_addition() {
        // No body evidence that p is a pointer; only the annotation says so.
        let src = "f(p) [ <p: int ref> -> <p: int ref | int> ] { let q = p + 1 in 0 } { 0 }";
        let table = infer(src).unwrap();
        assert_eq!(table.vars["q"], SimpleType::Ref(Box::new(SimpleType::Int)));
    }

    #[test]
    fn unbound_variable_is_reported() {
        let err = infer("{ let x = y in 0 }").unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::UnboundVariable);
    }

    #[test]
    fn determinism_same_input_same_table() {
        let src = "{ let p = alloc 3 in let x = *p in let q = p + 1 in 0 }";
        let a = infer(src).unwrap();
        let b = infer(src).unwrap();
        assert_eq!(a.vars, b.vars);
    }
}

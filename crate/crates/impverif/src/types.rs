//! Refinement/ownership types and the algebra the inference phases and the
//! tests are built on: type addition, strengthening, typed equality,
//! emptiness, context formulas, subtyping and well-formedness obligations.
//!
//! Obligations are plain data (scope, hypothesis, conclusion); discharging
//! them is the job of [`crate::solver_io`].

use crate::formula::{Cmp, Formula, LinTerm};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Canonical value binder of integer refinements.
pub const NU: &str = "$v";
/// Canonical index binder of reference types.
pub const IDX: &str = "$i";

/// One interval entry of an ownership function: `[lo, hi] -> own`.
/// An entry whose interval is empty under a valuation contributes nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnEntry {
    pub lo: LinTerm,
    pub hi: LinTerm,
    pub own: BigRational,
}

/// An ownership function as a finite list of affine-bounded intervals.
/// The value at `i` is the sum of `own` over the entries containing `i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OwnershipFn {
    pub entries: Vec<OwnEntry>,
}

impl OwnershipFn {
    pub fn empty() -> Self {
        OwnershipFn::default()
    }

    pub fn interval(lo: LinTerm, hi: LinTerm, own: BigRational) -> Self {
        OwnershipFn {
            entries: vec![OwnEntry { lo, hi, own }],
        }
    }

    /// Pointwise sum, by concatenating entry lists.
    pub fn add(&self, other: &OwnershipFn) -> OwnershipFn {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        OwnershipFn { entries }
    }

    /// Entries with a non-zero ownership value.
    pub fn positive_entries(&self) -> impl Iterator<Item = &OwnEntry> {
        self.entries.iter().filter(|e| !e.own.is_zero())
    }

    /// Evaluates the function at index `i` under an integer valuation.
    pub fn eval(
        &self,
        i: &BigInt,
        env: &dyn Fn(&str) -> Option<BigInt>,
    ) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for e in &self.entries {
            let lo = e.lo.eval(env)?;
            let hi = e.hi.eval(env)?;
            if lo <= *i && *i <= hi {
                acc += &e.own;
            }
        }
        Some(acc)
    }

    /// Shifts the index domain: `shifted(i) = self(i + delta)`.
    pub fn shift(&self, delta: &LinTerm) -> OwnershipFn {
        OwnershipFn {
            entries: self
                .entries
                .iter()
                .map(|e| OwnEntry {
                    lo: e.lo.sub(delta),
                    hi: e.hi.sub(delta),
                    own: e.own.clone(),
                })
                .collect(),
        }
    }

    fn subst(&self, x: &str, t: &LinTerm) -> OwnershipFn {
        OwnershipFn {
            entries: self
                .entries
                .iter()
                .map(|e| OwnEntry {
                    lo: e.lo.subst(x, t),
                    hi: e.hi.subst(x, t),
                    own: e.own.clone(),
                })
                .collect(),
        }
    }

    fn free_vars(&self, out: &mut BTreeSet<String>) {
        for e in &self.entries {
            e.lo.free_vars(out);
            e.hi.free_vars(out);
        }
    }
}

impl fmt::Display for OwnershipFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, e) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[{}, {}] -> {}", e.lo, e.hi, e.own)?;
        }
        write!(f, "}}")
    }
}

/// A refinement/ownership type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    RefinedInt {
        binder: String,
        pred: Formula,
    },
    IndexedRef {
        binder: String,
        elem: Box<Type>,
        own: OwnershipFn,
    },
}

impl Type {
    pub fn refined_int(pred: Formula) -> Type {
        Type::RefinedInt {
            binder: NU.to_string(),
            pred,
        }
    }

    /// `{$v: int | true}`.
    pub fn int_top() -> Type {
        Type::refined_int(Formula::True)
    }

    pub fn indexed_ref(elem: Type, own: OwnershipFn) -> Type {
        Type::IndexedRef {
            binder: IDX.to_string(),
            elem: Box::new(elem),
            own,
        }
    }

    pub fn is_ref(&self) -> bool {
        matches!(self, Type::IndexedRef { .. })
    }

    pub fn shape_eq(&self, other: &Type) -> bool {
        match (self, other) {
            (Type::RefinedInt { .. }, Type::RefinedInt { .. }) => true,
            (
                Type::IndexedRef { elem: e1, .. },
                Type::IndexedRef { elem: e2, .. },
            ) => e1.shape_eq(e2),
            _ => false,
        }
    }

    /// The `Empty`-shaped type of the same shape: `true` predicates and no
    /// ownership anywhere.
    pub fn neutral(&self) -> Type {
        match self {
            Type::RefinedInt { binder, .. } => Type::RefinedInt {
                binder: binder.clone(),
                pred: Formula::True,
            },
            Type::IndexedRef { binder, elem, .. } => Type::IndexedRef {
                binder: binder.clone(),
                elem: Box::new(elem.neutral()),
                own: OwnershipFn::empty(),
            },
        }
    }

    /// Capture-avoiding substitution of `x` by `t` in predicates and
    /// ownership bounds.
    pub fn subst(&self, x: &str, t: &LinTerm) -> Type {
        match self {
            Type::RefinedInt { binder, pred } => {
                if binder == x {
                    return self.clone();
                }
                let (binder, pred) = avoid_capture(binder, pred, t);
                Type::RefinedInt {
                    binder,
                    pred: pred.subst(x, t),
                }
            }
            Type::IndexedRef { binder, elem, own } => {
                let own = own.subst(x, t);
                if binder == x {
                    return Type::IndexedRef {
                        binder: binder.clone(),
                        elem: elem.clone(),
                        own,
                    };
                }
                let mut fv = BTreeSet::new();
                t.free_vars(&mut fv);
                let (binder, elem) = if fv.contains(binder) {
                    let fresh = format!("{binder}'");
                    let renamed = elem.subst(binder, &LinTerm::var(fresh.clone()));
                    (fresh, Box::new(renamed))
                } else {
                    (binder.clone(), elem.clone())
                };
                Type::IndexedRef {
                    binder,
                    elem: Box::new(elem.subst(x, t)),
                    own,
                }
            }
        }
    }

    fn free_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Type::RefinedInt { binder, pred } => {
                bound.push(binder.clone());
                for v in pred.free_vars() {
                    if !bound.contains(&v) {
                        out.insert(v);
                    }
                }
                bound.pop();
            }
            Type::IndexedRef { binder, elem, own } => {
                let mut own_fv = BTreeSet::new();
                own.free_vars(&mut own_fv);
                for v in own_fv {
                    if !bound.contains(&v) {
                        out.insert(v);
                    }
                }
                bound.push(binder.clone());
                elem.free_vars(bound, out);
                bound.pop();
            }
        }
    }
}

fn avoid_capture(binder: &str, pred: &Formula, t: &LinTerm) -> (String, Formula) {
    let mut fv = BTreeSet::new();
    t.free_vars(&mut fv);
    if fv.contains(binder) {
        let fresh = format!("{binder}'");
        (fresh.clone(), pred.subst(binder, &LinTerm::var(fresh)))
    } else {
        (binder.to_string(), pred.clone())
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::RefinedInt { binder, pred } => write!(f, "{{{binder}: int | {pred}}}"),
            Type::IndexedRef { binder, elem, own } => {
                write!(f, "({binder} -> {elem}) ref^{own}")
            }
        }
    }
}

/// A monomorphic function type: parameter types before and after the call
/// (over the same names, in the same order) and the return type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunType {
    pub pre: Vec<(String, Type)>,
    pub post: Vec<(String, Type)>,
    pub ret: Type,
}

/// An ordered type environment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeEnv {
    pub bindings: Vec<(String, Type)>,
}

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv::default()
    }

    pub fn push(&mut self, x: impl Into<String>, t: Type) {
        self.bindings.push((x.into(), t));
    }

    pub fn lookup(&self, x: &str) -> Option<&Type> {
        self.bindings.iter().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    /// Names of the integer-typed bindings, in order.
    pub fn int_vars(&self) -> Vec<String> {
        self.bindings
            .iter()
            .filter(|(_, t)| !t.is_ref())
            .map(|(x, _)| x.clone())
            .collect()
    }
}

/// A logical validity claim `forall scope. hypothesis => conclusion`,
/// discharged externally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityObligation {
    /// Sorted integer variables the obligation quantifies over.
    pub scope: Vec<String>,
    pub hypothesis: Formula,
    pub conclusion: Formula,
}

impl ValidityObligation {
    fn new(scope: impl IntoIterator<Item = String>, hypothesis: Formula, conclusion: Formula) -> Self {
        let mut scope: Vec<String> = scope.into_iter().collect();
        scope.sort();
        scope.dedup();
        ValidityObligation {
            scope,
            hypothesis,
            conclusion,
        }
    }
}

impl fmt::Display for ValidityObligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "forall {}. ({}) => ({})",
            self.scope.join(", "),
            self.hypothesis,
            self.conclusion
        )
    }
}

#[derive(Debug, Error)]
pub enum TypeAlgebraError {
    #[error("shape mismatch: {left} vs {right}")]
    Shape { left: String, right: String },
    #[error("free variable `{var}` is not an integer binding in scope")]
    Scope { var: String },
}

/// Type addition `t1 + t2`: conjunction of refinements, pointwise sum of
/// ownerships.
pub fn ty_add(t1: &Type, t2: &Type) -> Result<Type, TypeAlgebraError> {
    match (t1, t2) {
        (
            Type::RefinedInt { binder: b1, pred: p1 },
            Type::RefinedInt { binder: b2, pred: p2 },
        ) => {
            let p2 = if b1 == b2 {
                p2.clone()
            } else {
                p2.subst(b2, &LinTerm::var(b1.clone()))
            };
            Ok(Type::RefinedInt {
                binder: b1.clone(),
                pred: Formula::And(vec![p1.clone(), p2]),
            })
        }
        (
            Type::IndexedRef {
                binder: b1,
                elem: e1,
                own: r1,
            },
            Type::IndexedRef {
                binder: b2,
                elem: e2,
                own: r2,
            },
        ) => {
            let (e2, r2) = if b1 == b2 {
                ((**e2).clone(), r2.clone())
            } else {
                (
                    e2.subst(b2, &LinTerm::var(b1.clone())),
                    r2.subst(b2, &LinTerm::var(b1.clone())),
                )
            };
            let elem = ty_add(e1, &e2)?;
            Ok(Type::IndexedRef {
                binder: b1.clone(),
                elem: Box::new(elem),
                own: r1.add(&r2),
            })
        }
        _ => Err(TypeAlgebraError::Shape {
            left: t1.to_string(),
            right: t2.to_string(),
        }),
    }
}

/// Strengthening `t /\_x phi`: conjoins `phi[$v/x]` onto integer refinements,
/// leaves references untouched.
pub fn strengthen(t: &Type, x: &str, phi: &Formula) -> Type {
    match t {
        Type::RefinedInt { binder, pred } => Type::RefinedInt {
            binder: binder.clone(),
            pred: Formula::And(vec![
                pred.clone(),
                phi.subst(x, &LinTerm::var(binder.clone())),
            ]),
        },
        Type::IndexedRef { .. } => t.clone(),
    }
}

/// Typed equality `x =_t y`: `x = y` at integer type, trivial at references.
pub fn typed_eq(t: &Type, x: &str, y: &str) -> Formula {
    match t {
        Type::RefinedInt { .. } => Formula::eq(LinTerm::var(x), LinTerm::var(y)),
        Type::IndexedRef { .. } => Formula::True,
    }
}

/// Obligations whose joint validity is `Empty(t)`: the refinement is trivial
/// and the ownership is zero everywhere.
pub fn empty_obligations(t: &Type) -> Vec<ValidityObligation> {
    let mut out = Vec::new();
    collect_empty(t, &Formula::True, &mut Vec::new(), &mut out);
    out
}

fn collect_empty(
    t: &Type,
    hyp: &Formula,
    scope: &mut Vec<String>,
    out: &mut Vec<ValidityObligation>,
) {
    match t {
        Type::RefinedInt { binder, pred } => {
            if *pred != Formula::True {
                let mut sc = scope.clone();
                sc.push(binder.clone());
                for v in pred.free_vars() {
                    sc.push(v);
                }
                out.push(ValidityObligation::new(sc, hyp.clone(), pred.clone()));
            }
        }
        Type::IndexedRef { binder, elem, own } => {
            for e in own.positive_entries() {
                // A positive entry must denote the empty interval.
                let mut fv = BTreeSet::new();
                e.lo.free_vars(&mut fv);
                e.hi.free_vars(&mut fv);
                let mut sc = scope.clone();
                sc.extend(fv);
                out.push(ValidityObligation::new(
                    sc,
                    hyp.clone(),
                    Formula::atom(Cmp::Lt, e.hi.clone(), e.lo.clone()),
                ));
            }
            scope.push(binder.clone());
            collect_empty(elem, hyp, scope, out);
            scope.pop();
        }
    }
}

/// `phi(Gamma)`: the conjunction of `[x/$v]phi_x` over integer bindings.
pub fn ctx_formula(env: &TypeEnv) -> Formula {
    let mut parts = Vec::new();
    for (x, t) in &env.bindings {
        if let Type::RefinedInt { binder, pred } = t {
            parts.push(pred.subst(binder, &LinTerm::var(x.clone())));
        }
    }
    Formula::and(parts)
}

/// Subtyping obligations for `Gamma |- t1 <= t2`.
pub fn subtype_obligations(
    env: &TypeEnv,
    t1: &Type,
    t2: &Type,
) -> Result<Vec<ValidityObligation>, TypeAlgebraError> {
    if !t1.shape_eq(t2) {
        return Err(TypeAlgebraError::Shape {
            left: t1.to_string(),
            right: t2.to_string(),
        });
    }
    let ctx = ctx_formula(env);
    let mut scope = env.int_vars();
    let mut out = Vec::new();
    sub_obligations(&ctx, &mut scope, t1, t2, &mut out);
    Ok(out)
}

fn sub_obligations(
    ctx: &Formula,
    scope: &mut Vec<String>,
    t1: &Type,
    t2: &Type,
    out: &mut Vec<ValidityObligation>,
) {
    match (t1, t2) {
        (
            Type::RefinedInt { binder: b1, pred: p1 },
            Type::RefinedInt { binder: b2, pred: p2 },
        ) => {
            let p2 = if b1 == b2 {
                p2.clone()
            } else {
                p2.subst(b2, &LinTerm::var(b1.clone()))
            };
            let mut sc = scope.clone();
            sc.push(b1.clone());
            out.push(ValidityObligation::new(
                sc,
                ctx.clone(),
                Formula::implies(p1.clone(), p2),
            ));
        }
        (
            Type::IndexedRef {
                binder: b1,
                elem: e1,
                own: r1,
            },
            Type::IndexedRef {
                binder: b2,
                elem: e2,
                own: r2,
            },
        ) => {
            let (e2, r2) = if b1 == b2 {
                ((**e2).clone(), r2.clone())
            } else {
                (
                    e2.subst(b2, &LinTerm::var(b1.clone())),
                    r2.subst(b2, &LinTerm::var(b1.clone())),
                )
            };
            out.extend(ownership_dominates(ctx, scope, b1, r1, &r2));
            scope.push(b1.clone());
            sub_obligations(ctx, scope, e1, &e2, out);
            scope.pop();
        }
        _ => unreachable!("shape checked by caller"),
    }
}

/// Obligations stating `forall i. r1(i) >= r2(i)`.
///
/// Ownership values are concrete rationals here, so for every membership
/// pattern whose value sums violate the inequality we require the pattern to
/// be infeasible under the context.
fn ownership_dominates(
    ctx: &Formula,
    scope: &[String],
    idx: &str,
    r1: &OwnershipFn,
    r2: &OwnershipFn,
) -> Vec<ValidityObligation> {
    let e1: Vec<&OwnEntry> = r1.positive_entries().collect();
    let e2: Vec<&OwnEntry> = r2.positive_entries().collect();
    let i = LinTerm::var(idx);
    let mut out = Vec::new();
    // Iterate over subsets of r2's entries (what the right side collects at
    // some index) and subsets of r1's entries.
    for mask2 in 0u32..(1 << e2.len()) {
        let sum2: BigRational = e2
            .iter()
            .enumerate()
            .filter(|(k, _)| mask2 & (1 << k) != 0)
            .map(|(_, e)| e.own.clone())
            .sum();
        if sum2.is_zero() {
            continue;
        }
        for mask1 in 0u32..(1 << e1.len()) {
            let sum1: BigRational = e1
                .iter()
                .enumerate()
                .filter(|(k, _)| mask1 & (1 << k) != 0)
                .map(|(_, e)| e.own.clone())
                .sum();
            if sum1 >= sum2 {
                continue;
            }
            // This pattern would make r1(i) < r2(i): it must not happen.
            let mut pattern = Vec::new();
            for (k, e) in e1.iter().enumerate() {
                let member = Formula::within(e.lo.clone(), i.clone(), e.hi.clone());
                if mask1 & (1 << k) != 0 {
                    pattern.push(member);
                } else {
                    pattern.push(Formula::not(member));
                }
            }
            for (k, e) in e2.iter().enumerate() {
                let member = Formula::within(e.lo.clone(), i.clone(), e.hi.clone());
                if mask2 & (1 << k) != 0 {
                    pattern.push(member);
                } else {
                    pattern.push(Formula::not(member));
                }
            }
            let mut sc: Vec<String> = scope.to_vec();
            sc.push(idx.to_string());
            for e in e1.iter().chain(e2.iter()) {
                let mut fv = BTreeSet::new();
                e.lo.free_vars(&mut fv);
                e.hi.free_vars(&mut fv);
                sc.extend(fv);
            }
            out.push(ValidityObligation::new(
                sc,
                ctx.clone(),
                Formula::not(Formula::and(pattern)),
            ));
        }
    }
    out
}

/// Well-formedness obligations for `t` under `env`: scope errors are hard,
/// the zero-ownership-implies-Empty conditions come back as obligations.
pub fn wf_obligations(
    env: &TypeEnv,
    t: &Type,
) -> Result<Vec<ValidityObligation>, TypeAlgebraError> {
    // Scope check: every free variable must be an integer binding.
    let mut fv = BTreeSet::new();
    t.free_vars(&mut Vec::new(), &mut fv);
    for v in &fv {
        match env.lookup(v) {
            Some(Type::RefinedInt { .. }) => {}
            _ => {
                return Err(TypeAlgebraError::Scope { var: v.clone() });
            }
        }
    }
    let ctx = ctx_formula(env);
    let mut scope = env.int_vars();
    let mut out = Vec::new();
    wf_collect(&ctx, &mut scope, t, &mut out);
    Ok(out)
}

fn wf_collect(
    ctx: &Formula,
    scope: &mut Vec<String>,
    t: &Type,
    out: &mut Vec<ValidityObligation>,
) {
    if let Type::IndexedRef { binder, elem, own } = t {
        // Outside every positive entry, the element type must be Empty.
        let i = LinTerm::var(binder.clone());
        let outside = Formula::and(own.positive_entries().map(|e| {
            Formula::or([
                Formula::atom(Cmp::Lt, i.clone(), e.lo.clone()),
                Formula::atom(Cmp::Gt, i.clone(), e.hi.clone()),
            ])
        }));
        let hyp = Formula::and([ctx.clone(), outside]);
        let mut empties = Vec::new();
        scope.push(binder.clone());
        collect_empty(elem, &hyp, scope, &mut empties);
        out.extend(empties);
        // Element types must be well-formed at every index.
        wf_collect(ctx, scope, elem, out);
        scope.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn nu() -> LinTerm {
        LinTerm::var(NU)
    }

    #[test]
    fn ty_add_conjoins_predicates() {
        let a = Type::refined_int(Formula::eq(nu(), LinTerm::constant(0)));
        let b = Type::refined_int(Formula::atom(Cmp::Gt, nu(), LinTerm::constant(-1)));
        let sum = ty_add(&a, &b).unwrap();
        match sum {
            Type::RefinedInt { pred, .. } => match pred {
                Formula::And(parts) => assert_eq!(parts.len(), 2),
                other => panic!("{other:?}"),
            },
            other => panic!("{other}"),
        }
    }

    #[test]
    fn ty_add_sums_ownership_entries() {
        let half = OwnershipFn::interval(LinTerm::constant(0), LinTerm::constant(4), rat(1, 2));
        let t = Type::indexed_ref(Type::int_top(), half.clone());
        let sum = ty_add(&t, &t).unwrap();
        match &sum {
            Type::IndexedRef { own, .. } => {
                assert_eq!(own.entries.len(), 2);
                let total = own.eval(&BigInt::from(2), &|_| None).unwrap();
                assert_eq!(total, BigRational::one());
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn ty_add_shape_mismatch() {
        let a = Type::int_top();
        let b = Type::indexed_ref(Type::int_top(), OwnershipFn::empty());
        assert!(matches!(ty_add(&a, &b), Err(TypeAlgebraError::Shape { .. })));
    }

    #[test]
    fn strengthen_refines_ints_and_skips_refs() {
        let t = Type::refined_int(Formula::atom(Cmp::Gt, nu(), LinTerm::constant(0)));
        let phi = Formula::eq(LinTerm::var("x"), LinTerm::var("y"));
        match strengthen(&t, "x", &phi) {
            Type::RefinedInt { pred, .. } => {
                // The substituted conjunct becomes $v = y.
                let expect = Formula::eq(nu(), LinTerm::var("y"));
                match pred {
                    Formula::And(parts) => assert_eq!(parts[1], expect),
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other}"),
        }
        let r = Type::indexed_ref(Type::int_top(), OwnershipFn::empty());
        assert_eq!(strengthen(&r, "x", &phi), r);
    }

    #[test]
    fn typed_eq_cases() {
        let t = Type::refined_int(Formula::eq(nu(), LinTerm::constant(3)));
        assert_eq!(
            typed_eq(&t, "a", "b"),
            Formula::eq(LinTerm::var("a"), LinTerm::var("b"))
        );
        let r = Type::indexed_ref(Type::int_top(), OwnershipFn::empty());
        assert_eq!(typed_eq(&r, "a", "b"), Formula::True);
        assert_eq!(
            typed_eq(&t, "a", "a"),
            Formula::eq(LinTerm::var("a"), LinTerm::var("a"))
        );
    }

    #[test]
    fn empty_obligations_cases() {
        assert!(empty_obligations(&Type::int_top()).is_empty());

        let tautology = Type::refined_int(Formula::eq(LinTerm::constant(0), LinTerm::constant(0)));
        let obs = empty_obligations(&tautology);
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].hypothesis, Formula::True);
        assert_eq!(
            obs[0].conclusion,
            Formula::eq(LinTerm::constant(0), LinTerm::constant(0))
        );

        let nonempty = Type::refined_int(Formula::eq(nu(), LinTerm::constant(0)));
        let obs = empty_obligations(&nonempty);
        assert_eq!(obs.len(), 1);
        // Invalid in general; discharge is the solver's job.
        assert_eq!(obs[0].conclusion, Formula::eq(nu(), LinTerm::constant(0)));
    }

    #[test]
    fn ctx_formula_substitutes_binders() {
        let mut env = TypeEnv::new();
        env.push("x", Type::refined_int(Formula::eq(nu(), LinTerm::constant(1))));
        env.push(
            "p",
            Type::indexed_ref(Type::int_top(), OwnershipFn::empty()),
        );
        let phi = ctx_formula(&env);
        assert_eq!(phi, Formula::eq(LinTerm::var("x"), LinTerm::constant(1)));
        assert_eq!(ctx_formula(&TypeEnv::new()), Formula::True);

        let mut env2 = TypeEnv::new();
        env2.push("x", Type::refined_int(Formula::atom(Cmp::Gt, nu(), LinTerm::constant(0))));
        env2.push("y", Type::refined_int(Formula::eq(nu(), LinTerm::var("x"))));
        let phi2 = ctx_formula(&env2);
        let expect = Formula::and([
            Formula::atom(Cmp::Gt, LinTerm::var("x"), LinTerm::constant(0)),
            Formula::eq(LinTerm::var("y"), LinTerm::var("x")),
        ]);
        assert_eq!(phi2, expect);
    }

    #[test]
    fn subtype_ownership_domination_trivial() {
        let one = OwnershipFn::interval(LinTerm::constant(0), LinTerm::constant(9), rat(1, 1));
        let half = OwnershipFn::interval(LinTerm::constant(0), LinTerm::constant(9), rat(1, 2));
        let t1 = Type::indexed_ref(Type::int_top(), one);
        let t2 = Type::indexed_ref(Type::int_top(), half);
        let obs = subtype_obligations(&TypeEnv::new(), &t1, &t2).unwrap();
        // 1 >= 1/2 on the only overlap pattern, so the only ownership
        // obligation left is the one where the index is in r2 but not r1,
        // plus the trivial element obligation.
        for ob in &obs {
            // Evaluate at a few points: all obligations must hold for the
            // identical-interval case.
            let check = |i: i64| {
                let env = move |v: &str| {
                    if v == IDX {
                        Some(BigInt::from(i))
                    } else {
                        Some(BigInt::from(0))
                    }
                };
                let hyp = ob.hypothesis.eval(&env).unwrap();
                let concl = ob.conclusion.eval(&env).unwrap();
                !hyp || concl
            };
            for i in [-5, 0, 3, 9, 12] {
                assert!(check(i), "obligation {ob} fails at {i}");
            }
        }
    }

    #[test]
    fn wf_scope_error() {
        let t = Type::refined_int(Formula::atom(Cmp::Gt, nu(), LinTerm::var("y")));
        let err = wf_obligations(&TypeEnv::new(), &t).unwrap_err();
        match err {
            TypeAlgebraError::Scope { var } => assert_eq!(var, "y"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wf_zero_ownership_forces_empty_outside() {
        // (λi.{v | i=0 => v=0}) ref^{[0,x-1] -> 1} under x: int
        let mut env = TypeEnv::new();
        env.push("x", Type::int_top());
        let pred = Formula::implies(
            Formula::eq(LinTerm::var(IDX), LinTerm::constant(0)),
            Formula::eq(nu(), LinTerm::constant(0)),
        );
        let t = Type::indexed_ref(
            Type::refined_int(pred.clone()),
            OwnershipFn::interval(
                LinTerm::constant(0),
                LinTerm::var("x").add_const(-1),
                rat(1, 1),
            ),
        );
        let obs = wf_obligations(&env, &t).unwrap();
        assert_eq!(obs.len(), 1);
        let ob = &obs[0];
        assert_eq!(ob.conclusion, pred);
        // Falsifiable: i = 0 outside [0, x-1] when x <= 0, with v = 1.
        let env_bad = |v: &str| match v {
            "x" => Some(BigInt::from(0)),
            _ if v == IDX => Some(BigInt::from(0)),
            _ if v == NU => Some(BigInt::from(1)),
            _ => None,
        };
        assert_eq!(ob.hypothesis.eval(&env_bad), Some(true));
        assert_eq!(ob.conclusion.eval(&env_bad), Some(false));

        // With a trivial element predicate the obligations are all valid.
        let t_top = Type::indexed_ref(
            Type::int_top(),
            OwnershipFn::interval(
                LinTerm::constant(0),
                LinTerm::var("x").add_const(-1),
                rat(1, 1),
            ),
        );
        assert!(wf_obligations(&env, &t_top).unwrap().is_empty());
    }
}

//! Ownership inference: interval-shaped ownership templates with unknown
//! affine bounds and unknown ownership values, constraints generated from
//! the typing rules, and an exists-forall solving loop.

mod gen;
mod solve;

pub use gen::{gen_own_constraints_for_fragment, gen_templates_and_constraints, FragmentSetup};
pub use solve::{solve_exists_forall, OwnOutcome, OwnSolution, SolveParams};

use crate::formula::{Cmp, Formula, LinTerm};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OwnError {
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// A term that is linear in the unknown template coefficients and linear in
/// the universally quantified program variables, with products between the
/// two: `k + sum b_j*u_j + sum a_j*x_j + sum c_j*(u_j * x_j)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct TTerm {
    pub constant: BigInt,
    /// Linear units: unknown symbols and universal variables alike.
    pub units: BTreeMap<String, BigInt>,
    /// Products `(unknown, universal) -> coefficient`.
    pub products: BTreeMap<(String, String), BigInt>,
}

impl TTerm {
    pub fn constant(n: impl Into<BigInt>) -> Self {
        TTerm {
            constant: n.into(),
            ..Default::default()
        }
    }

    pub fn unit(x: impl Into<String>) -> Self {
        let mut t = TTerm::default();
        t.units.insert(x.into(), BigInt::one());
        t
    }

    pub fn from_linterm(t: &LinTerm) -> Self {
        TTerm {
            constant: t.constant.clone(),
            units: t.coeffs.clone(),
            products: BTreeMap::new(),
        }
    }

    pub fn add(&self, other: &TTerm) -> TTerm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (x, c) in &other.units {
            let e = out.units.entry(x.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                out.units.remove(x);
            }
        }
        for (k, c) in &other.products {
            let e = out.products.entry(k.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                out.products.remove(k);
            }
        }
        out
    }

    pub fn neg(&self) -> TTerm {
        TTerm {
            constant: -&self.constant,
            units: self.units.iter().map(|(x, c)| (x.clone(), -c)).collect(),
            products: self
                .products
                .iter()
                .map(|(k, c)| (k.clone(), -c))
                .collect(),
        }
    }

    pub fn sub(&self, other: &TTerm) -> TTerm {
        self.add(&other.neg())
    }

    pub fn add_lin(&self, t: &LinTerm) -> TTerm {
        self.add(&TTerm::from_linterm(t))
    }

    /// Substitutes a universal variable by a linear term over universals
    /// (used to instantiate callee templates at call sites).
    pub fn subst_universal(&self, x: &str, t: &LinTerm) -> TTerm {
        let mut out = TTerm {
            constant: self.constant.clone(),
            units: BTreeMap::new(),
            products: BTreeMap::new(),
        };
        let add_unit = |units: &mut BTreeMap<String, BigInt>, name: String, c: BigInt| {
            let e = units.entry(name).or_insert_with(BigInt::zero);
            *e += c;
        };
        for (u, c) in &self.units {
            if u == x {
                out.constant += c * &t.constant;
                for (y, k) in &t.coeffs {
                    add_unit(&mut out.units, y.clone(), c * k);
                }
            } else {
                add_unit(&mut out.units, u.clone(), c.clone());
            }
        }
        for ((unk, uni), c) in &self.products {
            if uni == x {
                add_unit(&mut out.units, unk.clone(), c * &t.constant);
                for (y, k) in &t.coeffs {
                    let e = out
                        .products
                        .entry((unk.clone(), y.clone()))
                        .or_insert_with(BigInt::zero);
                    *e += c * k;
                }
            } else {
                let e = out
                    .products
                    .entry((unk.clone(), uni.clone()))
                    .or_insert_with(BigInt::zero);
                *e += c.clone();
            }
        }
        out.units.retain(|_, c| !c.is_zero());
        out.products.retain(|_, c| !c.is_zero());
        out
    }

    /// Instantiates the universals with integer values, leaving a linear
    /// term over the unknowns. An optional symbolic substitution replaces
    /// one unit variable by a linear term over the unknowns (the variable
    /// must not occur under products).
    pub fn instantiate(&self, vals: &BTreeMap<String, BigInt>) -> LinTerm {
        self.instantiate_with(vals, None)
    }

    pub fn instantiate_with(
        &self,
        vals: &BTreeMap<String, BigInt>,
        sym: Option<(&str, &LinTerm)>,
    ) -> LinTerm {
        let mut out = LinTerm::constant(self.constant.clone());
        for (x, c) in &self.units {
            if let Some((name, term)) = sym {
                if x == name {
                    out = out.add(&term.scale(c));
                    continue;
                }
            }
            match vals.get(x) {
                Some(v) => out.constant += c * v,
                None => out = out.add(&LinTerm::var(x.clone()).scale(c)),
            }
        }
        for ((unk, uni), c) in &self.products {
            if let Some((name, _)) = sym {
                assert!(uni != name, "symbolic index under a product");
            }
            match vals.get(uni) {
                Some(v) => out = out.add(&LinTerm::var(unk.clone()).scale(&(c * v))),
                None => {
                    // A product with an uninstantiated universal cannot be
                    // linearized; callers always pass a full valuation.
                    unreachable!("missing universal `{uni}` in instantiation")
                }
            }
        }
        out
    }

    /// Substitutes integer values for the unknown coefficient symbols,
    /// leaving a linear term over the universals (ownership symbols, which
    /// are never multiplied with universals, may remain as units).
    pub fn subst_unknowns(&self, ints: &BTreeMap<String, BigInt>) -> LinTerm {
        let mut out = LinTerm::constant(self.constant.clone());
        for (x, c) in &self.units {
            match ints.get(x) {
                Some(v) => out.constant += c * v,
                None => out = out.add(&LinTerm::var(x.clone()).scale(c)),
            }
        }
        for ((unk, uni), c) in &self.products {
            let v = ints
                .get(unk)
                .unwrap_or_else(|| panic!("unknown `{unk}` missing from solution"));
            out = out.add(&LinTerm::var(uni.clone()).scale(&(c * v)));
        }
        out
    }

    pub fn collect_vars(&self, unknowns: &mut BTreeSet<String>, universals: &mut BTreeSet<String>, known_unknowns: &dyn Fn(&str) -> bool) {
        for x in self.units.keys() {
            if known_unknowns(x) {
                unknowns.insert(x.clone());
            } else {
                universals.insert(x.clone());
            }
        }
        for (unk, uni) in self.products.keys() {
            unknowns.insert(unk.clone());
            universals.insert(uni.clone());
        }
    }

    fn to_smt(&self) -> String {
        let mut parts = Vec::new();
        if !self.constant.is_zero() || (self.units.is_empty() && self.products.is_empty()) {
            parts.push(crate::solver_io::smt_int(&self.constant));
        }
        for (x, c) in &self.units {
            let sym = crate::solver_io::smt_symbol(x);
            if c.is_one() {
                parts.push(sym);
            } else {
                parts.push(format!(
                    "(* {} {})",
                    crate::solver_io::smt_int(c),
                    sym
                ));
            }
        }
        for ((unk, uni), c) in &self.products {
            let p = format!(
                "(* {} {})",
                crate::solver_io::smt_symbol(unk),
                crate::solver_io::smt_symbol(uni)
            );
            if c.is_one() {
                parts.push(p);
            } else {
                parts.push(format!("(* {} {})", crate::solver_io::smt_int(c), p));
            }
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            format!("(+ {})", parts.join(" "))
        }
    }
}

impl fmt::Display for TTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if !self.constant.is_zero() || (self.units.is_empty() && self.products.is_empty()) {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        let mut item = |f: &mut fmt::Formatter<'_>, c: &BigInt, body: String| -> fmt::Result {
            if first {
                if c.is_one() {
                    write!(f, "{body}")?;
                } else {
                    write!(f, "{c}*{body}")?;
                }
                first = false;
            } else if c >= &BigInt::zero() {
                if c.is_one() {
                    write!(f, " + {body}")?;
                } else {
                    write!(f, " + {c}*{body}")?;
                }
            } else {
                let a = -c;
                if a.is_one() {
                    write!(f, " - {body}")?;
                } else {
                    write!(f, " - {a}*{body}")?;
                }
            }
            Ok(())
        };
        for (x, c) in &self.units {
            item(f, c, x.clone())?;
        }
        for ((unk, uni), c) in &self.products {
            item(f, c, format!("{unk}*{uni}"))?;
        }
        Ok(())
    }
}

/// Atoms and positive boolean structure of ownership constraint bodies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TForm {
    Atom(Cmp, TTerm, TTerm),
    And(Vec<TForm>),
    Or(Vec<TForm>),
}

impl TForm {
    pub fn and(parts: impl IntoIterator<Item = TForm>) -> TForm {
        let mut out = Vec::new();
        for p in parts {
            match p {
                TForm::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            TForm::And(out)
        }
    }

    pub fn instantiate(&self, vals: &BTreeMap<String, BigInt>) -> Formula {
        self.instantiate_with(vals, None)
    }

    pub fn instantiate_with(
        &self,
        vals: &BTreeMap<String, BigInt>,
        sym: Option<(&str, &LinTerm)>,
    ) -> Formula {
        match self {
            TForm::Atom(c, a, b) => {
                Formula::Atom(*c, a.instantiate_with(vals, sym), b.instantiate_with(vals, sym))
            }
            TForm::And(ps) => Formula::and(ps.iter().map(|p| p.instantiate_with(vals, sym))),
            TForm::Or(ps) => Formula::or(ps.iter().map(|p| p.instantiate_with(vals, sym))),
        }
    }

    /// Substitutes a full solution, producing an integer formula over the
    /// universals (rational ownership values are cleared by atom rescaling).
    pub fn subst_solution(&self, sol: &OwnSolution) -> Formula {
        match self {
            TForm::Atom(c, a, b) => {
                let lhs = a.subst_unknowns(&sol.coeffs);
                let rhs = b.subst_unknowns(&sol.coeffs);
                Formula::Atom(*c, lhs, rhs).subst_rationals(&sol.owns)
            }
            TForm::And(ps) => Formula::and(ps.iter().map(|p| p.subst_solution(sol))),
            TForm::Or(ps) => Formula::or(ps.iter().map(|p| p.subst_solution(sol))),
        }
    }

    pub fn to_smt(&self) -> String {
        match self {
            TForm::Atom(c, a, b) => {
                let (sa, sb) = (a.to_smt(), b.to_smt());
                match c {
                    Cmp::Eq => format!("(= {sa} {sb})"),
                    Cmp::Ne => format!("(distinct {sa} {sb})"),
                    Cmp::Lt => format!("(< {sa} {sb})"),
                    Cmp::Le => format!("(<= {sa} {sb})"),
                    Cmp::Gt => format!("(> {sa} {sb})"),
                    Cmp::Ge => format!("(>= {sa} {sb})"),
                }
            }
            TForm::And(ps) => {
                if ps.is_empty() {
                    "true".into()
                } else {
                    format!(
                        "(and {})",
                        ps.iter().map(|p| p.to_smt()).collect::<Vec<_>>().join(" ")
                    )
                }
            }
            TForm::Or(ps) => {
                if ps.is_empty() {
                    "false".into()
                } else {
                    format!(
                        "(or {})",
                        ps.iter().map(|p| p.to_smt()).collect::<Vec<_>>().join(" ")
                    )
                }
            }
        }
    }

    fn collect_vars(
        &self,
        unknowns: &mut BTreeSet<String>,
        universals: &mut BTreeSet<String>,
        known: &dyn Fn(&str) -> bool,
    ) {
        match self {
            TForm::Atom(_, a, b) => {
                a.collect_vars(unknowns, universals, known);
                b.collect_vars(unknowns, universals, known);
            }
            TForm::And(ps) | TForm::Or(ps) => {
                for p in ps {
                    p.collect_vars(unknowns, universals, known);
                }
            }
        }
    }
}

impl fmt::Display for TForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TForm::Atom(c, a, b) => write!(f, "{a} {} {b}", c.symbol()),
            TForm::And(ps) => {
                for (k, p) in ps.iter().enumerate() {
                    if k > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
            TForm::Or(ps) => {
                for (k, p) in ps.iter().enumerate() {
                    if k > 0 {
                        write!(f, " || ")?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
        }
    }
}

/// An ownership template `[lo, hi] -> own` with unknown affine bounds over
/// the scope variables and an unknown ownership value.
#[derive(Debug, Clone)]
pub struct OwnTemplate {
    pub id: usize,
    /// Integer variables the affine bounds range over.
    pub scope: Vec<String>,
    pub lo: TTerm,
    pub hi: TTerm,
    pub own_sym: String,
    /// Where this template came from, for diagnostics.
    pub label: String,
}

impl OwnTemplate {
    pub fn own(&self) -> TTerm {
        TTerm::unit(self.own_sym.clone())
    }

    /// The solved bounds as linear terms over the scope variables.
    pub fn solved_interval(&self, sol: &OwnSolution) -> (LinTerm, LinTerm) {
        (
            self.lo.subst_unknowns(&sol.coeffs),
            self.hi.subst_unknowns(&sol.coeffs),
        )
    }

    pub fn solved_own(&self, sol: &OwnSolution) -> BigRational {
        sol.owns
            .get(&self.own_sym)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }
}

/// Exact finite expansion of an inner index universal: the body, viewed as
/// a function of this variable, is piecewise constant with pieces starting
/// at these breakpoints, so instantiating the breakpoints covers every
/// integer index.
#[derive(Debug, Clone)]
pub struct IndexExpansion {
    pub var: String,
    pub breakpoints: Vec<TTerm>,
}

/// One exists-forall constraint: `exists unknowns. forall universals.
/// guard => body`.
#[derive(Debug, Clone)]
pub struct OwnConstraint {
    pub label: String,
    pub universals: Vec<String>,
    pub guard: Formula,
    pub body: TForm,
    pub index_expansion: Option<IndexExpansion>,
}

impl fmt::Display for OwnConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] forall {}. ({}) => ({})",
            self.label,
            self.universals.join(", "),
            self.guard,
            self.body
        )
    }
}

/// What role a coefficient symbol plays in its template, used to pick
/// search bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffKind {
    /// Constant term of a template with scope variables: stays small.
    ScopedConst,
    /// Constant term of a ground template: can carry literal array sizes.
    GroundConst,
    /// Coefficient of a scope variable: unit-sized in practice.
    VarCoeff,
}

/// The unknowns of a constraint system.
#[derive(Debug, Clone, Default)]
pub struct UnknownRegistry {
    pub coeff_syms: BTreeSet<String>,
    pub own_syms: BTreeSet<String>,
    pub coeff_kinds: BTreeMap<String, CoeffKind>,
}

impl UnknownRegistry {
    pub fn is_unknown(&self, name: &str) -> bool {
        self.coeff_syms.contains(name) || self.own_syms.contains(name)
    }
}

/// Everything the generation pass produces.
#[derive(Debug, Default)]
pub struct OwnProblem {
    pub templates: Vec<OwnTemplate>,
    pub constraints: Vec<OwnConstraint>,
    pub unknowns: UnknownRegistry,
    /// Function signature templates: per pointer formal, the pre and post
    /// template ids, plus the return template for pointer-returning
    /// functions.
    pub fun_sigs: BTreeMap<String, FunOwnSig>,
}

#[derive(Debug, Clone, Default)]
pub struct FunOwnSig {
    pub int_formals: Vec<String>,
    pub ptr_pre: BTreeMap<String, usize>,
    pub ptr_post: BTreeMap<String, usize>,
    pub ret_ptr: Option<usize>,
}

impl OwnProblem {
    pub fn fresh_template(&mut self, scope: &[String], label: String) -> usize {
        let id = self.templates.len();
        let mut lo = TTerm::unit(format!("c{id}_0"));
        let mut hi = TTerm::unit(format!("d{id}_0"));
        let const_kind = if scope.is_empty() {
            CoeffKind::GroundConst
        } else {
            CoeffKind::ScopedConst
        };
        for sym in [format!("c{id}_0"), format!("d{id}_0")] {
            self.unknowns.coeff_syms.insert(sym.clone());
            self.unknowns.coeff_kinds.insert(sym, const_kind);
        }
        for (k, x) in scope.iter().enumerate() {
            let c = format!("c{id}_{}", k + 1);
            let d = format!("d{id}_{}", k + 1);
            lo.products.insert((c.clone(), x.clone()), BigInt::one());
            hi.products.insert((d.clone(), x.clone()), BigInt::one());
            for sym in [c, d] {
                self.unknowns.coeff_syms.insert(sym.clone());
                self.unknowns.coeff_kinds.insert(sym, CoeffKind::VarCoeff);
            }
        }
        let own_sym = format!("o{id}");
        self.unknowns.own_syms.insert(own_sym.clone());
        self.templates.push(OwnTemplate {
            id,
            scope: scope.to_vec(),
            lo,
            hi,
            own_sym,
            label,
        });
        id
    }

    pub fn push_constraint(&mut self, label: impl Into<String>, guard: &Formula, body: TForm) {
        self.push_constraint_expanded(label, guard, body, None);
    }

    pub fn push_constraint_expanded(
        &mut self,
        label: impl Into<String>,
        guard: &Formula,
        body: TForm,
        index_expansion: Option<IndexExpansion>,
    ) {
        let mut unknowns = BTreeSet::new();
        let mut universals = BTreeSet::new();
        let reg = self.unknowns.clone();
        body.collect_vars(&mut unknowns, &mut universals, &|x| reg.is_unknown(x));
        for v in guard.free_vars() {
            universals.insert(v);
        }
        self.constraints.push(OwnConstraint {
            label: label.into(),
            universals: universals.into_iter().collect(),
            guard: guard.clone(),
            body,
            index_expansion,
        });
    }

    /// Emits the constraints as an SMT-LIB2 script with quantified
    /// universals, for external inspection.
    pub fn emit_smtlib(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        s.push_str("(set-logic ALL)\n");
        for c in &self.unknowns.coeff_syms {
            writeln!(s, "(declare-const {} Int)", crate::solver_io::smt_symbol(c)).unwrap();
        }
        for o in &self.unknowns.own_syms {
            writeln!(s, "(declare-const {} Real)", crate::solver_io::smt_symbol(o)).unwrap();
            writeln!(
                s,
                "(assert (and (>= {sym} 0.0) (<= {sym} 1.0)))",
                sym = crate::solver_io::smt_symbol(o)
            )
            .unwrap();
        }
        for c in &self.constraints {
            writeln!(s, "; {}", c.label).unwrap();
            let inner = if c.guard == Formula::True {
                c.body.to_smt()
            } else {
                format!(
                    "(=> {} {})",
                    crate::solver_io::formula_to_smt(&c.guard, &BTreeSet::new()),
                    c.body.to_smt()
                )
            };
            if c.universals.is_empty() {
                writeln!(s, "(assert {inner})").unwrap();
            } else {
                let binders: Vec<String> = c
                    .universals
                    .iter()
                    .map(|x| format!("({} Int)", crate::solver_io::smt_symbol(x)))
                    .collect();
                writeln!(s, "(assert (forall ({}) {}))", binders.join(" "), inner).unwrap();
            }
        }
        s.push_str("(check-sat)\n");
        s
    }
}

/// Ownership value bounds `0 <= o <= 1` for every ownership symbol, added to
/// every synthesis query.
pub fn ownership_bounds(reg: &UnknownRegistry) -> Vec<Formula> {
    reg.own_syms
        .iter()
        .flat_map(|o| {
            [
                Formula::atom(Cmp::Ge, LinTerm::var(o.clone()), LinTerm::constant(0)),
                Formula::atom(Cmp::Le, LinTerm::var(o.clone()), LinTerm::constant(1)),
            ]
        })
        .collect()
}

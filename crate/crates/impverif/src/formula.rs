//! Linear integer terms and first-order formulas over them.
//!
//! This is the shared logic vocabulary of the whole crate: assert conditions,
//! refinement predicates, ownership constraint bodies and CHC constraint parts
//! are all [`Formula`]s over [`LinTerm`]s. Terms are linear with arbitrary
//! precision integer coefficients; variables are plain strings.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A linear term `c0 + c1*x1 + ... + ck*xk` with integer coefficients.
///
/// Variables with a zero coefficient are never stored, so structural equality
/// coincides with syntactic equality of the normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinTerm {
    pub constant: BigInt,
    pub coeffs: BTreeMap<String, BigInt>,
}

impl LinTerm {
    pub fn constant(n: impl Into<BigInt>) -> Self {
        LinTerm {
            constant: n.into(),
            coeffs: BTreeMap::new(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0)
    }

    pub fn var(x: impl Into<String>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(x.into(), BigInt::one());
        LinTerm {
            constant: BigInt::zero(),
            coeffs,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Returns `Some(n)` when the term is the constant `n`.
    pub fn as_constant(&self) -> Option<&BigInt> {
        if self.coeffs.is_empty() {
            Some(&self.constant)
        } else {
            None
        }
    }

    /// Returns `Some(x)` when the term is exactly the variable `x`.
    pub fn as_var(&self) -> Option<&str> {
        if self.constant.is_zero() && self.coeffs.len() == 1 {
            let (x, c) = self.coeffs.iter().next().unwrap();
            if c.is_one() {
                return Some(x);
            }
        }
        None
    }

    pub fn add(&self, other: &LinTerm) -> LinTerm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (x, c) in &other.coeffs {
            let entry = out.coeffs.entry(x.clone()).or_insert_with(BigInt::zero);
            *entry += c;
            if entry.is_zero() {
                out.coeffs.remove(x);
            }
        }
        out
    }

    pub fn sub(&self, other: &LinTerm) -> LinTerm {
        self.add(&other.scale(&BigInt::from(-1)))
    }

    pub fn scale(&self, k: &BigInt) -> LinTerm {
        if k.is_zero() {
            return LinTerm::zero();
        }
        LinTerm {
            constant: &self.constant * k,
            coeffs: self
                .coeffs
                .iter()
                .map(|(x, c)| (x.clone(), c * k))
                .collect(),
        }
    }

    pub fn add_const(&self, k: impl Into<BigInt>) -> LinTerm {
        let mut out = self.clone();
        out.constant += k.into();
        out
    }

    /// Substitutes `x` by `t`.
    pub fn subst(&self, x: &str, t: &LinTerm) -> LinTerm {
        match self.coeffs.get(x) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut rest = self.clone();
                rest.coeffs.remove(x);
                rest.add(&t.scale(&c))
            }
        }
    }

    /// Simultaneous substitution; avoids chains feeding into each other.
    pub fn subst_all(&self, map: &BTreeMap<String, LinTerm>) -> LinTerm {
        let mut out = LinTerm::constant(self.constant.clone());
        for (x, c) in &self.coeffs {
            match map.get(x) {
                Some(t) => out = out.add(&t.scale(c)),
                None => out = out.add(&LinTerm::var(x.clone()).scale(c)),
            }
        }
        out
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        for x in self.coeffs.keys() {
            out.insert(x.clone());
        }
    }

    /// Evaluates under a total valuation. Returns `None` if a variable is unbound.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<BigInt>) -> Option<BigInt> {
        let mut acc = self.constant.clone();
        for (x, c) in &self.coeffs {
            acc += c * env(x)?;
        }
        Some(acc)
    }

    /// Divides all coefficients by their gcd (for canonical forms). Returns
    /// the gcd-reduced term; the zero term is returned unchanged.
    pub fn gcd_reduced(&self) -> LinTerm {
        let mut g = self.constant.abs();
        for c in self.coeffs.values() {
            g = g.gcd(c);
        }
        if g.is_zero() || g.is_one() {
            return self.clone();
        }
        LinTerm {
            constant: &self.constant / &g,
            coeffs: self.coeffs.iter().map(|(x, c)| (x.clone(), c / &g)).collect(),
        }
    }
}

impl fmt::Display for LinTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if !self.constant.is_zero() || self.coeffs.is_empty() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (x, c) in &self.coeffs {
            if first {
                if c.is_one() {
                    write!(f, "{x}")?;
                } else if *c == BigInt::from(-1) {
                    write!(f, "-{x}")?;
                } else {
                    write!(f, "{c}*{x}")?;
                }
                first = false;
            } else if c.is_positive() {
                if c.is_one() {
                    write!(f, " + {x}")?;
                } else {
                    write!(f, " + {c}*{x}")?;
                }
            } else {
                let a = c.abs();
                if a.is_one() {
                    write!(f, " - {x}")?;
                } else {
                    write!(f, " - {a}*{x}")?;
                }
            }
        }
        Ok(())
    }
}

/// Comparison operators of linear atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    pub fn apply(self, a: &BigInt, b: &BigInt) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

/// Quantifier-free first-order formulas over linear integer atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Cmp, LinTerm, LinTerm),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Default for Formula {
    fn default() -> Self {
        Formula::True
    }
}

impl Formula {
    pub fn atom(cmp: Cmp, lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::Atom(cmp, lhs, rhs)
    }

    pub fn eq(lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::Atom(Cmp::Eq, lhs, rhs)
    }

    pub fn le(lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::Atom(Cmp::Le, lhs, rhs)
    }

    /// Conjunction with unit simplification.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with unit simplification.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(hyp: Formula, concl: Formula) -> Formula {
        match (&hyp, &concl) {
            (Formula::True, _) => concl,
            (Formula::False, _) => Formula::True,
            (_, Formula::True) => Formula::True,
            _ => Formula::Implies(Box::new(hyp), Box::new(concl)),
        }
    }

    pub fn not(inner: Formula) -> Formula {
        match inner {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(f) => *f,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// `lo <= t <= hi` as a conjunction.
    pub fn within(lo: LinTerm, t: LinTerm, hi: LinTerm) -> Formula {
        Formula::and([
            Formula::atom(Cmp::Le, lo, t.clone()),
            Formula::atom(Cmp::Le, t, hi),
        ])
    }

    pub fn subst(&self, x: &str, t: &LinTerm) -> Formula {
        self.map_terms(&|term| term.subst(x, t))
    }

    pub fn subst_all(&self, map: &BTreeMap<String, LinTerm>) -> Formula {
        self.map_terms(&|term| term.subst_all(map))
    }

    pub fn map_terms(&self, f: &dyn Fn(&LinTerm) -> LinTerm) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(c, a, b) => Formula::Atom(*c, f(a), f(b)),
            Formula::Not(inner) => Formula::Not(Box::new(inner.map_terms(f))),
            Formula::And(ps) => Formula::And(ps.iter().map(|p| p.map_terms(f)).collect()),
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.map_terms(f)).collect()),
            Formula::Implies(h, c) => {
                Formula::Implies(Box::new(h.map_terms(f)), Box::new(c.map_terms(f)))
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out);
        out
    }

    pub fn collect_free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Formula::Not(f) => f.collect_free_vars(out),
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_free_vars(out);
                }
            }
            Formula::Implies(h, c) => {
                h.collect_free_vars(out);
                c.collect_free_vars(out);
            }
        }
    }

    /// Evaluation under a rational valuation; `None` on unbound variables.
    pub fn eval_rat(
        &self,
        env: &dyn Fn(&str) -> Option<num_rational::BigRational>,
    ) -> Option<bool> {
        use num_rational::BigRational;
        fn term(t: &LinTerm, env: &dyn Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
            let mut acc = BigRational::from(t.constant.clone());
            for (x, c) in &t.coeffs {
                acc += BigRational::from(c.clone()) * env(x)?;
            }
            Some(acc)
        }
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(c, a, b) => {
                let (a, b) = (term(a, env)?, term(b, env)?);
                match c {
                    Cmp::Eq => a == b,
                    Cmp::Ne => a != b,
                    Cmp::Lt => a < b,
                    Cmp::Le => a <= b,
                    Cmp::Gt => a > b,
                    Cmp::Ge => a >= b,
                }
            }
            Formula::Not(f) => !f.eval_rat(env)?,
            Formula::And(ps) => {
                let mut acc = true;
                for p in ps {
                    acc &= p.eval_rat(env)?;
                }
                acc
            }
            Formula::Or(ps) => {
                let mut acc = false;
                for p in ps {
                    acc |= p.eval_rat(env)?;
                }
                acc
            }
            Formula::Implies(h, c) => !h.eval_rat(env)? || c.eval_rat(env)?,
        })
    }

    /// Substitutes rational values for variables, rescaling each atom by the
    /// least common denominator so the result stays integer-coefficient.
    pub fn subst_rationals(
        &self,
        map: &BTreeMap<String, num_rational::BigRational>,
    ) -> Formula {
        use num_rational::BigRational;
        fn atom(
            cmp: Cmp,
            a: &LinTerm,
            b: &LinTerm,
            map: &BTreeMap<String, BigRational>,
        ) -> Formula {
            let d = a.sub(b);
            let mut denom = BigInt::one();
            for (x, _) in &d.coeffs {
                if let Some(v) = map.get(x) {
                    denom = denom.lcm(v.denom());
                }
            }
            let mut out = LinTerm::constant(&d.constant * &denom);
            for (x, c) in &d.coeffs {
                match map.get(x) {
                    Some(v) => {
                        // c * (p/q) * denom is integral since q | denom.
                        let scaled = c * v.numer() * (&denom / v.denom());
                        out.constant += scaled;
                    }
                    None => {
                        out = out.add(&LinTerm::var(x.clone()).scale(&(c * &denom)));
                    }
                }
            }
            Formula::Atom(cmp, out, LinTerm::zero())
        }
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(c, a, b) => atom(*c, a, b, map),
            Formula::Not(f) => Formula::Not(Box::new(f.subst_rationals(map))),
            Formula::And(ps) => {
                Formula::And(ps.iter().map(|p| p.subst_rationals(map)).collect())
            }
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.subst_rationals(map)).collect()),
            Formula::Implies(h, c) => Formula::Implies(
                Box::new(h.subst_rationals(map)),
                Box::new(c.subst_rationals(map)),
            ),
        }
    }

    /// Total evaluation under an integer valuation; `None` on unbound variables.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<BigInt>) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(c, a, b) => c.apply(&a.eval(env)?, &b.eval(env)?),
            Formula::Not(f) => !f.eval(env)?,
            Formula::And(ps) => {
                let mut acc = true;
                for p in ps {
                    acc &= p.eval(env)?;
                }
                acc
            }
            Formula::Or(ps) => {
                let mut acc = false;
                for p in ps {
                    acc |= p.eval(env)?;
                }
                acc
            }
            Formula::Implies(h, c) => !h.eval(env)? || c.eval(env)?,
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(p: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match p {
                Formula::True => write!(f, "true"),
                Formula::False => write!(f, "false"),
                Formula::Atom(c, a, b) => write!(f, "{a} {} {b}", c.symbol()),
                Formula::Not(inner) => {
                    write!(f, "!(")?;
                    go(inner, f)?;
                    write!(f, ")")
                }
                Formula::And(ps) => join(ps, " && ", f),
                Formula::Or(ps) => join(ps, " || ", f),
                Formula::Implies(h, c) => {
                    write!(f, "(")?;
                    go(h, f)?;
                    write!(f, ") => (")?;
                    go(c, f)?;
                    write!(f, ")")
                }
            }
        }
        fn join(ps: &[Formula], sep: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (k, p) in ps.iter().enumerate() {
                if k > 0 {
                    write!(f, "{sep}")?;
                }
                write!(f, "(")?;
                go(p, f)?;
                write!(f, ")")?;
            }
            Ok(())
        }
        go(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> LinTerm {
        LinTerm::var(s)
    }

    #[test]
    fn linterm_normal_form_drops_zero_coefficients() {
        let x = t("x");
        let sum = x.add(&t("x").scale(&BigInt::from(-1)));
        assert!(sum.coeffs.is_empty());
        assert_eq!(sum, LinTerm::zero());
    }

    #[test]
    fn subst_is_simultaneous() {
        // [y/x, x/y] on x + y must give y + x, not 2x or 2y.
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), t("y"));
        map.insert("y".to_string(), t("x"));
        let sum = t("x").add(&t("y"));
        assert_eq!(sum.subst_all(&map), sum);
        let diff = t("x").sub(&t("y"));
        assert_eq!(diff.subst_all(&map), t("y").sub(&t("x")));
    }

    #[test]
    fn formula_eval_ground() {
        let phi = Formula::and([
            Formula::atom(Cmp::Le, LinTerm::constant(0), t("x")),
            Formula::atom(Cmp::Lt, t("x"), LinTerm::constant(10)),
        ]);
        let env = |name: &str| {
            if name == "x" {
                Some(BigInt::from(3))
            } else {
                None
            }
        };
        assert_eq!(phi.eval(&env), Some(true));
        let env9 = |name: &str| {
            if name == "x" {
                Some(BigInt::from(12))
            } else {
                None
            }
        };
        assert_eq!(phi.eval(&env9), Some(false));
    }

    #[test]
    fn smart_constructors_simplify_units() {
        assert_eq!(Formula::and([Formula::True, Formula::True]), Formula::True);
        assert_eq!(Formula::or([Formula::False]), Formula::False);
        assert_eq!(
            Formula::and([Formula::False, Formula::atom(Cmp::Eq, t("x"), t("y"))]),
            Formula::False
        );
    }
}

//! Canonical forms for comparing generated constraints and clauses against
//! hand-written expectations, independent of atom arrangement.
//!
//! Atoms are moved to `t >= 0` / `t = 0` / `t > 0` form, integer atoms are
//! gcd-tightened, `<=`-pairs collapse to equalities, universals pinned by an
//! equality are substituted away, and conjunction/disjunction lists are
//! flattened, sorted and deduplicated.

use crate::formula::{Cmp, Formula, LinTerm};
use crate::own_infer::{OwnConstraint, TForm, TTerm};
use crate::refine_infer::{HornClause, PredApp};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;

/// Canonical integer atom: `term CMP 0` with CMP in {Ge, Eq, Ne}.
fn canon_atom(cmp: Cmp, lhs: &LinTerm, rhs: &LinTerm) -> Formula {
    let d = lhs.sub(rhs);
    match cmp {
        Cmp::Le => ge_zero(rhs.sub(lhs)),
        Cmp::Lt => ge_zero(rhs.sub(lhs).add_const(-1)),
        Cmp::Ge => ge_zero(d),
        Cmp::Gt => ge_zero(d.add_const(-1)),
        Cmp::Eq => eq_zero(d),
        Cmp::Ne => Formula::Or(vec![
            ge_zero(d.clone().add_const(-1)),
            ge_zero(d.scale(&BigInt::from(-1)).add_const(-1)),
        ]),
    }
}

/// `t >= 0` with coefficients divided by their gcd and the constant
/// floor-tightened (valid over the integers).
fn ge_zero(t: LinTerm) -> Formula {
    if t.coeffs.is_empty() {
        return if t.constant >= BigInt::zero() {
            Formula::True
        } else {
            Formula::False
        };
    }
    let mut g = BigInt::zero();
    for c in t.coeffs.values() {
        g = g.gcd(c);
    }
    let t = if g > BigInt::one() {
        LinTerm {
            constant: t.constant.div_floor(&g),
            coeffs: t.coeffs.iter().map(|(x, c)| (x.clone(), c / &g)).collect(),
        }
    } else {
        t
    };
    Formula::Atom(Cmp::Ge, t, LinTerm::zero())
}

fn eq_zero(t: LinTerm) -> Formula {
    if t.coeffs.is_empty() {
        return if t.constant.is_zero() {
            Formula::True
        } else {
            Formula::False
        };
    }
    let mut g = BigInt::zero();
    for c in t.coeffs.values() {
        g = g.gcd(c);
    }
    let mut t = t;
    if g > BigInt::one() {
        if !(&t.constant % &g).is_zero() {
            return Formula::False;
        }
        t = LinTerm {
            constant: &t.constant / &g,
            coeffs: t.coeffs.iter().map(|(x, c)| (x.clone(), c / &g)).collect(),
        };
    }
    // Sign-normalize on the first coefficient.
    if let Some((_, c)) = t.coeffs.iter().next() {
        if c.is_negative() {
            t = t.scale(&BigInt::from(-1));
        }
    }
    Formula::Atom(Cmp::Eq, t, LinTerm::zero())
}

/// Normalizes a formula over the integers.
pub fn normalize(f: &Formula) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(c, a, b) => match canon_atom(*c, a, b) {
            // A != atom expands to a disjunction; keep it in sorted form.
            Formula::Or(ps) => normalize_or(ps),
            other => other,
        },
        Formula::Not(inner) => match normalize(inner) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(Cmp::Ge, t, z) => {
                debug_assert!(z == LinTerm::zero());
                // not(t >= 0)  <=>  -t - 1 >= 0
                ge_zero(t.scale(&BigInt::from(-1)).add_const(-1))
            }
            Formula::Atom(Cmp::Eq, t, z) => {
                debug_assert!(z == LinTerm::zero());
                normalize(&Formula::Atom(Cmp::Ne, t, LinTerm::zero()))
            }
            Formula::And(ps) => normalize_or(ps.into_iter().map(|p| Formula::not(p)).collect()),
            Formula::Or(ps) => normalize_and(ps.into_iter().map(|p| Formula::not(p)).collect()),
            other => Formula::Not(Box::new(other)),
        },
        Formula::And(ps) => normalize_and(ps.iter().map(normalize).collect()),
        Formula::Or(ps) => normalize_or(ps.iter().map(normalize).collect()),
        Formula::Implies(h, c) => {
            normalize_or(vec![Formula::not(normalize(h)), normalize(c)])
        }
    }
}

fn normalize_and(parts: Vec<Formula>) -> Formula {
    let mut out = BTreeSet::new();
    for p in parts {
        let p = if matches!(p, Formula::And(_) | Formula::Or(_) | Formula::Not(_) | Formula::Implies(_, _)) {
            normalize(&p)
        } else {
            p
        };
        match p {
            Formula::True => {}
            Formula::False => return Formula::False,
            Formula::And(inner) => out.extend(inner),
            other => {
                out.insert(other);
            }
        }
    }
    let out: Vec<Formula> = out.into_iter().collect();
    match out.len() {
        0 => Formula::True,
        1 => out.into_iter().next().unwrap(),
        _ => Formula::And(out),
    }
}

fn normalize_or(parts: Vec<Formula>) -> Formula {
    let mut out = BTreeSet::new();
    for p in parts {
        let p = if matches!(p, Formula::And(_) | Formula::Or(_) | Formula::Not(_) | Formula::Implies(_, _)) {
            normalize(&p)
        } else {
            p
        };
        match p {
            Formula::False => {}
            Formula::True => return Formula::True,
            Formula::Or(inner) => out.extend(inner),
            other => {
                out.insert(other);
            }
        }
    }
    let out: Vec<Formula> = out.into_iter().collect();
    match out.len() {
        0 => Formula::False,
        1 => out.into_iter().next().unwrap(),
        _ => Formula::Or(out),
    }
}

/// Collapses `t >= 0 && -t >= 0` pairs in a conjunction into `t = 0`.
fn pair_to_equality(f: Formula) -> Formula {
    let Formula::And(parts) = f else { return f };
    let mut atoms: Vec<Formula> = parts;
    let mut out: Vec<Formula> = Vec::new();
    let mut used = vec![false; atoms.len()];
    for k in 0..atoms.len() {
        if used[k] {
            continue;
        }
        if let Formula::Atom(Cmp::Ge, t, _) = &atoms[k] {
            let neg = t.scale(&BigInt::from(-1));
            let partner = atoms.iter().enumerate().position(|(j, a)| {
                !used[j] && j != k && matches!(a, Formula::Atom(Cmp::Ge, u, _) if *u == neg)
            });
            if let Some(j) = partner {
                used[k] = true;
                used[j] = true;
                out.push(eq_zero(t.clone()));
                continue;
            }
        }
        used[k] = true;
        out.push(atoms[k].clone());
    }
    atoms.clear();
    normalize_and(out)
}

/// Substitutes universals pinned by an equality `x = t` (with `x` not in
/// `t`) through the whole clause, repeatedly.
fn pin_equalities(
    mut constraint: Formula,
    universals: &mut Vec<String>,
    apps: &mut [PredApp],
) -> Formula {
    loop {
        constraint = pair_to_equality(normalize(&constraint));
        let atoms: Vec<Formula> = match &constraint {
            Formula::And(ps) => ps.clone(),
            other => vec![other.clone()],
        };
        let mut pinned: Option<(String, LinTerm)> = None;
        for a in &atoms {
            if let Formula::Atom(Cmp::Eq, t, _) = a {
                // Find a universal with coefficient +-1.
                for x in universals.iter() {
                    if let Some(c) = t.coeffs.get(x) {
                        if c.abs().is_one() {
                            // x = (c*x - t)/c  restated: solve t = 0 for x.
                            let mut rest = t.clone();
                            rest.coeffs.remove(x);
                            let solution = if c.is_one() {
                                rest.scale(&BigInt::from(-1))
                            } else {
                                rest
                            };
                            pinned = Some((x.clone(), solution));
                            break;
                        }
                    }
                }
            }
            if pinned.is_some() {
                break;
            }
        }
        let Some((x, sol)) = pinned else {
            return constraint;
        };
        universals.retain(|u| *u != x);
        for app in apps.iter_mut() {
            for arg in &mut app.args {
                *arg = arg.subst(&x, &sol);
            }
        }
        constraint = constraint.subst(&x, &sol);
    }
}

/// A clause in comparable form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NormalClause {
    pub body_preds: Vec<(usize, Vec<LinTerm>)>,
    pub constraint: Formula,
    pub head: Option<(usize, Vec<LinTerm>)>,
}

pub fn normalize_clause(c: &HornClause) -> NormalClause {
    let mut universals = c.universals.clone();
    let mut apps: Vec<PredApp> = c
        .body_preds
        .iter()
        .cloned()
        .chain(c.head.iter().cloned())
        .collect();
    let constraint = pin_equalities(c.constraint.clone(), &mut universals, &mut apps);
    let head = c.head.as_ref().map(|_| {
        let app = apps.pop().unwrap();
        (app.pred, app.args)
    });
    let mut body_preds: Vec<(usize, Vec<LinTerm>)> =
        apps.into_iter().map(|a| (a.pred, a.args)).collect();
    body_preds.sort();
    NormalClause {
        body_preds,
        constraint,
        head,
    }
}

/// Set comparison of two clause lists after normalization; returns the
/// differences for diagnostics.
pub fn diff_clause_sets(left: &[HornClause], right: &[HornClause]) -> (Vec<usize>, Vec<usize>) {
    let ln: Vec<NormalClause> = left.iter().map(normalize_clause).collect();
    let rn: Vec<NormalClause> = right.iter().map(normalize_clause).collect();
    let only_left: Vec<usize> = ln
        .iter()
        .enumerate()
        .filter(|(_, c)| !rn.contains(c))
        .map(|(k, _)| k)
        .collect();
    let only_right: Vec<usize> = rn
        .iter()
        .enumerate()
        .filter(|(_, c)| !ln.contains(c))
        .map(|(k, _)| k)
        .collect();
    (only_left, only_right)
}

/// Canonical form of an ownership constraint body, with atoms normalized
/// over the mixed integer/rational vocabulary (no integer tightening on
/// atoms that mention rational unknowns).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NormalTForm {
    Atom(Cmp, TTerm),
    And(Vec<NormalTForm>),
    Or(Vec<NormalTForm>),
}

pub fn normalize_tform(f: &TForm, is_rat: &dyn Fn(&str) -> bool) -> NormalTForm {
    match f {
        TForm::Atom(cmp, a, b) => {
            let d = a.sub(b);
            let has_rat = d.units.keys().any(|u| is_rat(u));
            let (cmp, mut d) = match cmp {
                Cmp::Le => (Cmp::Ge, d.neg()),
                Cmp::Lt => (Cmp::Gt, d.neg()),
                other => (*other, d),
            };
            let cmp = if cmp == Cmp::Gt && !has_rat {
                d.constant -= 1;
                Cmp::Ge
            } else {
                cmp
            };
            let mut d = d;
            if cmp == Cmp::Eq {
                let first_neg = d
                    .units
                    .values()
                    .chain(d.products.values())
                    .next()
                    .map(|c| c.is_negative())
                    .unwrap_or(false);
                if first_neg {
                    d = d.neg();
                }
            }
            NormalTForm::Atom(cmp, d)
        }
        TForm::And(ps) => {
            let mut out: Vec<NormalTForm> =
                ps.iter().map(|p| normalize_tform(p, is_rat)).collect();
            out.sort();
            out.dedup();
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                NormalTForm::And(out)
            }
        }
        TForm::Or(ps) => {
            let mut out: Vec<NormalTForm> =
                ps.iter().map(|p| normalize_tform(p, is_rat)).collect();
            out.sort();
            out.dedup();
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                NormalTForm::Or(out)
            }
        }
    }
}

/// Canonical form of a whole ownership constraint.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NormalOwn {
    pub universals: Vec<String>,
    pub guard: Formula,
    pub body: NormalTForm,
}

pub fn normalize_own(c: &OwnConstraint, is_rat: &dyn Fn(&str) -> bool) -> NormalOwn {
    NormalOwn {
        universals: c.universals.clone(),
        guard: normalize(&c.guard),
        body: normalize_tform(&c.body, is_rat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> LinTerm {
        LinTerm::var(x)
    }

    #[test]
    fn strict_and_nonstrict_forms_agree_over_integers() {
        // 0 < i  vs  1 <= i
        let a = Formula::atom(Cmp::Lt, LinTerm::constant(0), v("i"));
        let b = Formula::atom(Cmp::Le, LinTerm::constant(1), v("i"));
        assert_eq!(normalize(&a), normalize(&b));
        // i != 0  vs  i < 0 || i > 0
        let c = Formula::atom(Cmp::Ne, v("i"), LinTerm::constant(0));
        let d = Formula::or([
            Formula::atom(Cmp::Lt, v("i"), LinTerm::constant(0)),
            Formula::atom(Cmp::Gt, v("i"), LinTerm::constant(0)),
        ]);
        assert_eq!(normalize(&c), normalize(&d));
    }

    #[test]
    fn gcd_tightening() {
        // 2x >= 1  <=>  x >= 1
        let a = Formula::atom(Cmp::Ge, v("x").scale(&BigInt::from(2)), LinTerm::constant(1));
        let b = Formula::atom(Cmp::Ge, v("x"), LinTerm::constant(1));
        assert_eq!(normalize(&a), normalize(&b));
    }

    #[test]
    fn le_pair_becomes_equality_and_pins() {
        // 0 <= i && i <= 0 && P-ish atom i = nu  pins i to 0.
        let c = HornClause {
            universals: vec!["i".into(), "nu".into()],
            body_preds: vec![PredApp {
                pred: 0,
                args: vec![v("i"), v("nu")],
            }],
            constraint: Formula::and([
                Formula::atom(Cmp::Le, LinTerm::constant(0), v("i")),
                Formula::atom(Cmp::Le, v("i"), LinTerm::constant(0)),
            ]),
            head: Some(PredApp {
                pred: 1,
                args: vec![v("i"), v("nu")],
            }),
        };
        let n = normalize_clause(&c);
        assert_eq!(n.body_preds[0].1[0], LinTerm::constant(0));
        assert_eq!(n.head.as_ref().unwrap().1[0], LinTerm::constant(0));
        assert_eq!(n.constraint, Formula::True);
    }
}

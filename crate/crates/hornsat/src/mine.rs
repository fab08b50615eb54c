//! Candidate fact mining.
//!
//! Every predicate gets a pool of candidate facts over its formal argument
//! slots `a0..a(k-1)`: comparisons between argument pairs, comparisons
//! against constants mined from the script, and guarded variants `guard \/
//! fact` where the guards come from the out-of-interval clauses the script
//! carries (plus written-index guards `a_j != c`).

use crate::parse::{HornSystem, ParsedClause};
use impverif::formula::{Cmp, Formula, LinTerm};
use num_bigint::BigInt;
use std::collections::BTreeSet;

/// Formal argument-slot variable names for candidate formulas.
pub fn slot(j: usize) -> String {
    format!("!a{j}")
}

/// One candidate fact for a predicate, as a formula over its slots.
pub type Candidate = Formula;

/// Interval guard mined from an out-of-bounds clause: the slot index plus
/// the bounds over the slots.
#[derive(Debug, Clone)]
struct MinedGuard {
    formula: Formula,
}

pub fn candidate_pool(sys: &HornSystem) -> Vec<Vec<Candidate>> {
    let consts = useful_constants(sys);
    let mut pools = Vec::new();
    for (p, pred) in sys.preds.iter().enumerate() {
        let mut atoms: Vec<Formula> = Vec::new();
        let k = pred.arity;
        for j in 0..k {
            let aj = LinTerm::var(slot(j));
            for l in 0..k {
                if l == j {
                    continue;
                }
                let al = LinTerm::var(slot(l));
                atoms.push(Formula::atom(Cmp::Eq, aj.clone(), al.clone()));
                atoms.push(Formula::atom(Cmp::Le, aj.clone(), al.clone()));
            }
            for c in &consts {
                atoms.push(Formula::atom(Cmp::Eq, aj.clone(), LinTerm::constant(c.clone())));
                atoms.push(Formula::atom(Cmp::Le, aj.clone(), LinTerm::constant(c.clone())));
                atoms.push(Formula::atom(Cmp::Ge, aj.clone(), LinTerm::constant(c.clone())));
            }
        }
        // Pairwise-distinct equalities are symmetric; Le covers both
        // directions, so the pool above already spans the order relations.
        let guards = mine_guards(sys, p);
        let mut pool: Vec<Candidate> = Vec::new();
        for g in &guards {
            for atom in &atoms {
                pool.push(Formula::or([g.formula.clone(), atom.clone()]));
            }
        }
        pool.extend(atoms);
        pools.push(pool);
    }
    pools
}

/// Small constants plus everything literal in the script, capped to avoid
/// pool explosions on scripts full of magic numbers.
fn useful_constants(sys: &HornSystem) -> Vec<BigInt> {
    let mut set: BTreeSet<BigInt> = [0, 1, -1].into_iter().map(BigInt::from).collect();
    for c in &sys.constants {
        set.insert(c.clone());
        set.insert(c + 1);
        set.insert(c - 1);
    }
    let mut out: Vec<BigInt> = set.into_iter().collect();
    if out.len() > 24 {
        // Keep the extremes and the small ones.
        out.sort_by_key(|c| c.magnitude().clone());
        out.truncate(24);
        out.sort();
    }
    out
}

/// Guards from clauses of the shape `... (or (< a_j LO) (> a_j HI)) => P(args)`
/// with no body predicates and distinct-variable head arguments, rewritten
/// over the slots; plus written-index guards `a_j != c` for small constants.
fn mine_guards(sys: &HornSystem, pred: usize) -> Vec<MinedGuard> {
    let mut out: Vec<MinedGuard> = Vec::new();
    let mut seen = BTreeSet::new();
    for clause in &sys.clauses {
        let Some(head) = &clause.head else { continue };
        if head.pred != pred || !clause.body_preds.is_empty() {
            continue;
        }
        let Some(to_slot) = slot_map(clause, head) else {
            continue;
        };
        for guard in disjunctive_parts(&clause.constraint) {
            let rewritten = guard.subst_all(&to_slot);
            // Only keep guards entirely over the slots.
            if rewritten
                .free_vars()
                .iter()
                .all(|v| v.starts_with("!a"))
            {
                let key = format!("{rewritten}");
                if seen.insert(key) {
                    out.push(MinedGuard { formula: rewritten });
                }
            }
        }
    }
    // Written-cell style guards: a_j != 0 (and against other tiny indices).
    let arity = sys.preds[pred].arity;
    for j in 0..arity {
        for c in [0i64, 1] {
            out.push(MinedGuard {
                formula: Formula::atom(
                    Cmp::Ne,
                    LinTerm::var(slot(j)),
                    LinTerm::constant(c),
                ),
            });
        }
    }
    out.truncate(12);
    out
}

/// The disjunction subformulas of a constraint (conjunction-level parts
/// that are `or`s of inequalities).
fn disjunctive_parts(f: &Formula) -> Vec<Formula> {
    let parts: Vec<&Formula> = match f {
        Formula::And(ps) => ps.iter().collect(),
        other => vec![other],
    };
    parts
        .into_iter()
        .filter(|p| matches!(p, Formula::Or(_)))
        .cloned()
        .collect()
}

/// Head argument positions as a substitution var -> slot, when every head
/// argument is a distinct plain variable.
fn slot_map(
    clause: &ParsedClause,
    head: &crate::parse::App,
) -> Option<std::collections::BTreeMap<String, LinTerm>> {
    let mut map = std::collections::BTreeMap::new();
    let mut used = BTreeSet::new();
    for (j, arg) in head.args.iter().enumerate() {
        let v = arg.as_var()?;
        if !used.insert(v.to_string()) {
            return None;
        }
        map.insert(v.to_string(), LinTerm::var(slot(j)));
    }
    let _ = clause;
    Some(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_script;

    #[test]
    fn guards_are_mined_from_outside_clauses() {
        let script = r#"
(declare-fun P (Int Int Int) Bool)
(assert (forall ((n Int) (i Int) (v Int)) (=> (or (< i 0) (> i (- n 1))) (P n i v))))
"#;
        let sys = parse_script(script).unwrap();
        let pools = candidate_pool(&sys);
        // Some guarded candidate mentioning all three slots must exist.
        let found = pools[0].iter().any(|c| {
            let fv = c.free_vars();
            fv.contains("!a0") && fv.contains("!a1") && fv.contains("!a2")
        });
        assert!(found, "expected interval-guarded candidates");
    }
}

//! Worklist Houdini over the mined candidate pools.

use crate::mine::{candidate_pool, slot, Candidate};
use crate::parse::{App, HornSystem, ParsedClause};
use crate::session::{QueryResult, Session};
use impverif::formula::{Formula, LinTerm};
use impverif::solver_io::{formula_to_smt, smt_symbol, ModelValue, SatResult, SolverIo, Sort};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Quantifier-free query backend: one persistent incremental session when
/// the solver supports it, batch subprocess calls otherwise.
struct QfBackend<'a> {
    session: Option<Session>,
    batch: &'a SolverIo,
}

impl<'a> QfBackend<'a> {
    fn new(solver: &'a SolverIo) -> Self {
        let session = solver.config().smt_cmd.as_ref().and_then(|cmd| {
            let ms = solver.config().smt_timeout.as_millis().min(60_000) as u64;
            Session::start(cmd, ms).ok()
        });
        QfBackend {
            session,
            batch: solver,
        }
    }

    fn check(&mut self, vars: &[String], query: &Formula) -> Violation {
        if let Some(session) = self.session.as_mut() {
            match session.check(vars, query) {
                Ok(QueryResult::Unsat) => return Violation::None,
                Ok(QueryResult::Sat(model)) => {
                    let mut vals = BTreeMap::new();
                    for x in vars {
                        vals.insert(
                            x.clone(),
                            model.get(x).cloned().unwrap_or_else(|| BigInt::from(0)),
                        );
                    }
                    return Violation::Model(vals);
                }
                Ok(QueryResult::Other(r)) => return Violation::Undecided(r),
                Err(_) => {
                    // Session broke; continue with batch calls.
                    self.session = None;
                }
            }
        }
        let decls: Vec<(String, Sort)> = vars.iter().map(|x| (x.clone(), Sort::Int)).collect();
        match self.batch.check_sat_qf(&decls, &[query.clone()]) {
            SatResult::Unsat => Violation::None,
            SatResult::Sat(model) => {
                let mut vals = BTreeMap::new();
                for x in vars {
                    let v = model
                        .get(x)
                        .and_then(ModelValue::as_int)
                        .unwrap_or_else(|| BigInt::from(0));
                    vals.insert(x.clone(), v);
                }
                Violation::Model(vals)
            }
            SatResult::Unknown(r) => Violation::Undecided(r),
            SatResult::Error(e) => Violation::Undecided(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    /// Satisfiable, with the inductive assignment printed as define-funs.
    Sat(String),
    Unknown(String),
}

/// Safety cap on solver queries; candidate drops are bulk so realistic runs
/// use far fewer.
const MAX_QUERIES: usize = 20_000;

pub fn solve_system(sys: &HornSystem, solver: &SolverIo) -> Answer {
    let mut backend = QfBackend::new(solver);
    let mut pools: Vec<Vec<Candidate>> = candidate_pool(sys);
    let debug = std::env::var("HORNSAT_DEBUG").is_ok();
    if debug {
        let total: usize = pools.iter().map(Vec::len).sum();
        eprintln!("[hornsat] {} predicates, {} candidates", sys.preds.len(), total);
    }

    // Definite (non-goal) clauses drive the weakening loop.
    let definite: Vec<usize> = (0..sys.clauses.len())
        .filter(|k| sys.clauses[*k].head.is_some())
        .collect();
    let mut queue: VecDeque<usize> = definite.iter().copied().collect();
    let mut queued: BTreeSet<usize> = definite.iter().copied().collect();
    let mut queries = 0usize;

    while let Some(k) = queue.pop_front() {
        queued.remove(&k);
        let clause = &sys.clauses[k];
        let head = clause.head.as_ref().unwrap();
        if pools[head.pred].is_empty() {
            continue;
        }
        loop {
            if queries >= MAX_QUERIES {
                return Answer::Unknown("query budget exhausted".into());
            }
            queries += 1;
            match violation_model(clause, &pools, &mut backend) {
                Violation::None => break,
                Violation::Model(model) => {
                    let slots = head_slot_values(head, &model);
                    let before = pools[head.pred].len();
                    pools[head.pred].retain(|cand| {
                        let env = |x: &str| slots.get(x).cloned();
                        cand.eval(&env) != Some(false)
                    });
                    let after = pools[head.pred].len();
                    if debug {
                        eprintln!(
                            "[hornsat] clause {k}: dropped {} candidates of {} at {}",
                            before - after,
                            before,
                            sys.preds[head.pred].name
                        );
                    }
                    if after == before {
                        // The model no longer falsifies anything (can happen
                        // when evaluation hits an unconstrained variable);
                        // drop everything to stay sound and move on.
                        pools[head.pred].clear();
                    }
                    // Clauses reading this predicate must be rechecked.
                    for j in &definite {
                        let c = &sys.clauses[*j];
                        let reads = c.body_preds.iter().any(|a| a.pred == head.pred);
                        if reads && !queued.contains(j) {
                            queue.push_back(*j);
                            queued.insert(*j);
                        }
                    }
                    if pools[head.pred].is_empty() {
                        break;
                    }
                }
                Violation::Undecided(r) => {
                    return Answer::Unknown(format!("clause check undecided: {r}"))
                }
            }
        }
    }

    // Inductive now; the goal clauses decide the answer.
    for (k, clause) in sys.clauses.iter().enumerate() {
        if clause.head.is_some() {
            continue;
        }
        if queries >= MAX_QUERIES {
            return Answer::Unknown("query budget exhausted".into());
        }
        queries += 1;
        match violation_model(clause, &pools, &mut backend) {
            Violation::None => {}
            Violation::Model(_) => {
                return Answer::Unknown(format!(
                    "goal clause {k} not provable from the learned invariants"
                ))
            }
            Violation::Undecided(r) => {
                return Answer::Unknown(format!("goal check undecided: {r}"))
            }
        }
    }
    if debug {
        eprintln!("[hornsat] proved with {queries} queries");
    }
    Answer::Sat(render_model(sys, &pools))
}

enum Violation {
    None,
    Model(BTreeMap<String, BigInt>),
    Undecided(String),
}

/// Asks for universal values satisfying the body under the current
/// assignment but violating the head.
fn violation_model(
    clause: &ParsedClause,
    pools: &[Vec<Candidate>],
    backend: &mut QfBackend<'_>,
) -> Violation {
    let mut parts = vec![clause.constraint.clone()];
    for app in &clause.body_preds {
        parts.push(instantiate(&pools[app.pred], &app.args));
    }
    match &clause.head {
        Some(app) => parts.push(Formula::not(instantiate(&pools[app.pred], &app.args))),
        None => {}
    }
    let query = Formula::and(parts);
    let mut free = query.free_vars();
    // Universals may shadow; anything free in the clause is quantified.
    for u in &clause.universals {
        free.insert(u.clone());
    }
    let vars: Vec<String> = free.into_iter().collect();
    if vars.is_empty() {
        return match query.eval(&|_| None) {
            Some(true) => Violation::Model(BTreeMap::new()),
            Some(false) => Violation::None,
            None => Violation::Undecided("unbound variable in ground clause".into()),
        };
    }
    backend.check(&vars, &query)
}

/// The conjunction of a predicate's surviving candidates at an argument
/// vector.
fn instantiate(pool: &[Candidate], args: &[LinTerm]) -> Formula {
    let map: BTreeMap<String, LinTerm> = args
        .iter()
        .enumerate()
        .map(|(j, t)| (slot(j), t.clone()))
        .collect();
    Formula::and(pool.iter().map(|c| c.subst_all(&map)))
}

/// Evaluates the head arguments under a model into slot values.
fn head_slot_values(head: &App, model: &BTreeMap<String, BigInt>) -> BTreeMap<String, BigInt> {
    let mut out = BTreeMap::new();
    for (j, arg) in head.args.iter().enumerate() {
        let env = |x: &str| model.get(x).cloned();
        if let Some(v) = arg.eval(&env) {
            out.insert(slot(j), v);
        }
    }
    out
}

/// Renders the assignment HoIce-style: a `(model ...)` block of define-funs.
fn render_model(sys: &HornSystem, pools: &[Vec<Candidate>]) -> String {
    use std::fmt::Write;
    let mut s = String::from("(model\n");
    for (p, pred) in sys.preds.iter().enumerate() {
        let binders: Vec<String> = (0..pred.arity)
            .map(|j| format!("({} Int)", smt_symbol(&slot(j))))
            .collect();
        let body = Formula::and(pools[p].iter().cloned());
        writeln!(
            s,
            "  (define-fun {} ({}) Bool {})",
            smt_symbol(&pred.name),
            binders.join(" "),
            formula_to_smt(&body, &BTreeSet::new())
        )
        .unwrap();
    }
    s.push_str(")\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_script;
    use impverif::solver_io::SolverConfig;

    fn z3_solver() -> Option<SolverIo> {
        let cfg = SolverConfig {
            smt_cmd: SolverConfig::parse_cmd("z3"),
            ..Default::default()
        };
        which_z3().then(|| SolverIo::new(cfg).unwrap())
    }

    fn which_z3() -> bool {
        std::process::Command::new("z3")
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    }

    #[test]
    fn proves_a_small_invariant() {
        let Some(solver) = z3_solver() else {
            eprintln!("skipped: no z3 on PATH");
            return;
        };
        let script = r#"
(declare-fun P (Int Int) Bool)
(assert (forall ((n Int) (v Int)) (=> (and (> n 0) (= v 0)) (P n v))))
(assert (forall ((n Int) (v Int)) (=> (and (P n v) (> n 0)) (P (- n 1) v))))
(assert (forall ((n Int) (v Int)) (=> (and (P n v) (not (= v 0))) false)))
"#;
        let sys = parse_script(script).unwrap();
        match solve_system(&sys, &solver) {
            Answer::Sat(model) => assert!(model.contains("define-fun P")),
            Answer::Unknown(r) => panic!("expected sat, got unknown: {r}"),
        }
    }

    #[test]
    fn does_not_claim_sat_on_contradiction() {
        let Some(solver) = z3_solver() else {
            eprintln!("skipped: no z3 on PATH");
            return;
        };
        let script = r#"
(declare-fun P (Int) Bool)
(assert (forall ((v Int)) (=> (= v 1) (P v))))
(assert (forall ((v Int)) (=> (and (P v) (= v 1)) false)))
"#;
        let sys = parse_script(script).unwrap();
        assert!(matches!(solve_system(&sys, &solver), Answer::Unknown(_)));
    }
}

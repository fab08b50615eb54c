//! Exists-forall solving by sampling-based under-approximation.
//!
//! Each round instantiates every constraint's universals at sampled points
//! (plus all counterexamples collected so far), solves the resulting
//! quantifier-free system for the unknowns, then checks every original
//! constraint under the candidate by querying for a counterexample to its
//! negation. Counterexamples feed the next round's instantiation set.

use super::{ownership_bounds, CoeffKind, OwnConstraint, TForm, TTerm, UnknownRegistry};
use crate::formula::{Cmp, Formula, LinTerm};
use crate::solver_io::{ModelValue, SatResult, SolverIo, Sort};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub samples_per_round: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            samples_per_round: 8,
            max_rounds: 40,
            seed: 0,
        }
    }
}

/// A verified assignment for the template unknowns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OwnSolution {
    pub coeffs: BTreeMap<String, BigInt>,
    pub owns: BTreeMap<String, BigRational>,
}

#[derive(Debug)]
pub enum OwnOutcome {
    Solved(OwnSolution),
    Unknown { reason: String },
    SolverError(String),
}

/// Sampling window for universal values, biased toward small indices.
const SAMPLE_LO: i64 = -8;
const SAMPLE_HI: i64 = 64;
const SAMPLE_ATTEMPTS: usize = 200;
/// Random samples beyond this many per constraint stop being added
/// (counterexamples are always kept).
const RANDOM_SAMPLE_CAP: usize = 48;
/// Grid coordinates seeded deterministically around the interval
/// boundaries, where template shapes are decided.
const GRID: [i64; 8] = [-2, -1, 0, 1, 2, 3, 5, 8];

pub fn solve_exists_forall(
    constraints: &[OwnConstraint],
    unknowns: &UnknownRegistry,
    params: &SolveParams,
    solver: &SolverIo,
) -> OwnOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let decls: Vec<(String, Sort)> = unknowns
        .coeff_syms
        .iter()
        .map(|c| (c.clone(), Sort::Int))
        .chain(unknowns.own_syms.iter().map(|o| (o.clone(), Sort::Rat)))
        .collect();
    let bounds = ownership_bounds(unknowns);

    // Unknown integer coefficients are searched under escalating magnitude
    // bounds: small coefficients generalize far better from finitely many
    // instantiation points. Constant terms must reach the program's literal
    // magnitudes (array bounds), variable coefficients stay small. A level
    // is abandoned only when its under-approximation is unsatisfiable, so
    // the final, unbounded level preserves unsatisfiability detection.
    let max_const = constraints
        .iter()
        .map(max_body_constant)
        .max()
        .unwrap_or_default();
    let const_bound = BigInt::from(8).max(max_const * 2 + 2);
    // (var-coefficient bound, scoped-constant bound, ground-constant bound)
    let levels: [Option<(BigInt, BigInt, BigInt)>; 3] = [
        Some((BigInt::from(1), const_bound.clone(), const_bound.clone())),
        Some((BigInt::from(16), const_bound.clone() * 32, const_bound.clone() * 32)),
        None,
    ];
    let mut level = 0usize;
    // Spikes well beyond the constant bound kill spurious coefficients on
    // scope variables the intervals cannot actually depend on.
    let spike = &const_bound + 500;

    // Per-constraint instantiation sets; sampling only ever adds points.
    // Heavier (more disjunctive) bodies get smaller seed budgets to keep the
    // synthesis queries tractable.
    let mut instantiations: Vec<Vec<BTreeMap<String, BigInt>>> =
        vec![Vec::new(); constraints.len()];
    for (k, c) in constraints.iter().enumerate() {
        let weight = body_atoms(&c.body);
        let (grid_cap, spike_mults): (usize, &[i64]) = if weight > 40 {
            (6, &[1, 16])
        } else {
            (24, &[1, 4, 16])
        };
        seed_grid_points(c, grid_cap, &mut instantiations[k]);
        seed_axis_spikes(c, &spike, spike_mults, &mut instantiations[k]);
        sample_points(
            c,
            params.samples_per_round.min(4),
            &mut rng,
            &mut instantiations[k],
        );
        instantiations[k].sort();
        instantiations[k].dedup();
    }

    let debug = std::env::var("IMPVERIF_DEBUG").is_ok();
    let mut round = 0;
    while round < params.max_rounds {
        round += 1;
        // Synthesis: solve the instantiated under-approximation.
        let mut assertions = bounds.clone();
        if let Some((var_bound, scoped_bound, ground_bound)) = &levels[level] {
            for c in &unknowns.coeff_syms {
                let b = match unknowns.coeff_kinds.get(c) {
                    Some(CoeffKind::VarCoeff) => var_bound,
                    Some(CoeffKind::ScopedConst) => scoped_bound,
                    Some(CoeffKind::GroundConst) | None => ground_bound,
                };
                assertions.push(Formula::atom(
                    Cmp::Le,
                    LinTerm::var(c.clone()),
                    LinTerm::constant(b.clone()),
                ));
                assertions.push(Formula::atom(
                    Cmp::Ge,
                    LinTerm::var(c.clone()),
                    LinTerm::constant(-b.clone()),
                ));
            }
        }
        for (k, c) in constraints.iter().enumerate() {
            for vals in &instantiations[k] {
                for f in instantiate_constraint(c, vals) {
                    match f {
                        Formula::And(parts) => assertions.extend(parts),
                        other => assertions.push(other),
                    }
                }
            }
        }
        if debug {
            let total: usize = instantiations.iter().map(Vec::len).sum();
            eprintln!(
                "[own] round {round} (bound level {level}): {} constraints, {} points",
                constraints.len(),
                total
            );
        }
        let t = std::time::Instant::now();
        let synth = solver.check_sat_qf(&decls, &assertions);
        if debug {
            eprintln!("[own] synthesis took {:?}", t.elapsed());
        }
        let candidate = match synth {
            SatResult::Sat(model) => model_to_solution(&model, unknowns),
            SatResult::Unsat => {
                if level + 1 < levels.len() {
                    // Only the coefficient bounds can be at fault; widen.
                    level += 1;
                    continue;
                }
                return OwnOutcome::Unknown {
                    reason: "ownership constraints unsatisfiable (under-approximation is unsat)"
                        .into(),
                };
            }
            SatResult::Unknown(r) => {
                return OwnOutcome::Unknown {
                    reason: format!("synthesis query not decided: {r}"),
                }
            }
            SatResult::Error(e) => return OwnOutcome::SolverError(e),
        };

        // Verification: look for counterexamples, all constraints in one
        // batched query.
        let cexes = match verify_candidate(constraints, &candidate, solver) {
            VerifyBatch::AllValid => Vec::new(),
            VerifyBatch::Counterexamples(cexes) => cexes,
            VerifyBatch::Undecided(r) => {
                return OwnOutcome::Unknown {
                    reason: format!("verification not decided: {r}"),
                }
            }
            VerifyBatch::Error(e) => return OwnOutcome::SolverError(e),
        };
        if cexes.is_empty() {
            // Independent per-constraint re-verification before reporting
            // success.
            for c in constraints {
                match find_counterexample(c, &candidate, solver) {
                    CexResult::None => {}
                    other => {
                        return OwnOutcome::SolverError(format!(
                            "solution failed re-verification on `{}`: {other:?}",
                            c.label
                        ))
                    }
                }
            }
            return OwnOutcome::Solved(candidate);
        }
        for (k, point) in cexes {
            if debug {
                eprintln!(
                    "[own] counterexample for `{}`: {point:?}",
                    constraints[k].label
                );
            }
            let mut point = point;
            if let Some(exp) = &constraints[k].index_expansion {
                // The expansion is exact in the index dimension; only the
                // scope part of a counterexample matters.
                point.remove(&exp.var);
            }
            // The counterexample, its guard-satisfying neighbors, and a
            // couple of fresh samples refine the approximation.
            for neighbor in neighborhood(&constraints[k], &point) {
                instantiations[k].push(neighbor);
            }
            instantiations[k].push(point);
            if instantiations[k].len() < RANDOM_SAMPLE_CAP {
                sample_points(&constraints[k], 2, &mut rng, &mut instantiations[k]);
            }
            instantiations[k].sort();
            instantiations[k].dedup();
        }
    }
    OwnOutcome::Unknown {
        reason: "round budget exhausted".into(),
    }
}

enum VerifyBatch {
    AllValid,
    /// Violated constraint indices with a violating universal valuation.
    Counterexamples(Vec<(usize, BTreeMap<String, BigInt>)>),
    Undecided(String),
    Error(String),
}

/// Checks every constraint under the candidate in a single query: each
/// constraint's negation gets apart-renamed universals and a marker
/// variable, and a model delivers one counterexample per violated
/// constraint.
fn verify_candidate(
    constraints: &[OwnConstraint],
    sol: &OwnSolution,
    solver: &SolverIo,
) -> VerifyBatch {
    let mut decls: Vec<(String, Sort)> = Vec::new();
    let mut markers: Vec<String> = Vec::new();
    let mut violations = Vec::new();
    let mut ground_violations: Vec<usize> = Vec::new();
    for (k, c) in constraints.iter().enumerate() {
        let body = c.body.subst_solution(sol);
        let negated = Formula::and([c.guard.clone(), Formula::not(body)]);
        if c.universals.is_empty() {
            match negated.eval(&|_| None) {
                Some(true) => ground_violations.push(k),
                Some(false) => {}
                None => return VerifyBatch::Undecided("free variable in ground constraint".into()),
            }
            continue;
        }
        let rename: BTreeMap<String, LinTerm> = c
            .universals
            .iter()
            .map(|x| (x.clone(), LinTerm::var(format!("u{k}!{x}"))))
            .collect();
        for x in &c.universals {
            decls.push((format!("u{k}!{x}"), Sort::Int));
        }
        // marker = 1 iff this constraint is violated at its point
        let marker = format!("viol!{k}");
        decls.push((marker.clone(), Sort::Int));
        let renamed = negated.subst_all(&rename);
        violations.push((k, marker.clone(), renamed));
        markers.push(marker);
    }
    if !ground_violations.is_empty() {
        return VerifyBatch::Counterexamples(
            ground_violations
                .into_iter()
                .map(|k| (k, BTreeMap::new()))
                .collect(),
        );
    }
    if violations.is_empty() {
        return VerifyBatch::AllValid;
    }
    let mut assertions: Vec<Formula> = Vec::new();
    for (_, marker, renamed) in &violations {
        // 0 <= marker <= 1, and marker = 1 implies the violation holds.
        assertions.push(Formula::atom(
            Cmp::Ge,
            LinTerm::var(marker.clone()),
            LinTerm::constant(0),
        ));
        assertions.push(Formula::atom(
            Cmp::Le,
            LinTerm::var(marker.clone()),
            LinTerm::constant(1),
        ));
        assertions.push(Formula::or([
            Formula::atom(Cmp::Le, LinTerm::var(marker.clone()), LinTerm::constant(0)),
            renamed.clone(),
        ]));
    }
    // At least one violation, and as many as possible is not required;
    // maximizing would need an optimizing solver. One model gives every
    // marker the solver chose to set.
    assertions.push(Formula::atom(
        Cmp::Ge,
        markers
            .iter()
            .fold(LinTerm::zero(), |acc, m| acc.add(&LinTerm::var(m.clone()))),
        LinTerm::constant(1),
    ));
    match solver.check_sat_qf(&decls, &assertions) {
        SatResult::Unsat => VerifyBatch::AllValid,
        SatResult::Sat(model) => {
            let mut cexes = Vec::new();
            for (k, marker, _) in &violations {
                let set = model
                    .get(marker)
                    .and_then(ModelValue::as_int)
                    .map(|v| v > BigInt::from(0))
                    .unwrap_or(false);
                if !set {
                    continue;
                }
                let mut point = BTreeMap::new();
                for x in &constraints[*k].universals {
                    let v = model
                        .get(&format!("u{k}!{x}"))
                        .and_then(ModelValue::as_int)
                        .unwrap_or_else(|| BigInt::from(0));
                    point.insert(x.clone(), v);
                }
                // The model only guarantees violations where the marker is
                // set; double-check the point actually violates (markers can
                // be set spuriously only the other way, but be safe).
                let env = |name: &str| point.get(name).cloned();
                let body = constraints[*k].body.subst_solution(sol);
                let holds = Formula::and([
                    constraints[*k].guard.clone(),
                    Formula::not(body),
                ])
                .eval(&env);
                if holds == Some(true) {
                    cexes.push((*k, point));
                }
            }
            if cexes.is_empty() {
                VerifyBatch::Undecided("model without a usable counterexample".into())
            } else {
                VerifyBatch::Counterexamples(cexes)
            }
        }
        SatResult::Unknown(r) => VerifyBatch::Undecided(r),
        SatResult::Error(e) => VerifyBatch::Error(e),
    }
}

#[derive(Debug)]
enum CexResult {
    None,
    Found(BTreeMap<String, BigInt>),
    Undecided(String),
    Error(String),
}

/// Asks for a universal valuation satisfying the guard but violating the
/// instantiated body.
fn find_counterexample(c: &OwnConstraint, sol: &OwnSolution, solver: &SolverIo) -> CexResult {
    let body = c.body.subst_solution(sol);
    let query = Formula::and([c.guard.clone(), Formula::not(body)]);
    if c.universals.is_empty() {
        return match query.eval(&|_| None) {
            Some(true) => CexResult::Found(BTreeMap::new()),
            Some(false) => CexResult::None,
            None => CexResult::Undecided("free variable in ground constraint".into()),
        };
    }
    let decls: Vec<(String, Sort)> = c
        .universals
        .iter()
        .map(|x| (x.clone(), Sort::Int))
        .collect();
    match solver.check_sat_qf(&decls, &[query]) {
        SatResult::Sat(model) => {
            let mut point = BTreeMap::new();
            for x in &c.universals {
                let value = model
                    .get(x)
                    .and_then(ModelValue::as_int)
                    .unwrap_or_else(|| BigInt::from(0));
                point.insert(x.clone(), value);
            }
            CexResult::Found(point)
        }
        SatResult::Unsat => CexResult::None,
        SatResult::Unknown(r) => CexResult::Undecided(r),
        SatResult::Error(e) => CexResult::Error(e),
    }
}

/// Draws guard-satisfying points for a constraint's universals by rejection
/// sampling in a small window.
fn sample_points(
    c: &OwnConstraint,
    want: usize,
    rng: &mut ChaCha12Rng,
    out: &mut Vec<BTreeMap<String, BigInt>>,
) {
    let universals = sampled_universals(c);
    if universals.is_empty() {
        if out.is_empty() {
            out.push(BTreeMap::new());
        }
        return;
    }
    let mut added = 0;
    for _ in 0..SAMPLE_ATTEMPTS {
        if added >= want {
            break;
        }
        let mut point = BTreeMap::new();
        for x in &universals {
            point.insert(x.clone(), BigInt::from(rng.random_range(SAMPLE_LO..=SAMPLE_HI)));
        }
        let env = |x: &str| point.get(x).cloned();
        if c.guard.eval(&env) == Some(true) {
            out.push(point);
            added += 1;
        }
    }
}

/// Largest constant magnitude in a constraint body, used to scale the
/// coefficient bound levels.
fn max_body_constant(c: &OwnConstraint) -> BigInt {
    fn term(t: &TTerm, acc: &mut BigInt) {
        let a = t.constant.clone().max(-t.constant.clone());
        if a > *acc {
            *acc = a;
        }
    }
    fn go(f: &TForm, acc: &mut BigInt) {
        match f {
            TForm::Atom(_, a, b) => {
                term(a, acc);
                term(b, acc);
            }
            TForm::And(ps) | TForm::Or(ps) => {
                for p in ps {
                    go(p, acc);
                }
            }
        }
    }
    let mut acc = BigInt::from(0);
    go(&c.body, &mut acc);
    acc
}

/// Instantiates a constraint body at a universal valuation. Constraints
/// with an index expansion get one copy per symbolic breakpoint (each
/// breakpoint evaluates to a linear term over the unknowns at the sampled
/// scope point), which is exact in the index dimension.
fn instantiate_constraint(c: &OwnConstraint, vals: &BTreeMap<String, BigInt>) -> Vec<Formula> {
    match &c.index_expansion {
        None => vec![c.body.instantiate(vals)],
        Some(exp) => exp
            .breakpoints
            .iter()
            .map(|bp| {
                let point = bp.instantiate(vals);
                c.body.instantiate_with(vals, Some((exp.var.as_str(), &point)))
            })
            .collect(),
    }
}

/// The universals a constraint needs sampled: everything except an expanded
/// index variable.
fn sampled_universals(c: &OwnConstraint) -> Vec<String> {
    match &c.index_expansion {
        None => c.universals.clone(),
        Some(exp) => c
            .universals
            .iter()
            .filter(|u| **u != exp.var)
            .cloned()
            .collect(),
    }
}

/// Guard-satisfying unit neighbors of a counterexample point.
fn neighborhood(
    c: &OwnConstraint,
    point: &BTreeMap<String, BigInt>,
) -> Vec<BTreeMap<String, BigInt>> {
    let _ = c;
    let keys: Vec<String> = point.keys().cloned().collect();
    let mut out = Vec::new();
    for x in keys.iter() {
        for delta in [-1i64, 1] {
            let mut p = point.clone();
            if let Some(v) = p.get_mut(x) {
                *v += delta;
            }
            let env = |name: &str| p.get(name).cloned();
            if c.guard.eval(&env) == Some(true) {
                out.push(p);
            }
        }
    }
    out
}

/// Per-axis extreme points: one universal takes a large value while the
/// others stay small, at several magnitudes so a nonzero coefficient cannot
/// be compensated by a bounded constant. Guard-filtered.
fn seed_axis_spikes(
    c: &OwnConstraint,
    spike: &BigInt,
    mults: &[i64],
    out: &mut Vec<BTreeMap<String, BigInt>>,
) {
    let universals = sampled_universals(c);
    let expanded = c.index_expansion.as_ref().map(|e| e.var.clone());
    let mut values = Vec::new();
    for mult in mults {
        let v = spike * BigInt::from(*mult);
        values.push(v.clone());
        values.push(-v);
    }
    for x in &universals {
        if Some(x) == expanded.as_ref() {
            // Spiking an expanded index teaches nothing: no template bound
            // depends on it.
            continue;
        }
        for v in &values {
            for base in [BigInt::from(1), BigInt::from(2)] {
                let mut point = BTreeMap::new();
                for y in &universals {
                    point.insert(y.clone(), base.clone());
                }
                point.insert(x.clone(), v.clone());
                let env = |name: &str| point.get(name).cloned();
                if c.guard.eval(&env) == Some(true) && !out.contains(&point) {
                    out.push(point);
                }
            }
        }
    }
}

/// Number of atoms in a constraint body; a rough weight for its solver cost.
fn body_atoms(f: &TForm) -> usize {
    match f {
        TForm::Atom(_, _, _) => 1,
        TForm::And(ps) | TForm::Or(ps) => ps.iter().map(body_atoms).sum(),
    }
}

/// Deterministic grid of guard-satisfying points around the small indices
/// that decide template shapes.
fn seed_grid_points(
    c: &OwnConstraint,
    cap: usize,
    out: &mut Vec<BTreeMap<String, BigInt>>,
) {
    let universals = sampled_universals(c);
    if universals.is_empty() {
        out.push(BTreeMap::new());
        return;
    }
    let k = universals.len();
    let total = GRID.len().pow(k as u32);
    let stride = total.div_ceil(cap).max(1);
    let mut added = 0;
    let mut index = 0usize;
    while index < total && added < cap {
        let mut point = BTreeMap::new();
        let mut rest = index;
        for x in &universals {
            point.insert(x.clone(), BigInt::from(GRID[rest % GRID.len()]));
            rest /= GRID.len();
        }
        let env = |name: &str| point.get(name).cloned();
        if c.guard.eval(&env) == Some(true) {
            out.push(point);
            added += 1;
        }
        index += stride;
    }
}

fn model_to_solution(model: &crate::solver_io::Model, unknowns: &UnknownRegistry) -> OwnSolution {
    let mut sol = OwnSolution::default();
    for c in &unknowns.coeff_syms {
        let v = model
            .get(c)
            .and_then(ModelValue::as_int)
            .unwrap_or_else(|| BigInt::from(0));
        sol.coeffs.insert(c.clone(), v);
    }
    for o in &unknowns.own_syms {
        let v = model
            .get(o)
            .map(ModelValue::as_rational)
            .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
        sol.owns.insert(o.clone(), v);
    }
    sol
}

//! SMT-LIB2 HORN script parsing into clauses over linear integer formulas.

use impverif::formula::{Cmp, Formula, LinTerm};
use impverif::solver_io::{parse_sexpr, tokenize_sexpr, Sexpr};
use num_bigint::BigInt;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct ParsedPred {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone)]
pub struct App {
    pub pred: usize,
    pub args: Vec<LinTerm>,
}

#[derive(Debug, Clone)]
pub struct ParsedClause {
    pub universals: Vec<String>,
    pub body_preds: Vec<App>,
    pub constraint: Formula,
    /// `None` encodes a `false` head.
    pub head: Option<App>,
}

#[derive(Debug, Default)]
pub struct HornSystem {
    pub preds: Vec<ParsedPred>,
    pub clauses: Vec<ParsedClause>,
    /// All integer literals seen anywhere in the script.
    pub constants: Vec<BigInt>,
}

pub fn parse_script(script: &str) -> Result<HornSystem, String> {
    let toks = tokenize_sexpr(script);
    let mut pos = 0;
    let mut sys = HornSystem::default();
    let mut pred_ids: BTreeMap<String, usize> = BTreeMap::new();
    while pos < toks.len() {
        let form = parse_sexpr(&toks, &mut pos)?;
        let Sexpr::List(items) = &form else {
            return Err("top-level atom".into());
        };
        let Some(Sexpr::Atom(cmd)) = items.first() else {
            return Err("empty command".into());
        };
        match cmd.as_str() {
            "set-logic" | "set-info" | "set-option" | "check-sat" | "get-model" | "exit" => {}
            "declare-fun" => {
                let [_, Sexpr::Atom(name), Sexpr::List(args), Sexpr::Atom(ret)] = &items[..]
                else {
                    return Err("malformed declare-fun".into());
                };
                if ret != "Bool" {
                    return Err(format!("predicate `{name}` must return Bool"));
                }
                for a in args {
                    if !matches!(a, Sexpr::Atom(s) if s == "Int") {
                        return Err(format!("predicate `{name}` has a non-Int argument"));
                    }
                }
                pred_ids.insert(name.clone(), sys.preds.len());
                sys.preds.push(ParsedPred {
                    name: name.clone(),
                    arity: args.len(),
                });
            }
            "assert" => {
                if items.len() != 2 {
                    return Err("malformed assert".into());
                }
                let clause = parse_clause(&items[1], &pred_ids, &mut sys.constants)?;
                sys.clauses.push(clause);
            }
            other => return Err(format!("unsupported command `{other}`")),
        }
    }
    sys.constants.sort();
    sys.constants.dedup();
    Ok(sys)
}

fn parse_clause(
    e: &Sexpr,
    preds: &BTreeMap<String, usize>,
    constants: &mut Vec<BigInt>,
) -> Result<ParsedClause, String> {
    let (universals, inner) = match e {
        Sexpr::List(items)
            if matches!(items.first(), Some(Sexpr::Atom(a)) if a == "forall") =>
        {
            let [_, Sexpr::List(binders), body] = &items[..] else {
                return Err("malformed forall".into());
            };
            let mut names = Vec::new();
            for b in binders {
                let Sexpr::List(pair) = b else {
                    return Err("malformed binder".into());
                };
                let [Sexpr::Atom(name), Sexpr::Atom(sort)] = &pair[..] else {
                    return Err("malformed binder".into());
                };
                if sort != "Int" {
                    return Err("non-Int universal".into());
                }
                names.push(name.clone());
            }
            (names, body)
        }
        other => (Vec::new(), other),
    };
    // inner: (=> body head) | head | false-headed forms
    let (body_e, head_e) = match inner {
        Sexpr::List(items)
            if matches!(items.first(), Some(Sexpr::Atom(a)) if a == "=>") && items.len() == 3 =>
        {
            (Some(&items[1]), &items[2])
        }
        other => (None, other),
    };
    let mut body_preds = Vec::new();
    let mut constraint_parts = Vec::new();
    if let Some(body) = body_e {
        collect_body(body, preds, &mut body_preds, &mut constraint_parts, constants)?;
    }
    let head = match head_e {
        Sexpr::Atom(a) if a == "false" => None,
        other => match as_pred_app(other, preds, constants)? {
            Some(app) => Some(app),
            None => return Err("clause head is neither a predicate nor false".into()),
        },
    };
    Ok(ParsedClause {
        universals,
        body_preds,
        constraint: Formula::and(constraint_parts),
        head,
    })
}

fn collect_body(
    e: &Sexpr,
    preds: &BTreeMap<String, usize>,
    apps: &mut Vec<App>,
    constraint: &mut Vec<Formula>,
    constants: &mut Vec<BigInt>,
) -> Result<(), String> {
    if let Sexpr::List(items) = e {
        if matches!(items.first(), Some(Sexpr::Atom(a)) if a == "and") {
            for part in &items[1..] {
                collect_body(part, preds, apps, constraint, constants)?;
            }
            return Ok(());
        }
    }
    if let Some(app) = as_pred_app(e, preds, constants)? {
        apps.push(app);
        return Ok(());
    }
    constraint.push(parse_formula(e, constants)?);
    Ok(())
}

fn as_pred_app(
    e: &Sexpr,
    preds: &BTreeMap<String, usize>,
    constants: &mut Vec<BigInt>,
) -> Result<Option<App>, String> {
    match e {
        Sexpr::Atom(a) => Ok(preds.get(a).map(|p| App {
            pred: *p,
            args: Vec::new(),
        })),
        Sexpr::List(items) => {
            let Some(Sexpr::Atom(name)) = items.first() else {
                return Ok(None);
            };
            let Some(p) = preds.get(name) else {
                return Ok(None);
            };
            let mut args = Vec::new();
            for a in &items[1..] {
                args.push(parse_term(a, constants)?);
            }
            Ok(Some(App { pred: *p, args }))
        }
    }
}

pub fn parse_formula(e: &Sexpr, constants: &mut Vec<BigInt>) -> Result<Formula, String> {
    match e {
        Sexpr::Atom(a) if a == "true" => Ok(Formula::True),
        Sexpr::Atom(a) if a == "false" => Ok(Formula::False),
        Sexpr::Atom(other) => Err(format!("bare atom `{other}` in formula")),
        Sexpr::List(items) => {
            let Some(Sexpr::Atom(op)) = items.first() else {
                return Err("empty formula".into());
            };
            let cmp = match op.as_str() {
                "=" => Some(Cmp::Eq),
                "distinct" => Some(Cmp::Ne),
                "<" => Some(Cmp::Lt),
                "<=" => Some(Cmp::Le),
                ">" => Some(Cmp::Gt),
                ">=" => Some(Cmp::Ge),
                _ => None,
            };
            if let Some(cmp) = cmp {
                if items.len() != 3 {
                    return Err(format!("`{op}` expects two operands"));
                }
                let a = parse_term(&items[1], constants)?;
                let b = parse_term(&items[2], constants)?;
                return Ok(Formula::Atom(cmp, a, b));
            }
            match op.as_str() {
                "and" => Ok(Formula::And(
                    items[1..]
                        .iter()
                        .map(|p| parse_formula(p, constants))
                        .collect::<Result<_, _>>()?,
                )),
                "or" => Ok(Formula::Or(
                    items[1..]
                        .iter()
                        .map(|p| parse_formula(p, constants))
                        .collect::<Result<_, _>>()?,
                )),
                "not" => {
                    if items.len() != 2 {
                        return Err("`not` expects one operand".into());
                    }
                    Ok(Formula::Not(Box::new(parse_formula(&items[1], constants)?)))
                }
                "=>" => {
                    if items.len() != 3 {
                        return Err("`=>` expects two operands".into());
                    }
                    Ok(Formula::Implies(
                        Box::new(parse_formula(&items[1], constants)?),
                        Box::new(parse_formula(&items[2], constants)?),
                    ))
                }
                other => Err(format!("unsupported connective `{other}`")),
            }
        }
    }
}

pub fn parse_term(e: &Sexpr, constants: &mut Vec<BigInt>) -> Result<LinTerm, String> {
    match e {
        Sexpr::Atom(a) => {
            if let Ok(n) = a.parse::<BigInt>() {
                constants.push(n.clone());
                return Ok(LinTerm::constant(n));
            }
            Ok(LinTerm::var(a.clone()))
        }
        Sexpr::List(items) => {
            let Some(Sexpr::Atom(op)) = items.first() else {
                return Err("empty term".into());
            };
            match op.as_str() {
                "+" => {
                    let mut acc = LinTerm::zero();
                    for p in &items[1..] {
                        acc = acc.add(&parse_term(p, constants)?);
                    }
                    Ok(acc)
                }
                "-" => {
                    if items.len() == 2 {
                        return Ok(parse_term(&items[1], constants)?.scale(&BigInt::from(-1)));
                    }
                    let mut acc = parse_term(&items[1], constants)?;
                    for p in &items[2..] {
                        acc = acc.sub(&parse_term(p, constants)?);
                    }
                    Ok(acc)
                }
                "*" => {
                    if items.len() != 3 {
                        return Err("`*` expects two operands".into());
                    }
                    let a = parse_term(&items[1], constants)?;
                    let b = parse_term(&items[2], constants)?;
                    match (a.as_constant(), b.as_constant()) {
                        (Some(k), _) => Ok(b.scale(k)),
                        (_, Some(k)) => Ok(a.scale(k)),
                        _ => Err("nonlinear product".into()),
                    }
                }
                other => Err(format!("unsupported term operator `{other}`")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_system() {
        let script = r#"
(set-logic HORN)
(declare-fun P (Int Int) Bool)
(assert (forall ((x Int) (v Int)) (=> (and (> x 0) (= v 0)) (P x v))))
(assert (forall ((x Int) (v Int)) (=> (and (P x v) (not (= v 0))) false)))
(check-sat)
"#;
        let sys = parse_script(script).unwrap();
        assert_eq!(sys.preds.len(), 1);
        assert_eq!(sys.clauses.len(), 2);
        assert!(sys.clauses[0].head.is_some());
        assert!(sys.clauses[1].head.is_none());
        assert_eq!(sys.clauses[0].body_preds.len(), 0);
        assert_eq!(sys.clauses[1].body_preds.len(), 1);
    }

    #[test]
    fn quoted_symbols_round_trip() {
        let script = r#"
(declare-fun |P'| (Int) Bool)
(assert (forall ((|x'| Int)) (=> (> |x'| 0) (|P'| |x'|))))
"#;
        let sys = parse_script(script).unwrap();
        assert_eq!(sys.preds[0].name, "P'");
        assert_eq!(sys.clauses[0].universals, vec!["x'".to_string()]);
    }
}

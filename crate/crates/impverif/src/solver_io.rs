//! The single gateway to external solvers: SMT-LIB2 script construction,
//! subprocess execution with timeouts, and result parsing.
//!
//! Two solver roles sit behind one interface: a plain SMT solver for
//! validity/satisfiability queries and a HORN-capable solver for CHC
//! systems. Both run as batch subprocesses on script files; no bindings, no
//! incremental sessions. A small built-in decision procedure covers ground
//! and single-variable linear queries so unit tests run without binaries.

use crate::formula::{Cmp, Formula, LinTerm};
use crate::types::ValidityObligation;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;
use wait_timeout::ChildExt;

/// Sort of an unknown in a quantifier-free query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Int,
    Rat,
}

/// A value assigned by a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Int(BigInt),
    Rat(BigRational),
}

impl ModelValue {
    pub fn as_rational(&self) -> BigRational {
        match self {
            ModelValue::Int(n) => BigRational::from(n.clone()),
            ModelValue::Rat(r) => r.clone(),
        }
    }

    pub fn as_int(&self) -> Option<BigInt> {
        match self {
            ModelValue::Int(n) => Some(n.clone()),
            ModelValue::Rat(r) if r.is_integer() => Some(r.to_integer()),
            ModelValue::Rat(_) => None,
        }
    }
}

pub type Model = BTreeMap<String, ModelValue>;

/// Verdict of a raw solver run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Option<String>),
    Unsat,
    Unknown(String),
    Error(String),
}

/// Result of a satisfiability query with model extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown(String),
    Error(String),
}

/// Result of a validity query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Model),
    Unknown(String),
    Error(String),
}

/// External solver configuration. `None` commands fall back to the built-in
/// mini-solver (which only decides trivial queries).
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub smt_cmd: Option<Vec<String>>,
    pub chc_cmd: Option<Vec<String>>,
    pub smt_timeout: Duration,
    pub chc_timeout: Duration,
    pub scratch_dir: Option<PathBuf>,
    pub keep_scratch: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            smt_cmd: None,
            chc_cmd: None,
            smt_timeout: Duration::from_secs(60),
            chc_timeout: Duration::from_secs(600),
            scratch_dir: None,
            keep_scratch: false,
        }
    }
}

impl SolverConfig {
    /// Splits a command line on whitespace; empty means unconfigured.
    pub fn parse_cmd(s: &str) -> Option<Vec<String>> {
        let parts: Vec<String> = s.split_whitespace().map(String::from).collect();
        if parts.is_empty() {
            None
        } else {
            Some(parts)
        }
    }

    /// Applies the `IMPVERIF_SMT_CMD` / `IMPVERIF_CHC_CMD` overrides.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(cmd) = std::env::var("IMPVERIF_SMT_CMD") {
            self.smt_cmd = Self::parse_cmd(&cmd);
        }
        if let Ok(cmd) = std::env::var("IMPVERIF_CHC_CMD") {
            self.chc_cmd = Self::parse_cmd(&cmd);
        }
        self
    }
}

static JOB_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Handle owning the scratch directory and the configuration.
pub struct SolverIo {
    cfg: SolverConfig,
    scratch: PathBuf,
    _tmp: Option<tempfile::TempDir>,
}

impl SolverIo {
    pub fn new(cfg: SolverConfig) -> std::io::Result<Self> {
        let (scratch, tmp) = match &cfg.scratch_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                (dir.clone(), None)
            }
            None if cfg.keep_scratch => {
                // Kept scratch files must survive this handle.
                let dir = tempfile::TempDir::with_prefix("impverif-")?.keep();
                eprintln!("scratch files under {}", dir.display());
                (dir, None)
            }
            None => {
                let tmp = tempfile::TempDir::with_prefix("impverif-")?;
                (tmp.path().to_path_buf(), Some(tmp))
            }
        };
        Ok(SolverIo {
            cfg,
            scratch,
            _tmp: tmp,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn has_smt(&self) -> bool {
        self.cfg.smt_cmd.is_some()
    }

    pub fn has_chc(&self) -> bool {
        self.cfg.chc_cmd.is_some()
    }

    fn scratch_file(&self, job: &str) -> PathBuf {
        let n = JOB_COUNTER.fetch_add(1, Ordering::Relaxed);
        self.scratch.join(format!("{job}-{n}.smt2"))
    }

    fn run_cmd(&self, cmd: &[String], script: &str, job: &str, timeout: Duration) -> RawOutput {
        let path = self.scratch_file(job);
        if let Err(e) = std::fs::write(&path, script) {
            return RawOutput::Error(format!("cannot write scratch file: {e}"));
        }
        // stderr goes to a file: a solver chatty on stderr must not block on
        // a pipe nobody drains.
        let err_path = path.with_extension("err");
        let result = (|| {
            let err_file = std::fs::File::create(&err_path)
                .map_err(|e| format!("cannot create scratch file: {e}"))?;
            let mut child = Command::new(&cmd[0])
                .args(&cmd[1..])
                .arg(&path)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .stderr(Stdio::from(err_file))
                .spawn()
                .map_err(|e| format!("cannot spawn `{}`: {e}", cmd[0]))?;
            // Drain stdout concurrently: a child producing more output than
            // the pipe buffer would otherwise never exit.
            let mut stdout = child.stdout.take().expect("stdout piped");
            let reader = std::thread::spawn(move || {
                use std::io::Read;
                let mut buf = String::new();
                let _ = stdout.read_to_string(&mut buf);
                buf
            });
            match child.wait_timeout(timeout) {
                Ok(Some(_status)) => {
                    let out = reader.join().unwrap_or_default();
                    Ok(RawOutput::Finished(out))
                }
                Ok(None) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = reader.join();
                    Ok(RawOutput::TimedOut)
                }
                Err(e) => Err(format!("wait failed: {e}")),
            }
        })();
        if !self.cfg.keep_scratch {
            let _ = std::fs::remove_file(&path);
            let _ = std::fs::remove_file(&err_path);
        }
        match result {
            Ok(o) => o,
            Err(e) => RawOutput::Error(e),
        }
    }

    /// Checks `forall scope. hypothesis => conclusion` by asking for a model
    /// of the negation.
    pub fn check_valid(&self, ob: &ValidityObligation) -> Validity {
        let unknowns: Vec<(String, Sort)> = ob
            .scope
            .iter()
            .map(|x| (x.clone(), Sort::Int))
            .collect();
        let negated = Formula::and([ob.hypothesis.clone(), Formula::not(ob.conclusion.clone())]);
        match self.check_sat_qf(&unknowns, &[negated]) {
            SatResult::Sat(m) => Validity::Invalid(m),
            SatResult::Unsat => Validity::Valid,
            SatResult::Unknown(r) => Validity::Unknown(r),
            SatResult::Error(e) => Validity::Error(e),
        }
    }

    /// Satisfiability of a conjunction of quantifier-free formulas over the
    /// given unknowns, with model extraction on sat.
    pub fn check_sat_qf(&self, unknowns: &[(String, Sort)], assertions: &[Formula]) -> SatResult {
        self.check_sat_qf_min(unknowns, assertions, &[])
    }

    /// Like [`Self::check_sat_qf`], additionally asking the solver to
    /// minimize the summed magnitudes of the named integer unknowns. Solvers
    /// without optimization support fall back to plain satisfiability.
    pub fn check_sat_qf_min(
        &self,
        unknowns: &[(String, Sort)],
        assertions: &[Formula],
        minimize: &[String],
    ) -> SatResult {
        match &self.cfg.smt_cmd {
            Some(cmd) => {
                let script = build_qf_script(unknowns, assertions, minimize);
                match self.run_cmd(cmd, &script, "qf", self.cfg.smt_timeout) {
                    RawOutput::Finished(out) => {
                        let result = parse_sat_output(&out, unknowns);
                        if matches!(result, SatResult::Error(_)) && !minimize.is_empty() {
                            // Optimization is a solver extension; retry plain.
                            return self.check_sat_qf_min(unknowns, assertions, &[]);
                        }
                        result
                    }
                    RawOutput::TimedOut if !minimize.is_empty() => {
                        // The objective can make the search harder; retry
                        // without it before giving up.
                        self.check_sat_qf_min(unknowns, assertions, &[])
                    }
                    RawOutput::TimedOut => SatResult::Unknown("solver timeout".into()),
                    RawOutput::Error(e) => SatResult::Error(e),
                }
            }
            None => mini_check_sat(unknowns, assertions),
        }
    }

    /// Runs a HORN script; the first verdict line decides.
    pub fn run_horn(&self, script: &str) -> SolverVerdict {
        let Some(cmd) = &self.cfg.chc_cmd else {
            return SolverVerdict::Unknown("no CHC solver configured".into());
        };
        match self.run_cmd(cmd, script, "chc", self.cfg.chc_timeout) {
            RawOutput::Finished(out) => {
                for line in out.lines() {
                    let line = line.trim();
                    if line.is_empty()
                        || line.starts_with(';')
                        || line.to_ascii_lowercase().starts_with("warning")
                        || line.starts_with("(warning")
                    {
                        continue;
                    }
                    return match line {
                        "sat" => {
                            let rest: String =
                                out.lines().skip_while(|l| l.trim() != "sat").skip(1).fold(
                                    String::new(),
                                    |mut acc, l| {
                                        acc.push_str(l);
                                        acc.push('\n');
                                        acc
                                    },
                                );
                            let model = if rest.trim().is_empty() { None } else { Some(rest) };
                            SolverVerdict::Sat(model)
                        }
                        "unsat" => SolverVerdict::Unsat,
                        "unknown" => SolverVerdict::Unknown("solver answered unknown".into()),
                        other => SolverVerdict::Error(format!("unrecognized output: {other}")),
                    };
                }
                SolverVerdict::Error("no verdict line in solver output".into())
            }
            RawOutput::TimedOut => SolverVerdict::Unknown("solver timeout".into()),
            RawOutput::Error(e) => SolverVerdict::Error(e),
        }
    }
}

enum RawOutput {
    Finished(String),
    TimedOut,
    Error(String),
}

// ---------------------------------------------------------------------------
// SMT-LIB2 printing
// ---------------------------------------------------------------------------

const SIMPLE_SYMBOL_EXTRA: &str = "~!@$%^&*_-+=<>.?/";

/// Quotes a symbol unless it is a valid SMT-LIB simple symbol.
pub fn smt_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.chars().next().unwrap().is_ascii_digit()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || SIMPLE_SYMBOL_EXTRA.contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

pub fn smt_int(n: &BigInt) -> String {
    if n.is_negative() {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

fn smt_real(n: &BigInt) -> String {
    if n.is_negative() {
        format!("(- {}.0)", -n)
    } else {
        format!("{n}.0")
    }
}

/// Prints a rational constant: integers as decimals, others as `(/ p q)`.
pub fn smt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        smt_real(&r.to_integer())
    } else if r.is_negative() {
        let p = -r.numer();
        format!("(- (/ {}.0 {}.0))", p, r.denom())
    } else {
        format!("(/ {}.0 {}.0)", r.numer(), r.denom())
    }
}

/// Renders a bare integer linear term.
pub fn linterm_to_smt(t: &LinTerm) -> String {
    term_to_smt(t, false, &BTreeSet::new())
}

fn term_to_smt(t: &LinTerm, real_ctx: bool, rat_vars: &BTreeSet<String>) -> String {
    let lit = |n: &BigInt| if real_ctx { smt_real(n) } else { smt_int(n) };
    let mut parts = Vec::new();
    if !t.constant.is_zero() || t.coeffs.is_empty() {
        parts.push(lit(&t.constant));
    }
    for (x, c) in &t.coeffs {
        let mut sym = smt_symbol(x);
        if real_ctx && !rat_vars.contains(x) {
            sym = format!("(to_real {sym})");
        }
        if c.is_one() {
            parts.push(sym);
        } else {
            parts.push(format!("(* {} {})", lit(c), sym));
        }
    }
    match parts.len() {
        1 => parts.pop().unwrap(),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

fn atom_to_smt(cmp: Cmp, a: &LinTerm, b: &LinTerm, rat_vars: &BTreeSet<String>) -> String {
    let mut vars = BTreeSet::new();
    a.free_vars(&mut vars);
    b.free_vars(&mut vars);
    let real_ctx = vars.iter().any(|v| rat_vars.contains(v));
    let (sa, sb) = (
        term_to_smt(a, real_ctx, rat_vars),
        term_to_smt(b, real_ctx, rat_vars),
    );
    match cmp {
        Cmp::Eq => format!("(= {sa} {sb})"),
        Cmp::Ne => format!("(distinct {sa} {sb})"),
        Cmp::Lt => format!("(< {sa} {sb})"),
        Cmp::Le => format!("(<= {sa} {sb})"),
        Cmp::Gt => format!("(> {sa} {sb})"),
        Cmp::Ge => format!("(>= {sa} {sb})"),
    }
}

/// Renders a formula; `rat_vars` names the Real-sorted variables.
pub fn formula_to_smt(f: &Formula, rat_vars: &BTreeSet<String>) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(c, a, b) => atom_to_smt(*c, a, b, rat_vars),
        Formula::Not(inner) => format!("(not {})", formula_to_smt(inner, rat_vars)),
        Formula::And(ps) => {
            if ps.is_empty() {
                "true".into()
            } else {
                format!(
                    "(and {})",
                    ps.iter()
                        .map(|p| formula_to_smt(p, rat_vars))
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            }
        }
        Formula::Or(ps) => {
            if ps.is_empty() {
                "false".into()
            } else {
                format!(
                    "(or {})",
                    ps.iter()
                        .map(|p| formula_to_smt(p, rat_vars))
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            }
        }
        Formula::Implies(h, c) => format!(
            "(=> {} {})",
            formula_to_smt(h, rat_vars),
            formula_to_smt(c, rat_vars)
        ),
    }
}

fn build_qf_script(
    unknowns: &[(String, Sort)],
    assertions: &[Formula],
    minimize: &[String],
) -> String {
    let mut rat_vars = BTreeSet::new();
    for (x, s) in unknowns {
        if *s == Sort::Rat {
            rat_vars.insert(x.clone());
        }
    }
    // Optimization commands are outside the official QF_LIRA language.
    let mut script = if minimize.is_empty() {
        String::from("(set-logic QF_LIRA)\n")
    } else {
        String::new()
    };
    let mut sorted: Vec<&(String, Sort)> = unknowns.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    sorted.dedup_by(|a, b| a.0 == b.0);
    for (x, s) in &sorted {
        let sort = match s {
            Sort::Int => "Int",
            Sort::Rat => "Real",
        };
        script.push_str(&format!("(declare-const {} {})\n", smt_symbol(x), sort));
    }
    for a in assertions {
        script.push_str(&format!("(assert {})\n", formula_to_smt(a, &rat_vars)));
    }
    if !minimize.is_empty() {
        let parts: Vec<String> = minimize
            .iter()
            .map(|c| {
                let sym = smt_symbol(c);
                format!("(ite (>= {sym} 0) {sym} (- {sym}))")
            })
            .collect();
        let objective = if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            format!("(+ {})", parts.join(" "))
        };
        script.push_str(&format!("(minimize {objective})\n"));
    }
    script.push_str("(check-sat)\n");
    if !sorted.is_empty() {
        let names: Vec<String> = sorted.iter().map(|(x, _)| smt_symbol(x)).collect();
        script.push_str(&format!("(get-value ({}))\n", names.join(" ")));
    }
    script
}

// ---------------------------------------------------------------------------
// Output parsing
// ---------------------------------------------------------------------------

fn parse_sat_output(out: &str, unknowns: &[(String, Sort)]) -> SatResult {
    let mut lines = out.lines();
    let verdict = loop {
        match lines.next() {
            Some(l) => {
                let l = l.trim();
                if l.is_empty()
                    || l.starts_with(';')
                    || l.to_ascii_lowercase().starts_with("warning")
                    || l.starts_with("(warning")
                {
                    continue;
                }
                break l.to_string();
            }
            None => return SatResult::Error("empty solver output".into()),
        }
    };
    match verdict.as_str() {
        "unsat" => SatResult::Unsat,
        "unknown" => SatResult::Unknown("solver answered unknown".into()),
        "sat" => {
            let rest: String = lines.collect::<Vec<_>>().join("\n");
            match parse_values(&rest, unknowns) {
                Ok(model) => SatResult::Sat(model),
                Err(e) => SatResult::Error(format!("cannot parse model: {e}")),
            }
        }
        other => SatResult::Error(format!("unrecognized output: {other}")),
    }
}

/// A parsed s-expression (shared with the solver front ends built on this
/// crate).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

pub fn tokenize_sexpr(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut comment = false;
    for c in s.chars() {
        if comment {
            if c == '\n' {
                comment = false;
            }
            continue;
        }
        if quoted {
            if c == '|' {
                quoted = false;
                toks.push(std::mem::take(&mut cur));
            } else {
                cur.push(c);
            }
            continue;
        }
        if c == ';' {
            if !cur.is_empty() {
                toks.push(std::mem::take(&mut cur));
            }
            comment = true;
            continue;
        }
        match c {
            '|' => {
                quoted = true;
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

/// Parses one s-expression starting at `pos`.
pub fn parse_sexpr(toks: &[String], pos: &mut usize) -> Result<Sexpr, String> {
    if *pos >= toks.len() {
        return Err("unexpected end of s-expression".into());
    }
    let t = &toks[*pos];
    *pos += 1;
    if t == "(" {
        let mut items = Vec::new();
        while *pos < toks.len() && toks[*pos] != ")" {
            items.push(parse_sexpr(toks, pos)?);
        }
        if *pos >= toks.len() {
            return Err("unbalanced parentheses".into());
        }
        *pos += 1; // consume ')'
        Ok(Sexpr::List(items))
    } else if t == ")" {
        Err("unexpected `)`".into())
    } else {
        Ok(Sexpr::Atom(t.clone()))
    }
}

pub fn parse_number(e: &Sexpr) -> Result<BigRational, String> {
    match e {
        Sexpr::Atom(a) => {
            if let Some(stripped) = a.strip_suffix(".0") {
                if let Ok(n) = stripped.parse::<BigInt>() {
                    return Ok(BigRational::from(n));
                }
            }
            if let Some(dot) = a.find('.') {
                // decimal like 0.5
                let (int_part, frac_part) = a.split_at(dot);
                let frac = &frac_part[1..];
                let base: BigInt = int_part.parse().map_err(|e| format!("{e}"))?;
                let num: BigInt = frac.parse().map_err(|e| format!("{e}"))?;
                let denom = BigInt::from(10).pow(frac.len() as u32);
                let sign = if base.is_negative() { -BigInt::one() } else { BigInt::one() };
                return Ok(BigRational::new(base * &denom + sign * num, denom));
            }
            a.parse::<BigInt>()
                .map(BigRational::from)
                .map_err(|e| format!("not a number `{a}`: {e}"))
        }
        Sexpr::List(items) => match items.as_slice() {
            [Sexpr::Atom(op), inner] if op == "-" => Ok(-parse_number(inner)?),
            [Sexpr::Atom(op), a, b] if op == "/" => {
                let (a, b) = (parse_number(a)?, parse_number(b)?);
                if b.is_zero() {
                    return Err("division by zero in model".into());
                }
                Ok(a / b)
            }
            [Sexpr::Atom(op), inner] if op == "to_real" || op == "to_int" => parse_number(inner),
            _ => Err("unrecognized numeral form".into()),
        },
    }
}

fn parse_values(out: &str, unknowns: &[(String, Sort)]) -> Result<Model, String> {
    let toks = tokenize_sexpr(out);
    let mut pos = 0;
    let top = parse_sexpr(&toks, &mut pos)?;
    let Sexpr::List(pairs) = top else {
        return Err("expected a list of bindings".into());
    };
    let sorts: BTreeMap<&str, Sort> = unknowns.iter().map(|(x, s)| (x.as_str(), *s)).collect();
    let mut model = Model::new();
    for pair in pairs {
        let Sexpr::List(kv) = pair else {
            return Err("expected (name value)".into());
        };
        if kv.len() != 2 {
            return Err("expected (name value)".into());
        }
        let Sexpr::Atom(name) = &kv[0] else {
            return Err("expected a symbol".into());
        };
        let value = parse_number(&kv[1])?;
        let entry = match sorts.get(name.as_str()) {
            Some(Sort::Int) => {
                if !value.is_integer() {
                    return Err(format!("non-integer value for Int unknown `{name}`"));
                }
                ModelValue::Int(value.to_integer())
            }
            _ => ModelValue::Rat(value),
        };
        model.insert(name.clone(), entry);
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Built-in mini-solver: ground and single-variable linear queries
// ---------------------------------------------------------------------------

fn mini_check_sat(unknowns: &[(String, Sort)], assertions: &[Formula]) -> SatResult {
    let conj = Formula::and(assertions.iter().cloned());
    let mut free = conj.free_vars();
    let declared: BTreeMap<&str, Sort> =
        unknowns.iter().map(|(x, s)| (x.as_str(), *s)).collect();
    free.retain(|v| declared.contains_key(v.as_str()));
    match free.len() {
        0 => match conj.eval(&|_| None) {
            Some(true) => SatResult::Sat(Model::new()),
            Some(false) => SatResult::Unsat,
            None => SatResult::Unknown("built-in solver: unbound variable".into()),
        },
        1 => {
            let var = free.iter().next().unwrap().clone();
            let sort = declared[var.as_str()];
            mini_single_var(&conj, &var, sort)
        }
        _ => SatResult::Unknown(
            "built-in solver handles only ground and single-variable queries".into(),
        ),
    }
}

/// Candidate-point decision for one linear variable: formula truth is
/// constant between atom boundaries, so testing every boundary, its
/// neighbors, midpoints and far points is complete.
fn mini_single_var(f: &Formula, var: &str, sort: Sort) -> SatResult {
    let mut boundaries: Vec<BigRational> = Vec::new();
    collect_boundaries(f, var, &mut boundaries);
    let mut candidates: Vec<BigRational> = vec![
        BigRational::zero(),
        BigRational::one(),
        -BigRational::one(),
    ];
    boundaries.sort();
    boundaries.dedup();
    for b in &boundaries {
        match sort {
            Sort::Int => {
                let fl = BigRational::from(b.floor().to_integer());
                let ce = BigRational::from(b.ceil().to_integer());
                for v in [&fl, &ce] {
                    candidates.push(v.clone() - BigRational::one());
                    candidates.push(v.clone());
                    candidates.push(v.clone() + BigRational::one());
                }
            }
            Sort::Rat => {
                candidates.push(b.clone() - BigRational::one());
                candidates.push(b.clone());
                candidates.push(b.clone() + BigRational::one());
            }
        }
    }
    if sort == Sort::Rat {
        for w in boundaries.windows(2) {
            let mid = (&w[0] + &w[1]) / BigRational::from(BigInt::from(2));
            candidates.push(mid);
        }
    }
    if let (Some(lo), Some(hi)) = (boundaries.first(), boundaries.last()) {
        candidates.push(lo - BigRational::from(BigInt::from(2)));
        candidates.push(hi + BigRational::from(BigInt::from(2)));
    }
    for cand in candidates {
        let cand = if sort == Sort::Int {
            if !cand.is_integer() {
                continue;
            }
            cand
        } else {
            cand
        };
        let env = |x: &str| {
            if x == var {
                Some(cand.clone())
            } else {
                None
            }
        };
        if f.eval_rat(&env) == Some(true) {
            let value = match sort {
                Sort::Int => ModelValue::Int(cand.to_integer()),
                Sort::Rat => ModelValue::Rat(cand),
            };
            let mut m = Model::new();
            m.insert(var.to_string(), value);
            return SatResult::Sat(m);
        }
    }
    SatResult::Unsat
}

fn collect_boundaries(f: &Formula, var: &str, out: &mut Vec<BigRational>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom(_, a, b) => {
            let d = a.sub(b);
            if let Some(c) = d.coeffs.get(var) {
                let mut rest = d.clone();
                rest.coeffs.remove(var);
                if rest.coeffs.is_empty() {
                    // c*var + k ~ 0 boundary at -k/c
                    out.push(BigRational::new(-rest.constant, c.clone()));
                }
            }
        }
        Formula::Not(inner) => collect_boundaries(inner, var, out),
        Formula::And(ps) | Formula::Or(ps) => {
            for p in ps {
                collect_boundaries(p, var, out);
            }
        }
        Formula::Implies(h, c) => {
            collect_boundaries(h, var, out);
            collect_boundaries(c, var, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtin() -> SolverIo {
        SolverIo::new(SolverConfig::default()).unwrap()
    }

    fn ob(scope: &[&str], hyp: Formula, concl: Formula) -> ValidityObligation {
        ValidityObligation {
            scope: scope.iter().map(|s| s.to_string()).collect(),
            hypothesis: hyp,
            conclusion: concl,
        }
    }

    #[test]
    fn trivial_validity() {
        let io = builtin();
        assert_eq!(
            io.check_valid(&ob(&[], Formula::True, Formula::True)),
            Validity::Valid
        );
    }

    #[test]
    fn single_var_invalid_with_witness() {
        let io = builtin();
        let concl = Formula::atom(Cmp::Gt, LinTerm::var("x"), LinTerm::constant(0));
        match io.check_valid(&ob(&["x"], Formula::True, concl)) {
            Validity::Invalid(m) => match &m["x"] {
                ModelValue::Int(n) => assert!(*n <= BigInt::zero()),
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_var_valid() {
        let io = builtin();
        // x > 2 => x >= 3 over integers
        let hyp = Formula::atom(Cmp::Gt, LinTerm::var("x"), LinTerm::constant(2));
        let concl = Formula::atom(Cmp::Ge, LinTerm::var("x"), LinTerm::constant(3));
        assert_eq!(io.check_valid(&ob(&["x"], hyp, concl)), Validity::Valid);
    }

    #[test]
    fn multi_var_is_unknown_without_external_solver() {
        let io = builtin();
        let concl = Formula::atom(Cmp::Ge, LinTerm::var("x"), LinTerm::var("y"));
        assert!(matches!(
            io.check_valid(&ob(&["x", "y"], Formula::True, concl)),
            Validity::Unknown(_)
        ));
    }

    #[test]
    fn rational_single_var() {
        let io = builtin();
        // o >= 1 and o <= 1 is satisfiable exactly at o = 1.
        let f = Formula::and([
            Formula::atom(Cmp::Ge, LinTerm::var("o"), LinTerm::constant(1)),
            Formula::atom(Cmp::Le, LinTerm::var("o"), LinTerm::constant(1)),
        ]);
        match io.check_sat_qf(&[("o".into(), Sort::Rat)], &[f]) {
            SatResult::Sat(m) => {
                assert_eq!(m["o"].as_rational(), BigRational::one());
            }
            other => panic!("{other:?}"),
        }
        let g = Formula::and([
            Formula::atom(Cmp::Gt, LinTerm::var("o"), LinTerm::constant(1)),
            Formula::atom(Cmp::Le, LinTerm::var("o"), LinTerm::constant(1)),
        ]);
        assert_eq!(
            io.check_sat_qf(&[("o".into(), Sort::Rat)], &[g]),
            SatResult::Unsat
        );
    }

    #[test]
    fn symbols_are_quoted_when_needed() {
        assert_eq!(smt_symbol("abc"), "abc");
        assert_eq!(smt_symbol("p'"), "|p'|");
        assert_eq!(smt_symbol("$0"), "$0");
        assert_eq!(smt_symbol("0x"), "|0x|");
    }

    #[test]
    fn script_is_deterministic() {
        let unknowns = vec![
            ("b".to_string(), Sort::Int),
            ("a".to_string(), Sort::Rat),
        ];
        let f = Formula::atom(Cmp::Ge, LinTerm::var("a"), LinTerm::constant(0));
        let s1 = build_qf_script(&unknowns, &[f.clone()], &[]);
        let s2 = build_qf_script(&unknowns, &[f], &[]);
        assert_eq!(s1, s2);
        assert!(s1.contains("(declare-const a Real)"));
        assert!(s1.contains("(declare-const b Int)"));
        // declarations sorted by name
        assert!(s1.find("declare-const a").unwrap() < s1.find("declare-const b").unwrap());
    }

    #[test]
    fn model_parsing_handles_negatives_and_fractions() {
        let out = "((x (- 2)) (o (/ 1.0 2.0)) (y 3))";
        let unknowns = vec![
            ("x".to_string(), Sort::Int),
            ("o".to_string(), Sort::Rat),
            ("y".to_string(), Sort::Int),
        ];
        let m = parse_values(out, &unknowns).unwrap();
        assert_eq!(m["x"], ModelValue::Int(BigInt::from(-2)));
        assert_eq!(
            m["o"],
            ModelValue::Rat(BigRational::new(BigInt::one(), BigInt::from(2)))
        );
        assert_eq!(m["y"], ModelValue::Int(BigInt::from(3)));
    }

    #[test]
    fn real_context_renders_decimal_literals() {
        let mut rat = BTreeSet::new();
        rat.insert("o".to_string());
        let f = Formula::atom(Cmp::Eq, LinTerm::var("o"), LinTerm::constant(1));
        assert_eq!(formula_to_smt(&f, &rat), "(= o 1.0)");
        let g = Formula::atom(Cmp::Ge, LinTerm::var("x"), LinTerm::constant(-1));
        assert_eq!(formula_to_smt(&g, &BTreeSet::new()), "(>= x (- 1))");
    }
}

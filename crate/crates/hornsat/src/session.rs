//! A persistent incremental SMT session (`z3 -in` style), used to avoid a
//! process spawn per query. Falls back to batch mode upstream if the session
//! cannot be established.

use impverif::formula::Formula;
use impverif::solver_io::{
    formula_to_smt, parse_number, parse_sexpr, smt_symbol, tokenize_sexpr, Sexpr,
};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

pub struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    declared: BTreeSet<String>,
}

pub enum QueryResult {
    Sat(BTreeMap<String, BigInt>),
    Unsat,
    Other(String),
}

impl Session {
    /// Starts `cmd -in` with a per-query millisecond timeout.
    pub fn start(cmd: &[String], query_timeout_ms: u64) -> Result<Session, String> {
        let mut child = Command::new(&cmd[0])
            .args(&cmd[1..])
            .arg("-in")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot spawn `{} -in`: {e}", cmd[0]))?;
        let stdin = child.stdin.take().ok_or("no stdin")?;
        let stdout = BufReader::new(child.stdout.take().ok_or("no stdout")?);
        let mut s = Session {
            child,
            stdin,
            stdout,
            declared: BTreeSet::new(),
        };
        s.send(&format!("(set-option :timeout {query_timeout_ms})"))?;
        // Probe that the binary actually speaks incremental SMT-LIB2.
        s.send("(push 1)")?;
        s.send("(assert true)")?;
        s.send("(check-sat)")?;
        let line = s.read_line()?;
        if line.trim() != "sat" {
            return Err(format!("unexpected probe response `{line}`"));
        }
        s.send("(pop 1)")?;
        Ok(s)
    }

    fn send(&mut self, line: &str) -> Result<(), String> {
        writeln!(self.stdin, "{line}").map_err(|e| format!("write failed: {e}"))?;
        self.stdin.flush().map_err(|e| format!("flush failed: {e}"))
    }

    fn read_line(&mut self) -> Result<String, String> {
        let mut line = String::new();
        loop {
            line.clear();
            let n = self
                .stdout
                .read_line(&mut line)
                .map_err(|e| format!("read failed: {e}"))?;
            if n == 0 {
                return Err("solver closed its output".into());
            }
            let t = line.trim();
            if t.is_empty() || t.starts_with(';') {
                continue;
            }
            return Ok(t.to_string());
        }
    }

    /// Reads one balanced s-expression (the get-value response).
    fn read_sexpr(&mut self) -> Result<Sexpr, String> {
        let mut text = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = self.read_line()?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if depth <= 0 {
                break;
            }
        }
        let toks = tokenize_sexpr(&text);
        let mut pos = 0;
        parse_sexpr(&toks, &mut pos)
    }

    /// Checks satisfiability of a conjunction over integer variables,
    /// returning integer model values on sat.
    pub fn check(&mut self, vars: &[String], query: &Formula) -> Result<QueryResult, String> {
        for v in vars {
            if self.declared.insert(v.clone()) {
                self.send(&format!("(declare-const {} Int)", smt_symbol(v)))?;
            }
        }
        self.send("(push 1)")?;
        let result = (|| {
            self.send(&format!("(assert {})", formula_to_smt(query, &BTreeSet::new())))?;
            self.send("(check-sat)")?;
            let verdict = self.read_line()?;
            match verdict.as_str() {
                "unsat" => Ok(QueryResult::Unsat),
                "sat" => {
                    if vars.is_empty() {
                        return Ok(QueryResult::Sat(BTreeMap::new()));
                    }
                    let names: Vec<String> = vars.iter().map(|v| smt_symbol(v)).collect();
                    self.send(&format!("(get-value ({}))", names.join(" ")))?;
                    let values = self.read_sexpr()?;
                    let Sexpr::List(pairs) = values else {
                        return Err("malformed get-value response".into());
                    };
                    let mut model = BTreeMap::new();
                    for pair in pairs {
                        let Sexpr::List(kv) = pair else {
                            return Err("malformed binding".into());
                        };
                        let [Sexpr::Atom(name), value] = &kv[..] else {
                            return Err("malformed binding".into());
                        };
                        let num = parse_number(value)?;
                        if !num.is_integer() {
                            return Err("non-integer model value".into());
                        }
                        model.insert(name.clone(), num.to_integer());
                    }
                    Ok(QueryResult::Sat(model))
                }
                other => Ok(QueryResult::Other(other.to_string())),
            }
        })();
        // Always pop, even after an error, to keep the session reusable.
        let _ = self.send("(pop 1)");
        result
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

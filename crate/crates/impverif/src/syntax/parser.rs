//! Recursive descent parser for the benchmark surface syntax.

use super::ast::*;
use super::lexer::{tokenize, LexError, Tok, Token};
use crate::formula::{Cmp, Formula, LinTerm};
use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{0}")]
    Lex(#[from] LexError),
    #[error("parse error at {pos}: expected {expected}, found {found}")]
    Unexpected {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("parse error at {pos}: {msg}")]
    Invalid { pos: Pos, msg: String },
}

pub fn parse(src: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    p.parse_program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn here(&self) -> Pos {
        self.tokens[self.pos].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if *self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Unexpected {
            pos: self.here(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut defs = std::collections::BTreeMap::new();
        let mut def_order = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(_) => {
                    let def = self.parse_def()?;
                    if defs.contains_key(&def.name) {
                        return Err(ParseError::Invalid {
                            pos: def.pos,
                            msg: format!("duplicate definition of `{}`", def.name),
                        });
                    }
                    def_order.push(def.name.clone());
                    defs.insert(def.name.clone(), def);
                }
                Tok::LBrace => break,
                _ => return Err(self.unexpected("function definition or `{`")),
            }
        }
        self.expect(Tok::LBrace)?;
        let main = self.parse_expr()?;
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(Program {
            defs,
            def_order,
            main,
        })
    }

    fn parse_def(&mut self) -> Result<Def, ParseError> {
        let pos = self.here();
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        for (i, a) in params.iter().enumerate() {
            if params[..i].contains(a) {
                return Err(ParseError::Invalid {
                    pos,
                    msg: format!("duplicate parameter `{a}` in `{name}`"),
                });
            }
        }
        let simple_annot = if *self.peek() == Tok::LBracket {
            Some(self.parse_annot()?)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let body = self.parse_expr()?;
        self.expect(Tok::RBrace)?;
        Ok(Def {
            name,
            params,
            simple_annot,
            body,
            pos,
        })
    }

    fn parse_annot(&mut self) -> Result<SimpleAnnot, ParseError> {
        self.expect(Tok::LBracket)?;
        self.expect(Tok::Lt)?;
        let pre = self.parse_annot_bindings()?;
        self.expect(Tok::Gt)?;
        self.expect(Tok::Arrow)?;
        self.expect(Tok::Lt)?;
        let post = self.parse_annot_bindings()?;
        self.expect(Tok::Bar)?;
        let ret = self.parse_annot_type()?;
        self.expect(Tok::Gt)?;
        self.expect(Tok::RBracket)?;
        Ok(SimpleAnnot { pre, post, ret })
    }

    fn parse_annot_bindings(&mut self) -> Result<Vec<(String, AnnotType)>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Gt | Tok::Bar) {
            return Ok(out);
        }
        loop {
            let x = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.parse_annot_type()?;
            out.push((x, ty));
            if !self.eat(Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn parse_annot_type(&mut self) -> Result<AnnotType, ParseError> {
        self.expect(Tok::KwInt)?;
        let mut ty = AnnotType::Int;
        while self.eat(Tok::KwRef) {
            ty = AnnotType::Ref(Box::new(ty));
        }
        Ok(ty)
    }

    fn parse_block(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LBrace)?;
        let e = self.parse_expr()?;
        self.expect(Tok::RBrace)?;
        Ok(e)
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Let => {
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::Eq)?;
                let rhs = self.parse_rhs()?;
                self.expect(Tok::In)?;
                let body = self.parse_expr()?;
                Ok(Expr::Let {
                    var,
                    rhs,
                    body: Box::new(body),
                    pos,
                })
            }
            Tok::If => {
                self.bump();
                let lhs = self.parse_atom()?;
                let op = match self.bump() {
                    Tok::Eq => CmpOp::Eq,
                    Tok::Ne => CmpOp::Ne,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Le => CmpOp::Le,
                    Tok::Gt => CmpOp::Gt,
                    Tok::Ge => CmpOp::Ge,
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("comparison operator"));
                    }
                };
                let rhs = self.parse_atom()?;
                self.expect(Tok::Then)?;
                let then_branch = self.parse_block()?;
                self.expect(Tok::Else)?;
                let else_branch = self.parse_block()?;
                Ok(Expr::If {
                    cond: Cond { op, lhs, rhs },
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    pos,
                })
            }
            Tok::IfNp => {
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::Then)?;
                let then_branch = self.parse_block()?;
                self.expect(Tok::Else)?;
                let else_branch = self.parse_block()?;
                Ok(Expr::IfNp {
                    var,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    pos,
                })
            }
            Tok::Assert => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.parse_formula()?;
                self.expect(Tok::RParen)?;
                self.eat(Tok::Semi);
                let body = self.parse_expr()?;
                Ok(Expr::Assert {
                    cond,
                    body: Box::new(body),
                    pos,
                })
            }
            Tok::Alias => {
                self.bump();
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Eq)?;
                let node = if self.eat(Tok::Star) {
                    let base = self.ident()?;
                    self.expect(Tok::RParen)?;
                    self.eat(Tok::Semi);
                    let body = self.parse_expr()?;
                    Expr::AliasDeref {
                        var,
                        base,
                        auto: false,
                        body: Box::new(body),
                        pos,
                    }
                } else {
                    let base = self.ident()?;
                    self.expect(Tok::Plus)?;
                    let offset = self.parse_atom()?;
                    self.expect(Tok::RParen)?;
                    self.eat(Tok::Semi);
                    let body = self.parse_expr()?;
                    Expr::AliasAddPtr {
                        var,
                        base,
                        offset,
                        auto: false,
                        body: Box::new(body),
                        pos,
                    }
                };
                Ok(node)
            }
            Tok::Ident(x) if *self.peek2() == Tok::Assign => {
                self.bump();
                self.bump();
                let rhs = self.parse_atom()?;
                self.expect(Tok::Semi)?;
                let body = self.parse_expr()?;
                Ok(Expr::Assign {
                    var: x,
                    rhs,
                    body: Box::new(body),
                    pos,
                })
            }
            Tok::Ident(_) | Tok::Int(_) | Tok::Minus => {
                let a = self.parse_atom()?;
                Ok(Expr::Value(a, pos))
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn parse_rhs(&mut self) -> Result<Rhs, ParseError> {
        match self.peek().clone() {
            Tok::Underscore => {
                self.bump();
                Ok(Rhs::Nondet)
            }
            Tok::LBrace => {
                let inner = self.parse_block()?;
                Ok(Rhs::Expr(Box::new(inner)))
            }
            Tok::Star => {
                self.bump();
                let y = self.ident()?;
                Ok(Rhs::Deref(y))
            }
            Tok::Alloc | Tok::MkArray => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(Rhs::MkArray(n)),
                    _ => {
                        self.pos -= 1;
                        Err(self.unexpected("array size (integer literal)"))
                    }
                }
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(n) => {
                        self.bump();
                        self.finish_operand(Atom::Int(-n))
                    }
                    Tok::Ident(x) => {
                        self.bump();
                        Ok(Rhs::Neg(Atom::Var(x)))
                    }
                    _ => Err(self.unexpected("integer or variable after `-`")),
                }
            }
            Tok::Ident(f) if *self.peek2() == Tok::LParen => {
                self.bump();
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.parse_atom()?);
                        if !self.eat(Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                Ok(Rhs::Call(f, args))
            }
            Tok::Ident(_) | Tok::Int(_) => {
                let a = self.parse_atom()?;
                self.finish_operand(a)
            }
            _ => Err(self.unexpected("right-hand side")),
        }
    }

    /// After the first operand of a let right-hand side: either a binary
    /// operator follows, or the rhs is the bare atom.
    fn finish_operand(&mut self, first: Atom) -> Result<Rhs, ParseError> {
        let op = match self.peek() {
            Tok::Plus => Op::Add,
            Tok::Minus => Op::Sub,
            Tok::Star => Op::Mul,
            Tok::Slash => Op::Div,
            _ => return Ok(Rhs::Atom(first)),
        };
        self.bump();
        let second = self.parse_atom()?;
        Ok(Rhs::BinOp(op, first, second))
    }

    fn parse_atom(&mut self) -> Result<Atom, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Atom::Int(n))
            }
            Tok::Ident(x) => {
                self.bump();
                Ok(Atom::Var(x))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(n) => {
                        self.bump();
                        Ok(Atom::Int(-n))
                    }
                    _ => Err(self.unexpected("integer literal after `-`")),
                }
            }
            _ => Err(self.unexpected("integer or variable")),
        }
    }

    // Formulas: implication is right-associative and binds loosest,
    // then ||, then &&, then negation.
    fn parse_formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.parse_formula_or()?;
        if self.eat(Tok::Implies) {
            let rhs = self.parse_formula()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn parse_formula_or(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.parse_formula_and()?];
        while self.eat(Tok::OrOr) {
            parts.push(self.parse_formula_and()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(Formula::Or(parts))
        }
    }

    fn parse_formula_and(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.parse_formula_neg()?];
        while self.eat(Tok::AndAnd) {
            parts.push(self.parse_formula_neg()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(Formula::And(parts))
        }
    }

    fn parse_formula_neg(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let inner = self.parse_formula_neg()?;
                Ok(Formula::Not(Box::new(inner)))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::LParen => {
                // Either a parenthesized formula or a parenthesized term
                // starting an atom; try the formula first.
                let save = self.pos;
                self.bump();
                if let Ok(f) = self.parse_formula() {
                    if self.eat(Tok::RParen)
                        && !matches!(
                            self.peek(),
                            Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
                        )
                    {
                        return Ok(f);
                    }
                }
                self.pos = save;
                self.parse_formula_atom()
            }
            _ => self.parse_formula_atom(),
        }
    }

    fn parse_formula_atom(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.parse_term()?;
        let cmp = match self.bump() {
            Tok::Eq => Cmp::Eq,
            Tok::Ne => Cmp::Ne,
            Tok::Lt => Cmp::Lt,
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            Tok::Ge => Cmp::Ge,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("comparison operator"));
            }
        };
        let rhs = self.parse_term()?;
        Ok(Formula::Atom(cmp, lhs, rhs))
    }

    fn parse_term(&mut self) -> Result<LinTerm, ParseError> {
        let mut acc = self.parse_term_factor()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.parse_term_factor()?;
                    acc = acc.add(&t);
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.parse_term_factor()?;
                    acc = acc.sub(&t);
                }
                _ => return Ok(acc),
            }
        }
    }

    /// `INT`, `IDENT`, `INT * IDENT`, `IDENT * INT`, `- factor`, `( term )`.
    fn parse_term_factor(&mut self) -> Result<LinTerm, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                let t = self.parse_term_factor()?;
                Ok(t.scale(&BigInt::from(-1)))
            }
            Tok::LParen => {
                self.bump();
                let t = self.parse_term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Int(n) => {
                self.bump();
                if self.eat(Tok::Star) {
                    let x = self.ident()?;
                    Ok(LinTerm::var(x).scale(&n))
                } else {
                    Ok(LinTerm::constant(n))
                }
            }
            Tok::Ident(x) => {
                self.bump();
                if self.eat(Tok::Star) {
                    match self.bump() {
                        Tok::Int(n) => Ok(LinTerm::var(x).scale(&n)),
                        _ => {
                            self.pos -= 1;
                            Err(self.unexpected("integer coefficient"))
                        }
                    }
                } else {
                    Ok(LinTerm::var(x))
                }
            }
            _ => Err(self.unexpected("linear term")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("{ 0 }").unwrap();
        assert!(p.defs.is_empty());
        assert_eq!(p.main, Expr::Value(Atom::Int(0.into()), p.main.pos()));
    }

    #[test]
    fn malformed_let_is_an_error() {
        let err = parse("{ let x = in 0 }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("parse error"), "{msg}");
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse("{\n  let x = in 0\n}").unwrap_err();
        match err {
            ParseError::Unexpected { pos, .. } => {
                assert_eq!(pos.line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parses_def_with_annotation() {
        let src = "f(n, p) [ <n: int, p: int ref> -> <n: int, p: int ref | int> ] { 0 } { 0 }";
        let p = parse(src).unwrap();
        let f = &p.defs["f"];
        let annot = f.simple_annot.as_ref().unwrap();
        assert_eq!(annot.pre.len(), 2);
        assert_eq!(annot.pre[1].1, AnnotType::Ref(Box::new(AnnotType::Int)));
        assert_eq!(annot.ret, AnnotType::Int);
    }

    #[test]
    fn parses_assert_and_alias_forms() {
        let src = "{ let p = alloc 2 in alias(q = p + 1); assert(x = 0); 0 }";
        let p = parse(src).unwrap();
        match &p.main {
            Expr::Let { body, .. } => match body.as_ref() {
                Expr::AliasAddPtr { var, base, .. } => {
                    assert_eq!(var, "q");
                    assert_eq!(base, "p");
                }
                other => panic!("expected alias, got {other:?}"),
            },
            other => panic!("expected let, got {other:?}"),
        }
    }

    #[test]
    fn nondet_token_parses() {
        let p = parse("{ let rand = _ in 0 }").unwrap();
        match &p.main {
            Expr::Let { rhs, .. } => assert_eq!(*rhs, Rhs::Nondet),
            other => panic!("{other:?}"),
        }
    }
}

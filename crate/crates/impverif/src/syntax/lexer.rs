//! Tokenizer for `.imp` sources.

use super::ast::Pos;
use num_bigint::BigInt;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    // keywords
    Let,
    In,
    If,
    IfNp,
    Then,
    Else,
    Assert,
    Alias,
    Alloc,
    MkArray,
    True,
    False,
    KwInt,
    KwRef,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Assign, // :=
    Eq,     // =
    Ne,     // !=
    Lt,
    Le,
    Gt,
    Ge,
    Arrow,   // ->
    Implies, // =>
    AndAnd,
    OrOr,
    Bang,
    Bar,
    Plus,
    Minus,
    Star,
    Slash,
    Underscore,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Let => write!(f, "`let`"),
            Tok::In => write!(f, "`in`"),
            Tok::If => write!(f, "`if`"),
            Tok::IfNp => write!(f, "`ifnp`"),
            Tok::Then => write!(f, "`then`"),
            Tok::Else => write!(f, "`else`"),
            Tok::Assert => write!(f, "`assert`"),
            Tok::Alias => write!(f, "`alias`"),
            Tok::Alloc => write!(f, "`alloc`"),
            Tok::MkArray => write!(f, "`mkarray`"),
            Tok::True => write!(f, "`true`"),
            Tok::False => write!(f, "`false`"),
            Tok::KwInt => write!(f, "`int`"),
            Tok::KwRef => write!(f, "`ref`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Assign => write!(f, "`:=`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Ne => write!(f, "`!=`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Implies => write!(f, "`=>`"),
            Tok::AndAnd => write!(f, "`&&`"),
            Tok::OrOr => write!(f, "`||`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Bar => write!(f, "`|`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Underscore => write!(f, "`_`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, thiserror::Error)]
#[error("lex error at {pos}: {msg}")]
pub struct LexError {
    pub pos: Pos,
    pub msg: String,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $pos:expr) => {
            out.push(Token { tok: $tok, pos: $pos })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        let advance = |i: &mut usize, col: &mut u32, n: usize| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                advance(&mut i, &mut col, 1);
            }
            '{' => {
                push!(Tok::LBrace, pos);
                advance(&mut i, &mut col, 1);
            }
            '}' => {
                push!(Tok::RBrace, pos);
                advance(&mut i, &mut col, 1);
            }
            '(' => {
                push!(Tok::LParen, pos);
                advance(&mut i, &mut col, 1);
            }
            ')' => {
                push!(Tok::RParen, pos);
                advance(&mut i, &mut col, 1);
            }
            '[' => {
                push!(Tok::LBracket, pos);
                advance(&mut i, &mut col, 1);
            }
            ']' => {
                push!(Tok::RBracket, pos);
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                push!(Tok::Comma, pos);
                advance(&mut i, &mut col, 1);
            }
            ';' => {
                push!(Tok::Semi, pos);
                advance(&mut i, &mut col, 1);
            }
            ':' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Assign, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Colon, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&'>') {
                    push!(Tok::Implies, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Eq, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ne, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Bang, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Le, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Lt, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ge, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Gt, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '-' => {
                if bytes.get(i + 1) == Some(&'>') {
                    push!(Tok::Arrow, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Minus, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '&' => {
                if bytes.get(i + 1) == Some(&'&') {
                    push!(Tok::AndAnd, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    return Err(LexError {
                        pos,
                        msg: "expected `&&`".into(),
                    });
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&'|') {
                    push!(Tok::OrOr, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Bar, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '+' => {
                push!(Tok::Plus, pos);
                advance(&mut i, &mut col, 1);
            }
            '*' => {
                push!(Tok::Star, pos);
                advance(&mut i, &mut col, 1);
            }
            '/' => {
                push!(Tok::Slash, pos);
                advance(&mut i, &mut col, 1);
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                col += (i - start) as u32;
                push!(Tok::Int(text.parse().unwrap()), pos);
            }
            _ if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric()
                        || bytes[i] == '_'
                        || bytes[i] == '\''
                        || bytes[i] == '$')
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                col += (i - start) as u32;
                let tok = match text.as_str() {
                    "let" => Tok::Let,
                    "in" => Tok::In,
                    "if" => Tok::If,
                    "ifnp" => Tok::IfNp,
                    "then" => Tok::Then,
                    "else" => Tok::Else,
                    "assert" => Tok::Assert,
                    "alias" => Tok::Alias,
                    "alloc" => Tok::Alloc,
                    "mkarray" => Tok::MkArray,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "int" => Tok::KwInt,
                    "ref" => Tok::KwRef,
                    "_" => Tok::Underscore,
                    _ => Tok::Ident(text),
                };
                push!(tok, pos);
            }
            _ => {
                return Err(LexError {
                    pos,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

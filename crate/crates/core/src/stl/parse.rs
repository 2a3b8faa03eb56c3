//! Text syntax for STL formulas.
//!
//! ```text
//! formula := or
//! or      := and ("|" and)*
//! and     := until ("&" until)*
//! until   := unary ("U[" int "," int "]" unary)*
//! unary   := "!" unary | "G[" int "," int "]" unary | "F[" int "," int "]" unary | atom
//! atom    := "T" | "(" formula ")" | identifier | comparison
//! comparison := linexpr (">=" | "<=") linexpr
//! linexpr := ["-"] term (("+" | "-") term)*
//! term    := number "*" var | number | var        var := x1, x2, ...
//! ```
//!
//! Identifiers other than `T`, `G`, `F`, `U` and the `x<k>` variables refer
//! to predicates registered in a [`PredicateRegistry`]. Comparisons are
//! normalized to `c'x + d >= 0`.

use super::{Formula, Predicate, StlError};
use nalgebra::DVector;
use std::collections::BTreeMap;

/// Named predicates available to the parser.
#[derive(Debug, Clone, Default)]
pub struct PredicateRegistry {
    entries: BTreeMap<String, Predicate>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, pred: Predicate) {
        self.entries.insert(name.into(), pred);
    }

    pub fn get(&self, name: &str) -> Option<&Predicate> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Star,
    Plus,
    Minus,
    Amp,
    Pipe,
    Bang,
    Ge,
    Le,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, StlError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| {
            out.push(Spanned {
                tok,
                line: tline,
                col: tcol,
            })
        };
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                chars.next();
                col += 1;
                push(Tok::LParen);
            }
            ')' => {
                chars.next();
                col += 1;
                push(Tok::RParen);
            }
            '[' => {
                chars.next();
                col += 1;
                push(Tok::LBracket);
            }
            ']' => {
                chars.next();
                col += 1;
                push(Tok::RBracket);
            }
            ',' => {
                chars.next();
                col += 1;
                push(Tok::Comma);
            }
            '*' => {
                chars.next();
                col += 1;
                push(Tok::Star);
            }
            '+' => {
                chars.next();
                col += 1;
                push(Tok::Plus);
            }
            '-' => {
                chars.next();
                col += 1;
                push(Tok::Minus);
            }
            '&' => {
                chars.next();
                col += 1;
                push(Tok::Amp);
            }
            '|' => {
                chars.next();
                col += 1;
                push(Tok::Pipe);
            }
            '!' => {
                chars.next();
                col += 1;
                push(Tok::Bang);
            }
            '>' | '<' => {
                let first = ch;
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push(if first == '>' { Tok::Ge } else { Tok::Le });
                } else {
                    return Err(StlError::Syntax {
                        line,
                        col: col - 1,
                        msg: format!("strict comparison `{first}` not supported, use `{first}=`"),
                    });
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut buf = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' {
                        buf.push(c);
                        chars.next();
                        col += 1;
                        // allow exponent sign
                        if (buf.ends_with('e') || buf.ends_with('E'))
                            && matches!(chars.peek(), Some('+') | Some('-'))
                        {
                            buf.push(chars.next().unwrap());
                            col += 1;
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = buf.parse().map_err(|_| StlError::Syntax {
                    line: tline,
                    col: tcol,
                    msg: format!("malformed number `{buf}`"),
                })?;
                push(Tok::Number(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut buf = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        buf.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push(Tok::Ident(buf));
            }
            other => {
                return Err(StlError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    registry: &'a PredicateRegistry,
    state_dim: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> StlError {
        let (line, col) = self.here();
        StlError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), StlError> {
        match self.next() {
            Some(s) if s.tok == tok => Ok(()),
            Some(s) => Err(StlError::Syntax {
                line: s.line,
                col: s.col,
                msg: format!("expected {what}, found {:?}", s.tok),
            }),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn interval(&mut self) -> Result<(usize, usize), StlError> {
        self.expect(Tok::LBracket, "`[`")?;
        let lo = self.integer()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.integer()?;
        self.expect(Tok::RBracket, "`]`")?;
        if hi < lo {
            return Err(StlError::InvalidInterval { lo, hi });
        }
        Ok((lo, hi))
    }

    fn integer(&mut self) -> Result<usize, StlError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Number(v),
                line,
                col,
            }) => {
                if v.fract() == 0.0 && v >= 0.0 {
                    Ok(v as usize)
                } else {
                    Err(StlError::Syntax {
                        line,
                        col,
                        msg: format!("interval bound must be a nonnegative integer, got {v}"),
                    })
                }
            }
            _ => Err(self.err("expected integer interval bound")),
        }
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.next();
            let rhs = self.and_expr()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.until_expr()?;
        while self.peek() == Some(&Tok::Amp) {
            self.next();
            let rhs = self.until_expr()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until_expr(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Some(Tok::Ident(id)) if id == "U") {
            self.next();
            let (lo, hi) = self.interval()?;
            let rhs = self.unary()?;
            lhs = Formula::until(lo, hi, lhs, rhs)?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.next();
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::Ident(id)) if id == "G" && self.peek2() == Some(&Tok::LBracket) => {
                self.next();
                let (lo, hi) = self.interval()?;
                Formula::always(lo, hi, self.unary()?)
            }
            Some(Tok::Ident(id)) if id == "F" && self.peek2() == Some(&Tok::LBracket) => {
                self.next();
                let (lo, hi) = self.interval()?;
                Formula::eventually(lo, hi, self.unary()?)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        match self.peek() {
            Some(Tok::LParen) => {
                // Either a parenthesized formula or a parenthesized comparison;
                // decide by scanning ahead for a comparison operator before the
                // matching close paren.
                if self.paren_wraps_comparison() {
                    self.next();
                    let f = self.comparison()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(f)
                } else {
                    self.next();
                    let f = self.formula()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(f)
                }
            }
            Some(Tok::Ident(id)) if id == "T" => {
                self.next();
                Ok(Formula::True)
            }
            Some(Tok::Ident(id)) if is_var(id) => self.comparison(),
            Some(Tok::Ident(id)) => {
                let name = id.clone();
                match self.registry.get(&name) {
                    Some(pred) => {
                        self.next();
                        Ok(Formula::named_pred(name, pred.clone()))
                    }
                    None => Err(StlError::UnknownPredicate(name)),
                }
            }
            Some(Tok::Number(_)) | Some(Tok::Minus) => self.comparison(),
            _ => Err(self.err("expected formula")),
        }
    }

    /// Look ahead from a `(` for `>=`/`<=` at depth 1.
    fn paren_wraps_comparison(&self) -> bool {
        let mut depth = 0usize;
        for s in &self.toks[self.pos..] {
            match s.tok {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    if depth == 1 {
                        return false;
                    }
                    depth -= 1;
                }
                Tok::Ge | Tok::Le if depth == 1 => return true,
                _ => {}
            }
        }
        false
    }

    fn comparison(&mut self) -> Result<Formula, StlError> {
        let (c_l, d_l) = self.linexpr()?;
        let op = match self.next() {
            Some(Spanned { tok: Tok::Ge, .. }) => Tok::Ge,
            Some(Spanned { tok: Tok::Le, .. }) => Tok::Le,
            _ => return Err(self.err("expected `>=` or `<=` in predicate comparison")),
        };
        let (c_r, d_r) = self.linexpr()?;
        let (c, d) = match op {
            Tok::Ge => (c_l - c_r, d_l - d_r),
            _ => (c_r - c_l, d_r - d_l),
        };
        Ok(Formula::pred(Predicate::affine(c, d)?))
    }

    fn linexpr(&mut self) -> Result<(DVector<f64>, f64), StlError> {
        let mut c = DVector::zeros(self.state_dim);
        let mut d = 0.0f64;
        let mut sign = 1.0f64;
        if self.peek() == Some(&Tok::Minus) {
            self.next();
            sign = -1.0;
        }
        loop {
            self.term(sign, &mut c, &mut d)?;
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    sign = 1.0;
                }
                Some(Tok::Minus) => {
                    self.next();
                    sign = -1.0;
                }
                _ => break,
            }
        }
        Ok((c, d))
    }

    fn term(&mut self, sign: f64, c: &mut DVector<f64>, d: &mut f64) -> Result<(), StlError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Number(v),
                ..
            }) => {
                if self.peek() == Some(&Tok::Star) {
                    self.next();
                    let idx = self.variable()?;
                    c[idx] += sign * v;
                } else {
                    *d += sign * v;
                }
                Ok(())
            }
            Some(Spanned {
                tok: Tok::Ident(id),
                line,
                col,
            }) => {
                if let Some(idx) = var_index(&id) {
                    if idx >= self.state_dim {
                        return Err(StlError::Syntax {
                            line,
                            col,
                            msg: format!(
                                "variable x{} exceeds state dimension {}",
                                idx + 1,
                                self.state_dim
                            ),
                        });
                    }
                    c[idx] += sign;
                    Ok(())
                } else {
                    Err(StlError::Syntax {
                        line,
                        col,
                        msg: format!("expected `x<k>` variable or number, found `{id}`"),
                    })
                }
            }
            Some(s) => Err(StlError::Syntax {
                line: s.line,
                col: s.col,
                msg: format!("expected term, found {:?}", s.tok),
            }),
            None => Err(self.err("expected term, found end of input")),
        }
    }

    fn variable(&mut self) -> Result<usize, StlError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Ident(id),
                line,
                col,
            }) => match var_index(&id) {
                Some(idx) if idx < self.state_dim => Ok(idx),
                Some(idx) => Err(StlError::Syntax {
                    line,
                    col,
                    msg: format!(
                        "variable x{} exceeds state dimension {}",
                        idx + 1,
                        self.state_dim
                    ),
                }),
                None => Err(StlError::Syntax {
                    line,
                    col,
                    msg: format!("expected `x<k>` variable, found `{id}`"),
                }),
            },
            _ => Err(self.err("expected `x<k>` variable")),
        }
    }
}

fn is_var(id: &str) -> bool {
    var_index(id).is_some()
}

fn var_index(id: &str) -> Option<usize> {
    let rest = id.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = rest.parse().ok()?;
    if k == 0 {
        return None;
    }
    Some(k - 1)
}

/// Parse a formula over an `n`-dimensional state space.
pub fn parse(text: &str, state_dim: usize, registry: &PredicateRegistry) -> Result<Formula, StlError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        registry,
        state_dim,
    };
    let f = parser.formula()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.err("unexpected trailing input"));
    }
    Ok(f)
}

//! Text syntax for formulae.
//!
//! Precedence from loosest to tightest: `->` (right), `|` (right), `&`
//! (right), prefix `!`. Quantifier bodies extend as far right as possible.
//! The printer re-sugars derived forms and is canonical:
//! `parse(print(φ)) == φ` for every well-formed φ.

use super::{canonical_vars, Formula, Var};
use crate::typegraph::TypeGraph;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Neq,
    Bang,
    Amp,
    Bar,
    Arrow,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).map(|(_, c)| *c);
        let (tok, width) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            '.' => (Tok::Dot, 1),
            '=' => (Tok::Eq, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Bar, 1),
            '!' if next == Some('=') => (Tok::Neq, 2),
            '!' => (Tok::Bang, 1),
            '-' if next == Some('>') => (Tok::Arrow, 2),
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '\'') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().map(|(_, c)| *c).collect();
                out.push((Tok::Ident(word), pos));
                i = j;
                continue;
            }
            other => {
                return Err(ParseError {
                    offset: pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, pos));
        i += width;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

const KEYWORDS: [&str; 5] = ["forall", "exists", "no", "top", "bot"];

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    types: &'a TypeGraph,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(lhs.implies(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.and()?;
        if *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.or()?;
            return Ok(lhs.or(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.and()?;
            return Ok(lhs.and(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::LParen => {
                self.bump();
                let f = self.implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(word) => match word.as_str() {
                "top" => {
                    self.bump();
                    Ok(Formula::Top)
                }
                "bot" => {
                    self.bump();
                    Ok(Formula::bot())
                }
                "no" => {
                    self.bump();
                    let at = self.offset();
                    let ty = self.ident("an edge type")?;
                    let Some(arity) = self.types.arity(&ty) else {
                        return Err(ParseError {
                            offset: at,
                            message: format!("unknown edge type `{ty}`"),
                        });
                    };
                    Ok(Formula::ForallEdge {
                        ty,
                        vars: canonical_vars(arity),
                        body: Box::new(Formula::bot()),
                    })
                }
                "forall" | "exists" => {
                    self.bump();
                    let at = self.offset();
                    let ty = self.ident("an edge type")?;
                    self.expect(Tok::LParen, "`(`")?;
                    let mut vars = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            vars.push(Var::new(&self.ident("a variable")?));
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Dot, "`.`")?;
                    match self.types.arity(&ty) {
                        None => {
                            return Err(ParseError {
                                offset: at,
                                message: format!("unknown edge type `{ty}`"),
                            })
                        }
                        Some(n) if n != vars.len() => {
                            return Err(ParseError {
                                offset: at,
                                message: format!("`{ty}` has arity {n}, {} variables given", vars.len()),
                            })
                        }
                        _ => {}
                    }
                    for (i, v) in vars.iter().enumerate() {
                        if vars[..i].contains(v) {
                            return Err(ParseError {
                                offset: at,
                                message: format!("variable `{v}` bound twice"),
                            });
                        }
                    }
                    let body = self.implies()?;
                    Ok(if word == "forall" {
                        Formula::ForallEdge {
                            ty,
                            vars,
                            body: Box::new(body),
                        }
                    } else {
                        Formula::ForallEdge {
                            ty,
                            vars,
                            body: Box::new(body.not()),
                        }
                        .not()
                    })
                }
                _ => self.equation(),
            },
            _ => self.fail("expected a formula"),
        }
    }

    fn equation(&mut self) -> Result<Formula, ParseError> {
        let first = Var::new(&self.ident("a variable")?);
        match self.peek() {
            Tok::Neq => {
                self.bump();
                let y = Var::new(&self.ident("a variable")?);
                Ok(Formula::Eq(first, y).not())
            }
            Tok::Eq => {
                let mut chain = vec![first];
                while *self.peek() == Tok::Eq {
                    self.bump();
                    chain.push(Var::new(&self.ident("a variable")?));
                }
                Ok(Formula::conjunction(
                    chain.windows(2).map(|w| Formula::Eq(w[0].clone(), w[1].clone())),
                ))
            }
            _ => self.fail("expected `=` or `!=`"),
        }
    }
}

/// Parses a formula; quantified edge types and arities are checked against
/// `types` (needed anyway to expand `no D`).
pub fn parse_formula(src: &str, types: &TypeGraph) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        types,
    };
    let f = p.implies()?;
    if *p.peek() != Tok::End {
        return p.fail("unexpected trailing input");
    }
    Ok(f)
}

const IMPLIES: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const UNARY: u8 = 3;

pub(super) fn print(f: &Formula) -> String {
    let mut out = String::new();
    write(f, IMPLIES, true, &mut out);
    out
}

fn vars_list(vars: &[Var]) -> String {
    vars.iter().map(Var::as_str).collect::<Vec<_>>().join(",")
}

fn wrap(out: &mut String, parens: bool, body: impl FnOnce(&mut String)) {
    if parens {
        out.push('(');
    }
    body(out);
    if parens {
        out.push(')');
    }
}

/// `rightmost`: nothing follows this sub-formula at the current nesting
/// level, so an unparenthesised quantifier body cannot swallow anything.
fn write(f: &Formula, prec: u8, rightmost: bool, out: &mut String) {
    match f {
        Formula::Top => out.push_str("top"),
        Formula::Eq(x, y) => {
            out.push_str(&format!("{x} = {y}"));
        }
        Formula::And(a, b) => wrap(out, prec > AND, |out| {
            let inner_right = rightmost || prec > AND;
            write(a, UNARY, false, out);
            out.push_str(" & ");
            write(b, AND, inner_right, out);
        }),
        Formula::ForallEdge { ty, vars, body } => {
            if **body == Formula::bot() && *vars == canonical_vars(vars.len()) {
                out.push_str(&format!("no {ty}"));
                return;
            }
            wrap(out, !rightmost, |out| {
                out.push_str(&format!("forall {ty}({}). ", vars_list(vars)));
                write(body, IMPLIES, true, out);
            })
        }
        Formula::Not(inner) => match &**inner {
            Formula::Top => out.push_str("bot"),
            Formula::Eq(x, y) => out.push_str(&format!("{x} != {y}")),
            Formula::ForallEdge { ty, vars, body } if matches!(**body, Formula::Not(_)) => {
                let Formula::Not(b) = &**body else { unreachable!() };
                wrap(out, !rightmost, |out| {
                    out.push_str(&format!("exists {ty}({}). ", vars_list(vars)));
                    write(b, IMPLIES, true, out);
                })
            }
            Formula::And(l, r) if matches!((&**l, &**r), (Formula::Not(_), Formula::Not(_))) => {
                let (Formula::Not(p), Formula::Not(q)) = (&**l, &**r) else {
                    unreachable!()
                };
                if let Formula::Not(a) = &**p {
                    wrap(out, prec > IMPLIES, |out| {
                        let inner_right = rightmost || prec > IMPLIES;
                        write(a, OR, false, out);
                        out.push_str(" -> ");
                        write(q, IMPLIES, inner_right, out);
                    })
                } else {
                    wrap(out, prec > OR, |out| {
                        let inner_right = rightmost || prec > OR;
                        write(p, AND, false, out);
                        out.push_str(" | ");
                        write(q, OR, inner_right, out);
                    })
                }
            }
            other => {
                out.push('!');
                write(other, UNARY, rightmost, out);
            }
        },
    }
}

//! Surface syntax for λ-terms.
//!
//! ```text
//! expr  := '\' ident+ '.' expr
//!        | 'ifz' expr 'then' expr 'else' expr
//!        | cmp
//! cmp   := add ('=' add)?
//! add   := mul (('+' | '-') mul)*
//! mul   := app ('*' app)*
//! app   := atom+                  -- associates left
//! atom  := ident | integer | '(' expr ')'
//! ```
//!
//! `λ` is accepted in place of `\`. Positions in errors count characters.

use std::fmt;

use super::{Expr, PrimOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.position, self.message)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lambda,
    Dot,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Equals,
    Ifz,
    Then,
    Else,
    Ident(String),
    Int(i64),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            pos: 0,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, SyntaxError> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            let start = self.pos;
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '\\' | 'λ' => {
                    self.bump();
                    out.push((Tok::Lambda, start));
                }
                '.' => {
                    self.bump();
                    out.push((Tok::Dot, start));
                }
                '(' => {
                    self.bump();
                    out.push((Tok::LParen, start));
                }
                ')' => {
                    self.bump();
                    out.push((Tok::RParen, start));
                }
                '+' => {
                    self.bump();
                    out.push((Tok::Plus, start));
                }
                '-' => {
                    self.bump();
                    out.push((Tok::Minus, start));
                }
                '*' => {
                    self.bump();
                    out.push((Tok::Star, start));
                }
                '=' => {
                    self.bump();
                    out.push((Tok::Equals, start));
                }
                c if c.is_ascii_digit() => {
                    let mut text = String::new();
                    while let Some(&d) = self.chars.peek() {
                        if d.is_ascii_digit() {
                            text.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let value = text.parse().map_err(|_| SyntaxError {
                        position: start,
                        message: format!("integer literal `{text}` out of range"),
                    })?;
                    out.push((Tok::Int(value), start));
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut name = String::new();
                    while let Some(&d) = self.chars.peek() {
                        if d.is_alphanumeric() || d == '_' {
                            name.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let tok = match name.as_str() {
                        "ifz" => Tok::Ifz,
                        "then" => Tok::Then,
                        "else" => Tok::Else,
                        _ => Tok::Ident(name),
                    };
                    out.push((tok, start));
                }
                other => {
                    return Err(SyntaxError {
                        position: start,
                        message: format!("unexpected character `{other}`"),
                    });
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    index: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.index).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.index)
            .map(|&(_, p)| p)
            .unwrap_or(self.end_pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.index).map(|(t, _)| t.clone());
        if tok.is_some() {
            self.index += 1;
        }
        tok
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&tok) {
            self.index += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn error(&self, message: String) -> SyntaxError {
        SyntaxError {
            position: self.pos(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Some(Tok::Lambda) => {
                self.bump();
                let mut params = Vec::new();
                while let Some(Tok::Ident(_)) = self.peek() {
                    if let Some(Tok::Ident(name)) = self.bump() {
                        params.push(name);
                    }
                }
                if params.is_empty() {
                    return Err(self.error("expected parameter name after λ".into()));
                }
                self.expect(Tok::Dot, "`.` after λ parameters")?;
                let body = self.expr()?;
                Ok(params
                    .into_iter()
                    .rev()
                    .fold(body, |acc, p| Expr::Abs(p, Box::new(acc))))
            }
            Some(Tok::Ifz) => {
                self.bump();
                let cond = self.expr()?;
                self.expect(Tok::Then, "`then`")?;
                let then = self.expr()?;
                self.expect(Tok::Else, "`else`")?;
                let els = self.expr()?;
                Ok(Expr::if_zero(cond, then, els))
            }
            _ => self.cmp(),
        }
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.add()?;
        if self.peek() == Some(&Tok::Equals) {
            self.bump();
            let rhs = self.add()?;
            return Ok(Expr::prim(PrimOp::Eq, lhs, rhs));
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => PrimOp::Add,
                Some(Tok::Minus) => PrimOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul()?;
            lhs = Expr::prim(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.app()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            let rhs = self.app()?;
            lhs = Expr::prim(PrimOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn app(&mut self) -> Result<Expr, SyntaxError> {
        let mut expr = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            expr = Expr::app(expr, arg);
        }
        Ok(expr)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Ident(_)) | Some(Tok::Int(_)) | Some(Tok::LParen)
        )
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.bump() {
            Some(Tok::Ident(name)) => Ok(Expr::Var(name)),
            Some(Tok::Int(v)) => Ok(Expr::Int(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => {
                self.index = self.index.saturating_sub(1);
                Err(self.error("expected an expression".into()))
            }
        }
    }
}

/// Parses `text` into an [`Expr`]. Errors carry the character position of
/// the offending token.
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let end_pos = text.chars().count();
    let tokens = Lexer::new(text).tokens()?;
    if tokens.is_empty() {
        return Err(SyntaxError {
            position: 0,
            message: "empty input".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        index: 0,
        end_pos,
    };
    let expr = parser.expr()?;
    if parser.peek().is_some() {
        return Err(parser.error("unexpected trailing input".into()));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        assert_eq!(
            parse_expr("\\x. x").unwrap(),
            Expr::abs("x", Expr::var("x"))
        );
    }

    #[test]
    fn application_associates_left() {
        let parsed = parse_expr("f a b").unwrap();
        assert_eq!(
            parsed,
            Expr::app(Expr::app(Expr::var("f"), Expr::var("a")), Expr::var("b"))
        );
        assert_eq!(parsed, parse_expr("(f a) b").unwrap());
    }

    #[test]
    fn const_function() {
        assert_eq!(
            parse_expr("\\x.\\y. x").unwrap(),
            Expr::abs("x", Expr::abs("y", Expr::var("x")))
        );
        // multi-binder sugar
        assert_eq!(
            parse_expr("\\x y. x").unwrap(),
            parse_expr("\\x.\\y. x").unwrap()
        );
    }

    #[test]
    fn unicode_lambda() {
        assert_eq!(
            parse_expr("λx. x").unwrap(),
            parse_expr("\\x. x").unwrap()
        );
    }

    #[test]
    fn arithmetic_precedence() {
        // 1 + n * 2 parses as 1 + (n * 2)
        assert_eq!(
            parse_expr("1 + n * 2").unwrap(),
            Expr::prim(
                PrimOp::Add,
                Expr::int(1),
                Expr::prim(PrimOp::Mul, Expr::var("n"), Expr::int(2)),
            )
        );
    }

    #[test]
    fn application_binds_tighter_than_mul() {
        assert_eq!(
            parse_expr("n * f (n - 1)").unwrap(),
            Expr::prim(
                PrimOp::Mul,
                Expr::var("n"),
                Expr::app(
                    Expr::var("f"),
                    Expr::prim(PrimOp::Sub, Expr::var("n"), Expr::int(1)),
                ),
            )
        );
    }

    #[test]
    fn conditional() {
        let e = parse_expr("ifz n then 1 else n * 2").unwrap();
        assert!(matches!(e, Expr::IfZero(..)));
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_expr("\\x . (x").unwrap_err();
        assert_eq!(err.position, 7);
        let err = parse_expr("f ? g").unwrap_err();
        assert_eq!(err.position, 2);
        assert!(parse_expr("").is_err());
    }
}

use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    DisallowedVariable(String),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("at position {position}: {}", describe(.kind))]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(msg) => msg.clone(),
        ParseErrorKind::UnknownIdentifier(name) => format!("unknown identifier `{name}`"),
        ParseErrorKind::DisallowedVariable(name) => format!("variable `{name}` is not allowed here"),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Token)>, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lexer.next()?;
            let end = tok == Token::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Token), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Token::End));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => return self.number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok((start, Token::Ident(self.src[start..self.pos].to_string())));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => Token::Op(c as char),
            b'(' => Token::LParen,
            b')' => Token::RParen,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::Syntax(format!("unexpected character `{ch}`")),
                });
            }
        };
        self.pos += 1;
        Ok((start, tok))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Token), ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |lexer: &mut Self| {
            while lexer.pos < bytes.len() && bytes[lexer.pos].is_ascii_digit() {
                lexer.pos += 1;
            }
        };
        digits(self);
        if bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(bytes.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                // `2e` is a number followed by an identifier, not an exponent.
                self.pos = mark;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (start, Token::Number(v)))
            .map_err(|_| ParseError {
                position: start,
                kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
            })
    }
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    at: usize,
    allowed: &'a [Var],
}

/// Parses `source` into an expression whose free variables are drawn from
/// `allowed`.
///
/// Precedence from tightest to loosest: `^` (right-associative), unary `-`,
/// `* /`, `+ -`. Function calls are written `name(expr)`.
pub fn parse(source: &str, allowed: &[Var]) -> Result<Expr, ParseError> {
    let tokens = Lexer::tokens(source)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        allowed,
    };
    let expr = parser.sum()?;
    match parser.peek() {
        Token::End => Ok(expr),
        tok => Err(parser.error(format!("unexpected {}", show(tok)))),
    }
}

fn show(tok: &Token) -> String {
    match tok {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(name) => format!("identifier `{name}`"),
        Token::Op(c) => format!("operator `{c}`"),
        Token::LParen => "`(`".into(),
        Token::RParen => "`)`".into(),
        Token::End => "end of input".into(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.at].1
    }

    fn position(&self) -> usize {
        self.tokens[self.at].0
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.at].1.clone();
        if tok != Token::End {
            self.at += 1;
        }
        tok
    }

    fn error(&self, msg: String) -> ParseError {
        ParseError {
            position: self.position(),
            kind: ParseErrorKind::Syntax(msg),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Token::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.product()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Token::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Token::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Token::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.position();
        match self.bump() {
            Token::Number(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError {
                            position,
                            kind: ParseErrorKind::UnknownIdentifier(name),
                        });
                    };
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if Func::from_name(&name).is_some() {
                    return Err(ParseError {
                        position,
                        kind: ParseErrorKind::Syntax(format!("function `{name}` needs an argument")),
                    });
                }
                let var = match name.as_str() {
                    "x" => Some(Var::X),
                    "y" => Some(Var::Y),
                    _ => None,
                };
                match var {
                    Some(v) if self.allowed.contains(&v) => Ok(Expr::Var(v)),
                    _ => Err(ParseError {
                        position,
                        kind: ParseErrorKind::DisallowedVariable(name),
                    }),
                }
            }
            tok => Err(ParseError {
                position,
                kind: ParseErrorKind::Syntax(format!("expected a value, found {}", show(&tok))),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Token::RParen => {
                self.bump();
                Ok(())
            }
            tok => Err(self.error(format!("expected `)`, found {}", show(tok)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Bindings;

    const XY: [Var; 2] = [Var::X, Var::Y];

    fn count_cos(e: &Expr) -> usize {
        match e {
            Expr::Call(Func::Cos, a) => 1 + count_cos(a),
            Expr::Call(_, a) | Expr::Neg(a) => count_cos(a),
            Expr::Binary(_, a, b) => count_cos(a) + count_cos(b),
            _ => 0,
        }
    }

    #[test]
    fn cosine_profile() {
        let e = parse("2 + cos(2*pi*y)", &XY).unwrap();
        assert_eq!(count_cos(&e), 1);
    }

    #[test]
    fn disallowed_variable() {
        let err = parse("x + z", &XY).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DisallowedVariable("z".into()));
        assert_eq!(err.position, 4);
        let err = parse("x + y", &[Var::X]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DisallowedVariable("y".into()));
    }

    #[test]
    fn unknown_function() {
        let err = parse("tan(x)", &XY).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("tan".into()));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("1 + * 2", &XY).unwrap_err();
        assert_eq!(err.position, 4);
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
        let err = parse("(1 + 2", &XY).unwrap_err();
        assert_eq!(err.position, 6);
        let err = parse("1 $ 2", &XY).unwrap_err();
        assert_eq!(err.position, 2);
        let err = parse("cos", &XY).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
        assert!(parse("", &XY).is_err());
        assert!(parse("2 3", &XY).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str| parse(s, &XY).unwrap().eval(&Bindings::xy(2.0, 3.0)).unwrap();
        assert_eq!(v("1 + 2 * 3"), 7.0);
        assert_eq!(v("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(v("-2 ^ 2"), -4.0);
        assert_eq!(v("2 ^ -1"), 0.5);
        assert_eq!(v("8 / 4 / 2"), 1.0);
        assert_eq!(v("8 - 4 - 2"), 2.0);
        assert_eq!(v("-x * y"), -6.0);
        assert_eq!(v("1.5e1 + .5 + 2E-1"), 15.7);
        assert_eq!(v("+x"), 2.0);
    }
}

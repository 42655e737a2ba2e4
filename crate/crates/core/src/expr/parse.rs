use thiserror::Error;

use super::{Expr, Func};

/// What went wrong while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnknownIdentifier(String),
    VariableOutOfRange { index: usize, n: usize },
    NonIntegerExponent(String),
    BadNumber(String),
    ZeroDimension,
}

/// Parse failure with the byte offset into the source where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at position {position}: {kind:?}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part: e[+-]digits
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    position: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                })?;
                out.push((start, Tok::Num(v, text.to_string())));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or(c);
                return Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    n: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            position: self.offset(),
            kind,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            None => self.err(ParseErrorKind::UnexpectedEnd),
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(format!("{t:?}"))),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.peek().cloned() {
            Some(Tok::Num(_, text)) => {
                if !text.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(self.err(ParseErrorKind::NonIntegerExponent(text)));
                }
                let k: i32 = text
                    .parse()
                    .map_err(|_| self.err(ParseErrorKind::BadNumber(text.clone())))?;
                self.pos += 1;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(self.unexpected()),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    self.pos += 1;
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let index = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| self.err(ParseErrorKind::UnknownIdentifier(name.clone())))?;
                if index > self.n {
                    return Err(self.err(ParseErrorKind::VariableOutOfRange { index, n: self.n }));
                }
                self.pos += 1;
                Ok(Expr::Var(index - 1))
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parse `source` as an expression over `x1 … xn`.
///
/// Grammar:
///
/// ```text
/// expr   := term (('+'|'-') term)*
/// term   := factor (('*'|'/') factor)*
/// factor := base ('^' integer)?
/// base   := number | ident | '(' expr ')' | '-' base | func '(' expr ')'
/// func   := 'sin' | 'cos' | 'exp' | 'log'
/// ident  := 'x' positive-integer
/// ```
///
/// The exponent may carry a leading minus sign; fractional exponents are
/// rejected.
pub fn parse(source: &str, n: usize) -> Result<Expr, ParseError> {
    if n == 0 {
        return Err(ParseError {
            position: 0,
            kind: ParseErrorKind::ZeroDimension,
        });
    }
    let toks = tokenize(source)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: source.len(),
        n,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_summands() {
        let e = parse("(x1-1)^2 + x2^2", 2).unwrap();
        match e {
            Expr::Add(a, b) => {
                assert!(matches!(*a, Expr::Pow(_, 2)));
                assert!(matches!(*b, Expr::Pow(_, 2)));
            }
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn single_variable() {
        assert_eq!(parse("x1", 1).unwrap(), Expr::Var(0));
        assert_eq!(parse("  x1 ", 1).unwrap(), Expr::Var(0));
    }

    #[test]
    fn out_of_range() {
        let err = parse("x3", 2).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::VariableOutOfRange { index: 3, n: 2 });
        assert_eq!(err.position, 0);
    }

    #[test]
    fn unknown_identifiers() {
        for src in ["y1", "x0", "x", "tan(x1)", "x1y"] {
            let err = parse(src, 2).unwrap_err();
            assert!(
                matches!(err.kind, ParseErrorKind::UnknownIdentifier(_)),
                "{src}: {err:?}"
            );
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("x1 + * x2", 2).unwrap_err();
        assert_eq!(err.position, 5);
        let err = parse("(x1 + x2", 2).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);
        let err = parse("x1 $ x2", 2).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('$'));
        assert_eq!(err.position, 3);
        let err = parse("x1 x2", 2).unwrap_err();
        assert_eq!(err.position, 3);
    }

    #[test]
    fn fractional_exponent_rejected() {
        let err = parse("x1^0.5", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::NonIntegerExponent(_)));
        let err = parse("x1^1e2", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::NonIntegerExponent(_)));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3", 1).unwrap(), Expr::Const(1.5e-3));
        assert_eq!(parse("2.", 1).unwrap(), Expr::Const(2.0));
        assert_eq!(parse(".25", 1).unwrap(), Expr::Const(0.25));
        assert!(parse("1.2.3", 1).is_err());
    }

    #[test]
    fn unary_minus_binds_to_base() {
        // '-' base is a base, so the exponent applies to the negation.
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Neg(Box::new(Expr::Var(0)))), 2));
        let e = parse("x1^-2", 1).unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Var(0)), -2));
    }

    #[test]
    fn zero_dimension() {
        assert_eq!(parse("1", 0).unwrap_err().kind, ParseErrorKind::ZeroDimension);
    }
}

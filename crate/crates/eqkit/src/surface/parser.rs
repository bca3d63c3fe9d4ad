//! Recursive-descent parser for surface expressions.
//!
//! Precedence, tightest first: `^` (integer exponent), unary `-`, `* /`,
//! `+ -`. Binary operators of equal precedence associate left. The exponent
//! of `^` must be an (optionally negated) integer literal.

use super::{Expr, Func, ParseError, SurfaceExpr, MAX_DEPTH};

pub fn parse(src: &str, dim: usize) -> Result<SurfaceExpr, ParseError> {
    assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
    if src.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let tokens = lex(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        dim,
        depth: 0,
    };
    let root = p.expression()?;
    match p.peek() {
        (Tok::End, _) => {
            if ast_depth(&root) > MAX_DEPTH {
                return Err(ParseError::TooDeep { offset: 0 });
            }
            Ok(SurfaceExpr::new(root, dim))
        }
        (tok, offset) => Err(ParseError::Syntax {
            offset,
            message: format!("unexpected {}", tok.describe()),
        }),
    }
}

fn ast_depth(e: &Expr) -> usize {
    match e {
        Expr::Lit(_) | Expr::Var(_) => 1,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + ast_depth(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            1 + ast_depth(a).max(ast_depth(b))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("invalid number literal `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &src[i..i + 1]),
                })
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> (Tok, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn enter(&mut self, offset: usize) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::TooDeep { offset });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.peek();
        if tok == Tok::Minus {
            self.bump();
            self.enter(offset)?;
            let inner = self.unary()?;
            self.leave();
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while self.peek().0 == Tok::Caret {
            self.bump();
            let exponent = self.integer_exponent()?;
            base = Expr::Pow(Box::new(base), exponent);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let (tok, offset) = self.bump();
        let (negative, tok, offset) = if tok == Tok::Minus {
            let (t, o) = self.bump();
            (true, t, o)
        } else {
            (false, tok, offset)
        };
        match tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= f64::from(i32::MAX) => {
                let n = v as i32;
                Ok(if negative { -n } else { n })
            }
            _ => Err(ParseError::Syntax {
                offset,
                message: "exponent must be an integer literal".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Lit(v)),
            Tok::LParen => {
                self.enter(offset)?;
                let inner = self.expression()?;
                self.leave();
                let (close, close_offset) = self.bump();
                if close != Tok::RParen {
                    return Err(ParseError::Syntax {
                        offset: close_offset,
                        message: format!("expected `)`, found {}", close.describe()),
                    });
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    self.call(&name, offset)
                } else {
                    self.variable(&name, offset)
                }
            }
            other => Err(ParseError::Syntax {
                offset,
                message: format!("expected value, found {}", other.describe()),
            }),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let index = match name {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => {
                return Err(ParseError::UnknownIdentifier {
                    offset,
                    name: name.to_string(),
                })
            }
        };
        if index >= self.dim {
            return Err(ParseError::VariableNotAllowedInDim {
                offset,
                var: name.chars().next().unwrap(),
                dim: self.dim,
            });
        }
        Ok(Expr::Var(index))
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownIdentifier {
            offset,
            name: name.to_string(),
        })?;
        self.bump(); // consume `(`
        let mut args = vec![self.expression()?];
        while self.peek().0 == Tok::Comma {
            self.bump();
            args.push(self.expression()?);
        }
        let (close, close_offset) = self.bump();
        if close != Tok::RParen {
            return Err(ParseError::Syntax {
                offset: close_offset,
                message: format!("expected `)`, found {}", close.describe()),
            });
        }
        if args.len() != 1 {
            return Err(ParseError::WrongArity {
                offset,
                name: name.to_string(),
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1 - 2 - 3", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), -4.0);
        let e = parse("2 + 3 * 4 ^ 2", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 50.0);
        // `^` binds tighter than unary minus
        let e = parse("-x^2", 2).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), -9.0);
        let e = parse("12/4/3", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn malformed_input_reports_offset() {
        match parse("x +* y", 2) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn z_rejected_in_two_dimensions() {
        match parse("z", 2) {
            Err(ParseError::VariableNotAllowedInDim { var, dim, .. }) => {
                assert_eq!(var, 'z');
                assert_eq!(dim, 2);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
        assert!(parse("z", 3).is_ok());
    }

    #[test]
    fn unknown_identifiers_and_arity() {
        assert!(matches!(
            parse("tan(x)", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("w + 1", 2),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("sin(x, y)", 2),
            Err(ParseError::WrongArity { expected: 1, found: 2, .. })
        ));
    }

    #[test]
    fn non_integer_exponents_rejected() {
        assert!(matches!(parse("x^2.5", 2), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x^y", 2), Err(ParseError::Syntax { .. })));
        assert!(parse("x^-2", 2).is_ok());
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(parse("2x", 2).is_err());
    }

    #[test]
    fn depth_limit_enforced() {
        let deep = format!("{}x{}", "(".repeat(70), ")".repeat(70));
        assert!(matches!(parse(&deep, 2), Err(ParseError::TooDeep { .. })));
        let ok = format!("{}x{}", "(".repeat(20), ")".repeat(20));
        assert!(parse(&ok, 2).is_ok());
    }

    fn arb_expr_src() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("y".to_string()),
            (0u32..100).prop_map(|n| format!("{n}")),
            (1u32..50, 1u32..50).prop_map(|(a, b)| format!("{a}.{b}")),
        ];
        leaf.prop_recursive(5, 64, 4, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / {b})")),
                (inner.clone(), 0i32..4).prop_map(|(a, n)| format!("({a}^{n})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("cos({a})")),
                inner.clone().prop_map(|a| format!("exp({a})")),
                inner.clone().prop_map(|a| format!("abs({a})")),
                inner.prop_map(|a| format!("sqrt(abs({a}))")),
            ]
        })
    }

    proptest! {
        // Pretty-printing then reparsing yields the identical tree.
        #[test]
        fn pretty_print_round_trip(src in arb_expr_src()) {
            if let Ok(parsed) = parse(&src, 2) {
                let printed = format!("{parsed}");
                let reparsed = parse(&printed, 2).expect("pretty output must reparse");
                prop_assert_eq!(parsed, reparsed);
            }
        }
    }
}

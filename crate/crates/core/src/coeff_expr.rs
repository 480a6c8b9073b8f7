//! Coefficient expressions: a tiny arithmetic language over the point `(x, y)`.
//!
//! Grammar (precedence as written, `^` right-associative):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-'? atom
//! atom   := number | ident | ident '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! Note that unary minus binds tighter than `^`, so `-x^2` is `(-x)^2`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    Var(Var),
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Vec<ExprAst>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at ({x}, {y})")]
    DivisionByZero { x: f64, y: f64 },
    #[error("`{func}` outside its domain at ({x}, {y})")]
    Domain { func: &'static str, x: f64, y: f64 },
    #[error("non-finite value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Ident,
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
    tok_end: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
            tok_end: 0,
        };
        p.advance()?;
        Ok(p)
    }

    fn syntax(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            self.tok_end = self.pos;
            return Ok(());
        }
        let c = bytes[self.pos];
        self.tok = match c {
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                    let mut look = self.pos + 1;
                    if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                        look += 1;
                    }
                    if look < bytes.len() && bytes[look].is_ascii_digit() {
                        self.pos = look;
                        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    }
                }
                let text = &self.src[start..self.pos];
                let value = f64::from_str(text)
                    .map_err(|_| self.syntax(start, format!("malformed number `{text}`")))?;
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                return Err(self.syntax(self.pos, format!("unexpected character `{ch}`")));
            }
        };
        self.tok_end = self.pos;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == want {
            self.advance()
        } else {
            Err(self.syntax(self.tok_start, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = self.tok {
            self.advance()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.factor()?;
        while let Tok::Op(c @ ('*' | '/')) = self.tok {
            self.advance()?;
            let rhs = self.factor()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.unary()?;
        if self.tok == Tok::Op('^') {
            self.advance()?;
            let exponent = self.factor()?;
            return Ok(ExprAst::Binary(
                BinOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            let inner = self.atom()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        match self.tok {
            Tok::Num(v) => {
                self.advance()?;
                Ok(ExprAst::Num(v))
            }
            Tok::Ident => {
                let start = self.tok_start;
                let name = &self.src[self.tok_start..self.tok_end];
                self.advance()?;
                if self.tok == Tok::LParen {
                    let func = Func::lookup(name).ok_or_else(|| ParseError::UnknownIdentifier {
                        name: name.to_string(),
                        offset: start,
                    })?;
                    self.advance()?;
                    let mut args = vec![self.expr()?];
                    if self.tok == Tok::Comma {
                        self.advance()?;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name: name.to_string(),
                            offset: start,
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(ExprAst::Call(func, args))
                } else {
                    match name {
                        "x" => Ok(ExprAst::Var(Var::X)),
                        "y" => Ok(ExprAst::Var(Var::Y)),
                        _ => Err(ParseError::UnknownIdentifier {
                            name: name.to_string(),
                            offset: start,
                        }),
                    }
                }
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::End => Err(self.syntax(self.tok_start, "unexpected end of input")),
            _ => Err(self.syntax(self.tok_start, "expected a number, identifier or `(`")),
        }
    }
}

/// Parses `text` into an expression tree.
pub fn parse_expr(text: &str) -> Result<ExprAst, ParseError> {
    let mut parser = Parser::new(text)?;
    let ast = parser.expr()?;
    if parser.tok != Tok::End {
        return Err(parser.syntax(parser.tok_start, "unexpected trailing input"));
    }
    Ok(ast)
}

/// Evaluates `ast` at `(x, y)`. Every intermediate value is checked, so a
/// non-finite result is always reported as an error.
pub fn eval_expr(ast: &ExprAst, point: (f64, f64)) -> Result<f64, EvalError> {
    let (x, y) = point;
    let finite = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x, y })
        }
    };
    match ast {
        ExprAst::Num(v) => finite(*v),
        ExprAst::Var(Var::X) => finite(x),
        ExprAst::Var(Var::Y) => finite(y),
        ExprAst::Neg(inner) => Ok(-eval_expr(inner, point)?),
        ExprAst::Binary(op, l, r) => {
            let a = eval_expr(l, point)?;
            let b = eval_expr(r, point)?;
            match op {
                BinOp::Add => finite(a + b),
                BinOp::Sub => finite(a - b),
                BinOp::Mul => finite(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(EvalError::DivisionByZero { x, y })
                    } else {
                        finite(a / b)
                    }
                }
                BinOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(EvalError::Domain { func: "^", x, y });
                    }
                    if a == 0.0 && b < 0.0 {
                        return Err(EvalError::DivisionByZero { x, y });
                    }
                    finite(a.powf(b))
                }
            }
        }
        ExprAst::Call(func, args) => {
            let a = eval_expr(&args[0], point)?;
            match func {
                Func::Sin => finite(a.sin()),
                Func::Cos => finite(a.cos()),
                Func::Exp => finite(a.exp()),
                Func::Abs => finite(a.abs()),
                Func::Sqrt => {
                    if a < 0.0 {
                        Err(EvalError::Domain { func: "sqrt", x, y })
                    } else {
                        finite(a.sqrt())
                    }
                }
                Func::Min => finite(a.min(eval_expr(&args[1], point)?)),
                Func::Max => finite(a.max(eval_expr(&args[1], point)?)),
            }
        }
    }
}

/// Fully parenthesized rendering; re-parsing gives back the same tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Num(v) => write!(f, "{v:?}"),
            ExprAst::Var(Var::X) => f.write_str("x"),
            ExprAst::Var(Var::Y) => f.write_str("y"),
            ExprAst::Neg(inner) => write!(f, "-({inner})"),
            ExprAst::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprAst::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A coefficient function μ, α, β or ζ given by its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    source: String,
    ast: ExprAst,
}

impl CoefficientField {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(CoefficientField {
            source: source.to_string(),
            ast: parse_expr(source)?,
        })
    }

    /// Constant field.
    pub fn constant(value: f64) -> Self {
        CoefficientField {
            source: format!("{value:?}"),
            ast: ExprAst::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &ExprAst {
        &self.ast
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        eval_expr(&self.ast, (x, y))
    }
}

impl FromStr for CoefficientField {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoefficientField::parse(s)
    }
}

impl Serialize for CoefficientField {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_str(s: &str, x: f64, y: f64) -> Result<f64, EvalError> {
        eval_expr(&parse_expr(s).unwrap(), (x, y))
    }

    #[test]
    fn single_variable() {
        assert_eq!(parse_expr("x").unwrap(), ExprAst::Var(Var::X));
        assert_eq!(eval_str("x", 0.25, 0.75).unwrap(), 0.25);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval_str("1 + 2*x^2", 2.0, 0.0).unwrap(), 9.0);
        assert_eq!(eval_str("2^3^2", 0.0, 0.0).unwrap(), 512.0);
        assert_eq!(eval_str("-x^2", 3.0, 0.0).unwrap(), 9.0);
        assert_eq!(eval_str("8/2/2", 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(eval_str("1 - 2 - 3", 0.0, 0.0).unwrap(), -4.0);
        assert_eq!(eval_str("0.5+0.5*x", 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(eval_str("abs(x-0.5)", 0.25, 0.0).unwrap(), 0.25);
        assert_eq!(eval_str("max(x,y)", 0.2, 0.9).unwrap(), 0.9);
        assert_eq!(eval_str("min(x, y)", 0.2, 0.9).unwrap(), 0.2);
        assert_eq!(eval_str("1.5e1", 0.0, 0.0).unwrap(), 15.0);
    }

    #[test]
    fn unbalanced_paren() {
        let err = parse_expr("min(x, y").unwrap_err();
        assert!(
            matches!(err, ParseError::Syntax { offset: 8, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn trailing_operator_offset() {
        let err = parse_expr("x +").unwrap_err();
        assert_eq!(err.offset(), 3);
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_expr("z + 1").unwrap_err(),
            ParseError::UnknownIdentifier { offset: 0, .. }
        ));
        assert!(matches!(
            parse_expr("foo(x)").unwrap_err(),
            ParseError::UnknownIdentifier { .. }
        ));
        assert!(matches!(
            parse_expr("max(x)").unwrap_err(),
            ParseError::Arity {
                expected: 2,
                found: 1,
                ..
            }
        ));
        assert!(matches!(
            parse_expr("sin(x, y)").unwrap_err(),
            ParseError::Arity {
                expected: 1,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(
            eval_str("1/x", 0.0, 0.0),
            Err(EvalError::DivisionByZero { .. })
        ));
        assert!(matches!(
            eval_str("sqrt(x - 1)", 0.0, 0.0),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval_str("exp(1000)", 0.0, 0.0),
            Err(EvalError::NonFinite { .. })
        ));
        assert!(matches!(
            eval_str("(x-1)^0.5", 0.0, 0.0),
            Err(EvalError::Domain { .. })
        ));
    }

    fn arb_ast() -> impl Strategy<Value = ExprAst> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(ExprAst::Num),
            Just(ExprAst::Var(Var::X)),
            Just(ExprAst::Var(Var::Y)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| ExprAst::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| ExprAst::Binary(
                        op,
                        Box::new(l),
                        Box::new(r)
                    )),
                inner
                    .clone()
                    .prop_map(|e| ExprAst::Call(Func::Sin, vec![e])),
                (inner.clone(), inner).prop_map(|(a, b)| ExprAst::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(ast in arb_ast()) {
            let printed = ast.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            prop_assert_eq!(reparsed, ast);
        }

        #[test]
        fn evaluation_never_leaks_non_finite(ast in arb_ast(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            if let Ok(v) = eval_expr(&ast, (x, y)) {
                prop_assert!(v.is_finite());
            }
        }
    }
}

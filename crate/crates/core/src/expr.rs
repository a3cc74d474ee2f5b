//! A small arithmetic expression language for user-defined integrands.
//!
//! ```text
//! expr    := term   (('+' | '-') term)*
//! term    := unary  (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?        right-associative
//! exponent:= '-' exponent | power
//! primary := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! var     := 'u1' | 'u2' | ... | 'u<dim>'
//! func    := sin | cos | exp | log | sqrt | abs     (one argument)
//!          | min | max                              (two arguments)
//! ```
//!
//! Expressions are evaluated either by walking the tree ([`Expr::eval`]) or
//! by running a compiled postfix [`Program`]; both check every intermediate
//! result and report domain errors instead of producing NaN.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier {name:?} at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("{func} takes {expected} argument(s), got {got} (position {pos})")]
    Arity {
        func: &'static str,
        expected: usize,
        got: usize,
        pos: usize,
    },
    #[error("variable u{index} at position {pos} is out of range for dimension {dim}")]
    VariableOutOfRange {
        index: usize,
        dim: usize,
        pos: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("non-finite result from {0}")]
    NonFinite(&'static str),
    #[error("expected a point of dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64, EvalError> {
        let r = match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        };
        finite(r, self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
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
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
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

    fn apply(self, args: &[f64]) -> Result<f64, EvalError> {
        let x = args[0];
        let r = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(EvalError::LogDomain(x));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(EvalError::SqrtDomain(x));
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
            Func::Min => x.min(args[1]),
            Func::Max => x.max(args[1]),
        };
        finite(r, self.name())
    }
}

fn finite(x: f64, what: &'static str) -> Result<f64, EvalError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(EvalError::NonFinite(what))
    }
}

/// Expression tree. Variables are 1-based (`Var(1)` is `u1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, u: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Var(i) => Ok(u[i - 1]),
            Expr::Neg(e) => Ok(-e.eval(u)?),
            Expr::Binary(op, a, b) => op.apply(a.eval(u)?, b.eval(u)?),
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(u))
                    .collect::<Result<Vec<_>, _>>()?;
                f.apply(&vals)
            }
        }
    }

    /// Largest variable index referenced, 0 if none.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Lit(_) => 0,
            Expr::Var(i) => *i,
            Expr::Neg(e) => e.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
            Expr::Call(_, args) => args.iter().map(Expr::max_var).max().unwrap_or(0),
        }
    }

    pub fn compile(&self) -> Program {
        let mut ops = Vec::new();
        self.emit(&mut ops);
        Program { ops }
    }

    fn emit(&self, ops: &mut Vec<Op>) {
        match self {
            Expr::Lit(v) => ops.push(Op::Push(*v)),
            Expr::Var(i) => ops.push(Op::Load(i - 1)),
            Expr::Neg(e) => {
                e.emit(ops);
                ops.push(Op::Neg);
            }
            Expr::Binary(op, a, b) => {
                a.emit(ops);
                b.emit(ops);
                ops.push(Op::Binary(*op));
            }
            Expr::Call(f, args) => {
                for a in args {
                    a.emit(ops);
                }
                ops.push(Op::Call(*f));
            }
        }
    }
}

/// Fully parenthesised, so printing then parsing gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "u{i}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
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

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Push(f64),
    Load(usize),
    Neg,
    Binary(BinOp),
    Call(Func),
}

/// Postfix form of an [`Expr`], evaluated on a value stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

impl Program {
    pub fn eval(&self, u: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for op in &self.ops {
            match *op {
                Op::Push(v) => stack.push(v),
                Op::Load(i) => stack.push(u[i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("operand");
                    *top = -*top;
                }
                Op::Binary(bop) => {
                    let b = stack.pop().expect("operand");
                    let a = stack.pop().expect("operand");
                    stack.push(bop.apply(a, b)?);
                }
                Op::Call(func) => {
                    let at = stack.len() - func.arity();
                    let r = func.apply(&stack[at..])?;
                    stack.truncate(at);
                    stack.push(r);
                }
            }
        }
        Ok(stack.pop().expect("program leaves one value"))
    }
}

/// Parses `text` as an expression over `u1..u<dim>`.
pub fn parse_expression(text: &str, dim: usize) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        dim,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if let Some((tok, pos)) = parser.tokens.get(parser.at) {
        return Err(ExprError::Syntax {
            pos: *pos,
            message: format!("unexpected {tok}"),
        });
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "identifier {s:?}"),
            Token::Sym(c) => write!(f, "'{c}'"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
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
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                message: format!("malformed number {lexeme:?}"),
            })?;
            if !value.is_finite() {
                return Err(ExprError::Syntax {
                    pos: start,
                    message: format!("number {lexeme:?} overflows"),
                });
            }
            tokens.push((Token::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push((Token::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            tokens.push((Token::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ExprError::Syntax {
                pos: i,
                message: format!("unexpected character {ch:?}"),
            });
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    at: usize,
    dim: usize,
    end: usize,
}

impl Parser {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.at) {
            Some((Token::Sym(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn expect(&mut self, sym: char) -> Result<(), ExprError> {
        if self.peek_sym() == Some(sym) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{sym}'")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        let found = match self.tokens.get(self.at) {
            Some((tok, _)) => tok.to_string(),
            None => "end of input".to_string(),
        };
        ExprError::Syntax {
            pos: self.pos(),
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_sym() {
            self.at += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_sym() {
            self.at += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_sym() == Some('-') {
            self.at += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.peek_sym() == Some('^') {
            self.at += 1;
            let exponent = self.exponent()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, ExprError> {
        if self.peek_sym() == Some('-') {
            self.at += 1;
            return Ok(Expr::Neg(Box::new(self.exponent()?)));
        }
        self.power()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let Some((tok, pos)) = self.tokens.get(self.at).cloned() else {
            return Err(self.unexpected("an operand"));
        };
        match tok {
            Token::Num(v) => {
                self.at += 1;
                Ok(Expr::Lit(v))
            }
            Token::Sym('(') => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.at += 1;
                if self.peek_sym() == Some('(') {
                    return self.call(&name, pos);
                }
                if name == "pi" {
                    return Ok(Expr::Lit(std::f64::consts::PI));
                }
                match variable_index(&name) {
                    Some(index) if index >= 1 && index <= self.dim => Ok(Expr::Var(index)),
                    Some(index) if index >= 1 => Err(ExprError::VariableOutOfRange {
                        index,
                        dim: self.dim,
                        pos,
                    }),
                    _ => Err(ExprError::UnknownIdentifier { name, pos }),
                }
            }
            Token::Sym(_) => Err(self.unexpected("an operand")),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Expr, ExprError> {
        let func = Func::lookup(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.to_string(),
            pos,
        })?;
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.peek_sym() == Some(',') {
            self.at += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        if args.len() != func.arity() {
            return Err(ExprError::Arity {
                func: func.name(),
                expected: func.arity(),
                got: args.len(),
                pos,
            });
        }
        Ok(Expr::Call(func, args))
    }
}

/// `u<k>` → `Some(k)`.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('u')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(i: usize) -> Box<Expr> {
        Box::new(Expr::Var(i))
    }

    fn lit(v: f64) -> Box<Expr> {
        Box::new(Expr::Lit(v))
    }

    #[test]
    fn grammar_example() {
        let e = parse_expression("u1 + 2*u2", 2).unwrap();
        assert_eq!(
            e,
            Expr::Binary(
                BinOp::Add,
                var(1),
                Box::new(Expr::Binary(BinOp::Mul, lit(2.0), var(2)))
            )
        );
    }

    #[test]
    fn paper_integrand_parses_and_evaluates() {
        let e = parse_expression("exp(-(u1*u2*u3 + sin(u3*u4*u5)))", 5).unwrap();
        let expected = (-(1.0 + 1f64.sin())).exp();
        assert_eq!(e.eval(&[1.0; 5]).unwrap(), expected);
        assert!((expected - 0.158_584).abs() < 1e-6);
        assert_eq!(e.compile().eval(&[1.0; 5]).unwrap(), expected);
    }

    #[test]
    fn precedence_and_associativity() {
        let at = |s: &str| parse_expression(s, 2).unwrap().eval(&[2.0, 3.0]).unwrap();
        assert_eq!(at("1 - 2 - 3"), -4.0);
        assert_eq!(at("8 / 4 / 2"), 1.0);
        assert_eq!(at("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(at("-u1 ^ 2"), -4.0);
        assert_eq!(at("(-u1) ^ 2"), 4.0);
        assert_eq!(at("2 ^ -1"), 0.5);
        assert_eq!(at("1 + 2 * 3 ^ 2"), 19.0);
        assert_eq!(at("--u1"), 2.0);
        assert_eq!(at("min(u1, u2) + max(u1, u2)"), 5.0);
        assert_eq!(at("1.5e1 + 2E-1"), 15.2);
        assert_eq!(at("abs(-u2)"), 3.0);
        assert!((at("cos(pi)") + 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_expression("u3", 2),
            Err(ExprError::VariableOutOfRange {
                index: 3,
                dim: 2,
                pos: 0
            })
        ));
        assert!(matches!(
            parse_expression("u0", 2),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expression("1 + foo", 2),
            Err(ExprError::UnknownIdentifier { pos: 4, .. })
        ));
        assert!(matches!(
            parse_expression("tan(u1)", 2),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expression("min(u1)", 2),
            Err(ExprError::Arity {
                func: "min",
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_expression("sin(u1, u2)", 2),
            Err(ExprError::Arity { .. })
        ));
        for (bad, at) in [
            ("u1 +", 4),
            ("(u1", 3),
            ("u1 u2", 3),
            ("u1 # 2", 3),
            ("", 0),
            ("1e999", 0),
        ] {
            match parse_expression(bad, 2) {
                Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, at, "{bad:?}"),
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn evaluation_errors() {
        let e = |s: &str| parse_expression(s, 1).unwrap();
        assert_eq!(e("log(u1)").eval(&[0.0]), Err(EvalError::LogDomain(0.0)));
        assert_eq!(
            e("log(u1 - 1)").compile().eval(&[0.5]),
            Err(EvalError::LogDomain(-0.5))
        );
        assert_eq!(
            e("sqrt(-1 - u1)").eval(&[0.0]),
            Err(EvalError::SqrtDomain(-1.0))
        );
        assert_eq!(e("1 / u1").eval(&[0.0]), Err(EvalError::NonFinite("/")));
        assert_eq!(
            e("(-1) ^ u1").compile().eval(&[0.5]),
            Err(EvalError::NonFinite("^"))
        );
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "u1 + 2*u2",
            "exp(-(u1*u2*u3 + sin(u3*u4*u5)))",
            "-u1 ^ -2 ^ 3 / (1 - u2) * max(u3, 0.1)",
            "sqrt(abs(u4)) - log(1 + u5) - 1e-7 * pi",
        ] {
            let e = parse_expression(s, 5).unwrap();
            let again = parse_expression(&e.to_string(), 5).unwrap();
            assert_eq!(again, e, "{s} printed as {e}");
        }
    }

    #[test]
    fn compiled_and_tree_walk_agree() {
        use rand::{Rng, SeedableRng};
        let e = parse_expression(
            "exp(-(u1*u2*u3 + sin(u3*u4*u5))) + min(u1, u2)^2.5 - sqrt(u3)*cos(u4) / (1 + u5)",
            5,
        )
        .unwrap();
        let program = e.compile();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
            let a = e.eval(&u).unwrap();
            let b = program.eval(&u).unwrap();
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn max_var_reports_highest_index() {
        assert_eq!(parse_expression("1 + 2", 3).unwrap().max_var(), 0);
        assert_eq!(parse_expression("u2 * sin(u3)", 3).unwrap().max_var(), 3);
    }
}

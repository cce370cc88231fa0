//! Expression language for bifunctions, derivative families, and objectives.
//!
//! Components are separated by `;`.  Variables are `x1..xn` (decision
//! point), `z1..zn` (the quantified parameter), and `u1..un` (a direction,
//! used by derivative expressions).  Operators: `+ - * / ^` with `^`
//! binding tightest (right-associative), then unary minus, then `* /`,
//! then `+ -`.  Functions: `abs`, `sqrt`, `exp`, `log`, binary `min` /
//! `max`, and variadic `norm2`.  There is no implicit multiplication.
//!
//! Evaluation is checked: division by zero, `log` of a non-positive value,
//! `sqrt` of a negative value, and any non-finite intermediate raise a
//! domain error instead of propagating NaN or infinity.
//!
//! ```
//! use vep_core::expr::{ExprVector, EvalCtx};
//! let f = ExprVector::parse("x1^2 * z1 / (z1^2 + 1)").unwrap();
//! let y = f.eval(&EvalCtx { x: &[1.0], z: &[-1.0], u: &[] }).unwrap();
//! assert_eq!(y, vec![-0.5]);
//! ```

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    X,
    Z,
    U,
}

impl Slot {
    fn letter(self) -> char {
        match self {
            Slot::X => 'x',
            Slot::Z => 'z',
            Slot::U => 'u',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Min,
    Max,
    Norm2,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm2 => "norm2",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "min" => Func::Min,
            "max" => Func::Max,
            "norm2" => Func::Norm2,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Variable reference; the index is 1-based in the surface syntax and
    /// stored 0-based here.
    Var(Slot, usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogNonPositive => "log of a non-positive value",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::NonFinite => "non-finite intermediate value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown function `{name}` at {line}:{col}")]
    UnknownFunction { name: String, line: usize, col: usize },
    #[error("`{name}` at {line}:{col} is not a variable (expected x<k>, z<k>, or u<k> with k >= 1)")]
    BadVariable { name: String, line: usize, col: usize },
    #[error("`{func}` expects {expected} argument(s), got {got} at {line}:{col}")]
    Arity { func: String, expected: String, got: usize, line: usize, col: usize },
    #[error("component {component}: {kind}")]
    Domain { component: usize, kind: DomainKind },
    #[error("component {component} references {slot}{index} but only {provided} value(s) were provided")]
    VarOutOfRange { component: usize, slot: char, index: usize, provided: usize },
    #[error("expression nests deeper than {0} levels")]
    TooDeep(usize),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

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
    Semi,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ExprError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                advance(&mut i, &mut line, &mut col);
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' | ';' => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Semi,
                };
                out.push(Spanned { tok, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col);
                }
                if i < chars.len() && chars[i] == '.' {
                    advance(&mut i, &mut line, &mut col);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    // Only treat as an exponent when digits (optionally
                    // signed) follow; otherwise leave it for the ident rule.
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while i < j {
                            advance(&mut i, &mut line, &mut col);
                        }
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            advance(&mut i, &mut line, &mut col);
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    line: tline,
                    col: tcol,
                    message: format!("invalid number `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        line: tline,
                        col: tcol,
                        message: format!("number `{text}` overflows"),
                    });
                }
                out.push(Spanned { tok: Tok::Num(value), line: tline, col: tcol });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(&mut i, &mut line, &mut col);
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(text), line: tline, col: tcol });
            }
            other => {
                return Err(ExprError::Syntax {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    out.push(Spanned { tok: Tok::End, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser (recursive descent)
// ---------------------------------------------------------------------------

const MAX_DEPTH: usize = 256;

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> ExprError {
        let s = self.peek();
        ExprError::Syntax { line: s.line, col: s.col, message: message.into() }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        let mut lhs = self.term(depth + 1)?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term(depth + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        let mut lhs = self.unary(depth + 1)?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary(depth + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.unary(depth + 1)?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power(depth + 1)
    }

    fn power(&mut self, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        let base = self.atom(depth + 1)?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            // Right-associative; the exponent may carry a unary minus.
            let exp = self.unary(depth + 1)?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self, depth: usize) -> Result<Expr, ExprError> {
        if depth > MAX_DEPTH {
            return Err(ExprError::TooDeep(MAX_DEPTH));
        }
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr(depth + 1)?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.err_here("expected `)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction {
                        name: name.clone(),
                        line: t.line,
                        col: t.col,
                    })?;
                    self.bump(); // (
                    let mut args = vec![self.expr(depth + 1)?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        args.push(self.expr(depth + 1)?);
                    }
                    if self.peek().tok != Tok::RParen {
                        return Err(self.err_here("expected `)` or `,` in argument list"));
                    }
                    self.bump();
                    let ok = match func {
                        Func::Abs | Func::Sqrt | Func::Exp | Func::Log => args.len() == 1,
                        Func::Min | Func::Max => args.len() == 2,
                        Func::Norm2 => !args.is_empty(),
                    };
                    if !ok {
                        let expected = match func {
                            Func::Abs | Func::Sqrt | Func::Exp | Func::Log => "1",
                            Func::Min | Func::Max => "2",
                            Func::Norm2 => "at least 1",
                        };
                        return Err(ExprError::Arity {
                            func: func.name().into(),
                            expected: expected.into(),
                            got: args.len(),
                            line: t.line,
                            col: t.col,
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    parse_var(&name, t.line, t.col)
                }
            }
            Tok::End => Err(ExprError::Syntax {
                line: t.line,
                col: t.col,
                message: "unexpected end of input".into(),
            }),
            _ => Err(ExprError::Syntax {
                line: t.line,
                col: t.col,
                message: "expected a number, variable, function call, or `(`".into(),
            }),
        }
    }
}

fn parse_var(name: &str, line: usize, col: usize) -> Result<Expr, ExprError> {
    let mut chars = name.chars();
    let head = chars.next().unwrap();
    let slot = match head {
        'x' => Slot::X,
        'z' => Slot::Z,
        'u' => Slot::U,
        _ => {
            return Err(ExprError::BadVariable { name: name.into(), line, col });
        }
    };
    let rest: String = chars.collect();
    if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
        return Err(ExprError::BadVariable { name: name.into(), line, col });
    }
    let idx: usize = rest
        .parse()
        .map_err(|_| ExprError::BadVariable { name: name.into(), line, col })?;
    if idx == 0 {
        return Err(ExprError::BadVariable { name: name.into(), line, col });
    }
    Ok(Expr::Var(slot, idx - 1))
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Variable bindings for evaluation.  Slices a component does not reference
/// may be empty.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub x: &'a [f64],
    pub z: &'a [f64],
    pub u: &'a [f64],
}

impl EvalCtx<'_> {
    fn get(&self, slot: Slot, idx: usize) -> Option<f64> {
        let s = match slot {
            Slot::X => self.x,
            Slot::Z => self.z,
            Slot::U => self.u,
        };
        s.get(idx).copied()
    }
}

enum EvalFail {
    Domain(DomainKind),
    Var(Slot, usize, usize),
}

impl Expr {
    fn eval_raw(&self, ctx: &EvalCtx) -> Result<f64, EvalFail> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(slot, idx) => ctx.get(*slot, *idx).ok_or_else(|| {
                let provided = match slot {
                    Slot::X => ctx.x.len(),
                    Slot::Z => ctx.z.len(),
                    Slot::U => ctx.u.len(),
                };
                EvalFail::Var(*slot, *idx, provided)
            }),
            Expr::Neg(e) => Ok(-e.eval_raw(ctx)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval_raw(ctx)?;
                let b = r.eval_raw(ctx)?;
                let v = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalFail::Domain(DomainKind::DivisionByZero));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                };
                if !v.is_finite() {
                    return Err(EvalFail::Domain(DomainKind::NonFinite));
                }
                Ok(v)
            }
            Expr::Call(func, args) => {
                let v = match func {
                    Func::Abs => args[0].eval_raw(ctx)?.abs(),
                    Func::Sqrt => {
                        let a = args[0].eval_raw(ctx)?;
                        if a < 0.0 {
                            return Err(EvalFail::Domain(DomainKind::SqrtNegative));
                        }
                        a.sqrt()
                    }
                    Func::Exp => args[0].eval_raw(ctx)?.exp(),
                    Func::Log => {
                        let a = args[0].eval_raw(ctx)?;
                        if a <= 0.0 {
                            return Err(EvalFail::Domain(DomainKind::LogNonPositive));
                        }
                        a.ln()
                    }
                    Func::Min => {
                        let a = args[0].eval_raw(ctx)?;
                        let b = args[1].eval_raw(ctx)?;
                        a.min(b)
                    }
                    Func::Max => {
                        let a = args[0].eval_raw(ctx)?;
                        let b = args[1].eval_raw(ctx)?;
                        a.max(b)
                    }
                    Func::Norm2 => {
                        let mut s = 0.0;
                        for a in args {
                            let v = a.eval_raw(ctx)?;
                            s += v * v;
                        }
                        s.sqrt()
                    }
                };
                if !v.is_finite() {
                    return Err(EvalFail::Domain(DomainKind::NonFinite));
                }
                Ok(v)
            }
        }
    }

    fn record_vars(&self, maxes: &mut [usize; 3]) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(slot, idx) => {
                let k = match slot {
                    Slot::X => 0,
                    Slot::Z => 1,
                    Slot::U => 2,
                };
                maxes[k] = maxes[k].max(idx + 1);
            }
            Expr::Neg(e) => e.record_vars(maxes),
            Expr::Bin(_, l, r) => {
                l.record_vars(maxes);
                r.record_vars(maxes);
            }
            Expr::Call(_, args) => {
                for a in args {
                    a.record_vars(maxes);
                }
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var(..) | Expr::Call(..) => 5,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Mul, ..) | Expr::Bin(BinOp::Div, ..) => 2,
            Expr::Bin(BinOp::Add, ..) | Expr::Bin(BinOp::Sub, ..) => 1,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(slot, idx) => write!(f, "{}{}", slot.letter(), idx + 1),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, e.prec() < 3)
            }
            Expr::Bin(op, l, r) => {
                let p = self.prec();
                let (sym, strict_right) = match op {
                    BinOp::Add => (" + ", true),
                    BinOp::Sub => (" - ", true),
                    BinOp::Mul => (" * ", true),
                    BinOp::Div => (" / ", true),
                    BinOp::Pow => ("^", false),
                };
                let left_parens = if *op == BinOp::Pow { l.prec() <= p } else { l.prec() < p };
                wrap(f, l, left_parens)?;
                write!(f, "{sym}")?;
                let right_parens = if strict_right { r.prec() <= p } else { r.prec() < p };
                wrap(f, r, right_parens)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Vectors of expressions
// ---------------------------------------------------------------------------

/// A `;`-separated vector of expression components with the inferred
/// variable arities.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprVector {
    pub components: Vec<Expr>,
    pub max_x: usize,
    pub max_z: usize,
    pub max_u: usize,
}

impl ExprVector {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0 };
        let mut components = Vec::new();
        loop {
            components.push(p.expr(0)?);
            match p.peek().tok {
                Tok::Semi => {
                    p.bump();
                    if p.peek().tok == Tok::End {
                        break; // trailing semicolon
                    }
                }
                Tok::End => break,
                _ => return Err(p.err_here("expected `;`, or end of input")),
            }
        }
        Ok(Self::from_components(components))
    }

    pub fn from_components(components: Vec<Expr>) -> Self {
        let mut maxes = [0usize; 3];
        for c in &components {
            c.record_vars(&mut maxes);
        }
        ExprVector { components, max_x: maxes[0], max_z: maxes[1], max_u: maxes[2] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, ctx: &EvalCtx) -> Result<Vec<f64>, ExprError> {
        let mut out = Vec::with_capacity(self.components.len());
        self.eval_into(ctx, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a caller-provided buffer (cleared first); avoids an
    /// allocation in hot loops.
    pub fn eval_into(&self, ctx: &EvalCtx, out: &mut Vec<f64>) -> Result<(), ExprError> {
        out.clear();
        for (i, c) in self.components.iter().enumerate() {
            match c.eval_raw(ctx) {
                Ok(v) => out.push(v),
                Err(EvalFail::Domain(kind)) => {
                    return Err(ExprError::Domain { component: i, kind });
                }
                Err(EvalFail::Var(slot, idx, provided)) => {
                    return Err(ExprError::VarOutOfRange {
                        component: i,
                        slot: slot.letter(),
                        index: idx + 1,
                        provided,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn eval_component(&self, i: usize, ctx: &EvalCtx) -> Result<f64, ExprError> {
        match self.components[i].eval_raw(ctx) {
            Ok(v) => Ok(v),
            Err(EvalFail::Domain(kind)) => Err(ExprError::Domain { component: i, kind }),
            Err(EvalFail::Var(slot, idx, provided)) => Err(ExprError::VarOutOfRange {
                component: i,
                slot: slot.letter(),
                index: idx + 1,
                provided,
            }),
        }
    }
}

impl fmt::Display for ExprVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Sampled check that `ev`, viewed as a function of `u`, is positively
/// homogeneous: `ev(t u) = t ev(u)` for the given test states.  Returns the
/// worst relative deviation observed.
pub fn homogeneity_defect(
    ev: &ExprVector,
    dirs: &[Vec<f64>],
    z_samples: &[Vec<f64>],
    x: &[f64],
) -> Result<f64, ExprError> {
    let mut worst = 0.0_f64;
    let mut base = Vec::new();
    let mut scaled_buf = Vec::new();
    for z in z_samples {
        for u in dirs {
            ev.eval_into(&EvalCtx { x, z, u }, &mut base)?;
            for t in [0.5, 2.0, 10.0] {
                let tu: Vec<f64> = u.iter().map(|v| v * t).collect();
                ev.eval_into(&EvalCtx { x, z, u: &tu }, &mut scaled_buf)?;
                for (a, b) in scaled_buf.iter().zip(&base) {
                    let expect = t * b;
                    let defect = (a - expect).abs() / (1.0 + expect.abs());
                    worst = worst.max(defect);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(src: &str, x: &[f64], z: &[f64]) -> Result<f64, ExprError> {
        let ev = ExprVector::parse(src)?;
        Ok(ev.eval(&EvalCtx { x, z, u: &[] })?[0])
    }

    #[test]
    fn precedence_power_right_assoc() {
        assert_eq!(eval1("2^3^2", &[], &[]).unwrap(), 512.0);
    }

    #[test]
    fn precedence_power_over_unary_minus() {
        assert_eq!(eval1("-2^2", &[], &[]).unwrap(), -4.0);
    }

    #[test]
    fn left_associative_division() {
        assert_eq!(eval1("6/2/3", &[], &[]).unwrap(), 1.0);
        assert_eq!(eval1("2*3+4", &[], &[]).unwrap(), 10.0);
    }

    #[test]
    fn functions_evaluate() {
        assert_eq!(eval1("min(3, z1)", &[], &[5.0]).unwrap(), 3.0);
        assert_eq!(eval1("max(3, z1)", &[], &[5.0]).unwrap(), 5.0);
        assert_eq!(eval1("norm2(3, 4)", &[], &[]).unwrap(), 5.0);
        assert_eq!(eval1("abs(-7)", &[], &[]).unwrap(), 7.0);
        assert!((eval1("log(exp(2))", &[], &[]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_instead_of_nan() {
        assert!(matches!(
            eval1("1/x1", &[0.0], &[]),
            Err(ExprError::Domain { kind: DomainKind::DivisionByZero, .. })
        ));
        assert!(matches!(
            eval1("log(x1)", &[0.0], &[]),
            Err(ExprError::Domain { kind: DomainKind::LogNonPositive, .. })
        ));
        assert!(matches!(
            eval1("sqrt(x1)", &[-1.0], &[]),
            Err(ExprError::Domain { kind: DomainKind::SqrtNegative, .. })
        ));
        assert!(matches!(
            eval1("0^(-1)", &[], &[]),
            Err(ExprError::Domain { kind: DomainKind::NonFinite, .. })
        ));
        assert!(matches!(
            eval1("(-2)^0.5", &[], &[]),
            Err(ExprError::Domain { kind: DomainKind::NonFinite, .. })
        ));
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(matches!(
            ExprVector::parse("2x1"),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            ExprVector::parse("foo(x1)"),
            Err(ExprError::UnknownFunction { .. })
        ));
        assert!(matches!(
            ExprVector::parse("y1 + 1"),
            Err(ExprError::BadVariable { .. })
        ));
        assert!(matches!(
            ExprVector::parse("x0"),
            Err(ExprError::BadVariable { .. })
        ));
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(ExprVector::parse("min(1)"), Err(ExprError::Arity { .. })));
        assert!(matches!(ExprVector::parse("abs(1, 2)"), Err(ExprError::Arity { .. })));
    }

    #[test]
    fn error_positions_are_reported() {
        match ExprVector::parse("x1 + + 2") {
            Err(ExprError::Syntax { line, col, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(col, 6);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn vector_components_split_on_semicolons() {
        let ev = ExprVector::parse("x1; x2; x1 + x2;").unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev.max_x, 2);
        let out = ev.eval(&EvalCtx { x: &[1.0, 2.0], z: &[], u: &[] }).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn quadratic_bifunction_at_origin() {
        // Both components are 0.5*(affine in x with coefficients depending
        // on z)^2 and evaluate to 0.5 at x = 0 for every z.
        let src = "0.5*((-(1 - 1/(norm2(z1, z2)^2 + 1)))*x1 + x2 + 1)^2; \
                   0.5*((1 + 1/(norm2(z1, z2)^2 + 1))*x1 - x2 + 1)^2";
        let ev = ExprVector::parse(src).unwrap();
        for z in [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]] {
            let out = ev.eval(&EvalCtx { x: &[0.0, 0.0], z: &z, u: &[] }).unwrap();
            assert!((out[0] - 0.5).abs() < 1e-15);
            assert!((out[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rational_bifunction_values() {
        // x^2 z / (z^2 + 1) at (x, z) = (1, -1) is -1/2.
        assert_eq!(eval1("x1^2 * z1 / (z1^2 + 1)", &[1.0], &[-1.0]).unwrap(), -0.5);
        // ... and at (2, -1): -2.
        assert_eq!(eval1("x1^2 * z1 / (z1^2 + 1)", &[2.0], &[-1.0]).unwrap(), -2.0);
    }

    #[test]
    fn print_parse_round_trip_structural() {
        for src in [
            "x1 + 2*z1^2",
            "-x1^2",
            "(x1 + x2)*z1",
            "x1 - (x2 - x3)",
            "2^3^2",
            "1/(z1^2 + 1)",
            "min(x1, max(x2, 0.5)); norm2(u1, u2, u3)",
            "-(x1 + 1)",
            "x1^(-2)",
        ] {
            let ev = ExprVector::parse(src).unwrap();
            let printed = ev.to_string();
            let back = ExprVector::parse(&printed).unwrap();
            assert_eq!(ev, back, "round trip failed for `{src}` -> `{printed}`");
        }
    }

    #[test]
    fn homogeneity_of_linear_direction_expr() {
        let ev = ExprVector::parse("u1 - u2; 2*u1 + u2").unwrap();
        let dirs = vec![vec![1.0, 0.5], vec![-2.0, 3.0]];
        let defect = homogeneity_defect(&ev, &dirs, &[vec![]], &[]).unwrap();
        assert!(defect < 1e-12);
        // abs(u1) is positively homogeneous as well...
        let ev2 = ExprVector::parse("abs(u1)").unwrap();
        let defect2 = homogeneity_defect(&ev2, &[vec![1.0], vec![-1.0]], &[vec![]], &[]).unwrap();
        assert!(defect2 < 1e-12);
        // ... but u1^2 is not.
        let ev3 = ExprVector::parse("u1^2").unwrap();
        let defect3 = homogeneity_defect(&ev3, &[vec![1.0]], &[vec![]], &[]).unwrap();
        assert!(defect3 > 0.1);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr(depth: u32) -> BoxedStrategy<Expr> {
        let leaf = prop_oneof![
            (0u8..3, 0usize..3).prop_map(|(s, i)| {
                let slot = match s {
                    0 => Slot::X,
                    1 => Slot::Z,
                    _ => Slot::U,
                };
                Expr::Var(slot, i)
            }),
            (0.0f64..100.0).prop_map(Expr::Num),
        ];
        if depth == 0 {
            return leaf.boxed();
        }
        let sub = arb_expr(depth - 1);
        let sub2 = arb_expr(depth - 1);
        let sub3 = arb_expr(depth - 1);
        prop_oneof![
            3 => leaf,
            2 => (sub.clone(), sub2.clone(), 0u8..5).prop_map(|(l, r, o)| {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][o as usize];
                Expr::Bin(op, Box::new(l), Box::new(r))
            }),
            1 => sub.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            1 => sub.clone().prop_map(|e| Expr::Call(Func::Abs, vec![e])),
            1 => (sub.clone(), sub2).prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
            1 => (sub, sub3).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
        ]
        .boxed()
    }

    proptest! {
        /// Printing then reparsing reproduces the exact tree, so evaluation
        /// is bit-identical by construction.
        #[test]
        fn print_parse_round_trip(e in arb_expr(4)) {
            let ev = ExprVector::from_components(vec![e]);
            let printed = ev.to_string();
            let back = ExprVector::parse(&printed)
                .unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
            prop_assert_eq!(ev, back);
        }
    }
}

//! Scalar expressions in one variable, evaluated together with their first
//! and second derivatives.
//!
//! The grammar is a fixed calculator grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | 'pi' | ident | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | log | sqrt
//! ```
//!
//! The first free identifier becomes the variable; any other identifier is
//! rejected. Input is ASCII only.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier \"{name}\" at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression. `var` is the name of its single variable, if the
/// source mentioned one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprAst {
    pub root: Node,
    pub var: Option<String>,
}

/// Value and first two derivatives of a scalar function of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2Scalar {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2Scalar {
    pub fn constant(value: f64) -> Self {
        Self { value, d1: 0.0, d2: 0.0 }
    }

    pub fn variable(x: f64) -> Self {
        Self { value: x, d1: 1.0, d2: 0.0 }
    }

    /// Compose with a scalar function given its value and two derivatives at
    /// `self.value`.
    pub fn chain(self, g: f64, dg: f64, ddg: f64) -> Self {
        Self {
            value: g,
            d1: dg * self.d1,
            d2: ddg * self.d1 * self.d1 + dg * self.d2,
        }
    }

    pub fn recip(self) -> Result<Self, DslError> {
        if self.value == 0.0 {
            return Err(DslError::Domain("division by zero".into()));
        }
        let r = 1.0 / self.value;
        Ok(self.chain(r, -r * r, 2.0 * r * r * r))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Result<Self, DslError> {
        if self.value <= 0.0 {
            return Err(DslError::Domain(format!("log of nonpositive argument {}", self.value)));
        }
        let r = 1.0 / self.value;
        Ok(self.chain(self.value.ln(), r, -r * r))
    }

    pub fn sqrt(self) -> Result<Self, DslError> {
        if self.value <= 0.0 {
            return Err(DslError::Domain(format!("sqrt of nonpositive argument {}", self.value)));
        }
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * self.value)))
    }

    /// Power with a constant exponent. Integer exponents accept any base.
    pub fn powf(self, p: f64) -> Result<Self, DslError> {
        let x = self.value;
        let integral = p.fract() == 0.0 && p.abs() < 1e9;
        if !integral && x <= 0.0 {
            return Err(DslError::Domain(format!("non-integer power of nonpositive base {x}")));
        }
        if x == 0.0 && p < 2.0 && p != 0.0 && p != 1.0 {
            return Err(DslError::Domain(format!("power {p} of zero")));
        }
        if p == 0.0 {
            return Ok(Self::constant(1.0));
        }
        let (g, dg, ddg) = if integral {
            let n = p as i32;
            (x.powi(n), p * x.powi(n - 1), p * (p - 1.0) * pow_int_or_zero(x, n - 2))
        } else {
            (x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
        };
        Ok(self.chain(g, dg, ddg))
    }

    /// General power `self^rhs`, `self` must be positive unless `rhs` is a
    /// constant.
    pub fn pow(self, rhs: Self) -> Result<Self, DslError> {
        if rhs.d1 == 0.0 && rhs.d2 == 0.0 {
            return self.powf(rhs.value);
        }
        Ok((rhs * self.ln()?).exp())
    }
}

fn pow_int_or_zero(x: f64, n: i32) -> f64 {
    if x == 0.0 && n < 0 {
        0.0
    } else {
        x.powi(n)
    }
}

impl Add for Jet2Scalar {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { value: self.value + o.value, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet2Scalar {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { value: self.value - o.value, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Mul for Jet2Scalar {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        }
    }
}

impl Div for Jet2Scalar {
    type Output = Result<Self, DslError>;
    fn div(self, o: Self) -> Result<Self, DslError> {
        Ok(self * o.recip()?)
    }
}

impl Neg for Jet2Scalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self { value: -self.value, d1: -self.d1, d2: -self.d2 }
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    var: Option<String>,
}

pub fn parse(source: &str) -> Result<ExprAst, DslError> {
    parse_impl(source, None)
}

/// Parse with a fixed variable name; any other identifier is rejected.
pub fn parse_with_var(source: &str, var: &str) -> Result<ExprAst, DslError> {
    parse_impl(source, Some(var.to_string()))
}

fn parse_impl(source: &str, var: Option<String>) -> Result<ExprAst, DslError> {
    if let Some(offset) = source.bytes().position(|b| !b.is_ascii()) {
        return Err(DslError::Syntax { offset, message: "non-ASCII input".into() });
    }
    if source.trim().is_empty() {
        return Err(DslError::Empty);
    }
    let fixed = var.is_some();
    let mut p = Parser { src: source.as_bytes(), pos: 0, var };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    let var = if fixed && !mentions_var(&root) { None } else { p.var };
    Ok(ExprAst { root, var })
}

fn mentions_var(n: &Node) -> bool {
    match n {
        Node::Const(_) => false,
        Node::Var => true,
        Node::Neg(a) | Node::Call(_, a) => mentions_var(a),
        Node::Bin(_, a, b) => mentions_var(a) || mentions_var(b),
    }
}

impl Parser<'_> {
    fn error(&self, message: &str) -> DslError {
        DslError::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, DslError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, DslError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, DslError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("expected a number, identifier or '('")),
        }
    }

    fn number(&mut self) -> Result<Node, DslError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(Node::Const(v))
            }
            Err(_) => Err(DslError::Syntax { offset: start, message: format!("malformed number \"{text}\"") }),
        }
    }

    fn identifier(&mut self) -> Result<Node, DslError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_alphanumeric() || s[i] == b'_') {
            i += 1;
        }
        let name = std::str::from_utf8(&s[start..i]).expect("ascii").to_string();
        self.pos = i;
        if let Some(f) = Func::from_name(&name) {
            if self.peek() != Some(b'(') {
                return Err(self.error(&format!("expected '(' after {name}")));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error("expected ')'"));
            }
            self.pos += 1;
            return Ok(Node::Call(f, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        match &self.var {
            None => {
                self.var = Some(name);
                Ok(Node::Var)
            }
            Some(v) if *v == name => Ok(Node::Var),
            Some(_) => Err(DslError::UnknownIdentifier { name, offset: start }),
        }
    }
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, self.var.as_deref().unwrap_or("x"), f)
    }
}

fn write_node(n: &Node, var: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        Node::Const(v) => {
            if *v < 0.0 {
                write!(f, "(-{:?})", -v)
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::Var => f.write_str(var),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, var, f)?;
            f.write_str(")")
        }
        Node::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            f.write_str("(")?;
            write_node(a, var, f)?;
            f.write_str(sym)?;
            write_node(b, var, f)?;
            f.write_str(")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, var, f)?;
            f.write_str(")")
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

impl ExprAst {
    pub fn eval_jet2(&self, x: f64) -> Result<Jet2Scalar, DslError> {
        eval_node(&self.root, Jet2Scalar::variable(x))
    }

    pub fn eval(&self, x: f64) -> Result<f64, DslError> {
        Ok(self.eval_jet2(x)?.value)
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Const(_) | Node::Var => 1,
                Node::Neg(a) | Node::Call(_, a) => 1 + d(a),
                Node::Bin(_, a, b) => 1 + d(a).max(d(b)),
            }
        }
        d(&self.root)
    }
}

pub fn eval_jet2(ast: &ExprAst, x: f64) -> Result<Jet2Scalar, DslError> {
    ast.eval_jet2(x)
}

fn eval_node(n: &Node, x: Jet2Scalar) -> Result<Jet2Scalar, DslError> {
    let out = match n {
        Node::Const(v) => Jet2Scalar::constant(*v),
        Node::Var => x,
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Bin(op, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => (a / b)?,
                BinOp::Pow => a.pow(b)?,
            }
        }
        Node::Call(func, a) => {
            let a = eval_node(a, x)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln()?,
                Func::Sqrt => a.sqrt()?,
            }
        }
    };
    if !(out.value.is_finite() && out.d1.is_finite() && out.d2.is_finite()) {
        return Err(DslError::Domain("non-finite result".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var() -> Box<Node> {
        Box::new(Node::Var)
    }

    #[test]
    fn product_with_cosine() {
        let ast = parse("u*cos(u)").unwrap();
        assert_eq!(ast.root, Node::Bin(BinOp::Mul, var(), Box::new(Node::Call(Func::Cos, var()))));
        assert_eq!(ast.var.as_deref(), Some("u"));
    }

    #[test]
    fn second_identifier_is_unknown() {
        match parse("a+b*c") {
            Err(DslError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "b");
                assert_eq!(offset, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_offset() {
        match parse("2*^x") {
            Err(DslError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse("   "), Err(DslError::Empty));
        assert!(matches!(parse("(x"), Err(DslError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x)"), Err(DslError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("sin x"), Err(DslError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        // -x^2 is -(x^2)
        let a = parse("-x^2").unwrap();
        assert_eq!(a.eval(3.0).unwrap(), -9.0);
        // right associative power
        assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        // left associative minus and divide
        assert_eq!(parse("10-4-3").unwrap().eval(0.0).unwrap(), 3.0);
        assert_eq!(parse("24/4/3").unwrap().eval(0.0).unwrap(), 2.0);
        assert_eq!(parse("1+2*3").unwrap().eval(0.0).unwrap(), 7.0);
        assert_eq!(parse("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
        assert_eq!(parse("1.5e1 + pi*0").unwrap().eval(0.0).unwrap(), 15.0);
    }

    #[test]
    fn fixed_variable() {
        assert!(parse_with_var("t*t", "t").is_ok());
        assert!(matches!(parse_with_var("x", "t"), Err(DslError::UnknownIdentifier { .. })));
    }

    #[test]
    fn sine_at_origin() {
        let j = parse("sin(x)").unwrap().eval_jet2(0.0).unwrap();
        assert_eq!((j.value, j.d1, j.d2), (0.0, 1.0, 0.0));
    }

    #[test]
    fn square_at_three() {
        let j = parse("x^2").unwrap().eval_jet2(3.0).unwrap();
        assert_eq!((j.value, j.d1, j.d2), (9.0, 6.0, 2.0));
    }

    #[test]
    fn rational_function() {
        // u = 1/(1+x^2): u' = -2x/(1+x^2)^2, u'' = (6x^2-2)/(1+x^2)^3
        let ast = parse("1/(1+x^2)").unwrap();
        let j = ast.eval_jet2(1.0).unwrap();
        assert!((j.value - 0.5).abs() < 1e-15);
        assert!((j.d1 + 0.5).abs() < 1e-15);
        assert!((j.d2 - 0.5).abs() < 1e-15);
        let (d1, d2) = central_differences(&ast, 1.0);
        assert!((d1 + 0.5).abs() < 1e-8);
        assert!((d2 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(parse("1/x").unwrap().eval_jet2(0.0), Err(DslError::Domain(_))));
        assert!(matches!(parse("log(x)").unwrap().eval_jet2(-1.0), Err(DslError::Domain(_))));
        assert!(matches!(parse("sqrt(x)").unwrap().eval_jet2(-1.0), Err(DslError::Domain(_))));
        assert!(matches!(parse("x^0.5").unwrap().eval_jet2(-1.0), Err(DslError::Domain(_))));
        assert!(parse("x^3").unwrap().eval_jet2(-2.0).is_ok());
    }

    #[test]
    fn variable_exponent() {
        // d/dx x^x = x^x (ln x + 1); d2 = x^x((ln x + 1)^2 + 1/x)
        let j = parse("x^x").unwrap().eval_jet2(2.0).unwrap();
        let l = 2f64.ln() + 1.0;
        assert!((j.value - 4.0).abs() < 1e-14);
        assert!((j.d1 - 4.0 * l).abs() < 1e-13);
        assert!((j.d2 - 4.0 * (l * l + 0.5)).abs() < 1e-13);
    }

    /// Central differences. The second difference uses a larger step
    /// (fourth root of epsilon) to balance truncation against cancellation.
    fn central_differences(ast: &ExprAst, x: f64) -> (f64, f64) {
        let h1 = f64::EPSILON.cbrt() * (1.0 + x.abs());
        let h2 = f64::EPSILON.powf(0.25) * (1.0 + x.abs());
        let f = |t: f64| ast.eval(t).unwrap();
        let d1 = (f(x + h1) - f(x - h1)) / (2.0 * h1);
        let d2 = (f(x + h2) - 2.0 * f(x) + f(x - h2)) / (h2 * h2);
        (d1, d2)
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.1f64..3.0).prop_map(|v| Node::Const((v * 100.0).round() / 100.0)),
            Just(Node::Var),
        ];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                (inner.clone(), inner.clone(), 0..4usize).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                    Node::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 1..4u32).prop_map(|(a, p)| {
                    Node::Bin(BinOp::Pow, Box::new(a), Box::new(Node::Const(p as f64)))
                }),
                (inner, 0..5usize).prop_map(|(a, k)| Node::Call(Func::ALL[k], Box::new(a))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn jets_match_finite_differences(root in arb_node(), x in -2.0f64..2.0) {
            let ast = ExprAst { root, var: Some("x".into()) };
            prop_assume!(ast.depth() <= 6);
            let Ok(j) = ast.eval_jet2(x) else { return Ok(()) };
            // Keep away from singularities where differences are meaningless.
            let h = f64::EPSILON.powf(0.25) * (1.0 + x.abs());
            let probe: Vec<_> = [-2.0, -1.0, 1.0, 2.0].iter().map(|s| ast.eval_jet2(x + s * h)).collect();
            prop_assume!(probe.iter().all(|p| p.is_ok()));
            prop_assume!(j.value.abs() < 1e4 && j.d1.abs() < 1e4 && j.d2.abs() < 1e4);
            let far = probe.iter().map(|p| p.as_ref().unwrap())
                .all(|p| (p.d2 - j.d2).abs() <= 1e-2 * (1.0 + j.d2.abs()));
            prop_assume!(far);
            let (d1, d2) = central_differences(&ast, x);
            prop_assert!((j.d1 - d1).abs() <= 1e-6 * (1.0 + j.d1.abs()), "d1 {} vs {}", j.d1, d1);
            prop_assert!((j.d2 - d2).abs() <= 1e-4 * (1.0 + j.d2.abs()), "d2 {} vs {}", j.d2, d2);
        }

        #[test]
        fn print_parse_is_stable(root in arb_node()) {
            let ast = ExprAst { root, var: Some("x".into()) };
            let once = parse(&ast.to_string()).unwrap();
            let twice = parse(&once.to_string()).unwrap();
            prop_assert_eq!(&once.root, &twice.root);
            prop_assert_eq!(once.to_string(), twice.to_string());
        }
    }
}

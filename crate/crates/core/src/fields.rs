//! Expression fields over `(t, x1..xn)` and finite-difference derivatives.
//!
//! Everything downstream (metric coefficients, winds, one-forms) is built
//! from [`FieldExpr`]: a parsed arithmetic expression with a fixed whitelist
//! of functions. Evaluation is pure and reentrant; domain violations
//! (division by zero, square root of a negative) surface as errors instead
//! of silent NaNs.

use std::fmt;

use thiserror::Error;

/// Errors from parsing or evaluating expression fields.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FieldError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at byte {offset} exceeds arity {arity}")]
    Arity {
        offset: usize,
        name: String,
        arity: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    Time,
    /// Zero-based spatial coordinate index (`x1` is index 0).
    Var(usize),
    Neg(Box<Expr>),
    Unary(UnaryFn, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// A parsed scalar field over `(t, x1..xn)`.
///
/// Immutable after parse; evaluation is reentrant and safe to call from
/// concurrently running workers. `abs` is admitted but non-smooth; tensor
/// evaluation at its kink is the caller's responsibility.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    ast: Expr,
    arity: usize,
}

/// Step sizes for the central-difference kernels, dimensionless and scaled
/// by the argument magnitude at the evaluation site.
#[derive(Debug, Clone, Copy)]
pub struct DiffConfig {
    /// Relative step for first derivatives.
    pub h1: f64,
    /// Relative step for second derivatives; `h2 >= h1`.
    pub h2: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig { h1: 1e-5, h2: 1e-4 }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.h1 > 0.0 && self.h2 > 0.0 && self.h2 >= self.h1) {
            return Err(FieldError::Domain(format!(
                "invalid diff steps h1={}, h2={}",
                self.h1, self.h2
            )));
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arity: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, arity: usize) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            arity,
        }
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

    fn syntax(&self, message: impl Into<String>) -> FieldError {
        FieldError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, FieldError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FieldError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, FieldError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, FieldError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right-associative; `-` binds to the exponent as a whole.
            let exp = self.unary_power()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary_power(&mut self) -> Result<Expr, FieldError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary_power()?)))
            }
            _ => self.power(),
        }
    }

    fn atom(&mut self) -> Result<Expr, FieldError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected character `{}`", c as char))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, FieldError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Scientific notation: 1e-3, 2.5E+4.
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expr::Num).map_err(|_| FieldError::Syntax {
            offset: start,
            message: format!("invalid numeric literal `{text}`"),
        })
    }

    fn identifier(&mut self) -> Result<Expr, FieldError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_owned();
        if name == "t" {
            return Ok(Expr::Time);
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 && k <= self.arity {
                    return Ok(Expr::Var(k - 1));
                }
                return Err(FieldError::Arity {
                    offset: start,
                    name,
                    arity: self.arity,
                });
            }
        }
        let func = match name.as_str() {
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            "exp" => Some(UnaryFn::Exp),
            "sqrt" => Some(UnaryFn::Sqrt),
            "abs" => Some(UnaryFn::Abs),
            _ => None,
        };
        if let Some(f) = func {
            if self.peek() != Some(b'(') {
                return Err(self.syntax(format!("expected `(` after `{name}`")));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.syntax("expected `)`"));
            }
            self.pos += 1;
            return Ok(Expr::Unary(f, Box::new(arg)));
        }
        Err(FieldError::UnknownIdentifier { offset: start, name })
    }
}

/// Parse an expression over `t, x1..x<arity>` with `+ - * / ^`,
/// `sin cos exp sqrt abs` and numeric literals.
pub fn parse_field(source: &str, arity: usize) -> Result<FieldExpr, FieldError> {
    if source.trim().is_empty() {
        return Err(FieldError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    if !(1..=3).contains(&arity) {
        return Err(FieldError::Domain(format!("arity {arity} not in 1..=3")));
    }
    let mut p = Parser::new(source, arity);
    let ast = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(FieldExpr { ast, arity })
}

fn eval_ast(e: &Expr, t: f64, x: &[f64]) -> Result<f64, FieldError> {
    Ok(match e {
        Expr::Num(c) => *c,
        Expr::Time => t,
        Expr::Var(k) => x[*k],
        Expr::Neg(inner) => -eval_ast(inner, t, x)?,
        Expr::Unary(f, inner) => {
            let v = eval_ast(inner, t, x)?;
            match f {
                UnaryFn::Sin => v.sin(),
                UnaryFn::Cos => v.cos(),
                UnaryFn::Exp => v.exp(),
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        return Err(FieldError::Domain(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
                UnaryFn::Abs => v.abs(),
            }
        }
        Expr::Bin(op, a, b) => {
            let va = eval_ast(a, t, x)?;
            let vb = eval_ast(b, t, x)?;
            match op {
                BinOp::Add => va + vb,
                BinOp::Sub => va - vb,
                BinOp::Mul => va * vb,
                BinOp::Div => {
                    if vb == 0.0 {
                        return Err(FieldError::Domain("division by zero".into()));
                    }
                    va / vb
                }
                BinOp::Pow => {
                    let r = va.powf(vb);
                    if r.is_nan() {
                        return Err(FieldError::Domain(format!(
                            "invalid power {va}^{vb}"
                        )));
                    }
                    r
                }
            }
        }
    })
}

impl FieldExpr {
    /// Constant expression, any arity.
    pub fn constant(c: f64, arity: usize) -> FieldExpr {
        FieldExpr {
            ast: Expr::Num(c),
            arity,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Exact IEEE-double evaluation of the tree.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, FieldError> {
        if x.len() != self.arity {
            return Err(FieldError::Dimension {
                expected: self.arity,
                got: x.len(),
            });
        }
        eval_ast(&self.ast, t, x)
    }
}

fn fmt_ast(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Num(c) => {
            if *c == c.trunc() && c.abs() < 1e15 {
                write!(f, "{c:.1}")
            } else {
                write!(f, "{c:e}")
            }
        }
        Expr::Time => write!(f, "t"),
        Expr::Var(k) => write!(f, "x{}", k + 1),
        Expr::Neg(inner) => {
            write!(f, "(-")?;
            fmt_ast(inner, f)?;
            write!(f, ")")
        }
        Expr::Unary(func, inner) => {
            write!(f, "{}(", func.name())?;
            fmt_ast(inner, f)?;
            write!(f, ")")
        }
        Expr::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            write!(f, "(")?;
            fmt_ast(a, f)?;
            write!(f, " {sym} ")?;
            fmt_ast(b, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ast(&self.ast, f)
    }
}

/// Vector field: one expression per component.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<FieldExpr>,
}

/// Covector (one-form) field: one expression per component.
#[derive(Debug, Clone)]
pub struct CovectorField {
    pub components: Vec<FieldExpr>,
}

/// Square matrix field, row-major expressions.
#[derive(Debug, Clone)]
pub struct MatrixField {
    pub n: usize,
    pub entries: Vec<FieldExpr>,
}

impl VectorField {
    pub fn constant(values: &[f64], arity: usize) -> VectorField {
        VectorField {
            components: values.iter().map(|&c| FieldExpr::constant(c, arity)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.components.iter().map(|c| c.eval(t, x)).collect()
    }
}

impl CovectorField {
    pub fn constant(values: &[f64], arity: usize) -> CovectorField {
        CovectorField {
            components: values.iter().map(|&c| FieldExpr::constant(c, arity)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.components.iter().map(|c| c.eval(t, x)).collect()
    }

    /// Pairing `omega(v)` at `(t, x)`.
    pub fn apply(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64, FieldError> {
        if v.len() != self.components.len() {
            return Err(FieldError::Dimension {
                expected: self.components.len(),
                got: v.len(),
            });
        }
        let w = self.eval(t, x)?;
        Ok(w.iter().zip(v).map(|(a, b)| a * b).sum())
    }
}

impl MatrixField {
    pub fn constant(n: usize, values: &[f64], arity: usize) -> MatrixField {
        assert_eq!(values.len(), n * n);
        MatrixField {
            n,
            entries: values.iter().map(|&c| FieldExpr::constant(c, arity)).collect(),
        }
    }

    pub fn identity(n: usize, arity: usize) -> MatrixField {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        MatrixField::constant(n, &values, arity)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<nalgebra::DMatrix<f64>, FieldError> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.entries[i * self.n + j].eval(t, x)?;
            }
        }
        Ok(m)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Central-difference directional derivative.
///
/// With `dir2` absent, returns `d/dr f(base + r dir1)` at `r = 0`; with it,
/// the mixed second derivative `d^2/dr ds f(base + r dir1 + s dir2)`.
/// Steps are `cfg.h1` (resp. `cfg.h2`) times `max(1, |base|)`.
pub fn directional_derivative<F>(
    f: F,
    base: &[f64],
    dir1: &[f64],
    dir2: Option<&[f64]>,
    cfg: &DiffConfig,
) -> Result<f64, FieldError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError>,
{
    cfg.validate()?;
    let scale = norm(base).max(1.0);
    let mut buf = vec![0.0; base.len()];
    match dir2 {
        None => {
            let h = cfg.h1 * scale;
            let shift = |buf: &mut [f64], s: f64| {
                for i in 0..base.len() {
                    buf[i] = base[i] + s * dir1[i];
                }
            };
            shift(&mut buf, h);
            let fp = f(&buf)?;
            shift(&mut buf, -h);
            let fm = f(&buf)?;
            Ok((fp - fm) / (2.0 * h))
        }
        Some(d2) => {
            let h = cfg.h2 * scale;
            let shift = |buf: &mut [f64], s1: f64, s2: f64| {
                for i in 0..base.len() {
                    buf[i] = base[i] + s1 * dir1[i] + s2 * d2[i];
                }
            };
            shift(&mut buf, h, h);
            let fpp = f(&buf)?;
            shift(&mut buf, h, -h);
            let fpm = f(&buf)?;
            shift(&mut buf, -h, h);
            let fmp = f(&buf)?;
            shift(&mut buf, -h, -h);
            let fmm = f(&buf)?;
            Ok((fpp - fpm - fmp + fmm) / (4.0 * h * h))
        }
    }
}

/// Central-difference gradient of `f` at `base`.
pub fn numeric_gradient<F>(f: F, base: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>, FieldError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError>,
{
    let n = base.len();
    let mut out = Vec::with_capacity(n);
    let mut dir = vec![0.0; n];
    for i in 0..n {
        dir.iter_mut().for_each(|a| *a = 0.0);
        dir[i] = 1.0;
        out.push(directional_derivative(&f, base, &dir, None, cfg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn parse_and_eval_basics() {
        let f = parse_field("0.5*cos(t)", 2).unwrap();
        assert_eq!(f.eval(0.0, &[0.0, 0.0]).unwrap(), 0.5);

        let f = parse_field("x1^2 + x2^2", 2).unwrap();
        assert_eq!(f.eval(0.0, &[1.0, 2.0]).unwrap(), 5.0);

        match parse_field("x3", 2) {
            Err(FieldError::Arity { name, arity, .. }) => {
                assert_eq!(name, "x3");
                assert_eq!(arity, 2);
            }
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn eval_examples() {
        let f = parse_field("sin(t)", 1).unwrap();
        assert_eq!(f.eval(0.0, &[0.0]).unwrap(), 0.0);

        let f = parse_field("sqrt(x1)", 1).unwrap();
        assert!(matches!(f.eval(0.0, &[-1.0]), Err(FieldError::Domain(_))));

        let f = parse_field("exp(0)*x1", 1).unwrap();
        assert_eq!(f.eval(0.0, &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_field("x1 + (x2", 2) {
            Err(FieldError::Syntax { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_field("foo(x1)", 2) {
            Err(FieldError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        assert!(matches!(
            parse_field("1/0", 1).unwrap().eval(0.0, &[0.0]),
            Err(FieldError::Domain(_))
        ));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let f = parse_field("-x1^2", 1).unwrap();
        assert_eq!(f.eval(0.0, &[3.0]).unwrap(), -9.0);
        let f = parse_field("2^-1", 1).unwrap();
        assert_eq!(f.eval(0.0, &[0.0]).unwrap(), 0.5);
        let f = parse_field("1 - 2 - 3", 1).unwrap();
        assert_eq!(f.eval(0.0, &[0.0]).unwrap(), -4.0);
        let f = parse_field("2*x1^3", 1).unwrap();
        assert_eq!(f.eval(0.0, &[2.0]).unwrap(), 16.0);
    }

    #[test]
    fn directional_derivative_examples() {
        let cfg = DiffConfig::default();
        let sq = |v: &[f64]| Ok(v.iter().map(|a| a * a).sum());
        let d = directional_derivative(sq, &[1.0, 0.0], &[1.0, 0.0], None, &cfg).unwrap();
        assert!((d - 2.0).abs() <= 1e-8, "d = {d}");

        let d = directional_derivative(sq, &[1.0, 0.0], &[1.0, 0.0], Some(&[0.0, 1.0]), &cfg)
            .unwrap();
        assert!(d.abs() <= 1e-6, "d = {d}");

        let cube = |v: &[f64]| Ok(v[0] * v[0] * v[0]);
        let d = directional_derivative(cube, &[2.0], &[1.0], Some(&[1.0]), &cfg).unwrap();
        assert!((d - 12.0).abs() <= 1e-4, "d = {d}");
    }

    #[test]
    fn quadratics_are_differentiated_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let c: f64 = rng.gen_range(-2.0..2.0);
            let q = move |v: &[f64]| Ok(a * v[0] * v[0] + b * v[0] * v[1] + c * v[1]);
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let cfg = DiffConfig::default();
            let d = directional_derivative(q, &p, &[1.0, 0.0], None, &cfg).unwrap();
            let exact = 2.0 * a * p[0] + b * p[1];
            assert!(
                (d - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "d = {d}, exact = {exact}"
            );
        }
    }

    #[test]
    fn derivative_of_sum_is_sum_of_derivatives() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let cfg = DiffConfig::default();
        for _ in 0..100 {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let f = move |v: &[f64]| Ok(a * v[0] * v[0] + v[1]);
            let g = move |v: &[f64]| Ok(b * v[1] * v[1] - v[0]);
            let s = move |v: &[f64]| Ok(a * v[0] * v[0] + v[1] + b * v[1] * v[1] - v[0]);
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let dir = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let df = directional_derivative(f, &p, &dir, None, &cfg).unwrap();
            let dg = directional_derivative(g, &p, &dir, None, &cfg).unwrap();
            let ds = directional_derivative(s, &p, &dir, None, &cfg).unwrap();
            assert!((df + dg - ds).abs() <= 1e-8);
        }
    }

    #[test]
    fn serialize_roundtrip_evaluates_identically() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let sources = [
            "x1^2 + 0.5*x2 - sin(t)*cos(x1)",
            "sqrt(abs(x1)) / (1 + x2^2)",
            "exp(-(x1^2 + x2^2)) * 2.5e-1",
            "-(x1 - x2)^2 + t*t*x1",
        ];
        for src in sources {
            let f = parse_field(src, 2).unwrap();
            let g = parse_field(&f.to_string(), 2).unwrap();
            let h = parse_field(&g.to_string(), 2).unwrap();
            assert_eq!(g.to_string(), h.to_string());
            for _ in 0..100 {
                let t = rng.gen_range(-2.0..2.0);
                let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let a = f.eval(t, &x);
                let b = g.eval(t, &x);
                match (a, b) {
                    (Ok(a), Ok(b)) => assert_eq!(a, b, "source {src}"),
                    (Err(_), Err(_)) => {}
                    other => panic!("mismatch {other:?}"),
                }
            }
        }
    }
}

//! Expression trees for definable functions built from arithmetic, real
//! powers, `log` and `exp`, with forward-mode first derivatives.
//!
//! Evaluation is exact composition of node semantics. Leaving a node's
//! domain (log of a non-positive number, non-integer power of a
//! non-positive base, division by zero, overflow) is reported as an
//! [`EvalError`]; a quiet `NaN` is never returned.

mod dual;
mod parse;
mod roots;

use std::fmt;
use std::sync::Arc;

pub use dual::Dual;
pub use parse::{parse, parse_with_vars, ParseError};
pub(crate) use roots::refine_bracket;
pub use roots::{isolate_roots, Root, RootConfig, RootError, RootKind};

/// Maximum number of variables an expression may reference through the
/// stack-allocated evaluation paths.
pub const MAX_VARS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("logarithm of non-positive value {0}")]
    LogOfNonPositive(f64),
    #[error("non-integer power {exponent} of non-positive base {base}")]
    PowOfNonPositive { base: f64, exponent: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    NonFinite,
    #[error("variable x{} is not bound (point has {1} coordinates)", .0 + 1)]
    UnboundVariable(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(usize),
    Add(DefinableExpr, DefinableExpr),
    Mul(DefinableExpr, DefinableExpr),
    Div(DefinableExpr, DefinableExpr),
    Neg(DefinableExpr),
    Pow(DefinableExpr, f64),
    Log(DefinableExpr),
    Exp(DefinableExpr),
}

/// An immutable, cheaply clonable expression tree.
#[derive(Clone, PartialEq)]
pub struct DefinableExpr(Arc<Node>);

impl fmt::Debug for DefinableExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DefinableExpr({self})")
    }
}

/// Number types the evaluator can run on: plain reals and dual numbers.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(self) -> f64;
    fn powi(self, n: i32) -> Self;
    /// `self^r` for a positive base.
    fn powf(self, r: f64) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, r: f64) -> Self {
        f64::powf(self, r)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

fn as_integer_exponent(r: f64) -> Option<i32> {
    (r.fract() == 0.0 && r.abs() <= i32::MAX as f64).then_some(r as i32)
}

impl DefinableExpr {
    pub(crate) fn from_node(node: Node) -> Self {
        DefinableExpr(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    /// The variable `x{index+1}` (zero-based index).
    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn powf(&self, exponent: f64) -> Self {
        Self::from_node(Node::Pow(self.clone(), exponent))
    }

    pub fn ln(&self) -> Self {
        Self::from_node(Node::Log(self.clone()))
    }

    pub fn exp(&self) -> Self {
        Self::from_node(Node::Exp(self.clone()))
    }

    /// `self^exponent` for an expression-valued exponent, realized as
    /// `exp(exponent * log(self))`.
    pub fn pow_expr(&self, exponent: &DefinableExpr) -> Self {
        match exponent.as_constant() {
            Some(c) => self.powf(c),
            None => (exponent.clone() * self.ln()).exp(),
        }
    }

    /// Returns the value if the expression is a literal constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            Node::Neg(e) => e.as_constant().map(|c| -c),
            _ => None,
        }
    }

    /// One past the largest variable index used; zero for constants.
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Var(i) => i + 1,
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.arity().max(b.arity()),
            Node::Neg(a) | Node::Pow(a, _) | Node::Log(a) | Node::Exp(a) => a.arity(),
        }
    }

    /// Replaces every variable `x{i+1}` by `subs[i]`.
    pub fn substitute(&self, subs: &[DefinableExpr]) -> DefinableExpr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => subs.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Node::Add(a, b) => a.substitute(subs) + b.substitute(subs),
            Node::Mul(a, b) => a.substitute(subs) * b.substitute(subs),
            Node::Div(a, b) => a.substitute(subs) / b.substitute(subs),
            Node::Neg(a) => -a.substitute(subs),
            Node::Pow(a, r) => a.substitute(subs).powf(*r),
            Node::Log(a) => a.substitute(subs).ln(),
            Node::Exp(a) => a.substitute(subs).exp(),
        }
    }

    /// Generic evaluator; `var(i)` supplies the value of variable `i`.
    pub fn eval_with<S: Scalar>(&self, var: &impl Fn(usize) -> Option<S>, nvars: usize) -> Result<S, EvalError> {
        let out = match self.node() {
            Node::Const(c) => S::constant(*c),
            Node::Var(i) => var(*i).ok_or(EvalError::UnboundVariable(*i, nvars))?,
            Node::Add(a, b) => a.eval_with(var, nvars)? + b.eval_with(var, nvars)?,
            Node::Mul(a, b) => a.eval_with(var, nvars)? * b.eval_with(var, nvars)?,
            Node::Div(a, b) => {
                let num = a.eval_with(var, nvars)?;
                let den = b.eval_with(var, nvars)?;
                if den.value() == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Node::Neg(a) => -a.eval_with(var, nvars)?,
            Node::Pow(a, r) => {
                let base = a.eval_with(var, nvars)?;
                match as_integer_exponent(*r) {
                    Some(n) => {
                        if n < 0 && base.value() == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        base.powi(n)
                    }
                    None => {
                        if base.value() <= 0.0 {
                            return Err(EvalError::PowOfNonPositive { base: base.value(), exponent: *r });
                        }
                        base.powf(*r)
                    }
                }
            }
            Node::Log(a) => {
                let x = a.eval_with(var, nvars)?;
                if x.value() <= 0.0 {
                    return Err(EvalError::LogOfNonPositive(x.value()));
                }
                x.ln()
            }
            Node::Exp(a) => a.eval_with(var, nvars)?.exp(),
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Value at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(&|i| point.get(i).copied(), point.len())
    }

    /// Value and directional derivative along `direction` at `point`.
    pub fn eval_directional(&self, point: &[f64], direction: &[f64]) -> Result<Dual, EvalError> {
        self.eval_with(
            &|i| {
                let x = *point.get(i)?;
                Some(Dual::new(x, direction.get(i).copied().unwrap_or(0.0)))
            },
            point.len(),
        )
    }

    /// Value and full gradient, one forward-mode pass per coordinate.
    pub fn eval_grad(&self, point: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let n = point.len();
        let mut grad = vec![0.0; n];
        let mut value = self.eval(point)?;
        for (k, g) in grad.iter_mut().enumerate() {
            let d = self.eval_with(&|i| point.get(i).map(|&x| Dual::new(x, if i == k { 1.0 } else { 0.0 })), n)?;
            value = d.v;
            *g = d.d;
        }
        Ok((value, grad))
    }
}

impl std::ops::Add for DefinableExpr {
    type Output = DefinableExpr;
    fn add(self, rhs: DefinableExpr) -> DefinableExpr {
        DefinableExpr::from_node(Node::Add(self, rhs))
    }
}

impl std::ops::Sub for DefinableExpr {
    type Output = DefinableExpr;
    fn sub(self, rhs: DefinableExpr) -> DefinableExpr {
        self + (-rhs)
    }
}

impl std::ops::Mul for DefinableExpr {
    type Output = DefinableExpr;
    fn mul(self, rhs: DefinableExpr) -> DefinableExpr {
        DefinableExpr::from_node(Node::Mul(self, rhs))
    }
}

impl std::ops::Div for DefinableExpr {
    type Output = DefinableExpr;
    fn div(self, rhs: DefinableExpr) -> DefinableExpr {
        DefinableExpr::from_node(Node::Div(self, rhs))
    }
}

impl std::ops::Neg for DefinableExpr {
    type Output = DefinableExpr;
    fn neg(self) -> DefinableExpr {
        DefinableExpr::from_node(Node::Neg(self))
    }
}

// Precedence levels used by Display: sum < product < unary < power < atom.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Const(c) if *c < 0.0 => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

struct Wrapped<'a>(&'a DefinableExpr, u8);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if precedence(self.0.node()) < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        write!(f, "{}", c as i64)
    } else {
        write!(f, "{c:?}")
    }
}

/// Prints in the grammar accepted by [`parse`]; `parse(e.to_string())`
/// evaluates identically to `e`.
impl fmt::Display for DefinableExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_number(f, *c),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Add(a, b) => match b.node() {
                Node::Neg(inner) => write!(f, "{} - {}", Wrapped(a, 1), Wrapped(inner, 2)),
                _ => write!(f, "{} + {}", Wrapped(a, 1), Wrapped(b, 2)),
            },
            Node::Mul(a, b) => write!(f, "{}*{}", Wrapped(a, 2), Wrapped(b, 3)),
            Node::Div(a, b) => write!(f, "{}/{}", Wrapped(a, 2), Wrapped(b, 3)),
            Node::Neg(a) => write!(f, "-{}", Wrapped(a, 3)),
            Node::Pow(a, r) => {
                write!(f, "{}^", Wrapped(a, 5))?;
                if *r < 0.0 || r.fract() != 0.0 {
                    write!(f, "(")?;
                    write_number(f, *r)?;
                    write!(f, ")")
                } else {
                    write_number(f, *r)
                }
            }
            Node::Log(a) => write!(f, "log({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

/// `h(t) = expr(anchor + t·direction)`: an expression restricted to a line.
#[derive(Debug, Clone)]
pub struct UnaryRestriction {
    pub expr: DefinableExpr,
    pub anchor: Vec<f64>,
    pub direction: Vec<f64>,
}

impl UnaryRestriction {
    pub fn new(expr: DefinableExpr, anchor: Vec<f64>, direction: Vec<f64>) -> Self {
        assert_eq!(anchor.len(), direction.len(), "anchor and direction dimensions differ");
        assert!(anchor.len() <= MAX_VARS, "at most {MAX_VARS} variables");
        UnaryRestriction { expr, anchor, direction }
    }

    fn point(&self, t: f64) -> ([f64; MAX_VARS], usize) {
        let n = self.anchor.len();
        let mut buf = [0.0; MAX_VARS];
        for i in 0..n {
            buf[i] = self.anchor[i] + t * self.direction[i];
        }
        (buf, n)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let (buf, n) = self.point(t);
        self.expr.eval(&buf[..n])
    }

    /// `(h(t), h'(t))`.
    pub fn eval_deriv(&self, t: f64) -> Result<(f64, f64), EvalError> {
        let (buf, n) = self.point(t);
        let d = self.expr.eval_directional(&buf[..n], &self.direction)?;
        Ok((d.v, d.d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> DefinableExpr {
        parse(s).unwrap()
    }

    #[test]
    fn circle_value() {
        assert_eq!(e("x1^2 + x2^2 - 1").eval(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn fractional_power() {
        let v = e("x^1.5").eval(&[0.01]).unwrap();
        assert!((v - 1e-3).abs() < 1e-15);
        let (v, g) = e("x^1.5").eval_grad(&[0.04]).unwrap();
        assert!((v - 0.008).abs() < 1e-15);
        assert!((g[0] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn product_rule() {
        let (v, g) = e("x1*x2").eval_grad(&[2.0, 3.0]).unwrap();
        assert_eq!(v, 6.0);
        assert_eq!(g, vec![3.0, 2.0]);
    }

    #[test]
    fn log_gradient() {
        let (v, g) = e("log(x)").eval_grad(&[0.01]).unwrap();
        assert!((v - (-4.605170185988091)).abs() < 1e-9);
        assert!((g[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(e("log(x)").eval(&[-1.0]), Err(EvalError::LogOfNonPositive(_))));
        assert!(matches!(e("x^0.5").eval(&[0.0]), Err(EvalError::PowOfNonPositive { .. })));
        assert!(matches!(e("1/x").eval(&[0.0]), Err(EvalError::DivisionByZero)));
        assert!(matches!(e("x^(-2)").eval(&[0.0]), Err(EvalError::DivisionByZero)));
        assert!(matches!(e("exp(x)").eval(&[1000.0]), Err(EvalError::NonFinite)));
        assert!(matches!(e("x2").eval(&[1.0]), Err(EvalError::UnboundVariable(1, 1))));
    }

    #[test]
    fn integer_powers_accept_negative_bases() {
        assert_eq!(e("x^3").eval(&[-2.0]).unwrap(), -8.0);
        let (_, g) = e("x^3").eval_grad(&[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn variable_exponent_desugars() {
        let f = e("x^y");
        let (v, g) = f.eval_grad(&[0.5, 2.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        assert!((g[0] - 2.0 * 0.5).abs() < 1e-14);
        assert!((g[1] - 0.25 * 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn display_round_trips() {
        for s in ["x1^2 + x2^2 - 1", "-(x + 1)^(-1.5)*exp(-x2)", "x1/(x2*x3) - log(x1 + 2.5e-3)"] {
            let a = e(s);
            let b = e(&a.to_string());
            let p = [0.7, 1.3, 2.1];
            assert_eq!(a.eval(&p).unwrap(), b.eval(&p).unwrap(), "{s} -> {a}");
        }
    }

    #[test]
    fn restriction_at_zero() {
        let h = UnaryRestriction::new(e("x^2 + y^2 - 1"), vec![0.3, 0.4], vec![1.0, 2.0]);
        assert_eq!(h.eval(0.0).unwrap(), e("x^2 + y^2 - 1").eval(&[0.3, 0.4]).unwrap());
        let (_, d) = h.eval_deriv(0.0).unwrap();
        assert!((d - (2.0 * 0.3 + 2.0 * 0.4 * 2.0)).abs() < 1e-15);
    }
}

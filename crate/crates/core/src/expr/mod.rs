//! Scalar expressions over chart coordinates.
//!
//! Expressions are immutable trees shared through [`Arc`], so subtrees produced
//! by differentiation are reused rather than copied. Smart constructors fold
//! constants and drop additive/multiplicative identities; nothing else is
//! simplified. Identities between expressions are always checked numerically.

mod diff;
mod eval;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub use diff::DiffCache;
pub use eval::{EvalError, Tape};
pub use parse::{parse, ParseError};

/// Unary operators and elementary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    /// Plain IEEE application, without domain checks.
    pub(crate) fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Neg => -v,
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Tan => v.tan(),
            UnaryOp::Exp => v.exp(),
            UnaryOp::Log => v.ln(),
            UnaryOp::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    /// Index into the owning coordinate list.
    Var(usize),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    /// Power with a constant exponent.
    Pow(Expr, f64),
}

/// A differentiable scalar function of the chart coordinates.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(v: f64) -> Expr {
        // adding 0.0 turns -0.0 into 0.0 so folded zeros print cleanly
        Expr(Arc::new(Node::Const(v + 0.0)))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize) -> Expr {
        Expr(Arc::new(Node::Var(index)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
        if let Some(v) = arg.as_const() {
            let folded = op.apply(v);
            if folded.is_finite() && !(matches!(op, UnaryOp::Log | UnaryOp::Sqrt) && v < 0.0) {
                return Expr::constant(folded);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = &*arg.0 {
                return inner.clone();
            }
        }
        Expr(Arc::new(Node::Unary(op, arg)))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            let v = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            };
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if lhs.is_zero() {
                    return rhs;
                }
                if rhs.is_zero() {
                    return lhs;
                }
            }
            BinaryOp::Sub => {
                if rhs.is_zero() {
                    return lhs;
                }
                if lhs.is_zero() {
                    return Expr::unary(UnaryOp::Neg, rhs);
                }
            }
            BinaryOp::Mul => {
                if lhs.is_zero() || rhs.is_zero() {
                    return Expr::zero();
                }
                if lhs.is_one() {
                    return rhs;
                }
                if rhs.is_one() {
                    return lhs;
                }
            }
            BinaryOp::Div => {
                if lhs.is_zero() && !rhs.is_zero() {
                    return Expr::zero();
                }
                if rhs.is_one() {
                    return lhs;
                }
            }
        }
        Expr(Arc::new(Node::Binary(op, lhs, rhs)))
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return base;
        }
        if let Some(b) = base.as_const() {
            let v = b.powf(exponent);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr(Arc::new(Node::Pow(base, exponent)))
    }

    /// `base ^ exponent` for an arbitrary exponent expression; non-constant
    /// exponents are rewritten as `exp(exponent * log(base))`.
    pub fn pow_expr(base: Expr, exponent: Expr) -> Expr {
        match exponent.as_const() {
            Some(p) => Expr::pow(base, p),
            None => Expr::unary(UnaryOp::Exp, exponent * Expr::unary(UnaryOp::Log, base)),
        }
    }

    pub fn sin(&self) -> Expr {
        Expr::unary(UnaryOp::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::unary(UnaryOp::Cos, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Expr::unary(UnaryOp::Exp, self.clone())
    }

    pub fn log(&self) -> Expr {
        Expr::unary(UnaryOp::Log, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self.clone())
    }

    pub fn powi(&self, n: i32) -> Expr {
        Expr::pow(self.clone(), n as f64)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc + t)
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        DiffCache::new().diff(self, var)
    }

    /// Replaces every occurrence of coordinate `var` by `with`.
    pub fn substitute(&self, var: usize, with: &Expr) -> Expr {
        let mut memo = std::collections::HashMap::new();
        substitute_rec(self, var, with, &mut memo)
    }

    /// Coordinate indices referenced anywhere in the expression.
    pub fn variables(&self) -> std::collections::BTreeSet<usize> {
        let mut seen = std::collections::HashSet::new();
        let mut vars = std::collections::BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(i) => {
                    vars.insert(*i);
                }
                Node::Unary(_, a) | Node::Pow(a, _) => stack.push(a.clone()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        vars
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.variables().contains(&var)
    }

    /// Evaluates at a point given as values ordered like the coordinate list.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        eval::eval_tree(self, point)
    }

    /// Evaluates with coordinate values looked up by name.
    pub fn evaluate_named(
        &self,
        coords: &[&str],
        point: &std::collections::HashMap<String, f64>,
    ) -> Result<f64, EvalError> {
        let mut values = Vec::with_capacity(coords.len());
        for name in coords {
            match point.get(*name) {
                Some(v) => values.push(*v),
                None => return Err(EvalError::Unbound((*name).to_string())),
            }
        }
        self.eval(&values)
    }

    /// Renders the expression in the parser's grammar using `names` for
    /// coordinates.
    pub fn display<'a>(&'a self, names: &'a [&'a str]) -> Display<'a> {
        Display { expr: self, names }
    }
}

fn substitute_rec(
    e: &Expr,
    var: usize,
    with: &Expr,
    memo: &mut std::collections::HashMap<usize, Expr>,
) -> Expr {
    if let Some(done) = memo.get(&e.ptr()) {
        return done.clone();
    }
    let out = match e.node() {
        Node::Const(_) => e.clone(),
        Node::Var(i) => {
            if *i == var {
                with.clone()
            } else {
                e.clone()
            }
        }
        Node::Unary(op, a) => Expr::unary(*op, substitute_rec(a, var, with, memo)),
        Node::Binary(op, a, b) => {
            let a = substitute_rec(a, var, with, memo);
            let b = substitute_rec(b, var, with, memo);
            Expr::binary(*op, a, b)
        }
        Node::Pow(a, p) => Expr::pow(substitute_rec(a, var, with, memo), *p),
    };
    memo.insert(e.ptr(), out.clone());
    out
}

pub struct Display<'a> {
    expr: &'a Expr,
    names: &'a [&'a str],
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

fn write_number(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn write_expr(e: &Expr, names: &[&str], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(v) => write_number(*v, f),
        Node::Var(i) => match names.get(*i) {
            Some(n) => f.write_str(n),
            None => write!(f, "_v{i}"),
        },
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_str("(-(")?;
            write_expr(a, names, f)?;
            f.write_str("))")
        }
        Node::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(a, names, f)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            f.write_str("(")?;
            write_expr(a, names, f)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(b, names, f)?;
            f.write_str(")")
        }
        Node::Pow(a, p) => {
            f.write_str("((")?;
            write_expr(a, names, f)?;
            f.write_str(")^")?;
            write_number(*p, f)?;
            f.write_str(")")
        }
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self, rhs.clone())
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self.clone(), Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs)
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self.clone())
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::constant(v)
    }
}

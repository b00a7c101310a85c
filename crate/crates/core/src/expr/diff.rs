use std::collections::HashMap;

use super::{BinaryOp, Expr, Node, UnaryOp};

/// Memoized symbolic differentiation.
///
/// Results are keyed by node identity, so repeated derivatives of shared
/// subtrees (the common case for connection coefficients) are computed once and
/// stay shared in the output. The cache keeps its keys alive, which keeps node
/// addresses from being reused while it exists.
#[derive(Default)]
pub struct DiffCache {
    memo: HashMap<(usize, usize), (Expr, Expr)>,
}

impl DiffCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diff(&mut self, e: &Expr, var: usize) -> Expr {
        let key = (e.ptr(), var);
        if let Some((_, d)) = self.memo.get(&key) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Unary(op, a) => {
                let da = self.diff(a, var);
                match op {
                    UnaryOp::Neg => -da,
                    UnaryOp::Sin => a.cos() * da,
                    UnaryOp::Cos => -(a.sin() * da),
                    UnaryOp::Tan => da / a.cos().powi(2),
                    UnaryOp::Exp => e * da,
                    UnaryOp::Log => da / a,
                    UnaryOp::Sqrt => da / (2.0 * e),
                }
            }
            Node::Binary(op, a, b) => {
                let da = self.diff(a, var);
                let db = self.diff(b, var);
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    BinaryOp::Div => {
                        if db.is_zero() {
                            da / b
                        } else {
                            (da * b - a * db) / b.powi(2)
                        }
                    }
                }
            }
            Node::Pow(a, p) => {
                let da = self.diff(a, var);
                Expr::constant(*p) * Expr::pow(a.clone(), p - 1.0) * da
            }
        };
        self.memo.insert(key, (e.clone(), d.clone()));
        d
    }
}

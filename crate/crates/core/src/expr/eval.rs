use std::collections::HashMap;
use std::fmt;

use super::{BinaryOp, Expr, Node, UnaryOp};

const DEFAULT_NAMES: [&str; 3] = ["u", "x", "y"];

#[derive(Debug, Clone)]
pub enum EvalError {
    /// An operation was applied outside its domain.
    Domain {
        what: &'static str,
        subexpr: Expr,
        argument: f64,
    },
    /// A coordinate the expression needs has no value.
    Unbound(String),
    /// The point has fewer values than the expression's variables.
    MissingCoordinate(usize),
}

impl EvalError {
    /// Renders the error with the caller's coordinate names.
    pub fn describe(&self, names: &[&str]) -> String {
        match self {
            EvalError::Domain {
                what,
                subexpr,
                argument,
            } => format!(
                "{what} in `{}` (argument {argument:e})",
                subexpr.display(names)
            ),
            EvalError::Unbound(n) => format!("coordinate `{n}` has no value"),
            EvalError::MissingCoordinate(i) => format!("no value for coordinate #{i}"),
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe(&DEFAULT_NAMES))
    }
}

impl std::error::Error for EvalError {}

fn unary(op: UnaryOp, v: f64, node: &Expr) -> Result<f64, EvalError> {
    let bad = |what| EvalError::Domain {
        what,
        subexpr: node.clone(),
        argument: v,
    };
    match op {
        UnaryOp::Log if v <= 0.0 => Err(bad("log of non-positive value")),
        UnaryOp::Sqrt if v < 0.0 => Err(bad("sqrt of negative value")),
        _ => {
            let r = op.apply(v);
            if r.is_finite() {
                Ok(r)
            } else {
                Err(bad("non-finite result"))
            }
        }
    }
}

fn binary(op: BinaryOp, a: f64, b: f64, node: &Expr) -> Result<f64, EvalError> {
    let r = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(EvalError::Domain {
                    what: "division by zero",
                    subexpr: node.clone(),
                    argument: b,
                });
            }
            a / b
        }
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(EvalError::Domain {
            what: "non-finite result",
            subexpr: node.clone(),
            argument: r,
        })
    }
}

fn power(base: f64, p: f64, node: &Expr) -> Result<f64, EvalError> {
    let bad = |what| EvalError::Domain {
        what,
        subexpr: node.clone(),
        argument: base,
    };
    let r = if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        if base == 0.0 && p < 0.0 {
            return Err(bad("division by zero"));
        }
        base.powi(p as i32)
    } else {
        if base < 0.0 || (base == 0.0 && p < 0.0) {
            return Err(bad("real power of non-positive value"));
        }
        base.powf(p)
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(bad("non-finite result"))
    }
}

pub(super) fn eval_tree(e: &Expr, point: &[f64]) -> Result<f64, EvalError> {
    let mut memo = HashMap::new();
    eval_rec(e, point, &mut memo)
}

fn eval_rec(e: &Expr, point: &[f64], memo: &mut HashMap<usize, f64>) -> Result<f64, EvalError> {
    if let Some(v) = memo.get(&e.ptr()) {
        return Ok(*v);
    }
    let v = match e.node() {
        Node::Const(c) => *c,
        Node::Var(i) => *point.get(*i).ok_or(EvalError::MissingCoordinate(*i))?,
        Node::Unary(op, a) => unary(*op, eval_rec(a, point, memo)?, e)?,
        Node::Binary(op, a, b) => {
            let x = eval_rec(a, point, memo)?;
            let y = eval_rec(b, point, memo)?;
            binary(*op, x, y, e)?
        }
        Node::Pow(a, p) => power(eval_rec(a, point, memo)?, *p, e)?,
    };
    memo.insert(e.ptr(), v);
    Ok(v)
}

#[derive(Debug, Clone)]
enum Instr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Pow(usize, f64),
}

/// A batch of expressions flattened into one instruction list, with shared
/// subexpressions evaluated once per point.
#[derive(Debug, Clone)]
pub struct Tape {
    instrs: Vec<Instr>,
    nodes: Vec<Expr>,
    outputs: Vec<usize>,
}

impl Tape {
    pub fn compile<'a, I>(roots: I) -> Tape
    where
        I: IntoIterator<Item = &'a Expr>,
    {
        let mut slot_of: HashMap<usize, usize> = HashMap::new();
        let mut tape = Tape {
            instrs: Vec::new(),
            nodes: Vec::new(),
            outputs: Vec::new(),
        };
        for root in roots {
            let slot = tape.push(root, &mut slot_of);
            tape.outputs.push(slot);
        }
        tape
    }

    fn push(&mut self, root: &Expr, slot_of: &mut HashMap<usize, usize>) -> usize {
        if let Some(s) = slot_of.get(&root.ptr()) {
            return *s;
        }
        // iterative post-order so deep trees cannot overflow the stack
        let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if slot_of.contains_key(&e.ptr()) {
                continue;
            }
            let children: Vec<Expr> = match e.node() {
                Node::Const(_) | Node::Var(_) => vec![],
                Node::Unary(_, a) | Node::Pow(a, _) => vec![a.clone()],
                Node::Binary(_, a, b) => vec![a.clone(), b.clone()],
            };
            if !expanded && children.iter().any(|c| !slot_of.contains_key(&c.ptr())) {
                stack.push((e, true));
                for c in children.into_iter().rev() {
                    stack.push((c, false));
                }
                continue;
            }
            let s = |c: &Expr| slot_of[&c.ptr()];
            let instr = match e.node() {
                Node::Const(v) => Instr::Const(*v),
                Node::Var(i) => Instr::Var(*i),
                Node::Unary(op, a) => Instr::Unary(*op, s(a)),
                Node::Binary(op, a, b) => Instr::Binary(*op, s(a), s(b)),
                Node::Pow(a, p) => Instr::Pow(s(a), *p),
            };
            let slot = self.instrs.len();
            self.instrs.push(instr);
            self.nodes.push(e.clone());
            slot_of.insert(e.ptr(), slot);
        }
        slot_of[&root.ptr()]
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Number of distinct nodes on the tape.
    pub fn size(&self) -> usize {
        self.instrs.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut vals = vec![0.0; self.instrs.len()];
        for (k, ins) in self.instrs.iter().enumerate() {
            vals[k] = match *ins {
                Instr::Const(c) => c,
                Instr::Var(i) => *point.get(i).ok_or(EvalError::MissingCoordinate(i))?,
                Instr::Unary(op, a) => unary(op, vals[a], &self.nodes[k])?,
                Instr::Binary(op, a, b) => binary(op, vals[a], vals[b], &self.nodes[k])?,
                Instr::Pow(a, p) => power(vals[a], p, &self.nodes[k])?,
            };
        }
        Ok(self.outputs.iter().map(|&s| vals[s]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    const UXY: [&str; 3] = ["u", "x", "y"];

    #[test]
    fn known_values() {
        assert_eq!(parse("0", &UXY).unwrap().eval(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(parse("exp(u)", &UXY).unwrap().eval(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        let s = parse("sin(x)", &UXY).unwrap();
        let v = s.eval(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("1 + log(x - 1)", &UXY).unwrap();
        let err = e.eval(&[0.0, 0.5, 0.0]).unwrap_err();
        let msg = err.describe(&UXY);
        assert!(msg.contains("log"), "{msg}");
        assert!(msg.contains("(x - 1.0)"), "{msg}");

        let e = parse("u/(x - y)", &UXY).unwrap();
        let err = e.eval(&[1.0, 2.0, 2.0]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { what: "division by zero", .. }));

        assert!(parse("sqrt(x)", &UXY).unwrap().eval(&[0.0, -1.0, 0.0]).is_err());
        assert!(parse("x^0.5", &UXY).unwrap().eval(&[0.0, -1.0, 0.0]).is_err());
        assert_eq!(parse("x^3", &UXY).unwrap().eval(&[0.0, -2.0, 0.0]).unwrap(), -8.0);
    }

    #[test]
    fn named_points() {
        let e = parse("x*y", &UXY).unwrap();
        let mut p = HashMap::new();
        p.insert("u".to_string(), 0.0);
        p.insert("x".to_string(), 2.0);
        p.insert("y".to_string(), 5.0);
        assert_eq!(e.evaluate_named(&UXY, &p).unwrap(), 10.0);
        p.remove("y");
        assert!(matches!(e.evaluate_named(&UXY, &p), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn tape_shares_common_nodes() {
        let x = parse("sin(x)*exp(y)", &UXY).unwrap();
        let a = &x * &x;
        let b = &x + 1.0;
        let tape = Tape::compile([&a, &b]);
        // x's subtree appears once
        assert_eq!(tape.size(), 8);
        let p = [0.0, 0.3, -0.2];
        let out = tape.eval(&p).unwrap();
        let xv = x.eval(&p).unwrap();
        assert_eq!(out, vec![xv * xv, xv + 1.0]);
    }
}

//! Closed-form expression trees over chart coordinates.
//!
//! Metric components, transition maps, embeddings and base functions are all
//! written as [`Expr`] values. They can be differentiated symbolically and
//! compiled into a [`Tape`], a deduplicated straight-line program that is
//! evaluated over any [`Scalar`] (complex numbers or jets).

use crate::jet::Scalar;
use num_complex::Complex64;
use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Debug)]
enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Ln(Expr),
    Sqrt(Expr),
    Sinh(Expr),
    Cosh(Expr),
}

/// Shared, immutable expression node.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn wrap(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn c(v: f64) -> Self {
        Self::wrap(Node::Const(v))
    }

    pub fn var(i: usize) -> Self {
        Self::wrap(Node::Var(i))
    }

    /// Variables `x0..x{n-1}`.
    pub fn vars(n: usize) -> Vec<Expr> {
        (0..n).map(Expr::var).collect()
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(v)
    }

    pub fn powi(&self, n: i32) -> Expr {
        match n {
            0 => Expr::c(1.0),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(v) => Expr::c(v.powi(n)),
                None => Self::wrap(Node::Powi(self.clone(), n)),
            },
        }
    }

    pub fn sin(&self) -> Expr {
        self.unary(f64::sin, Node::Sin)
    }
    pub fn cos(&self) -> Expr {
        self.unary(f64::cos, Node::Cos)
    }
    pub fn exp(&self) -> Expr {
        self.unary(f64::exp, Node::Exp)
    }
    pub fn ln(&self) -> Expr {
        self.unary(f64::ln, Node::Ln)
    }
    pub fn sqrt(&self) -> Expr {
        self.unary(f64::sqrt, Node::Sqrt)
    }
    pub fn sinh(&self) -> Expr {
        self.unary(f64::sinh, Node::Sinh)
    }
    pub fn cosh(&self) -> Expr {
        self.unary(f64::cosh, Node::Cosh)
    }

    fn unary(&self, f: fn(f64) -> f64, make: fn(Expr) -> Node) -> Expr {
        match self.as_const() {
            Some(v) => Expr::c(f(v)),
            None => Self::wrap(make(self.clone())),
        }
    }

    /// Symbolic partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::c(0.0),
            Node::Var(j) => Expr::c(if *j == i { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff(i) + b.diff(i),
            Node::Sub(a, b) => a.diff(i) - b.diff(i),
            Node::Mul(a, b) => a.diff(i) * b.clone() + a.clone() * b.diff(i),
            Node::Div(a, b) => {
                (a.diff(i) * b.clone() - a.clone() * b.diff(i)) / b.powi(2)
            }
            Node::Neg(a) => -a.diff(i),
            Node::Powi(a, n) => Expr::c(*n as f64) * a.powi(n - 1) * a.diff(i),
            Node::Sin(a) => a.cos() * a.diff(i),
            Node::Cos(a) => -(a.sin() * a.diff(i)),
            Node::Exp(a) => self.clone() * a.diff(i),
            Node::Ln(a) => a.diff(i) / a.clone(),
            Node::Sqrt(a) => a.diff(i) / (Expr::c(2.0) * self.clone()),
            Node::Sinh(a) => a.cosh() * a.diff(i),
            Node::Cosh(a) => a.sinh() * a.diff(i),
        }
    }

    /// Replaces every variable `j` by `subs[j]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(j) => subs[*j].clone(),
            Node::Add(a, b) => a.substitute(subs) + b.substitute(subs),
            Node::Sub(a, b) => a.substitute(subs) - b.substitute(subs),
            Node::Mul(a, b) => a.substitute(subs) * b.substitute(subs),
            Node::Div(a, b) => a.substitute(subs) / b.substitute(subs),
            Node::Neg(a) => -a.substitute(subs),
            Node::Powi(a, n) => a.substitute(subs).powi(*n),
            Node::Sin(a) => a.substitute(subs).sin(),
            Node::Cos(a) => a.substitute(subs).cos(),
            Node::Exp(a) => a.substitute(subs).exp(),
            Node::Ln(a) => a.substitute(subs).ln(),
            Node::Sqrt(a) => a.substitute(subs).sqrt(),
            Node::Sinh(a) => a.substitute(subs).sinh(),
            Node::Cosh(a) => a.substitute(subs).cosh(),
        }
    }

    /// Direct recursive evaluation. Fine for one-off values; use a [`Tape`] in loops.
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        Tape::compile(std::slice::from_ref(self)).eval(vars).swap_remove(0)
    }

    pub fn eval_c(&self, vars: &[Complex64]) -> Complex64 {
        self.eval(vars)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::c(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        if self.is_const(0.0) {
            return rhs;
        }
        if rhs.is_const(0.0) {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::c(a + b);
        }
        Expr::wrap(Node::Add(self, rhs))
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        if rhs.is_const(0.0) {
            return self;
        }
        if self.is_const(0.0) {
            return -rhs;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::c(a - b);
        }
        Expr::wrap(Node::Sub(self, rhs))
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_const(0.0) || rhs.is_const(0.0) {
            return Expr::c(0.0);
        }
        if self.is_const(1.0) {
            return rhs;
        }
        if rhs.is_const(1.0) {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::c(a * b);
        }
        Expr::wrap(Node::Mul(self, rhs))
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        if self.is_const(0.0) {
            return Expr::c(0.0);
        }
        if rhs.is_const(1.0) {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expr::c(a / b);
        }
        Expr::wrap(Node::Div(self, rhs))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        if let Some(v) = self.as_const() {
            return Expr::c(-v);
        }
        if let Node::Neg(a) = &*self.0 {
            return a.clone();
        }
        Expr::wrap(Node::Neg(self))
    }
}

macro_rules! ref_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                self.clone().$m(rhs.clone())
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                self.$m(Expr::c(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::c(self).$m(rhs)
            }
        }
    };
}
ref_ops!(Add, add);
ref_ops!(Sub, sub);
ref_ops!(Mul, mul);
ref_ops!(Div, div);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Powi(usize, i32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Sinh(usize),
    Cosh(usize),
}

/// Straight-line program computing several expressions with shared
/// subexpressions evaluated once.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
}

struct Compiler {
    ops: Vec<Op>,
    index: HashMap<Op, usize>,
    seen: HashMap<*const Node, usize>,
}

impl Compiler {
    fn push(&mut self, op: Op) -> usize {
        if let Some(&i) = self.index.get(&op) {
            return i;
        }
        self.ops.push(op);
        self.index.insert(op, self.ops.len() - 1);
        self.ops.len() - 1
    }

    fn visit(&mut self, e: &Expr) -> usize {
        let key = Arc::as_ptr(&e.0);
        if let Some(&i) = self.seen.get(&key) {
            return i;
        }
        let op = match &*e.0 {
            Node::Const(v) => Op::Const(v.to_bits()),
            Node::Var(j) => Op::Var(*j),
            Node::Add(a, b) => Op::Add(self.visit(a), self.visit(b)),
            Node::Sub(a, b) => Op::Sub(self.visit(a), self.visit(b)),
            Node::Mul(a, b) => Op::Mul(self.visit(a), self.visit(b)),
            Node::Div(a, b) => Op::Div(self.visit(a), self.visit(b)),
            Node::Neg(a) => Op::Neg(self.visit(a)),
            Node::Powi(a, n) => Op::Powi(self.visit(a), *n),
            Node::Sin(a) => Op::Sin(self.visit(a)),
            Node::Cos(a) => Op::Cos(self.visit(a)),
            Node::Exp(a) => Op::Exp(self.visit(a)),
            Node::Ln(a) => Op::Ln(self.visit(a)),
            Node::Sqrt(a) => Op::Sqrt(self.visit(a)),
            Node::Sinh(a) => Op::Sinh(self.visit(a)),
            Node::Cosh(a) => Op::Cosh(self.visit(a)),
        };
        let i = self.push(op);
        self.seen.insert(key, i);
        i
    }
}

impl Tape {
    pub fn compile(outputs: &[Expr]) -> Tape {
        let mut c = Compiler { ops: Vec::new(), index: HashMap::new(), seen: HashMap::new() };
        let outputs = outputs.iter().map(|e| c.visit(e)).collect();
        Tape { ops: c.ops, outputs }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn eval<S: Scalar>(&self, vars: &[S]) -> Vec<S> {
        let mut v: Vec<S> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let x = match *op {
                Op::Const(bits) => S::constant(Complex64::new(f64::from_bits(bits), 0.0)),
                Op::Var(j) => vars[j].clone(),
                Op::Add(a, b) => v[a].clone() + v[b].clone(),
                Op::Sub(a, b) => v[a].clone() - v[b].clone(),
                Op::Mul(a, b) => v[a].clone() * v[b].clone(),
                Op::Div(a, b) => v[a].clone() / v[b].clone(),
                Op::Neg(a) => -v[a].clone(),
                Op::Powi(a, n) => v[a].powi(n),
                Op::Sin(a) => v[a].sin(),
                Op::Cos(a) => v[a].cos(),
                Op::Exp(a) => v[a].exp(),
                Op::Ln(a) => v[a].ln(),
                Op::Sqrt(a) => v[a].sqrt(),
                Op::Sinh(a) => v[a].sinh(),
                Op::Cosh(a) => v[a].cosh(),
            };
            v.push(x);
        }
        self.outputs.iter().map(|&i| v[i].clone()).collect()
    }
}

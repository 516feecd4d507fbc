//! Closed-form coefficient expressions: parsing, printing and evaluation.
//!
//! Permitted variables are `x, x1, x2, y, y1, y2, t`; functions are
//! `sin cos exp log sqrt abs min max`; `pi` is the only named constant.

mod eval;
mod parse;
mod print;

use alloc::boxed::Box;
use alloc::string::String;

pub use eval::{evaluate, Bindings, EvalError};
pub use parse::{parse, parse_bytes, ParseError};

/// Names accepted as identifiers, in the order they are reported in errors.
pub const PERMITTED_NAMES: &[&str] = &[
    "x", "x1", "x2", "y", "y1", "y2", "t", "pi", "sin", "cos", "exp", "log", "sqrt", "abs", "min",
    "max",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    X1,
    X2,
    Y,
    Y1,
    Y2,
    T,
}

impl Var {
    pub const ALL: [Var; 7] = [Var::X, Var::X1, Var::X2, Var::Y, Var::Y1, Var::Y2, Var::T];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::Y => "y",
            Var::Y1 => "y1",
            Var::Y2 => "y2",
            Var::T => "t",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }

    /// Slow variables (`x`, `x1`, `x2`).
    pub fn is_slow(self) -> bool {
        matches!(self, Var::X | Var::X1 | Var::X2)
    }

    /// Fast variables (`y`, `y1`, `y2`).
    pub fn is_fast(self) -> bool {
        matches!(self, Var::Y | Var::Y1 | Var::Y2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    pub fn uses_any(&self, pred: impl Fn(Var) -> bool + Copy) -> bool {
        Var::ALL.iter().any(|&v| pred(v) && self.uses(v))
    }

    pub fn depends_on_slow(&self) -> bool {
        self.uses_any(Var::is_slow)
    }

    pub fn depends_on_fast(&self) -> bool {
        self.uses_any(Var::is_fast)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Fully parenthesized source text; parsing it back gives bit-identical values.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        print::write_expr(&mut s, self);
        s
    }
}

impl core::fmt::Display for Expr {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.to_source())
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

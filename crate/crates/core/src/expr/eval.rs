use super::{BinOp, Expr, Func, Var};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
    #[error("`{0}` is not a variable name")]
    UnknownVariable(alloc::string::String),
    #[error("domain error: {op} of {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result from {op}")]
    NonFinite { op: &'static str },
}

/// Values for the permitted variables; unset slots are unbound.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    vals: [Option<f64>; 7],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.vals[var.slot()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.vals[var.slot()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.vals[var.slot()]
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Result<Self, EvalError> {
        let mut b = Self::new();
        for &(name, v) in pairs {
            let var = Var::from_name(name)
                .ok_or_else(|| EvalError::UnknownVariable(alloc::string::String::from(name)))?;
            b.set(var, v);
        }
        Ok(b)
    }

    /// Binds a slow point: `x`/`x1` to the first coordinate, `x2` to the second.
    pub fn slow(mut self, x: &[f64]) -> Self {
        if let Some(&a) = x.first() {
            self.set(Var::X, a);
            self.set(Var::X1, a);
        }
        if let Some(&b) = x.get(1) {
            self.set(Var::X2, b);
        }
        self
    }

    /// Binds a fast point: `y`/`y1` to the first coordinate, `y2` to the second.
    pub fn fast(mut self, y: &[f64]) -> Self {
        if let Some(&a) = y.first() {
            self.set(Var::Y, a);
            self.set(Var::Y1, a);
        }
        if let Some(&b) = y.get(1) {
            self.set(Var::Y2, b);
        }
        self
    }
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

pub fn evaluate(e: &Expr, b: &Bindings) -> Result<f64, EvalError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Pi => Ok(core::f64::consts::PI),
        Expr::Var(v) => b.get(*v).ok_or(EvalError::Unbound(v.name())),
        Expr::Neg(a) => Ok(-evaluate(a, b)?),
        Expr::Call(f, a) => {
            let x = evaluate(a, b)?;
            match f {
                Func::Sin => finite(libm::sin(x), "sin"),
                Func::Cos => finite(libm::cos(x), "cos"),
                Func::Exp => finite(libm::exp(x), "exp"),
                Func::Abs => Ok(libm::fabs(x)),
                Func::Log => {
                    if x <= 0.0 {
                        Err(EvalError::Domain { op: "log", arg: x })
                    } else {
                        finite(libm::log(x), "log")
                    }
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        Err(EvalError::Domain { op: "sqrt", arg: x })
                    } else {
                        Ok(libm::sqrt(x))
                    }
                }
            }
        }
        Expr::Bin(op, l, r) => {
            let x = evaluate(l, b)?;
            let y = evaluate(r, b)?;
            match op {
                BinOp::Add => finite(x + y, "+"),
                BinOp::Sub => finite(x - y, "-"),
                BinOp::Mul => finite(x * y, "*"),
                BinOp::Div => {
                    if y == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        finite(x / y, "/")
                    }
                }
                BinOp::Pow => {
                    let v = libm::pow(x, y);
                    if v.is_nan() {
                        Err(EvalError::Domain { op: "^", arg: x })
                    } else {
                        finite(v, "^")
                    }
                }
                BinOp::Min => Ok(x.min(y)),
                BinOp::Max => Ok(x.max(y)),
            }
        }
    }
}

impl Expr {
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        evaluate(self, b)
    }
}

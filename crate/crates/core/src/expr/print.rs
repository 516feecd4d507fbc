use alloc::string::String;
use core::fmt::Write;

use super::{BinOp, Expr};

pub(super) fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(v) => {
            if v.is_sign_negative() {
                let _ = write!(out, "(-{:?})", -v);
            } else {
                let _ = write!(out, "{v:?}");
            }
        }
        Expr::Pi => out.push_str("pi"),
        Expr::Var(v) => out.push_str(v.name()),
        Expr::Neg(a) => {
            out.push_str("(-");
            write_expr(out, a);
            out.push(')');
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(out, a);
            out.push(')');
        }
        Expr::Bin(op @ (BinOp::Min | BinOp::Max), a, b) => {
            out.push_str(if *op == BinOp::Min { "min(" } else { "max(" });
            write_expr(out, a);
            out.push_str(", ");
            write_expr(out, b);
            out.push(')');
        }
        Expr::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => " * ",
                BinOp::Div => " / ",
                _ => " ^ ",
            };
            out.push('(');
            write_expr(out, a);
            out.push_str(sym);
            write_expr(out, b);
            out.push(')');
        }
    }
}

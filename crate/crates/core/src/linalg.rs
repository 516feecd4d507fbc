//! Conjugate gradients and periodic tridiagonal solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub rtol: f64,
    pub max_iter: usize,
    /// Restrict to mean-zero vectors (periodic problems whose kernel is the constants).
    pub mean_zero: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rtol: 1e-14,
            max_iter: 20_000,
            mean_zero: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Jacobi-preconditioned CG for a symmetric positive (semi)definite operator.
/// `x` holds the initial guess on entry and the solution on exit.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    diag: Option<&[f64]>,
    x: &mut [f64],
    opts: CgOptions,
) -> Result<CgReport> {
    let n = rhs.len();
    let mut b = rhs.to_vec();
    if opts.mean_zero {
        remove_mean(&mut b);
        remove_mean(x);
    }
    let bnorm = libm::sqrt(dot(&b, &b));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let precond = |r: &[f64], z: &mut [f64]| {
        match diag {
            Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r / d),
            None => z.copy_from_slice(r),
        }
        if opts.mean_zero {
            remove_mean(z);
        }
    };
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.iter_mut().zip(&b).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = opts.rtol * bnorm;
    let mut rnorm = libm::sqrt(dot(&r, &r));
    let mut it = 0;
    while rnorm > target {
        if it == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        rnorm = libm::sqrt(dot(&r, &r));
        it += 1;
    }
    if opts.mean_zero {
        remove_mean(x);
    }
    Ok(CgReport {
        iterations: it,
        relative_residual: rnorm / bnorm,
    })
}

/// Solves the cyclic system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// (indices mod n) by Sherman-Morrison on top of the Thomas algorithm.
/// Requires a diagonally dominant matrix; `n >= 3`.
pub fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= upper[n - 1] * lower[0] / gamma;
    let x = thomas(lower, &d, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = upper[n - 1];
    let z = thomas(lower, &d, upper, &u);
    let vx = x[0] + lower[0] / gamma * x[n - 1];
    let vz = z[0] + lower[0] / gamma * z[n - 1];
    let fact = vx / (1.0 + vz);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

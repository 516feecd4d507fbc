//! Periodic mobilities `B(y)`, two-scale stationary densities `pi(x, y)` and
//! their sampling on resonant grids.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::grid::{FaceField, Grid};

/// Reduces a fast coordinate to `[0, 1)`.
pub fn frac(y: f64) -> f64 {
    let f = y - libm::floor(y);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn layer(values: &[f64], y: f64) -> f64 {
    let k = libm::floor(frac(y) * values.len() as f64) as usize;
    values[k.min(values.len() - 1)]
}

#[derive(Clone, Debug, PartialEq)]
pub enum MobilityFamily {
    /// `b I`.
    Constant(f64),
    /// `(mean + amplitude sin(2 pi y1)) I`.
    Sinusoidal { mean: f64, amplitude: f64 },
    /// Equal-width isotropic layers along `y1`.
    Layered(Vec<f64>),
    /// `beta` on the open unit cell, `alpha` on its boundary skeleton (a null set for
    /// every volume integral; only path metrics see it).
    Checkerboard { alpha: f64, beta: f64 },
    /// `b(y) I` from an expression in the fast variables.
    Scalar(Expr),
    /// `diag(b_1(y), ..., b_n(y))`.
    Diagonal(Vec<Expr>),
}

/// A uniformly positive definite, `Z^n`-periodic, diagonal mobility tensor `B(y)`
/// with declared eigenvalue bounds `C1 <= B <= C2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mobility {
    pub dim: usize,
    pub family: MobilityFamily,
    pub bounds: (f64, f64),
}

impl Mobility {
    pub fn new(dim: usize, family: MobilityFamily, bounds: (f64, f64)) -> Result<Self> {
        let m = Mobility {
            dim,
            family,
            bounds,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(
            self.family,
            MobilityFamily::Layered(_) | MobilityFamily::Checkerboard { .. }
        )
    }

    pub fn is_isotropic(&self) -> bool {
        match &self.family {
            MobilityFamily::Diagonal(e) => e.len() == 1 || e.windows(2).all(|w| w[0] == w[1]),
            _ => true,
        }
    }

    /// Diagonal entries of `B(y)`; volume sense for the checkerboard (value `beta`).
    pub fn diag_at(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let bind = || Bindings::new().fast(&y[..self.dim]);
        let v = match &self.family {
            MobilityFamily::Constant(b) => *b,
            MobilityFamily::Sinusoidal { mean, amplitude } => {
                mean + amplitude * libm::sin(2.0 * core::f64::consts::PI * frac(y[0]))
            }
            MobilityFamily::Layered(v) => layer(v, y[0]),
            MobilityFamily::Checkerboard { beta, .. } => *beta,
            MobilityFamily::Scalar(e) => e.eval(&bind())?,
            MobilityFamily::Diagonal(es) => {
                let b = bind();
                let first = es[0].eval(&b)?;
                let second = if self.dim == 2 { es[1].eval(&b)? } else { first };
                return Ok([first, second]);
            }
        };
        Ok([v, v])
    }

    /// Scalar value `b(y)` of an isotropic mobility.
    pub fn scalar_at(&self, y: [f64; 2]) -> Result<f64> {
        if !self.is_isotropic() {
            return Err(Error::Unsupported(
                "scalar value requested from an anisotropic mobility".into(),
            ));
        }
        Ok(self.diag_at(y)?[0])
    }

    fn check_value(&self, v: f64, y: [f64; 2]) -> Result<()> {
        let (c1, c2) = self.bounds;
        if !(v >= c1 * (1.0 - 1e-12) && v <= c2 * (1.0 + 1e-12)) {
            return Err(Error::Bounds(format!(
                "B({:?}) has eigenvalue {v}, outside declared [{c1}, {c2}]",
                &y[..self.dim]
            )));
        }
        Ok(())
    }

    pub fn check_at(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let d = self.diag_at(y)?;
        for &v in &d[..self.dim] {
            self.check_value(v, y)?;
        }
        Ok(d)
    }

    /// Smallest and largest eigenvalue found on a `points`-per-axis scan.
    pub fn scan_extrema(&self, points: usize) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let m2 = if self.dim == 2 { points } else { 1 };
        for j in 0..m2 {
            for i in 0..points {
                let y = [i as f64 / points as f64, j as f64 / points as f64];
                for &v in &self.diag_at(y)?[..self.dim] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if let MobilityFamily::Checkerboard { alpha, .. } = self.family {
            lo = lo.min(alpha);
            hi = hi.max(alpha);
        }
        Ok((lo, hi))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(invalid!("dimension must be 1 or 2"));
        }
        let (c1, c2) = self.bounds;
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return Err(Error::Bounds(format!(
                "declared bounds must satisfy 0 < C1 <= C2, got [{c1}, {c2}]"
            )));
        }
        match &self.family {
            MobilityFamily::Layered(v) if v.is_empty() => {
                return Err(invalid!("layered mobility needs at least one layer"))
            }
            MobilityFamily::Checkerboard { alpha, .. } => self.check_value(*alpha, [0.0; 2])?,
            MobilityFamily::Scalar(e) => check_fast_only(e)?,
            MobilityFamily::Diagonal(es) => {
                if es.len() != self.dim {
                    return Err(invalid!(
                        "diagonal mobility needs {} entries, got {}",
                        self.dim,
                        es.len()
                    ));
                }
                es.iter().try_for_each(check_fast_only)?;
            }
            _ => {}
        }
        let n = 64;
        let m2 = if self.dim == 2 { n } else { 1 };
        for j in 0..m2 {
            for i in 0..n {
                let y = [(i as f64 + 0.37) / n as f64, (j as f64 + 0.61) / n as f64];
                let d = self.check_at(y)?;
                for a in 0..self.dim {
                    let mut ys = y;
                    ys[a] += 1.0;
                    let s = self.diag_at(ys)?;
                    if libm::fabs(s[a] - d[a]) > 1e-9 * libm::fabs(d[a]) {
                        return Err(invalid!(
                            "mobility is not 1-periodic in y{}: B({:?}) != B({:?})",
                            a + 1,
                            &y[..self.dim],
                            &ys[..self.dim]
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_fast_only(e: &Expr) -> Result<()> {
    if e.depends_on_slow() || e.uses(Var::T) {
        return Err(invalid!(
            "mobility expression `{e}` may only depend on y, y1, y2"
        ));
    }
    Ok(())
}

/// A scalar field entering the stationary density.
#[derive(Clone, Debug, PartialEq)]
pub enum PiField {
    Constant(f64),
    /// Expression in `x, x1, x2, y, y1, y2`.
    Expr(Expr),
    /// Equal-width layers along `y1`.
    Layered(Vec<f64>),
    /// `c * sqrt(b(y))` for an isotropic mobility.
    SqrtMobility(f64),
}

impl PiField {
    pub fn eval(&self, x: [f64; 2], y: [f64; 2], dim: usize, mob: &Mobility) -> Result<f64> {
        Ok(match self {
            PiField::Constant(c) => *c,
            PiField::Expr(e) => e.eval(&Bindings::new().slow(&x[..dim]).fast(&y[..dim]))?,
            PiField::Layered(v) => layer(v, y[0]),
            PiField::SqrtMobility(c) => c * libm::sqrt(mob.scalar_at(y)?),
        })
    }

    pub fn depends_on_slow(&self) -> bool {
        matches!(self, PiField::Expr(e) if e.depends_on_slow())
    }

    pub fn depends_on_fast(&self) -> bool {
        match self {
            PiField::Constant(_) => false,
            PiField::Expr(e) => e.depends_on_fast(),
            PiField::Layered(_) | PiField::SqrtMobility(_) => true,
        }
    }

    pub fn is_piecewise(&self, mob: &Mobility) -> bool {
        match self {
            PiField::Layered(_) => true,
            PiField::SqrtMobility(_) => mob.is_piecewise(),
            _ => false,
        }
    }
}

/// The stationary density `pi_eps(x) = pi(x, x/eps)` in one of the admissible forms.
#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    /// A general two-scale `pi(x, y)`.
    TwoScale(PiField),
    /// `pi0(x) + pi1(x, y)`.
    Oscillatory { pi0: PiField, pi1: PiField },
    /// `pi0(x) + eps pi1(x, x/eps)`: the fast part vanishes in the limit.
    Uniform { pi0: PiField, pi1: PiField },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Medium {
    pub dim: usize,
    pub mobility: Mobility,
    pub density: Density,
}

impl Medium {
    pub fn new(mobility: Mobility, density: Density) -> Result<Self> {
        let m = Medium {
            dim: mobility.dim,
            mobility,
            density,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.density, Density::Uniform { .. })
    }

    pub fn is_piecewise(&self) -> bool {
        let mob = &self.mobility;
        mob.is_piecewise()
            || match &self.density {
                Density::TwoScale(p) => p.is_piecewise(mob),
                Density::Oscillatory { pi0, pi1 } | Density::Uniform { pi0, pi1 } => {
                    pi0.is_piecewise(mob) || pi1.is_piecewise(mob)
                }
            }
    }

    /// Whether the weight of the cell problem varies with the slow variable.
    pub fn depends_on_slow(&self) -> bool {
        match &self.density {
            Density::TwoScale(p) => p.depends_on_slow(),
            Density::Oscillatory { pi0, pi1 } => pi0.depends_on_slow() || pi1.depends_on_slow(),
            Density::Uniform { pi0, .. } => pi0.depends_on_slow(),
        }
    }

    /// The two-scale weight `pi(x, y)` of the cell problem (`pi0(x)` in the uniform case).
    pub fn pi_two_scale(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        let (d, m) = (self.dim, &self.mobility);
        match &self.density {
            Density::TwoScale(p) => p.eval(x, y, d, m),
            Density::Oscillatory { pi0, pi1 } => Ok(pi0.eval(x, y, d, m)? + pi1.eval(x, y, d, m)?),
            Density::Uniform { pi0, .. } => pi0.eval(x, y, d, m),
        }
    }

    /// `pi_eps(x)` at a physical point.
    pub fn pi_eps(&self, x: [f64; 2], eps: f64) -> Result<f64> {
        let y = [frac(x[0] / eps), frac(x[1] / eps)];
        let (d, m) = (self.dim, &self.mobility);
        match &self.density {
            Density::Uniform { pi0, pi1 } => {
                Ok(pi0.eval(x, y, d, m)? + eps * pi1.eval(x, y, d, m)?)
            }
            _ => self.pi_two_scale(x, y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mobility.validate()?;
        let check = |p: &PiField| -> Result<()> {
            if let PiField::Expr(e) = p {
                if e.uses(Var::T) {
                    return Err(invalid!("density expression `{e}` may not depend on t"));
                }
            }
            if let PiField::SqrtMobility(_) = p {
                if !self.mobility.is_isotropic() {
                    return Err(invalid!("sqrt(B) density needs an isotropic mobility"));
                }
            }
            Ok(())
        };
        match &self.density {
            Density::TwoScale(p) => check(p)?,
            Density::Oscillatory { pi0, pi1 } | Density::Uniform { pi0, pi1 } => {
                check(pi0)?;
                check(pi1)?;
                if pi0.depends_on_fast() {
                    return Err(invalid!("pi0 may only depend on the slow variable"));
                }
            }
        }
        let n = 32;
        let m2 = if self.dim == 2 { n } else { 1 };
        for j in 0..m2 {
            for i in 0..n {
                let p = [(i as f64 + 0.29) / n as f64, (j as f64 + 0.71) / n as f64];
                for (xa, ya) in [(p, [0.13, 0.47]), ([0.41, 0.83], p), (p, p)] {
                    let v = self.pi_two_scale(xa, ya)?;
                    if !(v > 0.0) {
                        return Err(Error::Bounds(format!(
                            "stationary density is not positive: pi({:?}, {:?}) = {v}",
                            &xa[..self.dim],
                            &ya[..self.dim]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Conductance `pi(x, .) B^{-1}` on the faces of a `ycells` torus grid, together
    /// with the cell values of `pi(x, .)`.
    pub fn cell_weights(&self, x: [f64; 2], ycells: usize) -> Result<(Grid, FaceField, Vec<f64>)> {
        let grid = Grid::new(self.dim, ycells)?;
        let pi: Vec<f64> = (0..grid.len())
            .map(|c| self.pi_two_scale(x, grid.center(c)))
            .collect::<Result<_>>()?;
        let k = self.face_conductance(&grid, &pi, |c| grid.center(c), |c, a| {
            let y = grid.face_point(c, a);
            Ok((self.pi_two_scale(x, y)?, y))
        })?;
        Ok((grid, k, pi))
    }

    /// Conductance `B^{-1}` alone on the faces of a `ycells` torus grid.
    pub fn inverse_mobility_faces(&self, ycells: usize) -> Result<(Grid, FaceField)> {
        let grid = Grid::new(self.dim, ycells)?;
        let ones = alloc::vec![1.0; grid.len()];
        let k = self.face_conductance(&grid, &ones, |c| grid.center(c), |c, a| {
            Ok((1.0, grid.face_point(c, a)))
        })?;
        Ok((grid, k))
    }

    /// Face rule: harmonic mean of cell values for piecewise media (exact for layers),
    /// direct evaluation at the face centre for smooth media.
    fn face_conductance(
        &self,
        grid: &Grid,
        pi_cells: &[f64],
        fast_center: impl Fn(usize) -> [f64; 2],
        face: impl Fn(usize, usize) -> Result<(f64, [f64; 2])>,
    ) -> Result<FaceField> {
        let mob = &self.mobility;
        if self.is_piecewise() {
            let cells: Vec<[f64; 2]> = (0..grid.len())
                .map(|c| {
                    let b = mob.check_at(fast_center(c))?;
                    Ok([pi_cells[c] / b[0], pi_cells[c] / b[1]])
                })
                .collect::<Result<_>>()?;
            Ok(FaceField::harmonic(grid, &cells))
        } else {
            let mut axes = Vec::with_capacity(grid.dim());
            for a in 0..grid.dim() {
                let mut v = Vec::with_capacity(grid.len());
                for c in 0..grid.len() {
                    let (pi, y) = face(c, a)?;
                    v.push(pi / mob.check_at(y)?[a]);
                }
                axes.push(v);
            }
            Ok(FaceField { axes })
        }
    }
}

/// Coefficients of the `eps`-problem sampled on a resonant grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMedium {
    pub grid: Grid,
    pub eps: f64,
    /// `1/eps`.
    pub periods: usize,
    /// `pi_eps` at cell centres.
    pub pi: Vec<f64>,
    /// Diagonal of `B_eps` at cell centres.
    pub mobility: Vec<[f64; 2]>,
    /// `pi_eps B_eps^{-1}` on faces.
    pub conductance: FaceField,
}

/// Checks `eps = 1/m` with `m | cells` and at least 16 cells per period.
pub fn resonance(eps: f64, cells: usize) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Resonance {
            eps,
            cells,
            reason: "eps must lie in (0, 1]",
        });
    }
    let m = libm::round(1.0 / eps);
    if libm::fabs(1.0 / eps - m) > 1e-9 * m {
        return Err(Error::Resonance {
            eps,
            cells,
            reason: "1/eps must be an integer",
        });
    }
    let m = m as usize;
    if cells % m != 0 {
        return Err(Error::Resonance {
            eps,
            cells,
            reason: "cells per axis must be a multiple of 1/eps",
        });
    }
    if cells / m < 16 {
        return Err(Error::Resonance {
            eps,
            cells,
            reason: "fewer than 16 cells per period",
        });
    }
    Ok(m)
}

pub fn sample_medium(medium: &Medium, eps: f64, cells: usize) -> Result<SampledMedium> {
    let periods = resonance(eps, cells)?;
    let grid = Grid::new(medium.dim, cells)?;
    let fast = |x: [f64; 2]| [frac(x[0] * periods as f64), frac(x[1] * periods as f64)];
    let mut pi = Vec::with_capacity(grid.len());
    let mut mobility = Vec::with_capacity(grid.len());
    for c in 0..grid.len() {
        let x = grid.center(c);
        let p = medium.pi_eps(x, eps)?;
        if !(p > 0.0) {
            return Err(Error::Bounds(format!(
                "pi_eps({:?}) = {p} is not positive",
                &x[..medium.dim]
            )));
        }
        pi.push(p);
        mobility.push(medium.mobility.check_at(fast(x))?);
    }
    let conductance = medium.face_conductance(&grid, &pi, |c| fast(grid.center(c)), |c, a| {
        let x = grid.face_point(c, a);
        Ok((medium.pi_eps(x, eps)?, fast(x)))
    })?;
    Ok(SampledMedium {
        grid,
        eps,
        periods,
        pi,
        mobility,
        conductance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Initial points per axis (defaults: 1024 in 1D, 128 in 2D).
    pub start: Option<usize>,
    pub rtol: f64,
    pub max_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            start: None,
            rtol: 1e-12,
            max_points: 1 << 20,
        }
    }
}

/// Average over the unit torus by the periodic rectangle rule on half-shifted nodes,
/// doubling the resolution until the relative change drops below `rtol`.
pub fn periodic_average(
    dim: usize,
    opts: QuadratureOptions,
    f: impl Fn([f64; 2]) -> Result<f64>,
) -> Result<f64> {
    let rule = |n: usize| -> Result<f64> {
        let m2 = if dim == 2 { n } else { 1 };
        let mut acc = 0.0;
        for j in 0..m2 {
            for i in 0..n {
                acc += f([(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / m2 as f64])?;
            }
        }
        Ok(acc / (n * m2) as f64)
    };
    let mut n = opts.start.unwrap_or(if dim == 2 { 128 } else { 1024 });
    let mut prev = rule(n)?;
    loop {
        n *= 2;
        let next = rule(n)?;
        if libm::fabs(next - prev) <= opts.rtol * libm::fabs(next) {
            return Ok(next);
        }
        let total = if dim == 2 { n * n } else { n };
        if total > opts.max_points {
            return Err(Error::NonConvergence {
                iterations: n,
                residual: libm::fabs(next - prev) / libm::fabs(next),
            });
        }
        prev = next;
    }
}

/// `pi_bar(x) = int pi(x, y) dy` (`pi0(x)` in the uniform case).
pub fn average_pi(medium: &Medium, x: [f64; 2], opts: QuadratureOptions) -> Result<f64> {
    if let Density::Uniform { pi0, .. } = &medium.density {
        return pi0.eval(x, [0.0; 2], medium.dim, &medium.mobility);
    }
    periodic_average(medium.dim, opts, |y| medium.pi_two_scale(x, y))
}

//! Periodic cell problems and the effective tensors of the limit flow.
//!
//! For a fixed slow point `x` the corrector `w_i` solves
//! `div_y(D (grad_y w_i + e_i)) = 0` on the torus with `D = pi B^{-1}`. The effective
//! quantities are `D_bar = int D`, `G_bar e_i = int D grad w_i`, `pi_bar = int pi`
//! and `B_bar = ((D_bar + G_bar) / pi_bar)^{-1}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::{FaceField, Grid};
use crate::linalg::{cg, CgOptions};
use crate::media::{average_pi, periodic_average, Density, Medium, QuadratureOptions};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellOptions {
    /// Cells per axis of the fast torus (at least 32).
    pub ycells: usize,
    pub cg: CgOptions,
    pub quadrature: QuadratureOptions,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            ycells: 64,
            cg: CgOptions {
                rtol: 1e-14,
                max_iter: 100_000,
                mean_zero: true,
            },
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// The discrete periodic problem: energy `sum_faces K (dv/h + p_a)^2 |cell|`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellProblem {
    pub grid: Grid,
    pub conductance: FaceField,
    opts: CellOptions,
}

impl CellProblem {
    pub fn new(grid: Grid, conductance: FaceField, opts: CellOptions) -> Result<Self> {
        if opts.ycells < 32 {
            return Err(invalid!("cell problems need ycells >= 32, got {}", opts.ycells));
        }
        if !(conductance.min() > 0.0) {
            return Err(Error::Bounds("cell conductance must be positive".into()));
        }
        Ok(CellProblem {
            grid,
            conductance,
            opts,
        })
    }

    /// Cell problem with weight `pi(x, .) B^{-1}` at slow point `x`.
    pub fn at(medium: &Medium, x: [f64; 2], opts: CellOptions) -> Result<Self> {
        let (grid, k, _) = medium.cell_weights(x, opts.ycells)?;
        Self::new(grid, k, opts)
    }

    /// Cell problem with weight `B^{-1}` alone.
    pub fn inverse_mobility(medium: &Medium, opts: CellOptions) -> Result<Self> {
        let (grid, k) = medium.inverse_mobility_faces(opts.ycells)?;
        Self::new(grid, k, opts)
    }

    fn diag(&self) -> Vec<f64> {
        let g = &self.grid;
        let inv_h2 = 1.0 / (g.h() * g.h());
        (0..g.len())
            .map(|c| {
                (0..g.dim())
                    .map(|a| self.conductance.axes[a][c] + self.conductance.axes[a][g.down(c, a)])
                    .sum::<f64>()
                    * inv_h2
            })
            .collect()
    }

    /// Mean-zero corrector for the unit direction `e_i`.
    pub fn corrector(&self, i: usize) -> Result<Vec<f64>> {
        let g = &self.grid;
        let k = &self.conductance.axes[i];
        let inv_h = 1.0 / g.h();
        let rhs: Vec<f64> = (0..g.len())
            .map(|c| (k[c] - k[g.down(c, i)]) * inv_h)
            .collect();
        let mut w = vec![0.0; g.len()];
        cg(
            |u, out| g.apply_diffusion(&self.conductance, u, out),
            &rhs,
            Some(&self.diag()),
            &mut w,
            self.opts.cg,
        )?;
        Ok(w)
    }

    pub fn correctors(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.grid.dim()).map(|i| self.corrector(i)).collect()
    }

    /// `(D_bar, G_bar)` from correctors: `(D_bar + G_bar)_{ki} = sum K_k (delta_ki + d_k w_i) |cell|`.
    pub fn tensors(&self, w: &[Vec<f64>]) -> (Tensor, Tensor) {
        let g = &self.grid;
        let vol = g.cell_volume();
        let mut dbar = Tensor::zeros(g.dim());
        let mut gbar = Tensor::zeros(g.dim());
        for k in 0..g.dim() {
            let kk = &self.conductance.axes[k];
            dbar.m[k][k] = kk.iter().sum::<f64>() * vol;
            for (i, wi) in w.iter().enumerate() {
                let grad = g.gradient(wi);
                gbar.m[k][i] = kk.iter().zip(&grad.axes[k]).map(|(a, b)| a * b).sum::<f64>() * vol;
            }
        }
        (dbar, gbar)
    }

    /// Cell energy `sum_faces K (grad v + p)^2 |cell|`.
    pub fn energy(&self, v: &[f64], p: [f64; 2]) -> f64 {
        let g = &self.grid;
        let grad = g.gradient(v);
        let mut acc = 0.0;
        for a in 0..g.dim() {
            for (k, d) in self.conductance.axes[a].iter().zip(&grad.axes[a]) {
                let s = d + p[a];
                acc += k * s * s;
            }
        }
        acc * g.cell_volume()
    }

    /// `inf_v energy(v, p)` by minimizing the energy directly; the operator and the
    /// load are both obtained by differentiating the face energy.
    pub fn variational(&self, p: [f64; 2]) -> Result<f64> {
        let g = &self.grid;
        let n = g.len();
        let grad_energy = |v: &[f64], p: [f64; 2], out: &mut [f64]| {
            let grad = g.gradient(v);
            out.iter_mut().for_each(|o| *o = 0.0);
            let inv_h = 1.0 / g.h();
            for a in 0..g.dim() {
                for c in 0..n {
                    let flux = self.conductance.axes[a][c] * (grad.axes[a][c] + p[a]) * inv_h;
                    out[c] -= flux;
                    out[g.up(c, a)] += flux;
                }
            }
        };
        let mut load = vec![0.0; n];
        grad_energy(&vec![0.0; n], p, &mut load);
        load.iter_mut().for_each(|l| *l = -*l);
        let mut v = vec![0.0; n];
        cg(
            |u, out| grad_energy(u, [0.0; 2], out),
            &load,
            None,
            &mut v,
            self.opts.cg,
        )?;
        Ok(self.energy(&v, p))
    }
}

/// Effective quantities at one slow point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectivePoint {
    pub x: [f64; 2],
    pub dbar: Tensor,
    pub gbar: Tensor,
    pub pibar: f64,
    pub bbar: Tensor,
}

impl EffectivePoint {
    /// `D_bar + G_bar`, the conductance of the limit flow.
    pub fn conductance(&self) -> Tensor {
        self.dbar.add(&self.gbar)
    }
}

fn finish(
    x: [f64; 2],
    dbar: Tensor,
    gbar: Tensor,
    pibar: f64,
    bbar: Tensor,
    bounds: (f64, f64),
) -> Result<EffectivePoint> {
    let a = dbar.add(&gbar);
    if a.asymmetry() > 1e-8 * a.max_abs() {
        return Err(Error::Invariant(format!(
            "D_bar + G_bar is not symmetric at x = {:?}: {:?}",
            &x[..a.dim],
            a.m
        )));
    }
    let ev = a.eigenvalues();
    if !(ev[0] > 0.0) {
        return Err(Error::Invariant(format!(
            "D_bar + G_bar is not positive definite at x = {:?}",
            &x[..a.dim]
        )));
    }
    let (lo, hi) = bounds;
    if ev[0] < lo * (1.0 - 1e-8) || ev[1] > hi * (1.0 + 1e-8) {
        return Err(Error::Invariant(format!(
            "eigenvalues {ev:?} of D_bar + G_bar escape [{lo}, {hi}]"
        )));
    }
    Ok(EffectivePoint {
        x,
        dbar,
        gbar,
        pibar,
        bbar,
    })
}

fn conductance_bounds(medium: &Medium, x: [f64; 2], opts: &CellOptions) -> Result<(f64, f64)> {
    let (grid, _, pi) = medium.cell_weights(x, opts.ycells)?;
    let _ = grid;
    let (c1, c2) = medium.mobility.bounds;
    let pmin = pi.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let pmax = pi.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok((pmin / c2, pmax / c1))
}

/// Effective tensors at one slow point.
pub fn effective_at(medium: &Medium, x: [f64; 2], opts: CellOptions) -> Result<EffectivePoint> {
    if medium.is_uniform() {
        return effective_uniform_at(medium, x, opts);
    }
    let prob = CellProblem::at(medium, x, opts)?;
    let w = prob.correctors()?;
    let (dbar, gbar) = prob.tensors(&w);
    let pibar = average_pi(medium, x, opts.quadrature)?;
    let bbar = dbar
        .add(&gbar)
        .scale(1.0 / pibar)
        .inverse()
        .ok_or_else(|| Error::Invariant("singular effective conductance".into()))?;
    finish(x, dbar, gbar, pibar, bbar, conductance_bounds(medium, x, &opts)?)
}

/// Uniform case: `B_bar = (int B^{-1} + int B^{-1} grad w)^{-1}`, independent of `pi0`.
pub fn effective_uniform_at(
    medium: &Medium,
    x: [f64; 2],
    opts: CellOptions,
) -> Result<EffectivePoint> {
    let Density::Uniform { pi0, .. } = &medium.density else {
        return Err(invalid!("uniform-case tensors need a density pi0 + eps pi1"));
    };
    let prob = CellProblem::inverse_mobility(medium, opts)?;
    let w = prob.correctors()?;
    let (d0, g0) = prob.tensors(&w);
    let bbar = d0
        .add(&g0)
        .inverse()
        .ok_or_else(|| Error::Invariant("singular effective conductance".into()))?;
    let p0 = pi0.eval(x, [0.0; 2], medium.dim, &medium.mobility)?;
    let (c1, c2) = medium.mobility.bounds;
    finish(x, d0.scale(p0), g0.scale(p0), p0, bbar, (p0 / c2, p0 / c1))
}

/// Effective tensors at every centre of `slow`; computed once when the cell weight
/// does not depend on the slow variable.
pub fn effective_tensors(
    medium: &Medium,
    slow: &Grid,
    opts: CellOptions,
) -> Result<Vec<EffectivePoint>> {
    if slow.dim() != medium.dim {
        return Err(invalid!("slow grid dimension does not match the medium"));
    }
    if !medium.depends_on_slow() {
        let first = effective_at(medium, slow.center(0), opts)?;
        return Ok((0..slow.len())
            .map(|c| EffectivePoint {
                x: slow.center(c),
                ..first
            })
            .collect());
    }
    (0..slow.len())
        .map(|c| effective_at(medium, slow.center(c), opts))
        .collect()
}

/// Closed form of the one-dimensional effective mobility, `pi_bar int B / pi dy`.
/// Kept as an independent reference for the PDE path.
pub fn closed_form_1d(medium: &Medium, x: f64, quad: QuadratureOptions) -> Result<f64> {
    if medium.dim != 1 {
        return Err(invalid!("closed form is one-dimensional"));
    }
    let xs = [x, 0.0];
    let pibar = average_pi(medium, xs, quad)?;
    let ratio = periodic_average(1, quad, |y| {
        Ok(medium.mobility.scalar_at(y)? / medium.pi_two_scale(xs, y)?)
    })?;
    Ok(pibar * ratio)
}

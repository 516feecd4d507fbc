//! Implicit Euler finite-volume scheme for the Fokker-Planck flow in `f = rho / pi`:
//! `(Pi - dt L) f^{k+1} = Pi f^k` with `L f = div(K grad f)` and `K = pi B^{-1}` on faces.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cell::EffectivePoint;
use crate::error::{invalid, Error, Result};
use crate::grid::{harmonic_mean, FaceField, Grid};
use crate::linalg::{cg, solve_cyclic_tridiagonal, CgOptions};
use crate::media::SampledMedium;

/// Weights `pi` and face conductances of one flow (the `eps`-problem or the limit).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSystem {
    pub grid: Grid,
    pub pi: Vec<f64>,
    pub conductance: FaceField,
    pub label: String,
}

impl FlowSystem {
    pub fn new(grid: Grid, pi: Vec<f64>, conductance: FaceField, label: String) -> Result<Self> {
        if pi.len() != grid.len() || conductance.axes.len() != grid.dim() {
            return Err(invalid!("flow system arrays do not match the grid"));
        }
        if !pi.iter().all(|p| *p > 0.0) || !(conductance.min() > 0.0) {
            return Err(Error::Bounds("flow weights must be positive".into()));
        }
        Ok(FlowSystem {
            grid,
            pi,
            conductance,
            label,
        })
    }

    pub fn from_sampled(s: &SampledMedium) -> Result<Self> {
        Self::new(
            s.grid,
            s.pi.clone(),
            s.conductance.clone(),
            format!("eps=1/{}", s.periods),
        )
    }

    /// The limit flow on `grid` from effective tensors at its cell centres:
    /// weight `pi_bar`, face conductance the harmonic mean of `(D_bar + G_bar)_aa`.
    pub fn homogenized(grid: Grid, eff: &[EffectivePoint]) -> Result<Self> {
        if eff.len() != grid.len() {
            return Err(invalid!(
                "need effective tensors at all {} slow cells, got {}",
                grid.len(),
                eff.len()
            ));
        }
        let mut cells = Vec::with_capacity(grid.len());
        for e in eff {
            let a = e.conductance();
            if a.off_diagonal() > 1e-10 * a.max_abs() {
                return Err(Error::Unsupported(format!(
                    "two-point fluxes need a diagonal effective conductance, got {:?} at x = {:?}",
                    a.m,
                    &e.x[..grid.dim()]
                )));
            }
            cells.push([a.get(0, 0), a.get(1, 1)]);
        }
        let k = FaceField::from_fn(&grid, |a, c| harmonic_mean(cells[c][a], cells[grid.up(c, a)][a]));
        Self::new(
            grid,
            eff.iter().map(|e| e.pibar).collect(),
            k,
            "homogenized".into(),
        )
    }

    /// `L f = div(K grad f)`.
    pub fn generator(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.grid.apply_diffusion(&self.conductance, f, &mut out);
        out.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// `sum_faces K (grad f)^2 |cell| = <-L f, f>`.
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        self.grid.dirichlet_form(&self.conductance, f)
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        self.grid.weighted_inner(&self.pi, f, &vec![1.0; f.len()])
    }

    pub fn norm2(&self, f: &[f64]) -> f64 {
        self.grid.weighted_inner(&self.pi, f, f)
    }

    /// `sum rho log(rho / pi) |cell| = sum pi f log f |cell|`.
    pub fn free_energy(&self, f: &[f64]) -> f64 {
        self.pi
            .iter()
            .zip(f)
            .map(|(p, f)| p * f * libm::log(*f))
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Solves `(Pi - dt L) x = rhs`.
    pub fn solve_shifted(&self, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let g = &self.grid;
        let n = g.len();
        let s = dt / (g.h() * g.h());
        if g.dim() == 1 {
            let k = &self.conductance.axes[0];
            let lower: Vec<f64> = (0..n).map(|c| -s * k[g.down(c, 0)]).collect();
            let upper: Vec<f64> = (0..n).map(|c| -s * k[c]).collect();
            let diag: Vec<f64> = (0..n)
                .map(|c| self.pi[c] + s * (k[c] + k[g.down(c, 0)]))
                .collect();
            return Ok(solve_cyclic_tridiagonal(&lower, &diag, &upper, rhs));
        }
        let diag: Vec<f64> = (0..n)
            .map(|c| {
                self.pi[c]
                    + s * (0..g.dim())
                        .map(|a| self.conductance.axes[a][c] + self.conductance.axes[a][g.down(c, a)])
                        .sum::<f64>()
            })
            .collect();
        let mut x = vec![0.0; n];
        cg(
            |u, out| {
                g.apply_diffusion(&self.conductance, u, out);
                for c in 0..n {
                    out[c] = self.pi[c] * u[c] + dt * out[c];
                }
            },
            rhs,
            Some(&diag),
            &mut x,
            CgOptions {
                rtol: 1e-15,
                max_iter: 50_000,
                mean_zero: false,
            },
        )?;
        Ok(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
}

impl DensityState {
    pub fn from_f(sys: &FlowSystem, f: Vec<f64>, t: f64) -> Self {
        let rho = sys.pi.iter().zip(&f).map(|(p, f)| p * f).collect();
        DensityState { t, rho, f }
    }

    pub fn from_rho(sys: &FlowSystem, rho: Vec<f64>, t: f64) -> Self {
        let f = rho.iter().zip(&sys.pi).map(|(r, p)| r / p).collect();
        DensityState { t, rho, f }
    }
}

/// Well-prepared data: `f_0 = rho0 / pi_bar` carried by the weight of `sys`,
/// scaled to unit mass. `rho0` and `pibar` are given at the cells of `sys`.
pub fn well_prepared(sys: &FlowSystem, rho0: &[f64], pibar: &[f64]) -> Result<DensityState> {
    if rho0.len() != sys.grid.len() || pibar.len() != sys.grid.len() {
        return Err(invalid!("initial data does not match the grid"));
    }
    if !rho0.iter().all(|r| *r > 0.0) {
        return Err(Error::Bounds("initial density must be positive".into()));
    }
    let f0: Vec<f64> = rho0.iter().zip(pibar).map(|(r, p)| r / p).collect();
    let mass = sys.mass(&f0);
    Ok(DensityState::from_f(
        sys,
        f0.iter().map(|v| v / mass).collect(),
        0.0,
    ))
}

/// One implicit Euler step, solved for the increment so that fixed points are kept
/// bit for bit.
pub fn step(sys: &FlowSystem, state: &DensityState, dt: f64) -> Result<DensityState> {
    if !(dt > 0.0) {
        return Err(invalid!("time step must be positive"));
    }
    let mut rhs = sys.generator(&state.f);
    rhs.iter_mut().for_each(|v| *v *= dt);
    let delta = sys.solve_shifted(dt, &rhs)?;
    let f: Vec<f64> = state.f.iter().zip(&delta).map(|(f, d)| f + d).collect();
    Ok(DensityState::from_f(sys, f, state.t + dt))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub free_energy: f64,
    /// `||f||^2_pi`.
    pub norm2: f64,
    /// `sum K (grad f)^2`.
    pub dirichlet: f64,
}

pub fn diagnostics(sys: &FlowSystem, s: &DensityState) -> StepDiagnostics {
    StepDiagnostics {
        t: s.t,
        mass: sys.mass(&s.f),
        f_min: s.f.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        f_max: s.f.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
        free_energy: sys.free_energy(&s.f),
        norm2: sys.norm2(&s.f),
        dirichlet: sys.dirichlet(&s.f),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<DensityState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// Index of the stored state closest to time `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = libm::round(t / self.dt);
        if k < 0.0 || libm::fabs(k * self.dt - t) > 1e-9 * (1.0 + t) {
            return None;
        }
        let k = k as usize;
        (k < self.states.len()).then_some(k)
    }
}

/// Number of steps and the effective step so that `steps * dt = t_final` exactly.
pub fn time_grid(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0 && dt > 0.0) {
        return Err(invalid!("final time and time step must be positive"));
    }
    let steps = libm::ceil(t_final / dt - 1e-9) as usize;
    Ok((steps.max(1), t_final / steps.max(1) as f64))
}

/// Runs to `t_final`, checking mass conservation, the range of `f` and the decay of
/// the free energy after every step.
pub fn evolve(sys: &FlowSystem, init: DensityState, t_final: f64, dt: f64) -> Result<Trajectory> {
    let (steps, dt) = time_grid(t_final, dt)?;
    let first = diagnostics(sys, &init);
    let (lo, hi) = (first.f_min, first.f_max);
    let mut states = Vec::with_capacity(steps + 1);
    let mut diags = Vec::with_capacity(steps + 1);
    states.push(init);
    diags.push(first);
    for k in 0..steps {
        let mut next = step(sys, &states[k], dt)?;
        next.t = (k + 1) as f64 * dt;
        let d = diagnostics(sys, &next);
        let prev = diags[k];
        if libm::fabs(d.mass - prev.mass) > 1e-13 * prev.mass {
            return Err(Error::Invariant(format!(
                "mass changed by {:e} in step {}",
                (d.mass - prev.mass) / prev.mass,
                k + 1
            )));
        }
        if d.f_min < lo || d.f_max > hi {
            return Err(Error::Invariant(format!(
                "f left its initial range [{lo}, {hi}] in step {}: [{}, {}]",
                k + 1,
                d.f_min,
                d.f_max
            )));
        }
        if d.free_energy > prev.free_energy + 1e-14 * (libm::fabs(prev.free_energy) + d.mass) {
            return Err(Error::Invariant(format!(
                "free energy increased in step {}: {} -> {}",
                k + 1,
                prev.free_energy,
                d.free_energy
            )));
        }
        states.push(next);
        diags.push(d);
    }
    Ok(Trajectory {
        dt,
        states,
        diagnostics: diags,
    })
}

/// Terms of the discrete identity
/// `1/2 |f_K|^2 + sum_k [dt D(f_{k+1}) + 1/2 |f_{k+1} - f_k|^2] = 1/2 |f_0|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyIdentity {
    pub initial: f64,
    pub last: f64,
    pub dissipation: f64,
    /// `sum 1/2 |f_{k+1} - f_k|^2_pi`: the gap of the inequality form, `O(dt)`.
    pub numerical_dissipation: f64,
    /// `|lhs - rhs| / rhs`.
    pub residual: f64,
}

fn identity(sys: &FlowSystem, seq: &[&[f64]], dt: f64) -> EnergyIdentity {
    let initial = 0.5 * sys.norm2(seq[0]);
    let last = 0.5 * sys.norm2(seq[seq.len() - 1]);
    let mut dissipation = 0.0;
    let mut numerical = 0.0;
    for w in seq.windows(2) {
        dissipation += dt * sys.dirichlet(w[1]);
        let d: Vec<f64> = w[1].iter().zip(w[0]).map(|(a, b)| a - b).collect();
        numerical += 0.5 * sys.norm2(&d);
    }
    let lhs = last + dissipation + numerical;
    EnergyIdentity {
        initial,
        last,
        dissipation,
        numerical_dissipation: numerical,
        residual: libm::fabs(lhs - initial) / initial,
    }
}

pub fn energy_identity(sys: &FlowSystem, traj: &Trajectory) -> EnergyIdentity {
    let seq: Vec<&[f64]> = traj.states.iter().map(|s| s.f.as_slice()).collect();
    identity(sys, &seq, traj.dt)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeDerivativeRecord {
    pub t: f64,
    /// `||h||^2_pi` with `h = (f_{k+1} - f_k) / dt`.
    pub norm2: f64,
    pub dirichlet: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDerivativeReport {
    pub records: Vec<TimeDerivativeRecord>,
    /// The energy identity applied to the difference quotients.
    pub identity: EnergyIdentity,
}

pub fn time_derivative_diagnostics(
    sys: &FlowSystem,
    traj: &Trajectory,
) -> Result<TimeDerivativeReport> {
    if traj.states.len() < 3 {
        return Err(invalid!("need at least three snapshots"));
    }
    let hs: Vec<Vec<f64>> = traj
        .states
        .windows(2)
        .map(|w| w[1].f.iter().zip(&w[0].f).map(|(a, b)| (a - b) / traj.dt).collect())
        .collect();
    let records = hs
        .iter()
        .zip(&traj.states)
        .map(|(h, s)| TimeDerivativeRecord {
            t: s.t,
            norm2: sys.norm2(h),
            dirichlet: sys.dirichlet(h),
        })
        .collect();
    let seq: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
    Ok(TimeDerivativeReport {
        records,
        identity: identity(sys, &seq, traj.dt),
    })
}

/// `||a - b||_{L^2}` on the grid (unweighted).
pub fn l2_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    libm::sqrt(grid.inner(&d, &d))
}

/// `pi_bar` at the cell centres of `grid`.
pub fn pibar_cells(
    medium: &crate::media::Medium,
    grid: &Grid,
    quad: crate::media::QuadratureOptions,
) -> Result<Vec<f64>> {
    use crate::media::average_pi;
    if !medium.depends_on_slow() {
        let v = average_pi(medium, grid.center(0), quad)?;
        return Ok(vec![v; grid.len()]);
    }
    (0..grid.len())
        .map(|c| average_pi(medium, grid.center(c), quad))
        .collect()
}

/// `rho0` evaluated at the cell centres of `grid`.
pub fn sample_expr(rho0: &crate::expr::Expr, grid: &Grid) -> Result<Vec<f64>> {
    use crate::expr::Bindings;
    (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            Ok(rho0.eval(&Bindings::new().slow(&x[..grid.dim()]))?)
        })
        .collect()
}

/// The `eps`-flow (`eps = Some`) or the limit flow (`None`) on `cells` cells per axis,
/// with well-prepared initial data built from `rho0(x)`.
pub fn well_prepared_initial(
    rho0: &crate::expr::Expr,
    medium: &crate::media::Medium,
    eps: Option<f64>,
    cells: usize,
    opts: crate::cell::CellOptions,
) -> Result<(FlowSystem, DensityState)> {
    let grid = Grid::new(medium.dim, cells)?;
    let values = sample_expr(rho0, &grid)?;
    match eps {
        Some(eps) => {
            let sys = FlowSystem::from_sampled(&crate::media::sample_medium(medium, eps, cells)?)?;
            let pibar = pibar_cells(medium, &grid, opts.quadrature)?;
            let s = well_prepared(&sys, &values, &pibar)?;
            Ok((sys, s))
        }
        None => {
            let eff = crate::cell::effective_tensors(medium, &grid, opts)?;
            let sys = FlowSystem::homogenized(grid, &eff)?;
            let pibar: Vec<f64> = eff.iter().map(|e| e.pibar).collect();
            let s = well_prepared(&sys, &values, &pibar)?;
            Ok((sys, s))
        }
    }
}

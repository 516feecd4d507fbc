//! Free energy, the dissipation potentials on tangent and cotangent planes, and the
//! energy-dissipation balance along discrete trajectories.
//!
//! The face weight of `rho B^{-1}` is `K * logmean(f_c, f_c')` with `K` the face
//! conductance of `pi B^{-1}` and `f = rho / pi`. With this choice the generator of the
//! scheme satisfies `L f = div(rho B^{-1} grad log f)` face by face, so the
//! Fenchel-Young equality holds exactly along the discrete flow.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fp::{FlowSystem, Trajectory};
use crate::grid::{log_mean, FaceField};
use crate::linalg::{cg, CgOptions};

/// `sum rho log(rho / pi) |cell|`.
pub fn free_energy(sys: &FlowSystem, rho: &[f64]) -> Result<f64> {
    if rho.len() != sys.pi.len() {
        return Err(invalid!("density does not match the grid"));
    }
    if !rho.iter().all(|r| *r > 0.0) {
        return Err(Error::Bounds("free energy needs a positive density".into()));
    }
    Ok(rho
        .iter()
        .zip(&sys.pi)
        .map(|(r, p)| r * libm::log(r / p))
        .sum::<f64>()
        * sys.grid.cell_volume())
}

fn f_of(sys: &FlowSystem, rho: &[f64]) -> Result<Vec<f64>> {
    if !rho.iter().all(|r| *r > 0.0) {
        return Err(Error::Bounds("dissipation needs a positive density".into()));
    }
    Ok(rho.iter().zip(&sys.pi).map(|(r, p)| r / p).collect())
}

/// `psi*(rho, -dE/drho)` in Fisher form: `2 sum K (grad sqrt f)^2 |cell|`.
pub fn psi_star(sys: &FlowSystem, rho: &[f64]) -> Result<f64> {
    let f = f_of(sys, rho)?;
    let r: Vec<f64> = f.iter().map(|v| libm::sqrt(*v)).collect();
    Ok(2.0 * sys.dirichlet(&r))
}

/// Face weights of `rho B^{-1}`.
pub fn mobility_weights(sys: &FlowSystem, rho: &[f64]) -> Result<FaceField> {
    let f = f_of(sys, rho)?;
    let g = &sys.grid;
    Ok(FaceField::from_fn(g, |a, c| {
        sys.conductance.axes[a][c] * log_mean(f[c], f[g.up(c, a)])
    }))
}

/// `psi*(rho, xi) = 1/2 sum w (grad xi)^2 |cell|` with `w` the weights of `rho B^{-1}`.
pub fn cotangent(sys: &FlowSystem, rho: &[f64], xi: &[f64]) -> Result<f64> {
    let w = mobility_weights(sys, rho)?;
    Ok(0.5 * sys.grid.dirichlet_form(&w, xi))
}

fn check_tangent(sys: &FlowSystem, s: &[f64]) -> Result<()> {
    let g = &sys.grid;
    let mean = g.integrate(s);
    let scale = s.iter().map(|v| libm::fabs(*v)).sum::<f64>() * g.cell_volume();
    if libm::fabs(mean) > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(invalid!(
            "tangent field must have zero mean, got {mean:e} (scale {scale:e})"
        ));
    }
    Ok(())
}

/// Potential `u` (mean zero) with `-div(rho B^{-1} grad u) = s`, by CG.
pub fn tangent_potential(sys: &FlowSystem, rho: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    check_tangent(sys, s)?;
    let w = mobility_weights(sys, rho)?;
    let g = &sys.grid;
    let inv_h2 = 1.0 / (g.h() * g.h());
    let diag: Vec<f64> = (0..g.len())
        .map(|c| {
            (0..g.dim())
                .map(|a| w.axes[a][c] + w.axes[a][g.down(c, a)])
                .sum::<f64>()
                * inv_h2
        })
        .collect();
    let mut u = vec![0.0; g.len()];
    cg(
        |v, out| g.apply_diffusion(&w, v, out),
        s,
        Some(&diag),
        &mut u,
        CgOptions {
            rtol: 1e-14,
            max_iter: 200_000,
            mean_zero: true,
        },
    )?;
    Ok(u)
}

/// `psi(rho, s)` through the potential solve (any dimension).
pub fn psi_by_solve(sys: &FlowSystem, rho: &[f64], s: &[f64]) -> Result<f64> {
    let u = tangent_potential(sys, rho, s)?;
    let w = mobility_weights(sys, rho)?;
    Ok(0.5 * sys.grid.dirichlet_form(&w, &u))
}

/// One-dimensional `psi(rho, s)` from the flux antiderivative: `J = J0 - S` with
/// `S` the running integral of `s` and `J0` fixed by periodicity of the potential.
pub fn psi_1d(sys: &FlowSystem, rho: &[f64], s: &[f64]) -> Result<f64> {
    if sys.grid.dim() != 1 {
        return Err(invalid!("antiderivative formula is one-dimensional"));
    }
    check_tangent(sys, s)?;
    let w = &mobility_weights(sys, rho)?.axes[0];
    let h = sys.grid.h();
    let mut running = 0.0;
    let cum: Vec<f64> = s
        .iter()
        .map(|v| {
            running += v * h;
            running
        })
        .collect();
    let inv: f64 = w.iter().map(|k| 1.0 / k).sum();
    let j0 = cum.iter().zip(w).map(|(c, k)| c / k).sum::<f64>() / inv;
    Ok(0.5 * h * cum.iter().zip(w).map(|(c, k)| (j0 - c) * (j0 - c) / k).sum::<f64>())
}

/// `psi(rho, s)`: antiderivative formula in 1D, potential solve in 2D.
pub fn psi(sys: &FlowSystem, rho: &[f64], s: &[f64]) -> Result<f64> {
    if sys.grid.dim() == 1 {
        psi_1d(sys, rho, s)
    } else {
        psi_by_solve(sys, rho, s)
    }
}

/// `psi(rho, s) + psi*(rho, xi) - <xi, s>`, nonnegative.
pub fn fenchel_young_gap(sys: &FlowSystem, rho: &[f64], s: &[f64], xi: &[f64]) -> Result<f64> {
    Ok(psi(sys, rho, s)? + cotangent(sys, rho, xi)? - sys.grid.inner(xi, s))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdiRecord {
    pub t: f64,
    pub energy: f64,
    /// Running integral of `psi(rho, d_t rho)`.
    pub int_psi: f64,
    /// Running integral of `psi*(rho, -dE/drho)`.
    pub int_psi_star: f64,
    /// `E(rho_0) - E(rho_t) - int (psi + psi*)`.
    pub residual: f64,
    /// Fenchel-Young gap of `(d_t rho, -dE/drho)` at `t`.
    pub fy_gap: f64,
    /// `(E_k - E_{k-1}) / dt + psi_k + psi*_k` (zero at `t = 0`).
    pub chain_rule_defect: f64,
}

/// Energy-dissipation balance along a trajectory. The rates are the generator of the
/// scheme at each stored state; time integrals use the right endpoint of every step,
/// which is the quadrature under which implicit Euler satisfies the discrete
/// inequality exactly.
pub fn edi_trace(sys: &FlowSystem, traj: &Trajectory) -> Result<Vec<EdiRecord>> {
    let mut out = Vec::with_capacity(traj.states.len());
    let e0 = free_energy(sys, &traj.states[0].rho)?;
    let mut int_psi = 0.0;
    let mut int_star = 0.0;
    let mut prev_e = e0;
    for (k, st) in traj.states.iter().enumerate() {
        let e = free_energy(sys, &st.rho)?;
        let s = sys.generator(&st.f);
        let p = psi(sys, &st.rho, &s)?;
        let ps = psi_star(sys, &st.rho)?;
        let xi: Vec<f64> = st.f.iter().map(|v| -libm::log(*v)).collect();
        let gap = p + cotangent(sys, &st.rho, &xi)? - sys.grid.inner(&xi, &s);
        let mut defect = 0.0;
        if k > 0 {
            int_psi += traj.dt * p;
            int_star += traj.dt * ps;
            defect = (e - prev_e) / traj.dt + p + ps;
        }
        prev_e = e;
        out.push(EdiRecord {
            t: st.t,
            energy: e,
            int_psi,
            int_psi_star: int_star,
            residual: e0 - e - int_psi - int_star,
            fy_gap: gap,
            chain_rule_defect: defect,
        });
    }
    Ok(out)
}

/// Flags records whose residual violates the inequality direction.
pub fn check_edi_direction(records: &[EdiRecord], tol: f64) -> Result<()> {
    for r in records {
        if r.residual < -tol {
            return Err(Error::Invariant(format!(
                "energy-dissipation inequality violated at t = {}: residual {:e}",
                r.t, r.residual
            )));
        }
    }
    Ok(())
}

/// One row of the lower-bound sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub t: f64,
    pub e_eps: f64,
    pub int_psi_eps: f64,
    pub int_psi_star_eps: f64,
    pub e_bar: f64,
    pub int_psi_bar: f64,
    pub int_psi_star_bar: f64,
    pub residual_eps: f64,
}

impl SweepRow {
    /// `eps`-value minus limit value for energy, cotangent and tangent integrals.
    pub fn differences(&self) -> [f64; 3] {
        [
            self.e_eps - self.e_bar,
            self.int_psi_star_eps - self.int_psi_star_bar,
            self.int_psi_eps - self.int_psi_bar,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepVerdict {
    pub quantity: &'static str,
    /// `delta(eps) = max(0, -min_t difference)` for each `eps` in order.
    pub deltas: Vec<f64>,
    pub passed: bool,
}

pub const SWEEP_QUANTITIES: [&str; 3] = ["energy", "cotangent", "tangent"];

fn record_at(records: &[EdiRecord], dt: f64, t: f64) -> Result<EdiRecord> {
    let k = libm::round(t / dt);
    if libm::fabs(k * dt - t) > 1e-9 * (1.0 + t) || k as usize >= records.len() {
        return Err(invalid!("report time {t} is not on the time grid (dt = {dt})"));
    }
    Ok(records[k as usize])
}

/// Collates `eps`-traces against the limit trace at `times` and judges, per quantity,
/// whether the lower-bound defects `delta(eps)` are nonincreasing along the `eps` list.
pub fn lower_bound_sweep(
    eps_traces: &[(f64, Vec<EdiRecord>)],
    limit: &[EdiRecord],
    dt: f64,
    times: &[f64],
    tol: f64,
) -> Result<(Vec<SweepRow>, Vec<SweepVerdict>)> {
    let mut rows = Vec::new();
    let mut deltas = [vec![], vec![], vec![]];
    for (eps, trace) in eps_traces {
        let mut worst = [0.0f64; 3];
        for &t in times {
            let a = record_at(trace, dt, t)?;
            let b = record_at(limit, dt, t)?;
            let row = SweepRow {
                eps: *eps,
                t,
                e_eps: a.energy,
                int_psi_eps: a.int_psi,
                int_psi_star_eps: a.int_psi_star,
                e_bar: b.energy,
                int_psi_bar: b.int_psi,
                int_psi_star_bar: b.int_psi_star,
                residual_eps: a.residual,
            };
            for (w, d) in worst.iter_mut().zip(row.differences()) {
                *w = w.max(-d);
            }
            rows.push(row);
        }
        for q in 0..3 {
            deltas[q].push(worst[q]);
        }
    }
    let verdicts = deltas
        .into_iter()
        .zip(SWEEP_QUANTITIES)
        .map(|(d, quantity)| SweepVerdict {
            quantity,
            passed: d.windows(2).all(|w| w[1] <= w[0] + tol),
            deltas: d,
        })
        .collect();
    Ok((rows, verdicts))
}

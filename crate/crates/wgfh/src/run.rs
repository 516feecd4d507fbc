//! Experiment dispatch: each kind produces CSV tables, a gnuplot script and a list
//! of invariant checks, which `run` persists together with the manifest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use wgfh_core::cell::{effective_at, effective_tensors, CellProblem};
use wgfh_core::edi::{edi_trace, lower_bound_sweep, EdiRecord, SWEEP_QUANTITIES};
use wgfh_core::expr::{Bindings, Expr};
use wgfh_core::fp::{
    energy_identity, evolve, l2_distance, time_derivative_diagnostics, well_prepared_initial, FlowSystem, Trajectory,
};
use wgfh_core::gamma::{piece_averages, recovery_sweep, RecoveryOptions};
use wgfh_core::grid::Grid;
use wgfh_core::media::{Medium, MobilityFamily};
use wgfh_core::metric::{
    checkerboard_geodesic, checkerboard_limit, d_bar, d_eps_1d, gap_report, wasserstein_1d, Cost, GeodesicGrid2D,
    Topology,
};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{Context, RunError};
use crate::manifest::{Artifact, Check, RunManifest};
use crate::output::{num, Table};
use crate::plot;

/// Files (relative name, contents) and verdicts produced by one experiment.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    fn table(&mut self, name: impl Into<String>, t: &Table) {
        self.files.push((name.into(), t.to_bytes()));
    }

    fn check(&mut self, name: impl AsRef<str>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name.as_ref(), passed, detail));
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Validates `cfg`, computes the experiment, writes every artifact and the manifest
/// into `out`, and returns the manifest.
pub fn run(cfg: &ExperimentConfig, kind: Kind, out: &Path) -> Result<RunManifest, RunError> {
    let started = now();
    let arts = compute(cfg, kind)?;
    std::fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut artifacts = Vec::with_capacity(arts.files.len());
    for (name, bytes) in &arts.files {
        let path = out.join(name);
        std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
        artifacts.push(Artifact::of(name, bytes));
    }
    let manifest = RunManifest {
        experiment: cfg.name(kind),
        kind: kind.name().to_string(),
        config_hash: crate::manifest::sha256_hex(&cfg.canonical()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        artifacts,
        checks: arts.checks,
    };
    manifest.write(out)?;
    Ok(manifest)
}

/// The in-memory part of `run`.
pub fn compute(cfg: &ExperimentConfig, kind: Kind) -> Result<Artifacts, RunError> {
    cfg.validate(kind)?;
    let medium = cfg.build_medium()?;
    let mut arts = match kind {
        Kind::Solve => solve(cfg, &medium)?,
        Kind::Effective => effective(cfg, &medium)?,
        Kind::Edi => edi(cfg, &medium, false)?,
        Kind::Sweep => edi(cfg, &medium, true)?,
        Kind::Metric => metric(cfg, &medium)?,
        Kind::Gamma => gamma(cfg, &medium)?,
        Kind::Checkerboard => checkerboard(cfg, &medium)?,
    };
    let names: Vec<String> = arts.files.iter().map(|(n, _)| n.clone()).collect();
    arts.files.push(("plot.gp".into(), plot::script(kind, &names).into_bytes()));
    Ok(arts)
}

pub fn label(eps: Option<f64>) -> String {
    match eps {
        Some(e) => format!("eps_1_{}", (1.0 / e).round() as u64),
        None => "limit".into(),
    }
}

struct Flow {
    eps: Option<f64>,
    sys: FlowSystem,
    traj: Trajectory,
}

fn run_flow(cfg: &ExperimentConfig, medium: &Medium, rho0: &Expr, eps: Option<f64>) -> Result<Flow, RunError> {
    let what = || format!("flow {}", label(eps));
    let (sys, s0) = well_prepared_initial(rho0, medium, eps, cfg.flow_cells(), cfg.cell_options()).context(what)?;
    let traj = evolve(&sys, s0, cfg.t_final, cfg.time_step()).context(what)?;
    Ok(Flow { eps, sys, traj })
}

/// The `eps`-flows in list order followed by the limit flow; entries run concurrently.
fn flows(cfg: &ExperimentConfig, medium: &Medium) -> Result<Vec<Flow>, RunError> {
    let rho0 = cfg.initial_expr()?;
    let jobs: Vec<Option<f64>> = cfg.eps.iter().copied().map(Some).chain([None]).collect();
    jobs.par_iter().map(|e| run_flow(cfg, medium, &rho0, *e)).collect()
}

fn report_index(traj: &Trajectory, t: f64, pointer: &str) -> Result<usize, RunError> {
    traj.index_at(t).ok_or_else(|| RunError::Config {
        pointer: pointer.into(),
        message: format!("report time {t} is not on the time grid (dt = {})", traj.dt),
    })
}

fn position_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["x"]
    } else {
        vec!["x1", "x2"]
    }
}

fn solve(cfg: &ExperimentConfig, medium: &Medium) -> Result<Artifacts, RunError> {
    let flows = flows(cfg, medium)?;
    let mut arts = Artifacts::default();
    let times = cfg.report_times();
    for fl in &flows {
        let name = label(fl.eps);
        let mut diag = Table::new(&["t", "mass", "f_min", "f_max", "free_energy", "norm2", "dirichlet"]);
        for d in &fl.traj.diagnostics {
            diag.push(&[d.t, d.mass, d.f_min, d.f_max, d.free_energy, d.norm2, d.dirichlet]);
        }
        arts.table(format!("{name}_diagnostics.csv"), &diag);
        let grid = fl.sys.grid;
        for (k, t) in times.iter().enumerate() {
            let idx = report_index(&fl.traj, *t, &format!("/output_times/{k}"))?;
            let st = &fl.traj.states[idx];
            let mut header = position_header(grid.dim());
            header.extend(["rho", "f"]);
            let mut snap = Table::new(&header);
            for c in 0..grid.len() {
                let x = grid.center(c);
                let mut row = x[..grid.dim()].to_vec();
                row.extend([st.rho[c], st.f[c]]);
                snap.push(&row);
            }
            arts.table(format!("{name}_t{k}.csv"), &snap);
        }
        let d0 = fl.traj.diagnostics[0];
        let drift = fl
            .traj
            .diagnostics
            .windows(2)
            .map(|w| ((w[1].mass - w[0].mass) / w[0].mass).abs())
            .fold(0.0, f64::max);
        arts.check(
            format!("mass_and_range[{name}]"),
            drift <= 1e-13,
            format!("max relative mass change per step {drift:e}; f stays in [{}, {}]", d0.f_min, d0.f_max),
        );
        let id = energy_identity(&fl.sys, &fl.traj);
        arts.check(
            format!("energy_identity[{name}]"),
            id.residual <= 1e-10,
            format!("relative residual {:e}", id.residual),
        );
        if fl.traj.states.len() >= 3 {
            let td = time_derivative_diagnostics(&fl.sys, &fl.traj).context(|| format!("flow {name}"))?;
            arts.check(
                format!("time_derivative_identity[{name}]"),
                td.identity.residual <= 1e-10,
                format!("relative residual {:e}", td.identity.residual),
            );
        }
    }
    let limit = flows.last().expect("the limit flow is always present");
    fn last(fl: &Flow) -> &[f64] {
        &fl.traj.states[fl.traj.states.len() - 1].f
    }
    let mut conv = Table::new(&["eps", "l2_error", "ratio"]);
    let mut errors = Vec::new();
    for fl in &flows[..flows.len() - 1] {
        let err = l2_distance(&limit.sys.grid, last(fl), last(limit));
        let ratio = errors.last().map(|prev: &f64| num(prev / err)).unwrap_or_default();
        conv.push_cells(vec![num(fl.eps.unwrap_or(0.0)), num(err), ratio]);
        errors.push(err);
    }
    arts.table("convergence.csv", &conv);
    if errors.len() >= 2 {
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        arts.check(
            "limit_convergence",
            decreasing,
            format!("||f_eps(T) - f(T)|| over the eps list: {errors:?}"),
        );
    }
    Ok(arts)
}

fn tensor_cells(t: &wgfh_core::tensor::Tensor) -> Vec<f64> {
    let n = t.dim;
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| t.get(i, j)).collect()
}

fn effective(cfg: &ExperimentConfig, medium: &Medium) -> Result<Artifacts, RunError> {
    let dim = medium.dim;
    let opts = cfg.cell_options();
    let eff = if !medium.depends_on_slow() || cfg.effective.slow_cells == 1 {
        vec![effective_at(medium, [0.5, 0.5], opts).context(|| "effective tensors".into())?]
    } else {
        let slow = Grid::new(dim, cfg.effective.slow_cells).context(|| "slow grid".into())?;
        effective_tensors(medium, &slow, opts).context(|| "effective tensors".into())?
    };
    let mut header: Vec<String> = position_header(dim).iter().map(|s| s.to_string()).collect();
    for name in ["D", "G", "B"] {
        for i in 0..dim {
            for j in 0..dim {
                header.push(format!("{name}_{}{}", i + 1, j + 1));
            }
        }
    }
    header.push("pibar".into());
    let mut table = Table::new(&header);
    for e in &eff {
        let mut row = e.x[..dim].to_vec();
        row.extend(tensor_cells(&e.dbar));
        row.extend(tensor_cells(&e.gbar));
        row.extend(tensor_cells(&e.bbar));
        row.push(e.pibar);
        table.push(&row);
    }
    let mut arts = Artifacts::default();
    arts.table("effective.csv", &table);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for e in &eff {
        let (prob, scale) = if medium.is_uniform() {
            (CellProblem::inverse_mobility(medium, opts), e.pibar)
        } else {
            (CellProblem::at(medium, e.x, opts), 1.0)
        };
        let prob = prob.context(|| "cell problem".into())?;
        for _ in 0..cfg.effective.directions {
            let p = if dim == 1 {
                [if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 0.0]
            } else {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [a.cos(), a.sin()]
            };
            let tensor = e.conductance().quad(p);
            let var = scale * prob.variational(p).context(|| "variational cell problem".into())?;
            worst = worst.max((tensor - var).abs() / tensor.abs().max(1e-300));
        }
    }
    arts.check(
        "variational_cross_check",
        worst <= 1e-10,
        format!("max relative difference between <(D+G)p,p> and the direct minimum: {worst:e}"),
    );
    let spd = eff.iter().all(|e| e.bbar.eigenvalues()[0] > 0.0);
    arts.check("effective_mobility_spd", spd, "B_bar positive definite at every slow point");
    Ok(arts)
}

const EDI_COLUMNS: [&str; 9] = [
    "eps",
    "t",
    "E_eps",
    "int_psi",
    "int_psistar",
    "E_bar",
    "int_psi_bar",
    "int_psistar_bar",
    "residual",
];

fn edi(cfg: &ExperimentConfig, medium: &Medium, sweep: bool) -> Result<Artifacts, RunError> {
    let flows = flows(cfg, medium)?;
    let traces: Vec<Vec<EdiRecord>> = flows
        .par_iter()
        .map(|fl| edi_trace(&fl.sys, &fl.traj).context(|| format!("EDI trace {}", label(fl.eps))))
        .collect::<Result<_, _>>()?;
    let mut arts = Artifacts::default();
    for (fl, tr) in flows.iter().zip(&traces) {
        let name = label(fl.eps);
        let mut t = Table::new(&["t", "energy", "int_psi", "int_psistar", "residual", "fy_gap", "chain_rule_defect"]);
        for r in tr {
            t.push(&[r.t, r.energy, r.int_psi, r.int_psi_star, r.residual, r.fy_gap, r.chain_rule_defect]);
        }
        arts.table(format!("{name}_edi.csv"), &t);
        let e0 = tr[0].energy;
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        let min_res = tr.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
        arts.check(
            format!("edi_direction[{name}]"),
            min_res >= -1e-12 * scale,
            format!("energy-dissipation inequality: minimum residual {min_res:e} (E0 = {e0:e})"),
        );
        let last = tr[tr.len() - 1].residual;
        arts.check(
            format!("edi_residual[{name}]"),
            last.abs() <= 1e-3 * scale,
            format!("|residual(T)| / E0 = {:e}", last.abs() / scale),
        );
        let fy = tr.iter().map(|r| r.fy_gap.abs()).fold(0.0, f64::max);
        arts.check(
            format!("fenchel_young[{name}]"),
            fy <= 1e-9 * (1.0 + scale),
            format!("max |Fenchel-Young gap| along the flow {fy:e}"),
        );
    }
    let n = flows.len() - 1;
    let eps_traces: Vec<(f64, Vec<EdiRecord>)> = flows[..n]
        .iter()
        .zip(&traces)
        .map(|(fl, tr)| (fl.eps.expect("eps flow"), tr.clone()))
        .collect();
    let dt = flows[0].traj.dt;
    let (rows, verdicts) = lower_bound_sweep(&eps_traces, &traces[n], dt, &cfg.report_times(), 1e-12)
        .map_err(|e| RunError::Config {
            pointer: "/output_times".into(),
            message: e.to_string(),
        })?;
    let mut table = Table::new(&EDI_COLUMNS);
    for r in &rows {
        table.push(&[
            r.eps,
            r.t,
            r.e_eps,
            r.int_psi_eps,
            r.int_psi_star_eps,
            r.e_bar,
            r.int_psi_bar,
            r.int_psi_star_bar,
            r.residual_eps,
        ]);
    }
    arts.table(if sweep { "sweep.csv" } else { "edi.csv" }, &table);
    if sweep {
        let mut vt = Table::new(&["quantity", "eps", "delta", "passed"]);
        for v in &verdicts {
            for (e, d) in cfg.eps.iter().zip(&v.deltas) {
                vt.push_cells(vec![v.quantity.to_string(), num(*e), num(*d), v.passed.to_string()]);
            }
            arts.check(
                format!("lower_bound[{}]", v.quantity),
                v.passed,
                format!("delta(eps) over the eps list: {:?}", v.deltas),
            );
        }
        debug_assert_eq!(verdicts.len(), SWEEP_QUANTITIES.len());
        arts.table("sweep_verdicts.csv", &vt);
    }
    Ok(arts)
}

fn sample_density(expr_src: &str, pointer: &str, cells: usize) -> Result<Vec<f64>, RunError> {
    let e = wgfh_core::expr::parse(expr_src).map_err(|e| RunError::Config {
        pointer: pointer.into(),
        message: e.to_string(),
    })?;
    let h = 1.0 / cells as f64;
    let mut v = Vec::with_capacity(cells);
    for c in 0..cells {
        let x = (c as f64 + 0.5) * h;
        let r = e.eval(&Bindings::new().slow(&[x])).map_err(|err| RunError::Config {
            pointer: pointer.into(),
            message: err.to_string(),
        })?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(RunError::Config {
                pointer: pointer.into(),
                message: format!("density is negative or not finite at x = {x}"),
            });
        }
        v.push(r);
    }
    let mass = v.iter().sum::<f64>() * h;
    if !(mass > 0.0) {
        return Err(RunError::Config {
            pointer: pointer.into(),
            message: "density has zero mass".into(),
        });
    }
    Ok(v.into_iter().map(|r| r / mass).collect())
}

fn metric(cfg: &ExperimentConfig, medium: &Medium) -> Result<Artifacts, RunError> {
    if medium.depends_on_slow() {
        return Err(RunError::Config {
            pointer: "/medium/pi".into(),
            message: "metric comparisons need a medium without slow dependence".into(),
        });
    }
    let ms = &cfg.metric;
    let rep = gap_report(medium, &[0.5], cfg.cell_options()).context(|| "gap report".into())?;
    let bbar = rep.bbar[0].1;
    let rho0 = sample_density(&ms.rho0, "/metric/rho0", ms.cells)?;
    let rho1 = sample_density(&ms.rho1, "/metric/rho1", ms.cells)?;
    let dist = (ms.y - ms.x).abs();
    let d_gh = rep.cbar.sqrt() * dist;
    let d_b = d_bar(&wgfh_core::tensor::Tensor::scalar(1, bbar), [ms.x, 0.0], [ms.y, 0.0]);
    let w_gh = wasserstein_1d(&rho0, &rho1, Cost::Gh { cbar: rep.cbar }).context(|| "W_gh".into())?;
    let w_bar = wasserstein_1d(&rho0, &rho1, Cost::Bar { bbar }).context(|| "W_bar".into())?;
    let rows: Vec<[f64; 10]> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let d_e = d_eps_1d(&rep.phi, eps, ms.x, ms.y, Topology::Line);
            let w_e = wasserstein_1d(&rho0, &rho1, Cost::Eps { phi: &rep.phi, eps }).context(|| format!("W_eps at eps = {eps}"))?;
            Ok([eps, rep.cbar, bbar, rep.gap, d_e, d_gh, d_b, w_e, w_gh, w_bar])
        })
        .collect::<Result<_, RunError>>()?;
    let mut t = Table::new(&["eps", "C_bar", "B_bar", "gap", "d_eps", "d_gh", "d_bar", "W_eps", "W_gh", "W_bar"]);
    for r in &rows {
        t.push(r);
    }
    let mut arts = Artifacts::default();
    arts.table("metric.csv", &t);
    arts.check(
        "gap_nonnegative",
        rep.gap >= -1e-10,
        format!("B_bar - C_bar = {:e} (C_bar = {}, B_bar = {bbar})", rep.gap, rep.cbar),
    );
    arts.check(
        "gh_below_bar",
        d_gh <= d_b * (1.0 + 1e-12) && w_gh <= w_bar * (1.0 + 1e-12),
        format!("d_gh = {d_gh}, d_bar = {d_b}, W_gh = {w_gh}, W_bar = {w_bar}"),
    );
    let d_err: Vec<f64> = rows.iter().map(|r| (r[4] - d_gh).abs()).collect();
    let w_err: Vec<f64> = rows.iter().map(|r| (r[7] - w_gh).abs()).collect();
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    arts.check(
        "d_eps_to_gh",
        nonincreasing(&d_err),
        format!("|d_eps - d_gh| over the eps list: {d_err:?}"),
    );
    arts.check(
        "w_eps_to_gh",
        nonincreasing(&w_err),
        format!("|W_eps - W_gh| over the eps list: {w_err:?}"),
    );
    if ms.expect_equality {
        arts.check(
            "equality_case",
            rep.gap.abs() <= 1e-10 && rep.equality,
            format!("gap {:e}; pi / sqrt(b) constant: {}", rep.gap, rep.equality),
        );
    }
    Ok(arts)
}

fn checkerboard(cfg: &ExperimentConfig, medium: &Medium) -> Result<Artifacts, RunError> {
    let MobilityFamily::Checkerboard { alpha, beta } = medium.mobility.family.clone() else {
        unreachable!("validated as a checkerboard medium");
    };
    let cb = &cfg.checkerboard;
    let limit = checkerboard_limit(alpha, cb.source, cb.target);
    let eff = effective_at(medium, [0.5, 0.5], cfg.cell_options()).context(|| "checkerboard effective tensor".into())?;
    let db = d_bar(&eff.bbar, cb.source, cb.target);
    let rows: Vec<[f64; 5]> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let what = || format!("checkerboard geodesic at eps = {eps}");
            let mut g = GeodesicGrid2D::new(eps, cb.per_period, alpha, beta, cb.source).context(what)?;
            g.diagonals = cb.diagonals;
            let d = checkerboard_geodesic(&g, cb.target).context(what)?;
            Ok([eps, d, limit, (d - limit).abs() / limit, db])
        })
        .collect::<Result<_, RunError>>()?;
    let mut t = Table::new(&["eps", "geodesic", "finsler_limit", "rel_error", "d_bar"]);
    for r in &rows {
        t.push(r);
    }
    let mut arts = Artifacts::default();
    arts.table("checkerboard.csv", &t);
    let finest = rows[rows.len() - 1];
    arts.check(
        "finsler_limit",
        finest[3] <= cb.tolerance,
        format!("relative error {:e} at eps = {} against sqrt(alpha) |y - x|_1 = {limit}", finest[3], finest[0]),
    );
    if 2.0 * alpha < beta {
        let strict = rows.iter().all(|r| r[4] > r[1]);
        arts.check(
            "strict_gap",
            strict,
            format!("d_bar = {db} against geodesic values {:?}", rows.iter().map(|r| r[1]).collect::<Vec<_>>()),
        );
    }
    Ok(arts)
}

fn gamma(cfg: &ExperimentConfig, medium: &Medium) -> Result<Artifacts, RunError> {
    let data = cfg.gamma_data()?;
    let fbar = match &cfg.gamma.weight {
        None => None,
        Some(src) => {
            let e = wgfh_core::expr::parse(src).map_err(|err| RunError::Config {
                pointer: "/gamma/weight".into(),
                message: err.to_string(),
            })?;
            let dim = data.dim;
            let v = piece_averages(&data, 64, |x| {
                e.eval(&Bindings::new().slow(&x[..dim])).unwrap_or(f64::NAN)
            });
            if v.iter().any(|f| !(*f > 0.0)) {
                return Err(RunError::Config {
                    pointer: "/gamma/weight".into(),
                    message: "weight must be positive with finite piece averages".into(),
                });
            }
            Some(v)
        }
    };
    let opts = RecoveryOptions {
        d1: cfg.gamma.d1,
        d2: cfg.gamma.d2,
        cell: cfg.cell_options(),
    };
    let rep = recovery_sweep(&data, medium, &cfg.eps, opts, fbar).context(|| "recovery sequence".into())?;
    let mut energies = Table::new(&["eps", "F_eps", "F_limit", "error"]);
    let mut corr = Table::new(&["eps", "l2_deviation", "gradient_constant"]);
    for r in &rep.rows {
        energies.push(&[r.eps, r.f_eps, r.f_limit, r.error]);
        corr.push(&[r.eps, r.l2, r.gradient_constant]);
    }
    let mut arts = Artifacts::default();
    arts.table("gamma.csv", &energies);
    arts.table("gamma_corrector.csv", &corr);
    arts.check(
        "recovery_error_decreasing",
        rep.error_decreasing,
        format!("|F_eps - F| over the eps list: {:?}", rep.rows.iter().map(|r| r.error).collect::<Vec<_>>()),
    );
    arts.check(
        "gradient_constant_nonincreasing",
        rep.constant_nonincreasing,
        format!(
            "max |grad xi_eps| / max |grad xi| over the eps list: {:?}",
            rep.rows.iter().map(|r| r.gradient_constant).collect::<Vec<_>>()
        ),
    );
    Ok(arts)
}

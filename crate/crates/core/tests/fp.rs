use proptest::prelude::*;
use std::f64::consts::PI;
use wgfh_core::expr::parse;
use wgfh_core::fp::{
    energy_identity, evolve, step, time_derivative_diagnostics, well_prepared, DensityState,
    FlowSystem,
};
use wgfh_core::grid::{FaceField, Grid};
use wgfh_core::media::{sample_medium, Density, Medium, Mobility, MobilityFamily, PiField};

fn medium(dim: usize, b: &str, bounds: (f64, f64), pi: &str) -> Medium {
    let mob = Mobility::new(dim, MobilityFamily::Scalar(parse(b).unwrap()), bounds).unwrap();
    Medium::new(mob, Density::TwoScale(PiField::Expr(parse(pi).unwrap()))).unwrap()
}

fn system(m: &Medium, eps: f64, cells: usize) -> FlowSystem {
    FlowSystem::from_sampled(&sample_medium(m, eps, cells).unwrap()).unwrap()
}

fn cos_data(sys: &FlowSystem, amp: f64) -> DensityState {
    let f = (0..sys.grid.len())
        .map(|c| 1.0 + amp * (2.0 * PI * sys.grid.center(c)[0]).cos())
        .collect();
    DensityState::from_f(sys, f, 0.0)
}

#[test]
fn constant_f_is_a_fixed_point() {
    let m = medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1 + 0.5*sin(2*pi*y)");
    let sys = system(&m, 1.0 / 4.0, 64);
    let s0 = DensityState::from_f(&sys, vec![1.0; 64], 0.0);
    let s1 = step(&sys, &s0, 1e-3).unwrap();
    assert_eq!(s0.rho, s1.rho);
    assert_eq!(s0.f, s1.f);
}

#[test]
fn single_fourier_mode_decays_by_discrete_symbol() {
    let n = 64;
    let b = 2.0;
    let grid = Grid::new(1, n).unwrap();
    let sys = FlowSystem::new(grid, vec![1.0; n], FaceField::constant(&grid, 1.0 / b), "const".into()).unwrap();
    let delta = 0.3;
    let dt = 1e-3;
    let s0 = cos_data(&sys, delta);
    let s1 = step(&sys, &s0, dt).unwrap();
    let h = grid.h();
    let lam = 4.0 / b / (h * h) * (PI * h).sin().powi(2);
    let factor = 1.0 / (1.0 + dt * lam);
    for c in 0..n {
        let expect = 1.0 + delta * factor * (2.0 * PI * grid.center(c)[0]).cos();
        assert!((s1.f[c] - expect).abs() < 1e-12);
    }
}

#[test]
fn generator_is_symmetric() {
    let m = medium(2, "2 + sin(2*pi*y1)*cos(2*pi*y2)", (1.0, 3.0), "1 + 0.5*cos(2*pi*y1) + 0.2*x2");
    let sys = system(&m, 0.5, 32);
    let u: Vec<f64> = (0..sys.grid.len()).map(|c| ((c * 7919) % 101) as f64 / 101.0).collect();
    let v: Vec<f64> = (0..sys.grid.len()).map(|c| ((c * 104729) % 97) as f64 / 97.0).collect();
    let a = sys.grid.inner(&sys.generator(&u), &v);
    let b = sys.grid.inner(&u, &sys.generator(&v));
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
}

#[test]
fn one_dimensional_run_satisfies_identities() {
    let m = medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1 + 0.5*sin(2*pi*y)");
    let sys = system(&m, 1.0 / 8.0, 256);
    let traj = evolve(&sys, cos_data(&sys, 0.5), 0.05, 1e-3).unwrap();
    let id = energy_identity(&sys, &traj);
    assert!(id.residual < 1e-10, "{id:?}");
    let td = time_derivative_diagnostics(&sys, &traj).unwrap();
    assert!(td.identity.residual < 1e-10, "{:?}", td.identity);
    for w in td.records.windows(2) {
        assert!(w[1].norm2 <= w[0].norm2);
    }
    let (lo, hi) = (traj.diagnostics[0].f_min, traj.diagnostics[0].f_max);
    assert!(traj.diagnostics.iter().all(|d| d.f_min >= lo && d.f_max <= hi));
}

#[test]
fn two_dimensional_run_conserves_mass() {
    let m = medium(2, "2 + sin(2*pi*y1)", (1.0, 3.0), "1 + 0.3*cos(2*pi*y2)");
    let sys = system(&m, 0.5, 32);
    let f: Vec<f64> = (0..sys.grid.len())
        .map(|c| {
            let x = sys.grid.center(c);
            1.0 + 0.5 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()
        })
        .collect();
    let traj = evolve(&sys, DensityState::from_f(&sys, f, 0.0), 0.02, 2e-3).unwrap();
    let m0 = traj.diagnostics[0].mass;
    for d in &traj.diagnostics {
        assert!((d.mass - m0).abs() <= 1e-12 * m0);
    }
    assert!(energy_identity(&sys, &traj).residual < 1e-10);
}

#[test]
fn time_derivative_follows_the_mode_decay() {
    let n = 128;
    let grid = Grid::new(1, n).unwrap();
    let sys = FlowSystem::new(grid, vec![1.0; n], FaceField::constant(&grid, 0.5), "const".into()).unwrap();
    let dt = 1e-4;
    let traj = evolve(&sys, cos_data(&sys, 0.2), 0.02, dt).unwrap();
    let td = time_derivative_diagnostics(&sys, &traj).unwrap();
    let lam = 0.5 * 4.0 * PI * PI;
    for r in td.records.iter().step_by(50) {
        // ||h||^2 = (lam a e^{-lam t})^2 / 2 up to O(dt) and O(h^2)
        let exact = 0.5 * (lam * 0.2 * (-lam * r.t).exp()).powi(2);
        assert!((r.norm2 - exact).abs() < 2e-2 * exact, "{} {}", r.norm2, exact);
    }
}

#[test]
fn well_prepared_data_with_unit_pi_is_rho0() {
    let m = medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let sys = system(&m, 1.0 / 4.0, 64);
    let rho0: Vec<f64> = (0..64).map(|c| 1.0 + 0.5 * (2.0 * PI * sys.grid.center(c)[0]).cos()).collect();
    let s = well_prepared(&sys, &rho0, &vec![1.0; 64]).unwrap();
    let mass = sys.grid.integrate(&rho0);
    for c in 0..64 {
        assert_eq!(s.rho[c], rho0[c] / mass * 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_is_conserved_per_step(a in 0.0f64..0.9, b in -0.9f64..0.9, amp in 0.0f64..0.9, dt in 1e-4f64..1e-1) {
        let m = medium(1, &format!("2 + {a}*sin(2*pi*y)"), (1.0, 3.0), &format!("1 + {b}*0.5*cos(2*pi*y)"));
        let sys = system(&m, 0.25, 64);
        let s0 = cos_data(&sys, amp);
        let s1 = step(&sys, &s0, dt).unwrap();
        let m0 = sys.grid.integrate(&s0.rho);
        let m1 = sys.grid.integrate(&s1.rho);
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0);
        let lo = s0.f.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s0.f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s1.f.iter().all(|v| *v >= lo && *v <= hi));
    }

    #[test]
    fn pi_weighted_operator_is_self_adjoint(a in 0.0f64..0.9, seed in 0u64..1000) {
        let m = medium(1, &format!("2 + {a}*sin(2*pi*y)"), (1.0, 3.0), "1 + 0.5*cos(2*pi*y)");
        let sys = system(&m, 0.25, 64);
        let u: Vec<f64> = (0..64).map(|c| (((c as u64 + 1) * (seed + 7)) % 13) as f64).collect();
        let v: Vec<f64> = (0..64).map(|c| (((c as u64 + 3) * (seed + 11)) % 17) as f64).collect();
        // <Pi^{-1} L u, v>_pi = <L u, v>
        let lu: Vec<f64> = sys.generator(&u).iter().zip(&sys.pi).map(|(l, p)| l / p).collect();
        let lv: Vec<f64> = sys.generator(&v).iter().zip(&sys.pi).map(|(l, p)| l / p).collect();
        let a1 = sys.grid.weighted_inner(&sys.pi, &lu, &v);
        let a2 = sys.grid.weighted_inner(&sys.pi, &u, &lv);
        prop_assert!((a1 - a2).abs() <= 1e-12 * a1.abs().max(1.0));
    }
}

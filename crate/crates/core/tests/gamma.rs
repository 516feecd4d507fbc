use std::f64::consts::PI;

use proptest::prelude::*;
use wgfh_core::cell::{CellOptions, CellProblem};
use wgfh_core::expr::parse;
use wgfh_core::gamma::{
    build_recovery, cutoff, gamma_liminf_check, minimize_dirichlet, piece_averages, recovery_sweep,
    smoothstep, BoundaryData, CellData, DirichletProblem, EpsField, PiecewiseAffine, RecoveryOptions,
};
use wgfh_core::media::{Density, Medium, Mobility, MobilityFamily, PiField};

fn scalar_medium(dim: usize, b: &str, bounds: (f64, f64), pi: &str) -> Medium {
    let mob = Mobility::new(dim, MobilityFamily::Scalar(parse(b).unwrap()), bounds).unwrap();
    Medium::new(mob, Density::TwoScale(PiField::Expr(parse(pi).unwrap()))).unwrap()
}

fn cell_opts(ycells: usize) -> CellOptions {
    CellOptions {
        ycells,
        ..Default::default()
    }
}

#[test]
fn constant_weight_has_affine_minimizer() {
    let p = [0.7, -1.3];
    let data = PiecewiseAffine::affine(2, p, 0.4);
    let prob = DirichletProblem::new(2, 16, |_| Ok([2.0, 3.0]), BoundaryData::Dirichlet(data.clone())).unwrap();
    let m = minimize_dirichlet(&prob).unwrap();
    assert!((m.energy - (2.0 * p[0] * p[0] + 3.0 * p[1] * p[1])).abs() < 1e-11);
    let h = 1.0 / 16.0;
    for (k, v) in m.values.iter().enumerate() {
        let x = [(k % 17) as f64 * h, (k / 17) as f64 * h];
        assert!((v - data.eval(x)).abs() < 1e-10);
    }
}

fn series_oracle(eps: f64, n: usize) -> f64 {
    // 1D Dirichlet minimum with data x: conductances in series, 1 / sum_e (h / A_e).
    let h = 1.0 / n as f64;
    let resist: f64 = (0..n)
        .map(|i| h * (2.0 + (2.0 * PI * (i as f64 + 0.5) * h / eps).sin()))
        .sum();
    1.0 / resist
}

#[test]
fn one_dimensional_energy_tends_to_harmonic_mean() {
    let data = PiecewiseAffine::affine(1, [1.0, 0.0], 0.0);
    let n = 2048;
    let mut errs = Vec::new();
    for k in 0..4 {
        let eps = 0.3 / (1u32 << k) as f64;
        let prob = DirichletProblem::new(
            1,
            n,
            move |x: [f64; 2]| Ok([1.0 / (2.0 + (2.0 * PI * x[0] / eps).sin()), 1.0]),
            BoundaryData::Dirichlet(data.clone()),
        )
        .unwrap();
        let m = minimize_dirichlet(&prob).unwrap();
        assert!((m.energy - series_oracle(eps, n)).abs() < 1e-11, "{} {}", m.energy, series_oracle(eps, n));
        errs.push((m.energy - 0.5).abs());
    }
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

#[test]
fn periodic_affine_minimum_matches_cell_problem() {
    let m = scalar_medium(2, "2 + sin(2*pi*y1) * cos(2*pi*y2)", (1.0, 3.0), "1 + 0.3*cos(2*pi*y1)");
    let opts = cell_opts(32);
    let cell = CellProblem::at(&m, [0.0; 2], opts).unwrap();
    let weight = |y: [f64; 2]| {
        let pi = m.pi_two_scale([0.0; 2], y)?;
        let b = m.mobility.check_at(y)?;
        Ok([pi / b[0], pi / b[1]])
    };
    for p in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
        let prob = DirichletProblem::new(2, 32, weight, BoundaryData::PeriodicAffine(p)).unwrap();
        let min = minimize_dirichlet(&prob).unwrap();
        let var = cell.variational(p).unwrap();
        assert!((min.energy - var).abs() < 1e-9, "{p:?}: {} vs {var}", min.energy);
    }
}

#[test]
fn constant_medium_recovery_is_the_data() {
    let m = scalar_medium(1, "2", (2.0, 2.0), "1");
    let cells = CellData::new(&m, cell_opts(32)).unwrap();
    let data = PiecewiseAffine::tent(1);
    let r = build_recovery(&data, &cells, 1.0 / 64.0, 2.0, 4.0, None).unwrap();
    for c in 0..r.grid.len() {
        assert!((r.values[c] - data.eval(r.grid.center(c))).abs() < 1e-14);
    }
    // A = pi / b = 1/2; the two faces straddling the kinks see a zero difference
    let n = r.grid.cells_per_axis() as f64;
    assert!((r.energy(&data) - 0.5 * (1.0 - 2.0 / n)).abs() < 1e-12);
    assert!((r.limit_energy(&data) - 0.5).abs() < 1e-12);
}

#[test]
fn recovery_sweep_on_smooth_medium() {
    let m = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let data = PiecewiseAffine::tent(1);
    let eps = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
    let report = recovery_sweep(&data, &m, &eps, RecoveryOptions::default(), None).unwrap();
    assert!(report.error_decreasing, "{:?}", report.rows);
    assert!(report.constant_nonincreasing, "{:?}", report.rows);
    // discrete A_bar in 1D is the harmonic mean of the face weights 1 / (2 + sin)
    let ny = 32;
    let abar = 1.0
        / ((0..ny)
            .map(|i| 2.0 + (2.0 * PI * (i + 1) as f64 / ny as f64).sin())
            .sum::<f64>()
            / ny as f64);
    for row in &report.rows {
        assert!((row.f_limit - abar).abs() < 1e-12);
        assert!(row.gradient_constant > 1.0);
    }
    for w in report.rows.windows(2) {
        let ratio = w[1].l2 / w[0].l2;
        assert!(ratio > 0.4 && ratio < 0.6, "{ratio}");
    }
}

#[test]
fn weighted_recovery_uses_piece_averages() {
    let m = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let data = PiecewiseAffine::tent(1);
    let fbar = piece_averages(&data, 64, |x| 1.0 + x[0]);
    assert!((fbar[0] - 1.25).abs() < 1e-12 && (fbar[1] - 1.75).abs() < 1e-12);
    let plain = recovery_sweep(&data, &m, &[1.0 / 64.0], RecoveryOptions::default(), None).unwrap();
    let weighted = recovery_sweep(&data, &m, &[1.0 / 64.0], RecoveryOptions::default(), Some(fbar)).unwrap();
    assert!((weighted.rows[0].f_limit - 1.5 * plain.rows[0].f_limit).abs() < 1e-12);
}

#[test]
fn recovery_rejects_bad_parameters() {
    let m = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let cells = CellData::new(&m, cell_opts(32)).unwrap();
    let tent = PiecewiseAffine::tent(1);
    assert!(build_recovery(&tent, &cells, 1.0 / 64.0, 4.0, 2.0, None).is_err());
    assert!(build_recovery(&tent, &cells, 1.0 / 32.0, 2.0, 4.0, None).is_err());
    let ramp = PiecewiseAffine::affine(1, [1.0, 0.0], 0.0);
    assert!(build_recovery(&ramp, &cells, 1.0 / 64.0, 2.0, 4.0, None).is_err());
    assert!(PiecewiseAffine::new(1, 2, vec![[1.0, 0.0], [1.0, 0.0]], vec![0.0, 1.0]).is_err());
    let slow = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1 + 0.5*x");
    assert!(CellData::new(&slow, cell_opts(32)).is_err());
}

#[test]
fn fixed_field_exceeds_the_limit() {
    // F_eps(v) -> int (mean A) |v'|^2 with mean A = int 1/(2 + sin) = 1/sqrt(3) > A_bar = 1/2.
    let m = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let grad = |x: [f64; 2]| [-2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0];
    let fields: Vec<EpsField> = [8usize, 16, 32]
        .iter()
        .map(|&m| {
            let cells = 32 * m;
            EpsField {
                eps: 1.0 / m as f64,
                cells,
                values: (0..cells)
                    .map(|c| (2.0 * PI * (c as f64 + 0.5) / cells as f64).cos())
                    .collect(),
            }
        })
        .collect();
    let r = gamma_liminf_check(&m, &fields, grad, cell_opts(32), 1e-12).unwrap();
    assert!(r.passed);
    let limit = 2.0 * PI * PI * 0.5;
    assert!((r.f_limit - limit).abs() < 1e-3 * limit);
    for row in &r.rows {
        assert_eq!(row.delta, 0.0);
        assert!((row.f_eps - 2.0 * PI * PI / 3f64.sqrt()).abs() < 1e-2);
    }
}

#[test]
fn recovery_sequence_attains_the_limit() {
    let m = scalar_medium(1, "2 + sin(2*pi*y)", (1.0, 3.0), "1");
    let cells = CellData::new(&m, cell_opts(32)).unwrap();
    let data = PiecewiseAffine::tent(1);
    let fields: Vec<EpsField> = [64usize, 128, 256]
        .iter()
        .map(|&k| {
            let r = build_recovery(&data, &cells, 1.0 / k as f64, 2.0, 4.0, None).unwrap();
            EpsField {
                eps: r.eps,
                cells: r.grid.cells_per_axis(),
                values: r.values,
            }
        })
        .collect();
    let r = gamma_liminf_check(&m, &fields, |x| data.gradient(x), cell_opts(32), 1e-12).unwrap();
    assert!(r.passed, "{r:?}");
    let gaps: Vec<f64> = r.rows.iter().map(|row| (row.f_eps - r.f_limit).abs()).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
}

#[test]
fn constant_weight_liminf_is_trivial() {
    let m = scalar_medium(1, "2", (2.0, 2.0), "1");
    let fields: Vec<EpsField> = [4usize, 8]
        .iter()
        .map(|&k| EpsField {
            eps: 1.0 / k as f64,
            cells: 64 * k,
            values: (0..64 * k).map(|c| (2.0 * PI * (c as f64 + 0.5) / (64 * k) as f64).sin()).collect(),
        })
        .collect();
    let r = gamma_liminf_check(&m, &fields, |x| [2.0 * PI * (2.0 * PI * x[0]).cos(), 0.0], cell_opts(32), 1e-12)
        .unwrap();
    for row in &r.rows {
        assert!((row.f_eps - r.f_limit).abs() < 1e-3 * r.f_limit);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothstep_is_a_monotone_cutoff(a in -1.0f64..2.0, b in -1.0f64..2.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(smoothstep(lo) <= smoothstep(hi));
        prop_assert!((0.0..=1.0).contains(&smoothstep(a)));
        prop_assert_eq!(cutoff(0.0, 0.01, 2.0, 4.0), 0.0);
        prop_assert_eq!(cutoff(0.05, 0.01, 2.0, 4.0), 1.0);
    }

    #[test]
    fn minimizer_beats_the_interpolant(seed in 0u64..10_000) {
        let w = move |x: [f64; 2]| {
            let s = seed as f64 * 0.001;
            Ok::<_, wgfh_core::Error>([1.5 + (7.0 * x[0] + s).sin() * (3.0 * x[1]).cos(), 1.5 + (5.0 * x[1] - s).cos()])
        };
        let data = PiecewiseAffine::new(
            2, 2,
            vec![[1.0, 0.5], [-1.0, 0.5], [1.0, -0.5], [-1.0, -0.5]],
            vec![0.0, 1.0, 0.5, 1.5],
        ).unwrap();
        let prob = DirichletProblem::new(2, 12, w, BoundaryData::Dirichlet(data.clone())).unwrap();
        let min = minimize_dirichlet(&prob).unwrap();
        // energy of the nodal interpolant of the data, edge by edge
        let h = 1.0 / 12.0;
        let mut e = 0.0;
        for j in 0..=12 {
            for i in 0..=12 {
                let x = [i as f64 * h, j as f64 * h];
                for a in 0..2 {
                    let mut y = x;
                    y[a] += h;
                    if y[a] > 1.0 + 1e-12 { continue; }
                    let mut mid = x;
                    mid[a] += 0.5 * h;
                    let across = if a == 0 { j } else { i };
                    let half = if across == 0 || across == 12 { 0.5 } else { 1.0 };
                    let d = (data.eval(y) - data.eval(x)) / h;
                    e += half * w(mid).unwrap()[a] * d * d * h * h;
                }
            }
        }
        prop_assert!(min.energy <= e + 1e-12);
    }
}
